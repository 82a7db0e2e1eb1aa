//! `maqp`: synthesize data, train the quality network, optimize and adapt
//! patches, evaluate, check gradients and render heatmaps.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{value_parser, Arg, ArgMatches, Command};

use commands::Ctx;
use config::{RunConfig, KEYS};
use failure::{Failure, Kind};

fn path_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_name("PATH")
        .value_parser(value_parser!(PathBuf))
        .help(help)
}

fn cli() -> Command {
    let mut cmd = Command::new("maqp")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Adversarial quality patches for RGB-D grasp quality networks")
        .after_help("Exit codes: 1 usage/config, 2 missing file or IO, 3 invariant or format, 4 numerical, 5 verification.\nMAQP_THREADS sets the worker count (default 1).")
        .subcommand_required(true)
        .arg(path_arg("config", "Flat `key = value` configuration file").global(true))
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .value_parser(value_parser!(PathBuf))
                .global(true)
                .help("Output directory [default: .]"),
        );
    for &(key, default, help) in KEYS {
        cmd = cmd.arg(
            Arg::new(key)
                .long(key)
                .value_name("VALUE")
                .global(true)
                .help(format!("{help} [default: {default}]")),
        );
    }
    let data = || path_arg("data", "Dataset directory (manifest or Cornell layout)");
    let model = || path_arg("model", "Model checkpoint (.maqn)");
    let patch = || path_arg("patch", "Patch bundle (.maqp)");
    cmd.subcommand(Command::new("synth").about("Write a synthetic dataset to --out"))
        .subcommand(Command::new("train").about("Train the quality network").arg(data()))
        .subcommand(
            Command::new("gen-patch")
                .about("Optimize an RGB/depth patch pair")
                .arg(data())
                .arg(model()),
        )
        .subcommand(
            Command::new("adapt")
                .about("Insert the patch into each test scene's hand and adapt it")
                .arg(data())
                .arg(model())
                .arg(patch()),
        )
        .subcommand(
            Command::new("eval")
                .about("Measure Q-ACC on the test split")
                .arg(data())
                .arg(model())
                .arg(patch()),
        )
        .subcommand(
            Command::new("gradcheck")
                .about("Compare analytic gradients with finite differences")
                .arg(path_arg("model", "Model checkpoint; a fresh seeded network if omitted")),
        )
        .subcommand(
            Command::new("render")
                .about("Render a quality heatmap for one scene")
                .arg(data())
                .arg(model())
                .arg(path_arg("patch", "Patch bundle to composite before rendering"))
                .arg(
                    Arg::new("scene")
                        .long("scene")
                        .value_name("ID")
                        .help("Scene id [default: first test scene]"),
                ),
        )
}

fn resolve(m: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = m.get_one::<PathBuf>("config") {
        cfg.apply_file(p)?;
    }
    for &(key, _, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn threads() -> Result<usize> {
    match std::env::var("MAQP_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Failure::new(Kind::Usage, format!("MAQP_THREADS=`{v}` is not a positive integer")).into()),
        },
        Err(_) => Ok(1),
    }
}

fn run(m: &ArgMatches) -> Result<()> {
    let n = threads()?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    let (name, sub) = m.subcommand().expect("subcommand required");
    let cfg = resolve(sub)?;
    let out = sub
        .get_one::<PathBuf>("out")
        .cloned()
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = Ctx { cfg, out };
    ctx.begin(name)?;
    let p = |k: &str| sub.try_get_one::<PathBuf>(k).ok().flatten();
    match name {
        "synth" => commands::synth(&ctx),
        "train" => commands::train(&ctx, p("data")),
        "gen-patch" => commands::gen_patch(&ctx, p("data"), p("model")),
        "adapt" => commands::adapt(&ctx, p("data"), p("model"), p("patch")),
        "eval" => commands::eval(&ctx, p("data"), p("model"), p("patch")),
        "gradcheck" => commands::gradcheck(&ctx, p("model")),
        "render" => commands::render(
            &ctx,
            p("data"),
            p("model"),
            p("patch"),
            sub.get_one::<String>("scene").map(String::as_str),
        ),
        other => unreachable!("unknown subcommand {other}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                    ExitCode::from(1)
                } else {
                    ExitCode::SUCCESS
                };
            }
            let first = e
                .to_string()
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("maqp: error code=1 kind=usage: {first}");
            return ExitCode::from(1);
        }
    };
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", failure::render(&e));
            ExitCode::from(failure::classify(&e).code() as u8)
        }
    }
}
