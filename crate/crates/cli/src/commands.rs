//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use maqp_core::data::{
    load_all, load_dataset, load_patch_bundle, save_patch_bundle, synth_scene_with, write_manifest_dataset,
    SceneRecord, SynthOptions,
};
use maqp_core::eval::{format_results, q_acc_net, render_heatmap, PlacementMode};
use maqp_core::glmbs::{adapt_scene, save_adapted, PqgdLoss};
use maqp_core::hdpos::{composite, format_trace, generate_patch, FrameAqpLoss, Placement};
use maqp_core::net::checkpoint::fnv1a64;
use maqp_core::net::gradcheck::{finite_diff_params, relative_error, tolerance_at, Coord};
use maqp_core::net::{
    backward_to_params, check_input_gradient, load_checkpoint, save_checkpoint, train_model, MapLoss, QualityNet,
    PARAM_COUNT,
};
use maqp_core::{Image, Mask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::failure::{Failure, Kind};

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Ctx {
    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.out.join(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    pub fn begin(&self, command: &str) -> Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        self.write("resolved_config.txt", self.cfg.snapshot(command))?;
        Ok(())
    }
}

fn required<'a>(p: Option<&'a PathBuf>, flag: &str) -> Result<&'a Path> {
    p.map(PathBuf::as_path)
        .ok_or_else(|| Failure::new(Kind::Usage, format!("--{flag} is required")).into())
}

fn split(ctx: &Ctx, data: &Path) -> Result<(Vec<SceneRecord>, Vec<SceneRecord>)> {
    Ok(load_dataset(data, ctx.cfg.split_fraction()?, ctx.cfg.seed()?)?)
}

fn nonempty<'a>(scenes: &'a [SceneRecord], what: &str) -> Result<&'a [SceneRecord]> {
    if scenes.is_empty() {
        return Err(Failure::new(
            Kind::Invariant,
            format!("the {what} split is empty; adjust split-fraction"),
        )
        .into());
    }
    Ok(scenes)
}

fn load_model(path: &Path) -> Result<QualityNet> {
    load_checkpoint(path).with_context(|| format!("loading model {}", path.display()))
}

fn file_hash(path: &Path) -> Result<u64> {
    Ok(fnv1a64(
        &fs::read(path).with_context(|| format!("reading {}", path.display()))?,
    ))
}

pub fn synth(ctx: &Ctx) -> Result<()> {
    let (n, h, w, objects, hand) = ctx.cfg.synth()?;
    let seed = ctx.cfg.seed()?;
    let records = (0..n as u64)
        .map(|i| synth_scene_with(seed + i, h, w, objects, SynthOptions { with_hand: hand }))
        .collect::<maqp_core::Result<Vec<_>>>()?;
    write_manifest_dataset(&ctx.out, &records)?;
    println!("wrote {} scenes to {}", records.len(), ctx.out.display());
    Ok(())
}

pub fn train(ctx: &Ctx, data: Option<&PathBuf>) -> Result<()> {
    let (train, _) = split(ctx, required(data, "data")?)?;
    let tcfg = ctx.cfg.train()?;
    let net = QualityNet::init(tcfg.seed, ctx.cfg.depth_encoding()?);
    let out = train_model(&net, nonempty(&train, "training")?, &tcfg)?;
    save_checkpoint(&ctx.out.join("model.maqn"), &out.net)?;
    let mut trace = String::from("epoch,mse\n");
    for (e, l) in out.epoch_loss.iter().enumerate() {
        let _ = writeln!(trace, "{},{l:.9}", e + 1);
    }
    ctx.write("train_trace.csv", trace)?;
    match out.epoch_loss.last() {
        Some(l) => println!("trained {} epochs, final mse {l:.6}", out.epoch_loss.len()),
        None => println!("0 epochs: wrote the initialized model"),
    }
    Ok(())
}

pub fn gen_patch(ctx: &Ctx, data: Option<&PathBuf>, model: Option<&PathBuf>) -> Result<()> {
    let (train, _) = split(ctx, required(data, "data")?)?;
    let net = load_model(required(model, "model")?)?;
    let out = generate_patch(&net, nonempty(&train, "training")?, &ctx.cfg.hdpos()?)?;
    save_patch_bundle(&ctx.out.join("patch.maqp"), &out.patches)?;
    ctx.write("patch_trace.csv", format_trace(&out.trace))?;
    if let Some(last) = out.trace.last() {
        println!("final L_aqp {:.6}", last.terms.total);
    }
    Ok(())
}

pub fn adapt(ctx: &Ctx, data: Option<&PathBuf>, model: Option<&PathBuf>, patch: Option<&PathBuf>) -> Result<()> {
    let (_, test) = split(ctx, required(data, "data")?)?;
    let net = load_model(required(model, "model")?)?;
    let patches = load_patch_bundle(required(patch, "patch")?)?;
    let gcfg = ctx.cfg.glmbs()?;
    let dir = ctx.out.join("adapted");
    let mut done = 0;
    for s in nonempty(&test, "test")? {
        if s.hand_mask.as_ref().is_none_or(Mask::is_empty) {
            log::warn!("scene {} has no hand mask; skipped", s.id);
            continue;
        }
        let a = adapt_scene(&net, s, &patches, &gcfg)?;
        save_adapted(&dir, &s.id, &a, &gcfg)?;
        done += 1;
    }
    println!("adapted {done} scenes into {}", dir.display());
    Ok(())
}

pub fn eval(ctx: &Ctx, data: Option<&PathBuf>, model: Option<&PathBuf>, patch: Option<&PathBuf>) -> Result<()> {
    let (_, test) = split(ctx, required(data, "data")?)?;
    let (model, patch) = (required(model, "model")?, required(patch, "patch")?);
    let net = load_model(model)?;
    let patches = load_patch_bundle(patch)?;
    let ecfg = ctx.cfg.eval()?;
    let r = q_acc_net(&net, nonempty(&test, "test")?, &patches, &ecfg)?;
    let seeds = [
        ("split", ctx.cfg.seed()?),
        ("model_fnv", file_hash(model)?),
        ("patch_fnv", file_hash(patch)?),
    ];
    ctx.write("results.txt", format_results(&r, &ecfg, &seeds))?;
    println!(
        "q_acc {:.1}% over {} scenes (mean runtime {:.5} s)",
        100.0 * r.q_acc,
        r.per_scene.len(),
        r.runtime_mean_s
    );
    Ok(())
}

fn random_frame(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
    let data = (0..4 * h * w).map(|_| rng.random_range(0.0..1.0)).collect();
    Image::from_vec(4, h, w, data).expect("sized")
}

/// Coordinates within the receptive field of `mask`, all channels.
fn near(mask: &Mask, reach: usize) -> Vec<Coord> {
    let bb = mask.bbox().expect("nonempty");
    let (h, w) = mask.hw();
    let mut v = Vec::new();
    for c in 0..4 {
        for y in bb.top.saturating_sub(reach)..(bb.bottom + reach).min(h) {
            for x in bb.left.saturating_sub(reach)..(bb.right + reach).min(w) {
                v.push((c, y, x));
            }
        }
    }
    v
}

pub fn gradcheck(ctx: &Ctx, model: Option<&PathBuf>) -> Result<()> {
    let (n, h, tol) = ctx.cfg.gradcheck()?;
    let seed = ctx.cfg.seed()?;
    let net = match model {
        Some(p) => load_model(p)?,
        None => QualityNet::init(seed, ctx.cfg.depth_encoding()?),
    };
    let hcfg = ctx.cfg.hdpos()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("check,size,points,skipped_kinks,max_rel_err,failures\n");
    let mut failed = 0;
    for (label, size) in [("aqp", 12), ("pqgd", 16)] {
        let x = random_frame(&mut rng, size, size);
        let region = if label == "aqp" {
            Mask::rect(size, size, 4, 3, 5, 6)?
        } else {
            Mask::ellipse(size, size, (8.0, 8.0), (5.0, 3.0), 0.5)
        };
        let aqp = FrameAqpLoss {
            mask: &region,
            alpha: hcfg.alpha,
            gamma: hcfg.gamma,
        };
        let pqgd = PqgdLoss { mask: &region };
        let loss: &dyn MapLoss = if label == "aqp" { &aqp } else { &pqgd };
        let rep = check_input_gradient(&net, &x, loss, &near(&region, 3), n, h, tol, &mut rng)?;
        if rep.entries.len() < n {
            return Err(Failure::new(
                Kind::Verification,
                format!("{label}: only {} smooth coordinates found", rep.entries.len()),
            )
            .into());
        }
        failed += rep.failures();
        let _ = writeln!(
            text,
            "{label},{size}x{size},{},{},{:.3e},{}",
            rep.entries.len(),
            rep.skipped_kinks,
            rep.max_rel_err(),
            rep.failures()
        );
    }
    // Parameter gradient of the training loss.
    let x = random_frame(&mut rng, 12, 12);
    let target: Vec<f64> = (0..144).map(|_| rng.random_range(0.0..1.0)).collect();
    let (_, g) = backward_to_params(&net, &x, &target)?;
    let idx: Vec<usize> = (0..20).map(|_| rng.random_range(0..PARAM_COUNT)).collect();
    let num = finite_diff_params(&net, &x, &target, &idx, h)?;
    let mut worst = 0.0f64;
    let mut pf = 0;
    for (&i, &nv) in idx.iter().zip(&num) {
        let e = relative_error(g[i], nv);
        worst = worst.max(e);
        if e > tolerance_at(g[i], tol) {
            pf += 1;
        }
    }
    failed += pf;
    let _ = writeln!(text, "mse-params,12x12,{},0,{worst:.3e},{pf}", idx.len());
    let _ = writeln!(text, "result = {}", if failed == 0 { "pass" } else { "fail" });
    ctx.write("gradcheck.txt", &text)?;
    print!("{text}");
    if failed > 0 {
        return Err(Failure::new(
            Kind::Verification,
            format!("{failed} gradient coordinates outside tolerance"),
        )
        .into());
    }
    Ok(())
}

pub fn render(
    ctx: &Ctx,
    data: Option<&PathBuf>,
    model: Option<&PathBuf>,
    patch: Option<&PathBuf>,
    scene: Option<&str>,
) -> Result<()> {
    let data = required(data, "data")?;
    let net = load_model(required(model, "model")?)?;
    let s = match scene {
        Some(id) => load_all(data)?
            .into_iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Failure::new(Kind::Io, format!("scene `{id}` not found in {}", data.display())))?,
        None => {
            let (_, test) = split(ctx, data)?;
            nonempty(&test, "test")?[0].clone()
        }
    };
    let mut x = s.frame.to_input();
    let mut region = s.hand_mask.clone();
    if let Some(p) = patch {
        let patches = load_patch_bundle(p)?;
        let mask = match (ctx.cfg.eval()?.placement, &s.hand_mask) {
            (PlacementMode::HandMask, Some(m)) if !m.is_empty() => m.clone(),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed()?);
                Placement::sample(
                    &mut rng,
                    s.frame.hw(),
                    patches.canvas_size(),
                    ctx.cfg.hdpos()?.scale_range,
                )?
                .mask
            }
        };
        x = composite(&x, &patches, &mask)?;
        region = Some(mask);
    }
    let q = net.forward(&x)?;
    let shown = maqp_core::RgbdFrame::from_normalized(
        x.channels_range(0, 3),
        x.channels_range(3, 4),
        s.frame.depth_min_m,
        s.frame.depth_max_m,
        s.frame.valid.clone(),
        s.frame.depth_constant,
    )?;
    let path = ctx.out.join(format!("{}_heatmap.png", s.id));
    let (y, xx) = render_heatmap(&q, &shown, region.as_ref(), &path)?;
    println!("wrote {} (argmax at row {y}, col {xx})", path.display());
    Ok(())
}
