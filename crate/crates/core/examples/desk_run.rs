//! End-to-end run at desk scale: synthesize scenes, train the quality network,
//! optimize a patch pair, then report Q-ACC with and without adaptation.

use std::time::Instant;

use maqp_core::data::synth_dataset;
use maqp_core::eval::{q_acc_net, EvalConfig, PlacementMode};
use maqp_core::glmbs::GlmbsConfig;
use maqp_core::hdpos::{epoch_means, generate_patch, init_patches, HdposConfig};
use maqp_core::net::{evaluate_mse, train_model, DepthEncoding, QualityNet, TrainConfig};

fn main() -> maqp_core::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let canvas: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(224);
    let t = Instant::now();
    let train = synth_dataset(0, 64, 64, 64, 3)?;
    let test = synth_dataset(1000, 100, 64, 64, 3)?;
    println!("synth {:.1}s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let net = QualityNet::init(0, DepthEncoding::MinMax);
    let out = train_model(
        &net,
        &train,
        &TrainConfig {
            epochs,
            ..Default::default()
        },
    )?;
    let net = out.net;
    println!(
        "train {:.1}s, loss first {:.4} last {:.4}, test mse {:.4}",
        t.elapsed().as_secs_f64(),
        out.epoch_loss.first().copied().unwrap_or(f64::NAN),
        out.epoch_loss.last().copied().unwrap_or(f64::NAN),
        evaluate_mse(&net, &test)?
    );

    let t = Instant::now();
    let hcfg = HdposConfig {
        epochs,
        canvas: (canvas, canvas),
        ..Default::default()
    };
    let gen = generate_patch(&net, &train, &hcfg)?;
    let means = epoch_means(&gen.trace);
    println!(
        "gen {:.1}s, epoch means {:?}",
        t.elapsed().as_secs_f64(),
        means.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );

    let fresh = init_patches(&hcfg, canvas, canvas)?;
    let ecfg = EvalConfig::default();
    let a = q_acc_net(&net, &test, &gen.patches, &ecfg)?;
    let b = q_acc_net(&net, &test, &fresh, &ecfg)?;
    println!(
        "q_acc optimized {:.3} fresh {:.3} runtime {:.5}s",
        a.q_acc, b.q_acc, a.runtime_mean_s
    );
    let mean_in = a.per_scene.iter().map(|s| s.mean_in).sum::<f64>() / a.per_scene.len() as f64;
    println!("mean in-mask quality (test) {:.3}", mean_in);

    let hand = EvalConfig {
        placement: PlacementMode::HandMask,
        ..Default::default()
    };
    for (label, adapt) in [
        ("hand, no adapt", None),
        ("hand, balanced", Some(GlmbsConfig::default())),
        (
            "hand, unbalanced",
            Some(GlmbsConfig {
                balance: false,
                ..Default::default()
            }),
        ),
    ] {
        let r = q_acc_net(&net, &test, &gen.patches, &EvalConfig { adapt, ..hand.clone() })?;
        let rho: Vec<f64> = r
            .per_scene
            .iter()
            .filter_map(|s| s.report.and_then(|r| r.rho))
            .collect();
        let rho_mean = if rho.is_empty() {
            f64::NAN
        } else {
            rho.iter().sum::<f64>() / rho.len() as f64
        };
        println!("{label}: q_acc {:.3}, mean rho {:.3}", r.q_acc, rho_mean);
    }
    Ok(())
}
