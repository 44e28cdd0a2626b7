//! Trains a 3-64-169 network on synthetic series A+B and compares it with
//! the constant mean-PSF predictor on the held-out test set.
//!
//! Usage: `cargo run --release --example train -- [MODEL_OUT]`

use psfnet::ann::{train, DataSplit, MlpModel, TrainConfig};
use psfnet::metrics::evaluate;
use psfnet::synth::{series_ab, SynthLensSpec};

fn main() -> psfnet::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "psfnet_h64.psfn".into());
    let data = series_ab(&SynthLensSpec::default())?;
    let cfg = TrainConfig {
        hidden_size: 64,
        ..Default::default()
    };
    let (model, report) = train(&data, &cfg)?;
    println!(
        "{} epochs (best {}), train {:.5}, validation {:.5}",
        report.epochs_run, report.best_epoch, report.final_train_perf, report.final_val_perf
    );

    let split = DataSplit::new(&data, cfg.validation_fraction, cfg.test_fraction, cfg.seed)?;
    let test = split.test.expect("default config holds out a test set");
    let k = data.grid_width() * data.grid_height();
    let mut mean = vec![0.0; k];
    for s in split.train.samples() {
        mean.iter_mut().zip(s.psf.values()).for_each(|(m, v)| *m += v / split.train.len() as f64);
    }
    let baseline = test
        .samples()
        .iter()
        .map(|s| s.psf.values().iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .sum::<f64>()
        / test.len() as f64;
    let summary = evaluate(&model, &test)?;
    println!(
        "test: network {:.5}, mean PSF {:.5}, ratio {:.3}",
        summary.mean_eq2,
        baseline,
        summary.mean_eq2 / baseline
    );

    model.save(&out)?;
    assert_eq!(MlpModel::load(&out)?, model);
    println!("saved {out}");
    Ok(())
}
