//! Hidden-layer size sweep on the synthetic series A+B data.
//!
//! Usage: `cargo run --release --example sweep -- [SIZES] [RESTARTS] [EPOCHS]`
//! where SIZES is a comma list (default 8,64,128,448).

use std::time::Instant;

use psfnet::ann::sweep;
use psfnet::synth::{series_ab, SynthLensSpec};
use psfnet::TrainConfig;

fn main() -> psfnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let sizes: Vec<usize> = args
        .next()
        .unwrap_or_else(|| "8,64,128,448".into())
        .split(',')
        .map(|s| s.trim().parse().expect("hidden size"))
        .collect();
    let restarts: usize = args.next().map_or(3, |s| s.parse().expect("restarts"));
    let mut cfg = TrainConfig::default();
    if let Some(e) = args.next() {
        cfg.max_epochs = e.parse().expect("epochs");
    }

    let data = series_ab(&SynthLensSpec::default())?;
    let start = Instant::now();
    let report = sweep(&data, &sizes, restarts, &cfg)?;
    print!("{}", report.to_csv());
    println!("best hidden size: {:?}", report.best_hidden());
    eprintln!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
