//! Infers PSFs at field points that were never sampled: azimuth 37.5 degrees,
//! image height stepped from 0 to 3 mm. Writes one 16-bit PGM per step.
//!
//! Usage: `cargo run --release --example predict -- [MODEL] [OUT_DIR]`

use std::path::PathBuf;

use psfnet::ann::{train, TrainConfig};
use psfnet::render::{Image, PgmDepth};
use psfnet::synth::{series_ab, SynthLensSpec};
use psfnet::{FieldPoint, MlpModel, PsfSource};

fn main() -> psfnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let model = match args.next() {
        Some(path) => MlpModel::load(path)?,
        None => {
            let cfg = TrainConfig {
                hidden_size: 32,
                max_epochs: 400,
                ..Default::default()
            };
            train(&series_ab(&SynthLensSpec::default())?, &cfg)?.0
        }
    };
    let dir = PathBuf::from(args.next().unwrap_or_else(|| ".".into()));

    for step in 0..5 {
        let r = 0.75 * step as f64;
        let kernel = model.psf(&FieldPoint::new(0.0, r, 37.5));
        let (xx, yy, xy) = kernel.second_moments()?;
        let path = dir.join(format!("psf_r{step}.pgm"));
        Image::new(kernel.width(), kernel.height(), kernel.pitch_um(), kernel.values().to_vec())?
            .peak_normalized()
            .write_pgm(&path, PgmDepth::Sixteen)?;
        println!(
            "R = {r:.2} mm: peak {:.3}, moments ({xx:.2}, {yy:.2}, {xy:.2}) px^2 -> {}",
            kernel.values().iter().fold(0.0f64, |m, v| m.max(*v)),
            path.display()
        );
    }
    Ok(())
}
