//! Renders the two synthetic measurement series and writes them as `.psfd`.
//!
//! Usage: `cargo run --release --example synth_dataset -- [OUT_DIR]`

use std::path::PathBuf;

use psfnet::psf::normalize_volume;
use psfnet::synth::{synth_psf, training_dataset, SamplingGrid, SynthLensSpec};
use psfnet::FieldPoint;

fn main() -> psfnet::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let lens = SynthLensSpec::default();
    println!("lens:\n{}", lens.to_kv());

    for (name, grid) in [("series_a", SamplingGrid::series_a()), ("series_b", SamplingGrid::series_b())] {
        let ds = training_dataset(&lens, &[grid], 13, 6.5)?;
        let path = dir.join(format!("{name}.psfd"));
        ds.save(&path)?;
        println!("{name}: {} samples -> {}", ds.len(), path.display());
    }

    // The on-axis focused PSF is compact: most of its volume sits in the central 3x3.
    let focus = normalize_volume(&synth_psf(&lens, &FieldPoint::new(0.0, 0.0, 0.0), 13, 13, 6.5)?)?;
    let core: f64 = (5..8).flat_map(|y| (5..8).map(move |x| (x, y))).map(|(x, y)| focus.get(x, y)).sum();
    println!("central 3x3 volume at focus: {core:.3}");

    for (label, dz) in [("behind focus", 50.0), ("in front of focus", -50.0)] {
        let g = synth_psf(&lens, &FieldPoint::new(dz, 0.0, 0.0), 13, 13, 6.5)?;
        let (xx, yy, _) = g.second_moments()?;
        println!("{label} (dz = {dz:+} um): second-moment trace {:.2} px^2", xx + yy);
    }
    Ok(())
}
