//! Blurs a checkerboard with a spatially-variant PSF at constant defocus:
//! sharp near the optical axis, softer toward the corners.
//!
//! Usage: `cargo run --release --example render -- [MODEL] [OUT.pgm]`
//! Without a model the synthetic lens itself supplies the kernels.

use psfnet::render::{checkerboard, convolve_spatially_variant, DefocusMap, FieldMapping, Image, KernelSource, PgmDepth};
use psfnet::synth::{SynthKernel, SynthLensSpec};
use psfnet::MlpModel;

fn blur<K: KernelSource + Sync>(source: &K, image: &Image) -> psfnet::Result<Image> {
    let dz = DefocusMap::constant(image.width(), image.height(), 0.0)?;
    Ok(convolve_spatially_variant(image, source, &FieldMapping::centered(image), &dz, 16)?.image)
}

fn main() -> psfnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let model = args.next().map(MlpModel::load).transpose()?;
    let out = args.next().unwrap_or_else(|| "render.pgm".into());

    let board = checkerboard(640, 480, 4, 0.1, 0.9, 6.5)?;
    let blurred = match &model {
        Some(m) => blur(m, &board)?,
        None => blur(&SynthKernel::new(SynthLensSpec::default(), 13, 6.5)?, &board)?,
    };
    for (label, x, y) in [("center", 312, 232), ("mid-field", 160, 116), ("corner", 8, 8)] {
        println!("{label:>9}: local contrast {:.3}", blurred.local_rms_contrast(x, y, 16, 16));
    }
    blurred.write_pgm(&out, PgmDepth::Sixteen)?;
    println!("wrote {out}");
    Ok(())
}
