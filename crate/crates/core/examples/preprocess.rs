//! Takes a high-resolution PSF capture down to a 13 x 13 kernel at sensor pitch:
//! center on the centroid, crop to 256 x 256, bin to 6.5 um and normalize.

use psfnet::psf::{center_and_crop, centroid, normalize_volume, resample, Preprocess};
use psfnet::synth::{synth_psf, SynthLensSpec};
use psfnet::FieldPoint;

fn main() -> psfnet::Result<()> {
    // A background-subtracted microscope capture: 1400 x 1100 pixels of 0.307 um.
    let lens = SynthLensSpec {
        noise_floor: 0.0,
        ..SynthLensSpec::default()
    };
    let capture = synth_psf(
        &lens,
        &FieldPoint::new(20.0, 2.0, 60.0),
        1400,
        1100,
        0.307,
    )?;
    let (cx, cy) = centroid(&capture)?;
    println!("capture {}x{}, centroid ({cx:.1}, {cy:.1})", capture.width(), capture.height());

    let crop = center_and_crop(&capture, 256)?;
    let (kx, ky) = centroid(&crop)?;
    println!("crop 256x256, centroid ({kx:.2}, {ky:.2}), volume kept {:.4}", crop.sum() / capture.sum());

    let kernel = normalize_volume(&resample(&crop, 6.5, 13)?)?;
    println!("kernel {}x{} at {} um, sum {:.12}", kernel.width(), kernel.height(), kernel.pitch_um(), kernel.sum());
    for row in kernel.values().chunks(13) {
        println!("  {}", row.iter().map(|v| format!("{:5.3}", v)).collect::<Vec<_>>().join(" "));
    }

    let same = Preprocess::default().apply(&capture)?;
    assert_eq!(same, kernel);
    Ok(())
}
