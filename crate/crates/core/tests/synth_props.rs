mod common;

use proptest::prelude::*;
use psfnet::metrics::eq2_distance;
use psfnet::synth::{generate_dataset, synth_psf, SamplingGrid, SynthLensSpec};
use psfnet::{FieldPoint, PsfGrid};

fn symmetric_lens() -> SynthLensSpec {
    SynthLensSpec {
        asymmetry_eps: 0.0,
        noise_floor: 0.0,
        ..SynthLensSpec::default()
    }
}

/// Rotates a square grid by +90 degrees with the image y axis pointing up.
fn rotate_ccw(g: &PsfGrid) -> Vec<f64> {
    let n = g.width();
    let mut out = vec![0.0; n * n];
    for row in 0..n {
        for col in 0..n {
            out[row * n + col] = g.get(n - 1 - row, col);
        }
    }
    out
}

/// Second-moment eigenvalues in um^2.
fn eigenvalues(g: &PsfGrid) -> (f64, f64) {
    let (xx, yy, xy) = g.second_moments().unwrap();
    let s = g.pitch_um() * g.pitch_um();
    let (xx, yy, xy) = (xx * s, yy * s, xy * s);
    let mean = (xx + yy) / 2.0;
    let d = (((xx - yy) / 2.0).powi(2) + xy * xy).sqrt();
    (mean - d, mean + d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quarter_turn_in_azimuth_rotates_the_psf(dz in -50.0..50.0f64, r in 0.0..3.0f64, phi in 0.0..360.0f64) {
        let lens = symmetric_lens();
        let a = synth_psf(&lens, &FieldPoint::new(dz, r, phi), 13, 13, 6.5).unwrap();
        let b = synth_psf(&lens, &FieldPoint::new(dz, r, phi + 90.0), 13, 13, 6.5).unwrap();
        for (x, y) in rotate_ccw(&a).iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn azimuth_keeps_second_moment_eigenvalues(dz in -50.0..50.0f64, r in 0.0..3.0f64, phi in 0.0..360.0f64, phi2 in 0.0..360.0f64) {
        let lens = symmetric_lens();
        // Wide enough that the r^2-weighted tails are not truncated.
        let n = 481;
        let a = eigenvalues(&synth_psf(&lens, &FieldPoint::new(dz, r, phi), n, n, 1.0).unwrap());
        let b = eigenvalues(&synth_psf(&lens, &FieldPoint::new(dz, r, phi2), n, n, 1.0).unwrap());
        prop_assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6, "{a:?} vs {b:?}");
    }

    #[test]
    fn grids_are_positive(dz in -50.0..50.0f64, r in 0.0..3.0f64, phi in 0.0..360.0f64, seed in any::<u64>()) {
        let lens = SynthLensSpec { seed, ..SynthLensSpec::default() };
        let g = synth_psf(&lens, &FieldPoint::new(dz, r, phi), 13, 13, 6.5).unwrap();
        prop_assert!(g.values().iter().all(|&v| v >= 0.0));
        prop_assert!(g.sum() > 0.0);
    }

    #[test]
    fn defocus_refinement_shrinks_neighbour_distance(r in 0.0..3.0f64, phi in 0.0..360.0f64) {
        let lens = SynthLensSpec::default();
        let at = |z: f64| synth_psf(&lens, &FieldPoint::new(z, r, phi), 13, 13, 6.5).unwrap();
        let widest: Vec<f64> = [8.0, 4.0, 2.0, 1.0]
            .iter()
            .map(|step| {
                let n = (80.0 / step) as usize;
                let grids: Vec<PsfGrid> = (0..=n).map(|i| at(-40.0 + i as f64 * step)).collect();
                grids
                    .windows(2)
                    .map(|p| eq2_distance(&p[0], &p[1]).unwrap())
                    .fold(0.0, f64::max)
            })
            .collect();
        prop_assert!(widest[0] < 13.0);
        for pair in widest.windows(2) {
            prop_assert!(pair[1] < pair[0], "{widest:?}");
        }
    }
}

#[test]
fn on_axis_focus_is_round_and_centred() {
    let lens = SynthLensSpec {
        asymmetry_eps: 0.0,
        noise_floor: 0.0,
        ..SynthLensSpec::default()
    };
    let g = synth_psf(&lens, &FieldPoint::new(0.0, 0.0, 0.0), 13, 13, 6.5).unwrap();
    let (xx, yy, xy) = g.second_moments().unwrap();
    assert!((xx - yy).abs() < 1e-12 && xy.abs() < 1e-12);
    let (cx, cy) = psfnet::psf::centroid(&g).unwrap();
    assert!((cx - 6.0).abs() < 1e-12 && (cy - 6.0).abs() < 1e-12);
}

#[test]
fn default_focus_concentrates_in_the_core() {
    let g = psfnet::psf::normalize_volume(
        &synth_psf(&SynthLensSpec::default(), &FieldPoint::new(0.0, 0.0, 0.0), 13, 13, 6.5).unwrap(),
    )
    .unwrap();
    let core: f64 = (5..8).flat_map(|y| (5..8).map(move |x| (x, y))).map(|(x, y)| g.get(x, y)).sum();
    assert!(core >= 0.6, "central 3x3 holds {core}");
}

#[test]
fn through_focus_asymmetry_shows_in_second_moments() {
    let lens = SynthLensSpec::default();
    assert!(lens.asymmetry_eps > 0.0);
    let trace = |dz: f64| {
        let g = synth_psf(&lens, &FieldPoint::new(dz, 0.0, 0.0), 13, 13, 6.5).unwrap();
        let (xx, yy, _) = g.second_moments().unwrap();
        (xx + yy) * 6.5 * 6.5
    };
    let diff = (trace(50.0) - trace(-50.0)).abs();
    assert!(diff > lens.asymmetry_eps * lens.base_sigma_um, "difference {diff} um^2");
}

#[test]
fn generation_is_deterministic_and_ordered() {
    let grid = SamplingGrid::new(vec![-5.0, 5.0], vec![0.0, 2.0], vec![0.0, 90.0, 180.0]).unwrap();
    let a = generate_dataset(&SynthLensSpec::default(), &grid, 13, 13, 6.5).unwrap();
    let b = generate_dataset(&SynthLensSpec::default(), &grid, 13, 13, 6.5).unwrap();
    assert_eq!(a, b);
    let fields: Vec<_> = a.samples().iter().map(|s| s.field).collect();
    assert_eq!(fields, grid.points());
    assert_eq!(fields[1], FieldPoint::new(-5.0, 0.0, 90.0));
    assert_eq!(fields[3], FieldPoint::new(-5.0, 2.0, 0.0));
}
