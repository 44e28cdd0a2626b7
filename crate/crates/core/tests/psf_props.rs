use proptest::prelude::*;
use psfnet::psf::{center_and_crop, centroid, flatten, normalize_volume, resample, unflatten};
use psfnet::PsfGrid;

fn arb_grid(max_side: usize) -> impl Strategy<Value = PsfGrid> {
    (1..=max_side, 1..=max_side, 0.1..10.0f64).prop_flat_map(|(w, h, pitch)| {
        prop::collection::vec(0.0..1.0f64, w * h)
            .prop_filter("positive volume", |v| v.iter().sum::<f64>() > 1e-6)
            .prop_map(move |v| PsfGrid::new(w, h, pitch, v).unwrap())
    })
}

/// Gaussian blob with an arbitrary covariance, comfortably inside the grid.
fn blob(w: usize, h: usize, cx: f64, cy: f64, sx: f64, sy: f64, rho: f64) -> PsfGrid {
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let dx = (x as f64 - cx) / sx;
            let dy = (y as f64 - cy) / sy;
            let q = (dx * dx - 2.0 * rho * dx * dy + dy * dy) / (1.0 - rho * rho);
            values.push((-0.5 * q).exp());
        }
    }
    PsfGrid::new(w, h, 1.0, values).unwrap()
}

proptest! {
    #[test]
    fn integer_binning_conserves_volume(g in arb_grid(24), ratio in 1usize..=4, extra in 0usize..3) {
        let n = g.width().max(g.height());
        let size = n.div_ceil(ratio) + extra;
        let out = resample(&g, g.pitch_um() * ratio as f64, size).unwrap();
        prop_assert!((out.sum() - g.sum()).abs() <= 1e-9 * g.sum());
    }

    #[test]
    fn resampling_never_adds_volume(g in arb_grid(24), ratio in 1.0..7.0f64, size in 1usize..12) {
        let out = resample(&g, g.pitch_um() * ratio, size).unwrap();
        prop_assert!(out.sum() <= g.sum() + 1e-9);
        prop_assert!(out.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn crop_centers_unimodal_blobs(
        w in 24usize..48,
        h in 24usize..48,
        fx in 0.0..1.0f64,
        fy in 0.0..1.0f64,
        sx in 0.3..1.5f64,
        sy in 0.3..1.5f64,
        rho in -0.6..0.6f64,
        extra in 0usize..10,
    ) {
        // The crop holds the blob's support; only the rounding of the centroid remains.
        let reach = 6.0 * sx.max(sy);
        let n = (2.0 * reach).ceil() as usize + 3 + extra;
        let cx = reach + fx * (w as f64 - 1.0 - 2.0 * reach);
        let cy = reach + fy * (h as f64 - 1.0 - 2.0 * reach);
        let out = center_and_crop(&blob(w, h, cx, cy, sx, sy, rho), n).unwrap();
        let (ox, oy) = centroid(&out).unwrap();
        let mid = (n as f64 - 1.0) / 2.0;
        prop_assert!((ox - mid).abs() <= 0.5 && (oy - mid).abs() <= 0.5, "({ox}, {oy}) vs {mid}");
    }

    #[test]
    fn normalization_is_scale_invariant_and_idempotent(g in arb_grid(16), k in 1e-3..1e3f64) {
        let once = normalize_volume(&g).unwrap();
        prop_assert!((once.sum() - 1.0).abs() < 1e-12);
        let scaled = PsfGrid::new(g.width(), g.height(), g.pitch_um(), g.values().iter().map(|v| v * k).collect()).unwrap();
        let from_scaled = normalize_volume(&scaled).unwrap();
        let twice = normalize_volume(&once).unwrap();
        for ((a, b), c) in once.values().iter().zip(from_scaled.values()).zip(twice.values()) {
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn flatten_round_trips_bit_exactly(g in arb_grid(16)) {
        let back = unflatten(flatten(&g), g.width(), g.height(), g.pitch_um()).unwrap();
        prop_assert!(back.values().iter().zip(g.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(back, g);
    }
}
