mod common;

use proptest::prelude::*;
use psfnet::ann::{serialize, sweep, sweep_with_seeds, train, AzimuthEncoding, TrainConfig};
use psfnet::synth::{generate_dataset, SamplingGrid, SynthLensSpec};
use psfnet::{FieldPoint, PsfDataset, PsfSource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{gradient_check, random_field, random_model};

fn small_dataset() -> PsfDataset {
    let grid = SamplingGrid::new(vec![-20.0, 0.0, 20.0], vec![0.0, 1.5, 3.0], vec![0.0, 120.0, 240.0]).unwrap();
    generate_dataset(&SynthLensSpec::default(), &grid, 5, 5, 6.5)
        .unwrap()
        .normalized()
        .unwrap()
}

fn quick_cfg(hidden: usize) -> TrainConfig {
    TrainConfig {
        hidden_size: hidden,
        max_epochs: 60,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn analytic_gradient_matches_central_differences(seed in any::<u64>(), sincos in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = if sincos { 4 } else { 3 };
        let hidden = rng.gen_range(1..=8);
        let k = rng.gen_range(1..=4);
        let model = random_model(&mut rng, inputs, hidden, k);
        let fp = random_field(&mut rng);
        let target: Vec<f64> = (0..k * k).map(|_| rng.gen_range(0.0..0.5)).collect();
        let (worst, n) = gradient_check(&model, &fp, &target, 1e-6);
        prop_assert_eq!(n, model.parameter_count());
        prop_assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn inferred_kernels_are_valid(seed in any::<u64>(), dz in -60.0..60.0f64, r in 0.0..4.0f64, phi in -720.0..720.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, 3, 6, 5);
        let kernel = model.forward(&FieldPoint::new(dz, r, phi));
        prop_assert!((kernel.sum() - 1.0).abs() < 1e-9);
        prop_assert!(kernel.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn forward_is_pure(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, 3, 5, 3);
        let before = model.clone();
        let fp = random_field(&mut rng);
        let a = model.psf(&fp);
        let b = model.psf(&fp);
        prop_assert_eq!(&model, &before);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn memorizes_a_repeated_sample() {
    let fp = FieldPoint::new(10.0, 1.5, 40.0);
    let grid = SamplingGrid::single(fp);
    let one = generate_dataset(&SynthLensSpec::default(), &grid, 13, 13, 6.5)
        .unwrap()
        .normalized()
        .unwrap();
    let sample = one.samples()[0].clone();
    let data = PsfDataset::new(vec![sample.clone(), sample.clone()]).unwrap();
    let cfg = TrainConfig {
        hidden_size: 8,
        max_epochs: 5000,
        ..Default::default()
    };
    let (model, report) = train(&data, &cfg).unwrap();
    assert!(report.final_train_perf < 1e-3, "train perf {}", report.final_train_perf);
    let d = common::eq2(model.forward(&fp).values(), sample.psf.values());
    assert!(d < 1e-3, "forward distance {d}");
}

#[test]
fn training_is_reproducible() {
    let data = small_dataset();
    let cfg = quick_cfg(6);
    let (m1, r1) = train(&data, &cfg).unwrap();
    let (m2, r2) = train(&data, &cfg).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(serialize(&m1), serialize(&m2));

    let (m3, _) = train(&data, &TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(serialize(&m1), serialize(&m3));
}

#[test]
fn sincos_encoding_widens_the_input_layer() {
    let cfg = TrainConfig {
        azimuth: AzimuthEncoding::SinCos,
        ..quick_cfg(4)
    };
    let (model, _) = train(&small_dataset(), &cfg).unwrap();
    assert_eq!(model.layer_sizes(), vec![4, 4, 25]);
    assert_eq!(model.azimuth_encoding(), AzimuthEncoding::SinCos);
}

#[test]
fn identical_restarts_make_a_degenerate_ensemble() {
    let report = sweep_with_seeds(&small_dataset(), &[4], &[3, 3], &quick_cfg(4)).unwrap();
    let row = &report.rows[0];
    assert_eq!(row.restarts_ok, 2);
    assert!((row.mean_perf - row.avg_output_perf).abs() < 1e-15);
    assert_eq!(row.std_perf, 0.0);
}

#[test]
fn ensemble_never_scores_worse_than_its_members() {
    let report = sweep(&small_dataset(), &[2, 4, 8], 3, &quick_cfg(4)).unwrap();
    assert_eq!(report.rows.len(), 3);
    for row in &report.rows {
        assert!(row.avg_output_perf <= row.mean_perf + 1e-12, "{row:?}");
    }
    assert!(sweep(&small_dataset(), &[4], 1, &quick_cfg(4)).is_err());
}

#[test]
fn sweep_is_independent_of_restart_scheduling() {
    let data = small_dataset();
    let cfg = quick_cfg(4);
    let together = sweep_with_seeds(&data, &[3, 5], &[7, 8, 9], &cfg).unwrap();
    for (i, h) in [3, 5].into_iter().enumerate() {
        let alone = sweep_with_seeds(&data, &[h], &[7, 8, 9], &cfg).unwrap();
        assert_eq!(alone.rows[0], together.rows[i]);
    }
}
