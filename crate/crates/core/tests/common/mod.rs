#![allow(dead_code)]

use psfnet::ann::{HiddenActivation, InputNorm, MlpModel, OutputActivation, OutputGrid};
use psfnet::render::{pixel_to_field, DefocusMap, FieldMapping, Image, KernelSource};
use psfnet::FieldPoint;
use rand::Rng;

/// Relative-error denominator floor for finite-difference comparisons.
pub const FD_FLOOR: f64 = 1e-5;

pub fn random_model<R: Rng>(rng: &mut R, inputs: usize, hidden: usize, k: usize) -> MlpModel {
    let norm = [
        InputNorm::from_range(-50.0, 50.0),
        InputNorm::from_range(0.0, 3.0),
        InputNorm::from_range(0.0, 360.0),
    ];
    let grid = OutputGrid {
        width: k,
        height: k,
        pitch_um: 6.5,
    };
    let mut m = MlpModel::new(
        &[inputs, hidden, k * k],
        HiddenActivation::Tanh,
        OutputActivation::Linear,
        norm,
        grid,
    )
    .unwrap();
    m.randomize(rng);
    m
}

pub fn random_field<R: Rng>(rng: &mut R) -> FieldPoint {
    FieldPoint::new(
        rng.gen_range(-50.0..50.0),
        rng.gen_range(0.0..3.0),
        rng.gen_range(0.0..360.0),
    )
}

pub fn squared_error(model: &MlpModel, fp: &FieldPoint, target: &[f64]) -> f64 {
    model
        .predict_raw(fp)
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum()
}

/// Worst relative error between every analytic partial and its central
/// difference, plus the number of partials checked.
pub fn gradient_check(model: &MlpModel, fp: &FieldPoint, target: &[f64], h: f64) -> (f64, usize) {
    let grads = model.gradient(fp, target).unwrap();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut count = 0;
    let n_layers = model.layers().len();
    for l in 0..n_layers {
        let (rows, cols) = model.layers()[l].weights().dim();
        for i in 0..rows {
            for j in 0..cols {
                let w0 = model.layers()[l].weights()[[i, j]];
                probe.layers_mut()[l].weights_mut()[[i, j]] = w0 + h;
                let up = squared_error(&probe, fp, target);
                probe.layers_mut()[l].weights_mut()[[i, j]] = w0 - h;
                let down = squared_error(&probe, fp, target);
                probe.layers_mut()[l].weights_mut()[[i, j]] = w0;
                worst = worst.max(rel_err(grads.weights[l][[i, j]], (up - down) / (2.0 * h)));
                count += 1;
            }
        }
        for i in 0..rows {
            let b0 = model.layers()[l].biases()[i];
            probe.layers_mut()[l].biases_mut()[i] = b0 + h;
            let up = squared_error(&probe, fp, target);
            probe.layers_mut()[l].biases_mut()[i] = b0 - h;
            let down = squared_error(&probe, fp, target);
            probe.layers_mut()[l].biases_mut()[i] = b0;
            worst = worst.max(rel_err(grads.biases[l][i], (up - down) / (2.0 * h)));
            count += 1;
        }
    }
    (worst, count)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FD_FLOOR)
}

/// Mean unit-volume PSF of a dataset, used as the constant baseline predictor.
pub fn mean_psf(ds: &psfnet::PsfDataset) -> Vec<f64> {
    let k = ds.grid_width() * ds.grid_height();
    let mut mean = vec![0.0; k];
    for s in ds.samples() {
        for (m, v) in mean.iter_mut().zip(s.psf.values()) {
            *m += v;
        }
    }
    let n = ds.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

pub fn eq2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean per-sample distance of a constant prediction over a dataset.
pub fn constant_predictor_perf(pred: &[f64], ds: &psfnet::PsfDataset) -> f64 {
    ds.samples().iter().map(|s| eq2(pred, s.psf.values())).sum::<f64>() / ds.len() as f64
}

/// Mean per-sample distance of the raw network output over a dataset.
pub fn model_perf(model: &MlpModel, ds: &psfnet::PsfDataset) -> f64 {
    ds.samples()
        .iter()
        .map(|s| eq2(&model.predict_raw(&s.field), s.psf.values()))
        .sum::<f64>()
        / ds.len() as f64
}

/// Per-pixel inference and a direct edge-clamped sum, no tiling.
pub fn brute_force<K: KernelSource>(image: &Image, source: &K, mapping: &FieldMapping, dz: &DefocusMap) -> Vec<f64> {
    let (w, h) = (image.width() as i64, image.height() as i64);
    let (lo, hi) = source.dz_envelope();
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let fp = pixel_to_field(mapping, x as f64, y as f64, dz.get(x as usize, y as usize).clamp(lo, hi));
            let k = source.psf(&fp);
            let (kw, kh) = (k.width() as i64, k.height() as i64);
            let mut acc = 0.0;
            for j in 0..kh {
                for i in 0..kw {
                    let sx = (x - (i - kw / 2)).clamp(0, w - 1) as usize;
                    let sy = (y - (j - kh / 2)).clamp(0, h - 1) as usize;
                    acc += k.get(i as usize, j as usize) * image.get(sx, sy);
                }
            }
            out.push(acc);
        }
    }
    out
}
