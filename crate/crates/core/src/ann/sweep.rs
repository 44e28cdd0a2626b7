//! Hidden-layer size sweep with restarts and ensemble averaging.

use rayon::prelude::*;

use super::model::MlpModel;
use super::train::{train_split, DataSplit, TrainConfig};
use crate::error::{Error, Result};
use crate::psf::PsfDataset;
use crate::report::sig12;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub hidden: usize,
    pub restarts_ok: usize,
    pub restarts_failed: usize,
    /// Mean over restarts of each restart's test-set performance.
    pub mean_perf: f64,
    /// Test-set performance of the per-output mean prediction across restarts.
    pub avg_output_perf: f64,
    /// Sample standard deviation of the per-restart performances.
    pub std_perf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub const CSV_HEADER: &'static str = "hidden,restarts_ok,mean_perf,avg_output_perf,std_perf";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.hidden,
                r.restarts_ok,
                sig12(r.mean_perf),
                sig12(r.avg_output_perf),
                sig12(r.std_perf)
            ));
        }
        out
    }

    /// Hidden size with the lowest mean performance.
    pub fn best_hidden(&self) -> Option<usize> {
        self.rows
            .iter()
            .filter(|r| r.mean_perf.is_finite())
            .min_by(|a, b| a.mean_perf.total_cmp(&b.mean_perf))
            .map(|r| r.hidden)
    }
}

/// Restart seeds are `cfg.seed + restart_index`.
pub fn sweep(
    dataset: &PsfDataset,
    hidden_sizes: &[usize],
    restarts: usize,
    cfg: &TrainConfig,
) -> Result<SweepReport> {
    if restarts < 2 {
        return Err(Error::invalid(format!("a sweep needs at least 2 restarts, got {restarts}")));
    }
    let seeds: Vec<u64> = (0..restarts as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    sweep_with_seeds(dataset, hidden_sizes, &seeds, cfg)
}

/// Sweep with explicit per-restart initialization seeds. The train /
/// validation / test split always comes from `cfg.seed`.
pub fn sweep_with_seeds(
    dataset: &PsfDataset,
    hidden_sizes: &[usize],
    seeds: &[u64],
    cfg: &TrainConfig,
) -> Result<SweepReport> {
    if seeds.len() < 2 {
        return Err(Error::invalid("a sweep needs at least 2 restarts"));
    }
    if hidden_sizes.is_empty() {
        return Err(Error::invalid("no hidden sizes given"));
    }
    cfg.validate()?;
    if cfg.test_fraction <= 0.0 {
        return Err(Error::invalid("a sweep scores on the test set; test fraction must be > 0"));
    }
    let split = DataSplit::new(dataset, cfg.validation_fraction, cfg.test_fraction, cfg.seed)?;
    let test = split
        .test
        .as_ref()
        .ok_or_else(|| Error::InsufficientData("dataset too small for a test set".into()))?;

    let mut rows = Vec::with_capacity(hidden_sizes.len());
    for &hidden in hidden_sizes {
        let runs: Vec<Result<MlpModel>> = seeds
            .par_iter()
            .map(|&seed| {
                let cfg = TrainConfig {
                    hidden_size: hidden,
                    seed,
                    ..cfg.clone()
                };
                train_split(&split.train, &split.validation, &cfg).map(|(m, _)| m)
            })
            .collect();
        let models: Vec<MlpModel> = runs.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
        let failed = runs.len() - models.len();
        rows.push(score_ensemble(hidden, &models, failed, test));
    }
    Ok(SweepReport { rows })
}

fn score_ensemble(hidden: usize, models: &[MlpModel], failed: usize, test: &PsfDataset) -> SweepRow {
    if models.is_empty() {
        return SweepRow {
            hidden,
            restarts_ok: 0,
            restarts_failed: failed,
            mean_perf: f64::NAN,
            avg_output_perf: f64::NAN,
            std_perf: f64::NAN,
        };
    }
    let r = models.len() as f64;
    let n = test.len() as f64;
    let mut per_model = vec![0.0; models.len()];
    let mut ensemble_total = 0.0;
    for s in test.samples() {
        let preds: Vec<Vec<f64>> = models.iter().map(|m| m.forward(&s.field).into_values()).collect();
        for (acc, p) in per_model.iter_mut().zip(&preds) {
            *acc += distance(p, s.psf.values());
        }
        let mut avg = vec![0.0; s.psf.values().len()];
        for p in &preds {
            avg.iter_mut().zip(p).for_each(|(a, v)| *a += v);
        }
        avg.iter_mut().for_each(|a| *a /= r);
        ensemble_total += distance(&avg, s.psf.values());
    }
    let perfs: Vec<f64> = per_model.iter().map(|t| t / n).collect();
    let mean_perf = perfs.iter().sum::<f64>() / r;
    let std_perf = if perfs.len() > 1 {
        (perfs.iter().map(|p| (p - mean_perf).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
    } else {
        0.0
    };
    SweepRow {
        hidden,
        restarts_ok: models.len(),
        restarts_failed: failed,
        mean_perf,
        avg_output_perf: ensemble_total / n,
        std_perf,
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let report = SweepReport {
            rows: vec![SweepRow {
                hidden: 8,
                restarts_ok: 3,
                restarts_failed: 0,
                mean_perf: 0.125,
                avg_output_perf: 0.1,
                std_perf: 1.0 / 3.0,
            }],
        };
        assert_eq!(
            report.to_csv(),
            "hidden,restarts_ok,mean_perf,avg_output_perf,std_perf\n8,3,0.125,0.1,0.333333333333\n"
        );
        assert_eq!(report.best_hidden(), Some(8));
    }
}
