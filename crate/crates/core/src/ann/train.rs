use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{
    AzimuthEncoding, Gradients, HiddenActivation, InputNorm, MlpModel, OutputActivation, OutputGrid,
};
use crate::error::{Error, Result};
use crate::psf::PsfDataset;

// Separate ChaCha streams so the split and the initialization never share draws.
const INIT_STREAM: u64 = 0;
const SPLIT_STREAM: u64 = 1;
const BATCH_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    Full,
    MiniBatch(usize),
}

/// Parameter update rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// Classical momentum; the coefficient is `TrainConfig::momentum`.
    Momentum,
    /// Adam with first-moment decay `TrainConfig::momentum`.
    Adam { beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta2: 0.999,
        epsilon: 1e-8,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch: BatchMode,
    pub optimizer: Optimizer,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    /// Epochs without a new best validation score before the learning rate is halved.
    pub early_stop_patience: usize,
    /// Halvings allowed before training stops at a plateau.
    pub max_lr_halvings: usize,
    pub seed: u64,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
    pub azimuth: AzimuthEncoding,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_size: 80,
            max_epochs: 2000,
            learning_rate: 0.05,
            momentum: 0.9,
            batch: BatchMode::MiniBatch(32),
            optimizer: Optimizer::Momentum,
            validation_fraction: 0.15,
            test_fraction: 0.15,
            early_stop_patience: 200,
            max_lr_halvings: 4,
            seed: 0,
            hidden_activation: HiddenActivation::Tanh,
            output_activation: OutputActivation::Linear,
            azimuth: AzimuthEncoding::Raw,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::invalid("hidden size must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must be in [0, 1)"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation fraction must be in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.test_fraction)
            || self.validation_fraction + self.test_fraction >= 1.0
        {
            return Err(Error::invalid("test fraction must be in [0, 1) and leave training data"));
        }
        if self.batch == BatchMode::MiniBatch(0) {
            return Err(Error::invalid("mini-batch size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub train_perf: f64,
    pub val_perf: f64,
}

/// Performances are mean per-sample Euclidean distances of the raw network
/// output, recorded at the start of each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub final_train_perf: f64,
    pub final_val_perf: f64,
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (best validation score).
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub seed: u64,
}

impl TrainReport {
    /// `epoch,train_perf,val_perf` rows.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_perf,val_perf\n");
        for (i, r) in self.history.iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{}\n",
                crate::report::sig12(r.train_perf),
                crate::report::sig12(r.val_perf)
            ));
        }
        out
    }
}

/// Deterministic train / validation / test partition.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: PsfDataset,
    pub validation: PsfDataset,
    pub test: Option<PsfDataset>,
}

impl DataSplit {
    pub fn new(
        dataset: &PsfDataset,
        validation_fraction: f64,
        test_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = dataset.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "training needs at least 2 samples, got {n}"
            )));
        }
        let n_val = ((n as f64 * validation_fraction).round() as usize).max(1);
        let mut n_test = (n as f64 * test_fraction).round() as usize;
        if n_val + n_test >= n {
            n_test = n - n_val - 1;
        }
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(SPLIT_STREAM);
        idx.shuffle(&mut rng);
        let (val, rest) = idx.split_at(n_val);
        let (test, train) = rest.split_at(n_test);
        Ok(Self {
            train: dataset.subset(train)?,
            validation: dataset.subset(val)?,
            test: if test.is_empty() {
                None
            } else {
                Some(dataset.subset(test)?)
            },
        })
    }
}

/// Splits the dataset with `cfg.seed` and trains on the training part.
pub fn train(dataset: &PsfDataset, cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    let split = DataSplit::new(dataset, cfg.validation_fraction, cfg.test_fraction, cfg.seed)?;
    train_split(&split.train, &split.validation, cfg)
}

fn targets(ds: &PsfDataset) -> Array2<f64> {
    let k = ds.grid_width() * ds.grid_height();
    let mut y = Array2::zeros((ds.len(), k));
    for (mut row, s) in y.rows_mut().into_iter().zip(ds.samples()) {
        row.iter_mut().zip(s.psf.values()).for_each(|(d, v)| *d = *v);
    }
    y
}

/// Per-row Euclidean distance, averaged over rows.
fn mean_row_distance(pred: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let n = pred.nrows() as f64;
    pred.rows()
        .into_iter()
        .zip(target.rows())
        .map(|(p, t)| {
            p.iter()
                .zip(t.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / n
}

/// Trains a fresh network on `train_set`, early-stopping on `validation`.
///
/// Mini-batch (default 32, or full-batch) gradient descent with classical
/// momentum or Adam on the mean per-sample squared error. The learning rate halves whenever the
/// validation score has not improved for `early_stop_patience` epochs; after
/// `max_lr_halvings` halvings the next plateau ends training. The returned
/// model holds the parameters with the best validation score.
pub fn train_split(
    train_set: &PsfDataset,
    validation: &PsfDataset,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    if train_set.grid_width() != train_set.grid_height() {
        return Err(Error::dims("training grids must be square (K x K)"));
    }
    if !(validation.grid_width() == train_set.grid_width()
        && validation.grid_height() == train_set.grid_height())
    {
        return Err(Error::dims("validation grids differ from training grids"));
    }
    let k = train_set.grid_width();
    let env = train_set.envelope();
    let norm = env.map(|(lo, hi)| InputNorm::from_range(lo, hi));
    let sizes = [cfg.azimuth.input_width(), cfg.hidden_size, k * k];
    let mut model = MlpModel::new(
        &sizes,
        cfg.hidden_activation,
        cfg.output_activation,
        norm,
        OutputGrid {
            width: k,
            height: k,
            pitch_um: train_set.pitch_um(),
        },
    )?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_rng.set_stream(INIT_STREAM);
    model.randomize(&mut init_rng);

    let x_train = model.encode_batch(train_set.samples().iter().map(|s| &s.field));
    let y_train = targets(train_set);
    let x_val = model.encode_batch(validation.samples().iter().map(|s| &s.field));
    let y_val = targets(validation);

    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    batch_rng.set_stream(BATCH_STREAM);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut stepper = Stepper::new(&model, cfg);
    let mut lr = cfg.learning_rate;
    let mut halvings = 0;
    let mut stale = 0;
    let mut best: Option<(f64, f64, usize, MlpModel)> = None;
    let mut history = Vec::new();

    for epoch in 0..cfg.max_epochs {
        let cache = model.forward_batch(x_train.clone());
        let out = cache.output();
        let train_perf = mean_row_distance(out, &y_train);
        let val_out = model.forward_batch(x_val.clone());
        let val_perf = mean_row_distance(val_out.output(), &y_val);
        if !(train_perf.is_finite() && val_perf.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(EpochRecord {
            train_perf,
            val_perf,
        });

        let improved = best.as_ref().map_or(true, |b| val_perf < b.0);
        if improved {
            best = Some((val_perf, train_perf, epoch, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience {
                if halvings >= cfg.max_lr_halvings {
                    break;
                }
                lr *= 0.5;
                halvings += 1;
                stale = 0;
            }
        }

        match cfg.batch {
            BatchMode::Full => {
                let grads = squared_error_gradient(&model, &cache, &y_train);
                stepper.step(&mut model, &grads, lr);
            }
            BatchMode::MiniBatch(size) => {
                order.shuffle(&mut batch_rng);
                for chunk in order.chunks(size) {
                    let xb = x_train.select(Axis(0), chunk);
                    let yb = y_train.select(Axis(0), chunk);
                    let cache = model.forward_batch(xb);
                    let grads = squared_error_gradient(&model, &cache, &yb);
                    stepper.step(&mut model, &grads, lr);
                }
            }
        }
    }

    let (final_val_perf, final_train_perf, best_epoch, model) =
        best.expect("at least one epoch runs");
    Ok((
        model,
        TrainReport {
            final_train_perf,
            final_val_perf,
            epochs_run: history.len(),
            best_epoch,
            history,
            seed: cfg.seed,
        },
    ))
}

/// Gradient of `mean_n sum_i (out_ni - y_ni)^2`.
fn squared_error_gradient(
    model: &MlpModel,
    cache: &super::model::BatchCache,
    y: &Array2<f64>,
) -> Gradients {
    let scale = 2.0 / y.nrows() as f64;
    let d_out = (cache.output() - y) * scale;
    model.backward_batch(cache, d_out)
}

/// Optimizer state; owned by one training run.
struct Stepper {
    optimizer: Optimizer,
    beta1: f64,
    first: Gradients,
    second: Gradients,
    step: Gradients,
    t: i32,
}

impl Stepper {
    fn new(model: &MlpModel, cfg: &TrainConfig) -> Self {
        Self {
            optimizer: cfg.optimizer,
            beta1: cfg.momentum,
            first: model.zeros_like(),
            second: model.zeros_like(),
            step: model.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, lr: f64) {
        self.t += 1;
        let mu = self.beta1;
        match self.optimizer {
            Optimizer::Momentum => {
                // `first` is the velocity
                for (mut v, g) in self.first.iter_mut().zip(grads.iter()) {
                    v.zip_mut_with(&g, |v, g| *v = mu * *v - lr * g);
                }
                model.apply_step(&self.first);
            }
            Optimizer::Adam { beta2, epsilon } => {
                let c1 = 1.0 - mu.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (((m, v), s), g) in self
                    .first
                    .iter_mut()
                    .zip(self.second.iter_mut())
                    .zip(self.step.iter_mut())
                    .zip(grads.iter())
                {
                    ndarray::Zip::from(m)
                        .and(v)
                        .and(s)
                        .and(&g)
                        .for_each(|m, v, s, &g| {
                            *m = mu * *m + (1.0 - mu) * g;
                            *v = beta2 * *v + (1.0 - beta2) * g * g;
                            *s = -lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                        });
                }
                model.apply_step(&self.step);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psf::{FieldPoint, PsfGrid, Sample};

    fn toy_dataset(n: usize) -> PsfDataset {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                let psf = PsfGrid::new(2, 2, 6.5, vec![t, 1.0 - t, 0.5 * t, 0.25]).unwrap();
                Sample {
                    field: FieldPoint::new(-50.0 + 100.0 * t, 3.0 * t, 0.0),
                    psf,
                }
            })
            .collect();
        PsfDataset::new(samples).unwrap()
    }

    #[test]
    fn split_sizes() {
        let ds = toy_dataset(100);
        let s = DataSplit::new(&ds, 0.15, 0.15, 4).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.as_ref().unwrap().len()), (70, 15, 15));
        let two = DataSplit::new(&toy_dataset(2), 0.15, 0.15, 4).unwrap();
        assert_eq!((two.train.len(), two.validation.len()), (1, 1));
        assert!(two.test.is_none());
        assert!(matches!(
            DataSplit::new(&toy_dataset(1), 0.15, 0.15, 4),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = TrainConfig {
            hidden_size: 4,
            learning_rate: 1e6,
            momentum: 0.0,
            max_epochs: 200,
            ..Default::default()
        };
        assert!(matches!(
            train(&toy_dataset(20), &cfg),
            Err(Error::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn history_matches_epochs() {
        let cfg = TrainConfig {
            hidden_size: 4,
            max_epochs: 50,
            ..Default::default()
        };
        let (_, report) = train(&toy_dataset(20), &cfg).unwrap();
        assert_eq!(report.history.len(), report.epochs_run);
        assert_eq!(report.epochs_run, 50);
        assert!(report.history.iter().all(|r| r.train_perf >= 0.0 && r.val_perf >= 0.0));
        assert_eq!(report.history_csv().lines().count(), 51);
    }

    #[test]
    fn mini_batch_learns() {
        let cfg = TrainConfig {
            hidden_size: 6,
            max_epochs: 300,
            batch: BatchMode::MiniBatch(4),
            learning_rate: 0.02,
            ..Default::default()
        };
        let (_, report) = train(&toy_dataset(40), &cfg).unwrap();
        assert!(report.final_val_perf < report.history[0].val_perf);
    }

    #[test]
    fn invalid_configs() {
        let base = TrainConfig::default();
        for cfg in [
            TrainConfig { hidden_size: 0, ..base.clone() },
            TrainConfig { momentum: 1.0, ..base.clone() },
            TrainConfig { learning_rate: -1.0, ..base.clone() },
            TrainConfig { validation_fraction: 0.0, ..base.clone() },
            TrainConfig { batch: BatchMode::MiniBatch(0), ..base.clone() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
