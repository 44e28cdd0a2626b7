//! Feed-forward PSF regression network: inference, backpropagation,
//! training, model files and the hidden-size sweep.

mod format;
mod model;
mod sweep;
mod train;

pub use format::{deserialize, read_model, serialize};
pub use model::{
    loss, normalize_inputs, AzimuthEncoding, DenseLayer, Gradients, HiddenActivation, InputNorm,
    MlpModel, OutputActivation, OutputGrid,
};
pub use sweep::{sweep, sweep_with_seeds, SweepReport, SweepRow};
pub use train::{train, train_split, BatchMode, DataSplit, EpochRecord, Optimizer, TrainConfig, TrainReport};
