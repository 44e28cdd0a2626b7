//! Neural-network regression of lens point spread functions.
//!
//! A small feed-forward network maps a field point (defocus, image height,
//! azimuth) to a sensor-pitch PSF kernel. The crate covers the whole chain:
//! synthetic PSF capture, preprocessing, training and evaluation, and
//! spatially-variant rendering of images with the learned kernels.

pub mod ann;
mod binio;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod psf;
pub mod render;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
pub use ann::{MlpModel, TrainConfig};
pub use psf::{FieldPoint, PsfDataset, PsfGrid, PsfSource};
