//! Distances between PSF grids and dataset-level scoring.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::psf::{PsfDataset, PsfGrid, PsfSource};
use crate::report::sig12;

fn check_shapes(a: &PsfGrid, b: &PsfGrid) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::dims(format!(
            "grids are {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Root of the summed squared pixel differences.
pub fn eq2_distance(a: &PsfGrid, b: &PsfGrid) -> Result<f64> {
    check_shapes(a, b)?;
    Ok(squared_distance(a.values(), b.values()).sqrt())
}

/// `eq2_distance / sqrt(pixel count)`; comparable across grid sizes.
pub fn per_pixel_rmse(a: &PsfGrid, b: &PsfGrid) -> Result<f64> {
    let d = eq2_distance(a, b)?;
    Ok(d / (a.values().len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub n_samples: usize,
    pub mean_eq2: f64,
    pub max_eq2: f64,
    /// Root of the mean squared error over every pixel of every sample.
    pub per_pixel_rmse: f64,
}

impl EvalSummary {
    pub const CSV_HEADER: &'static str = "n,mean_eq2,max_eq2,per_pixel_rmse";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.n_samples,
            sig12(self.mean_eq2),
            sig12(self.max_eq2),
            sig12(self.per_pixel_rmse)
        )
    }
}

/// Scores `source` against every sample of `dataset`.
///
/// Per-sample terms are computed in parallel and reduced in sample order, so
/// the result does not depend on the thread count.
pub fn evaluate<S: PsfSource + Sync + ?Sized>(source: &S, dataset: &PsfDataset) -> Result<EvalSummary> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData("cannot evaluate on an empty dataset".into()));
    }
    let squared: Vec<f64> = dataset
        .samples()
        .par_iter()
        .map(|s| {
            let pred = source.psf(&s.field);
            check_shapes(&pred, &s.psf)?;
            Ok(squared_distance(pred.values(), s.psf.values()))
        })
        .collect::<Result<_>>()?;
    let n = squared.len() as f64;
    let pixels = (dataset.grid_width() * dataset.grid_height()) as f64;
    Ok(EvalSummary {
        n_samples: squared.len(),
        mean_eq2: squared.iter().map(|s| s.sqrt()).sum::<f64>() / n,
        max_eq2: squared.iter().fold(0.0, |m, s| m.max(s.sqrt())),
        per_pixel_rmse: (squared.iter().sum::<f64>() / (n * pixels)).sqrt(),
    })
}
