//! PSF grids, field points, datasets and the preprocessing pipeline that
//! takes a high-resolution PSF capture down to a sensor-pitch kernel.

mod dataset;
mod preprocess;

pub use dataset::{read_psfd, write_psfd, PsfDataset, Sample};
pub use preprocess::{
    center_and_crop, centroid, flatten, normalize_volume, resample, unflatten, Preprocess,
};

use crate::error::{Error, Result};

/// Position in the regression parameter space: defocus, image height and azimuth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    dz_um: f64,
    r_mm: f64,
    phi_deg: f64,
}

impl FieldPoint {
    /// Builds a field point, wrapping the azimuth into `[0, 360)`.
    pub fn new(dz_um: f64, r_mm: f64, phi_deg: f64) -> Self {
        Self {
            dz_um,
            r_mm,
            phi_deg: canonical_degrees(phi_deg),
        }
    }

    pub fn dz_um(&self) -> f64 {
        self.dz_um
    }

    pub fn r_mm(&self) -> f64 {
        self.r_mm
    }

    pub fn phi_deg(&self) -> f64 {
        self.phi_deg
    }

    pub fn with_dz(self, dz_um: f64) -> Self {
        Self { dz_um, ..self }
    }
}

pub(crate) fn canonical_degrees(deg: f64) -> f64 {
    let wrapped = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if wrapped >= 360.0 {
        0.0
    } else {
        wrapped
    }
}

/// Non-negative intensity grid with a physical pixel pitch, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfGrid {
    width: usize,
    height: usize,
    pitch_um: f64,
    values: Vec<f64>,
}

impl PsfGrid {
    pub fn new(width: usize, height: usize, pitch_um: f64, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::dims(format!("empty grid {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::dims(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        if !(pitch_um > 0.0 && pitch_um.is_finite()) {
            return Err(Error::invalid(format!("pitch must be > 0, got {pitch_um}")));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("grid value {v} is not a finite non-negative number")));
        }
        Ok(Self {
            width,
            height,
            pitch_um,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize, pitch_um: f64) -> Result<Self> {
        Self::new(width, height, pitch_um, vec![0.0; width * height])
    }

    pub(crate) fn from_parts_unchecked(
        width: usize,
        height: usize,
        pitch_um: f64,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            pitch_um,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pitch_um(&self) -> f64 {
        self.pitch_um
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn same_shape(&self, other: &PsfGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Second central moments `(mxx, myy, mxy)` in pixel units.
    pub fn second_moments(&self) -> Result<(f64, f64, f64)> {
        let (cx, cy) = centroid(self)?;
        let total = self.sum();
        let (mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0);
        for y in 0..self.height {
            let dy = y as f64 - cy;
            for x in 0..self.width {
                let v = self.get(x, y);
                let dx = x as f64 - cx;
                mxx += v * dx * dx;
                myy += v * dy * dy;
                mxy += v * dx * dy;
            }
        }
        Ok((mxx / total, myy / total, mxy / total))
    }
}

/// Anything that yields a PSF for a field point: a trained network, the
/// synthetic lens, or a lookup table in tests.
pub trait PsfSource {
    fn psf(&self, fp: &FieldPoint) -> PsfGrid;
}
