//! Spatially-variant rendering with learned PSF kernels.
//!
//! Images use row-major storage with row 0 at the top. Field geometry uses a
//! y axis that points up, so a pixel directly above the optical axis sits at
//! azimuth 90 degrees.

mod convolve;
mod pgm;

pub use convolve::{convolve_spatially_variant, KernelSource, Rendered};
pub use pgm::{Pgm, PgmDepth};

use std::path::Path;

use crate::error::{Error, Result};
use crate::psf::FieldPoint;

/// Single-channel image with a physical pixel pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pitch_um: f64,
    values: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pitch_um: f64, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::dims(format!("empty image {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::dims(format!("{} values for a {width}x{height} image", values.len())));
        }
        if !(pitch_um > 0.0 && pitch_um.is_finite()) {
            return Err(Error::invalid(format!("pitch must be > 0, got {pitch_um}")));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("image values must be finite and >= 0, got {v}")));
        }
        Ok(Self {
            width,
            height,
            pitch_um,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, pitch_um: f64, value: f64) -> Result<Self> {
        Self::new(width, height, pitch_um, vec![value; width * height])
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

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        assert!(v.is_finite() && v >= 0.0, "image values must be finite and >= 0");
        self.values[y * self.width + x] = v;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn from_pgm(pgm: &Pgm, pitch_um: f64) -> Result<Self> {
        Self::new(pgm.width, pgm.height, pitch_um, pgm.unit_values())
    }

    pub fn to_pgm(&self, depth: PgmDepth) -> Pgm {
        Pgm::quantize(self.width, self.height, &self.values, depth).expect("image shape is consistent")
    }

    pub fn read_pgm(path: impl AsRef<Path>, pitch_um: f64) -> Result<Self> {
        Self::from_pgm(&Pgm::read(path)?, pitch_um)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>, depth: PgmDepth) -> Result<()> {
        self.to_pgm(depth).write(path)
    }

    /// Copy scaled so the largest value becomes 1 (unchanged if all zero).
    pub fn peak_normalized(&self) -> Image {
        let max = self.values.iter().fold(0.0f64, |m, v| m.max(*v));
        let mut out = self.clone();
        if max > 0.0 {
            out.values.iter_mut().for_each(|v| *v /= max);
        }
        out
    }

    /// Standard deviation over mean inside a window; 0 for a black window.
    pub fn local_rms_contrast(&self, x0: usize, y0: usize, w: usize, h: usize) -> f64 {
        assert!(x0 + w <= self.width && y0 + h <= self.height && w * h > 0, "window outside image");
        let n = (w * h) as f64;
        let rows = || (y0..y0 + h).flat_map(|y| self.values[y * self.width + x0..][..w].iter());
        let mean = rows().sum::<f64>() / n;
        if mean == 0.0 {
            return 0.0;
        }
        let var = rows().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        var.sqrt() / mean
    }
}

/// Alternating `cell_px` squares; the top-left cell is `high`.
pub fn checkerboard(width: usize, height: usize, cell_px: usize, low: f64, high: f64, pitch_um: f64) -> Result<Image> {
    if cell_px == 0 {
        return Err(Error::invalid("checkerboard cell size must be at least 1"));
    }
    let values = (0..height)
        .flat_map(|y| (0..width).map(move |x| if (x / cell_px + y / cell_px) % 2 == 0 { high } else { low }))
        .collect();
    Image::new(width, height, pitch_um, values)
}

/// Optical-axis position on the sensor, in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldMapping {
    pub cx: f64,
    pub cy: f64,
    pub pitch_um: f64,
}

impl FieldMapping {
    pub fn new(cx: f64, cy: f64, pitch_um: f64) -> Result<Self> {
        if !(pitch_um > 0.0 && pitch_um.is_finite()) {
            return Err(Error::invalid(format!("pitch must be > 0, got {pitch_um}")));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::invalid("optical center must be finite"));
        }
        Ok(Self { cx, cy, pitch_um })
    }

    /// Optical axis at the geometric center of `image`.
    pub fn centered(image: &Image) -> Self {
        Self {
            cx: (image.width() as f64 - 1.0) / 2.0,
            cy: (image.height() as f64 - 1.0) / 2.0,
            pitch_um: image.pitch_um(),
        }
    }

    pub fn field_point(&self, x: f64, y: f64, dz_um: f64) -> FieldPoint {
        pixel_to_field(self, x, y, dz_um)
    }
}

/// Field point seen by the pixel at column `x`, row `y`.
pub fn pixel_to_field(mapping: &FieldMapping, x: f64, y: f64, dz_um: f64) -> FieldPoint {
    let dx = x - mapping.cx;
    let up = mapping.cy - y;
    let r_mm = mapping.pitch_um * dx.hypot(up) / 1000.0;
    let phi = if dx == 0.0 && up == 0.0 {
        0.0
    } else {
        up.atan2(dx).to_degrees()
    };
    FieldPoint::new(dz_um, r_mm, phi)
}

/// Thin-lens image distance for an object at `distance_mm` (may be infinite).
pub fn image_distance(distance_mm: f64, focal_length_mm: f64) -> Result<f64> {
    if !(focal_length_mm > 0.0 && focal_length_mm.is_finite()) {
        return Err(Error::invalid(format!("focal length must be > 0, got {focal_length_mm}")));
    }
    if distance_mm.is_nan() || distance_mm <= focal_length_mm {
        return Err(Error::BehindFocalPlane {
            distance_mm,
            focal_length_mm,
        });
    }
    if distance_mm.is_infinite() {
        return Ok(focal_length_mm);
    }
    Ok(focal_length_mm * distance_mm / (distance_mm - focal_length_mm))
}

/// Defocus in um of an object at `object_distance_mm` when the lens is focused
/// at `focus_distance_mm`. Either distance may be `f64::INFINITY`.
pub fn defocus_from_depth(object_distance_mm: f64, focal_length_mm: f64, focus_distance_mm: f64) -> Result<f64> {
    let object = image_distance(object_distance_mm, focal_length_mm)?;
    let focus = image_distance(focus_distance_mm, focal_length_mm)?;
    Ok((object - focus) * 1000.0)
}

/// Per-pixel defocus in um, laid out like the image it applies to.
#[derive(Debug, Clone, PartialEq)]
pub struct DefocusMap {
    width: usize,
    height: usize,
    dz_values: Vec<f64>,
}

impl DefocusMap {
    pub fn new(width: usize, height: usize, dz_values: Vec<f64>) -> Result<Self> {
        if dz_values.len() != width * height {
            return Err(Error::dims(format!(
                "{} defocus values for a {width}x{height} map",
                dz_values.len()
            )));
        }
        if dz_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("defocus map contains non-finite values"));
        }
        Ok(Self {
            width,
            height,
            dz_values,
        })
    }

    pub fn constant(width: usize, height: usize, dz_um: f64) -> Result<Self> {
        Self::new(width, height, vec![dz_um; width * height])
    }

    /// `dz = offset + scale * raw sample`.
    pub fn from_pgm(pgm: &Pgm, offset_um: f64, scale_um: f64) -> Result<Self> {
        let values = pgm.samples.iter().map(|&s| offset_um + scale_um * s as f64).collect();
        Self::new(pgm.width, pgm.height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.dz_values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.dz_values[y * self.width + x]
    }
}

/// Defocus varying linearly from the left column to the right column.
pub fn linear_depth_gradient(width: usize, height: usize, dz_left_um: f64, dz_right_um: f64) -> Result<DefocusMap> {
    if width < 2 {
        return Err(Error::invalid(format!("a depth gradient needs width >= 2, got {width}")));
    }
    let span = (width - 1) as f64;
    let row: Vec<f64> = (0..width)
        .map(|x| dz_left_um + (dz_right_um - dz_left_um) * x as f64 / span)
        .collect();
    let values = (0..height).flat_map(|_| row.iter().copied()).collect();
    DefocusMap::new(width, height, values)
}
