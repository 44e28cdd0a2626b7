use super::PsfGrid;
use crate::error::{Error, Result};

/// Intensity-weighted mean position `(cx, cy)` in pixel-index coordinates.
pub fn centroid(grid: &PsfGrid) -> Result<(f64, f64)> {
    let total = grid.sum();
    if total <= 0.0 {
        return Err(Error::AllZeroGrid);
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for (y, row) in grid.values().chunks_exact(grid.width()).enumerate() {
        let row_sum: f64 = row.iter().sum();
        sy += y as f64 * row_sum;
        sx += row
            .iter()
            .enumerate()
            .map(|(x, v)| x as f64 * v)
            .sum::<f64>();
    }
    Ok((sx / total, sy / total))
}

/// Integer shift that moves `c` onto the center of an `n`-pixel axis.
///
/// Ties round toward the lower pixel, so a point mass already sitting on
/// pixel `n / 2` stays put for even `n` as well as odd `n`.
fn centering_offset(c: f64, n: usize) -> i64 {
    (c - (n as f64 - 1.0) / 2.0 - 0.5).ceil() as i64
}

/// Shifts the grid so its rounded centroid lands on the center pixel of an
/// `out_size` square, zero-filling anything that falls outside the input.
pub fn center_and_crop(grid: &PsfGrid, out_size: usize) -> Result<PsfGrid> {
    if out_size == 0 {
        return Err(Error::invalid("crop size must be at least 1"));
    }
    let (cx, cy) = centroid(grid)?;
    let ox = centering_offset(cx, out_size);
    let oy = centering_offset(cy, out_size);
    let (w, h) = (grid.width() as i64, grid.height() as i64);

    let mut out = vec![0.0; out_size * out_size];
    for y in 0..out_size {
        let sy = y as i64 + oy;
        if sy < 0 || sy >= h {
            continue;
        }
        for x in 0..out_size {
            let sx = x as i64 + ox;
            if sx >= 0 && sx < w {
                out[y * out_size + x] = grid.get(sx as usize, sy as usize);
            }
        }
    }
    Ok(PsfGrid::from_parts_unchecked(
        out_size,
        out_size,
        grid.pitch_um(),
        out,
    ))
}

/// Sparse 1-D area weights: for each output bin, the `(input index, covered
/// fraction of that input pixel)` pairs.
fn bin_weights(n_in: usize, n_out: usize, ratio: f64) -> Vec<Vec<(usize, f64)>> {
    // Positions in input-pixel units; output footprint is centered on the input.
    let origin = n_in as f64 / 2.0 - n_out as f64 * ratio / 2.0;
    (0..n_out)
        .map(|j| {
            let a = origin + j as f64 * ratio;
            let b = a + ratio;
            let first = a.floor().max(0.0) as usize;
            let last = (b.ceil().max(0.0) as usize).min(n_in);
            (first..last)
                .filter_map(|i| {
                    let lo = a.max(i as f64);
                    let hi = b.min(i as f64 + 1.0);
                    (hi > lo).then(|| (i, hi - lo))
                })
                .collect()
        })
        .collect()
}

/// Area-averaged downsampling onto a `target_size` square at `target_pitch_um`.
///
/// Each output pixel receives the input intensity integrated over its
/// physical footprint; the output window is centered on the input center and
/// reads zeros beyond the input extent.
pub fn resample(grid: &PsfGrid, target_pitch_um: f64, target_size: usize) -> Result<PsfGrid> {
    if target_size == 0 {
        return Err(Error::invalid("target size must be at least 1"));
    }
    if !(target_pitch_um >= grid.pitch_um()) {
        return Err(Error::UpsampleNotSupported {
            source_um: grid.pitch_um(),
            target_um: target_pitch_um,
        });
    }
    let ratio = target_pitch_um / grid.pitch_um();
    let wx = bin_weights(grid.width(), target_size, ratio);
    let wy = bin_weights(grid.height(), target_size, ratio);

    // Bin along x for every input row, then along y.
    let mut rows = vec![0.0; grid.height() * target_size];
    for (y, row) in grid.values().chunks_exact(grid.width()).enumerate() {
        for (j, weights) in wx.iter().enumerate() {
            rows[y * target_size + j] = weights.iter().map(|&(i, w)| w * row[i]).sum();
        }
    }
    let mut out = vec![0.0; target_size * target_size];
    for (k, weights) in wy.iter().enumerate() {
        for &(y, w) in weights {
            let src = &rows[y * target_size..(y + 1) * target_size];
            for (dst, s) in out[k * target_size..(k + 1) * target_size]
                .iter_mut()
                .zip(src)
            {
                *dst += w * s;
            }
        }
    }
    Ok(PsfGrid::from_parts_unchecked(
        target_size,
        target_size,
        target_pitch_um,
        out,
    ))
}

/// Scales the grid so its values sum to one.
pub fn normalize_volume(grid: &PsfGrid) -> Result<PsfGrid> {
    let total = grid.sum();
    if total <= 0.0 {
        return Err(Error::AllZeroGrid);
    }
    let values = grid.values().iter().map(|v| v / total).collect();
    Ok(PsfGrid::from_parts_unchecked(
        grid.width(),
        grid.height(),
        grid.pitch_um(),
        values,
    ))
}

/// Row-major copy of the grid values.
pub fn flatten(grid: &PsfGrid) -> Vec<f64> {
    grid.values().to_vec()
}

pub fn unflatten(values: Vec<f64>, width: usize, height: usize, pitch_um: f64) -> Result<PsfGrid> {
    PsfGrid::new(width, height, pitch_um, values)
}

/// The full capture-to-kernel chain: center on the centroid and crop, bin
/// down to the sensor pitch, then normalize to unit volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preprocess {
    pub crop_size: usize,
    pub target_pitch_um: f64,
    pub target_size: usize,
}

impl Default for Preprocess {
    fn default() -> Self {
        Self {
            crop_size: 256,
            target_pitch_um: 6.5,
            target_size: 13,
        }
    }
}

impl Preprocess {
    pub fn apply(&self, grid: &PsfGrid) -> Result<PsfGrid> {
        let cropped = center_and_crop(grid, self.crop_size)?;
        let binned = resample(&cropped, self.target_pitch_um, self.target_size)?;
        normalize_volume(&binned)
    }
}
