//! Tiled spatially-variant convolution.

use rayon::prelude::*;

use super::{pixel_to_field, DefocusMap, FieldMapping, Image};
use crate::ann::MlpModel;
use crate::error::{Error, Result};
use crate::psf::{PsfGrid, PsfSource};
use crate::synth::{SynthKernel, MAX_DEFOCUS_UM};

/// A PSF source usable as a rendering kernel.
pub trait KernelSource: PsfSource {
    fn kernel_pitch_um(&self) -> f64;

    /// Defocus interval the source is trusted on; queries are clamped into it.
    fn dz_envelope(&self) -> (f64, f64);
}

impl KernelSource for MlpModel {
    fn kernel_pitch_um(&self) -> f64 {
        self.output_grid().pitch_um
    }

    fn dz_envelope(&self) -> (f64, f64) {
        let (lo, hi) = self.input_norm()[0].range();
        (lo.max(-MAX_DEFOCUS_UM), hi.min(MAX_DEFOCUS_UM))
    }
}

impl KernelSource for SynthKernel {
    fn kernel_pitch_um(&self) -> f64 {
        self.pitch_um
    }

    fn dz_envelope(&self) -> (f64, f64) {
        (-MAX_DEFOCUS_UM, MAX_DEFOCUS_UM)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: Image,
    /// Tile kernels whose defocus had to be clamped into the source envelope.
    pub clamped_dz: usize,
}

/// Tile centers and per-pixel interpolation along one axis.
struct Axis {
    centers: Vec<usize>,
    /// For each pixel: lower tile, upper tile and the weight of the upper one.
    blend: Vec<(usize, usize, f64)>,
}

impl Axis {
    fn new(n: usize, tile: usize) -> Self {
        let centers: Vec<usize> = (0..n)
            .step_by(tile)
            .map(|start| start + (tile.min(n - start) - 1) / 2)
            .collect();
        let last = centers.len() - 1;
        let mut blend = Vec::with_capacity(n);
        let mut t = 0;
        for p in 0..n {
            while t < last && centers[t + 1] <= p {
                t += 1;
            }
            if p <= centers[0] {
                blend.push((0, 0, 0.0));
            } else if t == last {
                blend.push((last, last, 0.0));
            } else {
                let (a, b) = (centers[t], centers[t + 1]);
                blend.push((t, t + 1, (p - a) as f64 / (b - a) as f64));
            }
        }
        Self { centers, blend }
    }

    /// Up to two `(tile, weight)` pairs with nonzero weight.
    fn weights(&self, p: usize) -> impl Iterator<Item = (usize, f64)> {
        let (a, b, t) = self.blend[p];
        [(a, 1.0 - t), (b, t)].into_iter().filter(|&(_, w)| w != 0.0)
    }
}

/// Kernel `k` applied at output pixel `(x, y)` with edge-clamped input.
fn apply_kernel(image: &Image, k: &PsfGrid, x: usize, y: usize) -> f64 {
    let (kw, kh) = (k.width() as isize, k.height() as isize);
    let (kcx, kcy) = (kw / 2, kh / 2);
    let max_x = image.width() as isize - 1;
    let max_y = image.height() as isize - 1;
    let kv = k.values();
    let mut acc = 0.0;
    for j in 0..kh {
        let sy = (y as isize - (j - kcy)).clamp(0, max_y) as usize;
        let row = &image.values()[sy * image.width()..][..image.width()];
        let krow = &kv[(j * kw) as usize..][..kw as usize];
        for (i, w) in krow.iter().enumerate() {
            let sx = (x as isize - (i as isize - kcx)).clamp(0, max_x) as usize;
            acc += w * row[sx];
        }
    }
    acc
}

/// Convolves `image` with kernels inferred per tile.
///
/// Each `tile_px x tile_px` tile gets one kernel, inferred at its center
/// pixel with that pixel's defocus. Every output pixel blends the responses
/// of the (up to four) surrounding tile kernels with bilinear weights between
/// tile centers, so `tile_px = 1` is exact per-pixel inference. Borders
/// replicate edge pixels. Rows are processed in parallel; each output value
/// is computed independently, so the result does not depend on scheduling.
pub fn convolve_spatially_variant<K: KernelSource + Sync + ?Sized>(
    image: &Image,
    source: &K,
    mapping: &FieldMapping,
    dzmap: &DefocusMap,
    tile_px: usize,
) -> Result<Rendered> {
    let kernel_pitch = source.kernel_pitch_um();
    if (kernel_pitch - image.pitch_um()).abs() > 1e-9 * image.pitch_um() {
        return Err(Error::PitchMismatch {
            kernel_um: kernel_pitch,
            image_um: image.pitch_um(),
        });
    }
    if dzmap.width() != image.width() || dzmap.height() != image.height() {
        return Err(Error::dims(format!(
            "defocus map is {}x{} but the image is {}x{}",
            dzmap.width(),
            dzmap.height(),
            image.width(),
            image.height()
        )));
    }
    if tile_px == 0 {
        return Err(Error::invalid("tile size must be at least 1"));
    }

    let xs = Axis::new(image.width(), tile_px);
    let ys = Axis::new(image.height(), tile_px);
    let (lo, hi) = source.dz_envelope();
    let centers: Vec<(usize, usize)> = ys
        .centers
        .iter()
        .flat_map(|&cy| xs.centers.iter().map(move |&cx| (cx, cy)))
        .collect();
    let kernels: Vec<(PsfGrid, bool)> = centers
        .par_iter()
        .map(|&(cx, cy)| {
            let dz = dzmap.get(cx, cy);
            let clamped = dz.clamp(lo, hi);
            let fp = pixel_to_field(mapping, cx as f64, cy as f64, clamped);
            (source.psf(&fp), clamped != dz)
        })
        .collect();
    let clamped_dz = kernels.iter().filter(|(_, c)| *c).count();
    let tiles_x = xs.centers.len();

    let mut out = vec![0.0; image.width() * image.height()];
    out.par_chunks_mut(image.width()).enumerate().for_each(|(y, row)| {
        for (x, dst) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (ty, wy) in ys.weights(y) {
                for (tx, wx) in xs.weights(x) {
                    let k = &kernels[ty * tiles_x + tx].0;
                    acc += wy * wx * apply_kernel(image, k, x, y);
                }
            }
            *dst = acc;
        }
    });
    Ok(Rendered {
        image: Image::new(image.width(), image.height(), image.pitch_um(), out)?,
        clamped_dz,
    })
}
