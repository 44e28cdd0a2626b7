use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FieldPoint, PsfGrid};
use crate::binio::ByteReader;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PSFD";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub field: FieldPoint,
    pub psf: PsfGrid,
}

/// Ordered `(field point, PSF)` pairs that all share one grid geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfDataset {
    samples: Vec<Sample>,
    width: usize,
    height: usize,
    pitch_um: f64,
}

impl PsfDataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InsufficientData("a dataset needs at least one sample".into()))?;
        let (width, height, pitch_um) = (first.psf.width(), first.psf.height(), first.psf.pitch_um());
        for (i, s) in samples.iter().enumerate() {
            if s.psf.width() != width || s.psf.height() != height || s.psf.pitch_um() != pitch_um {
                return Err(Error::dims(format!(
                    "sample {i} is {}x{} @ {} um, dataset is {width}x{height} @ {pitch_um} um",
                    s.psf.width(),
                    s.psf.height(),
                    s.psf.pitch_um()
                )));
            }
        }
        Ok(Self {
            samples,
            width,
            height,
            pitch_um,
        })
    }

    /// Concatenates datasets with identical geometry, keeping order.
    pub fn merge(parts: impl IntoIterator<Item = PsfDataset>) -> Result<Self> {
        let samples: Vec<Sample> = parts.into_iter().flat_map(|d| d.samples).collect();
        Self::new(samples)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn grid_width(&self) -> usize {
        self.width
    }

    pub fn grid_height(&self) -> usize {
        self.height
    }

    pub fn pitch_um(&self) -> f64 {
        self.pitch_um
    }

    /// `(min, max)` of defocus, image height and azimuth over all samples.
    pub fn envelope(&self) -> [(f64, f64); 3] {
        let mut env = [(f64::INFINITY, f64::NEG_INFINITY); 3];
        for s in &self.samples {
            let raw = [s.field.dz_um(), s.field.r_mm(), s.field.phi_deg()];
            for (e, v) in env.iter_mut().zip(raw) {
                e.0 = e.0.min(v);
                e.1 = e.1.max(v);
            }
        }
        env
    }

    /// Returns a dataset holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.samples[i].clone()).collect())
    }

    /// Copy with every grid scaled to unit volume.
    pub fn normalized(&self) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                Ok(Sample {
                    field: s.field,
                    psf: super::normalize_volume(&s.psf)?,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(samples)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_psfd(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_psfd(BufReader::new(File::open(path)?))
    }
}

/// Writes the little-endian `.psfd` container. Intensities are stored as f32.
pub fn write_psfd<W: Write>(mut w: W, ds: &PsfDataset) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&u32_field(ds.len(), "sample count")?.to_le_bytes())?;
    w.write_all(&u32_field(ds.width, "grid width")?.to_le_bytes())?;
    w.write_all(&u32_field(ds.height, "grid height")?.to_le_bytes())?;
    w.write_all(&ds.pitch_um.to_le_bytes())?;
    for s in &ds.samples {
        w.write_all(&s.field.dz_um().to_le_bytes())?;
        w.write_all(&s.field.r_mm().to_le_bytes())?;
        w.write_all(&s.field.phi_deg().to_le_bytes())?;
        for v in s.psf.values() {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_psfd<R: Read>(r: R) -> Result<PsfDataset> {
    let mut r = ByteReader::new(r);
    if &r.array::<4>()? != MAGIC {
        return Err(Error::BadMagic { expected: "PSFD" });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let count = r.u32()? as usize;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let pitch_um = r.f64()?;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("grid size overflows".into()))?;

    let mut samples = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let field = FieldPoint::new(r.f64()?, r.f64()?, r.f64()?);
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(r.f32()? as f64);
        }
        let psf = PsfGrid::new(width, height, pitch_um, values)
            .map_err(|e| Error::Format(format!("bad sample grid: {e}")))?;
        samples.push(Sample { field, psf });
    }
    PsfDataset::new(samples)
}

fn u32_field(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("{what} {v} does not fit in u32")))
}
