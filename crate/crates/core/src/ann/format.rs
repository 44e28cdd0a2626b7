//! `.psfn` model files, little-endian:
//!
//! ```text
//! "PSFN" | version u32 = 1 | n_layers u32 | layer sizes u32 x n_layers
//! | hidden activation u8 | output activation u8
//! | output width u32 | output height u32 | output pitch f64
//! | 3 x (offset f64, scale f64)
//! | per layer: weights f64 (rows = out, cols = in), biases f64
//! ```

use std::fs;
use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::model::{DenseLayer, HiddenActivation, InputNorm, MlpModel, OutputActivation, OutputGrid};
use crate::binio::ByteReader;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PSFN";
const VERSION: u32 = 1;
/// Guards allocation when a corrupt header claims absurd sizes.
const MAX_LAYER_WIDTH: u32 = 1 << 24;

pub fn serialize(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + model.parameter_count() * 8);
    let sizes = model.layer_sizes();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    out.push(model.hidden_activation().code());
    out.push(model.output_activation().code());
    let g = model.output_grid();
    out.extend_from_slice(&(g.width as u32).to_le_bytes());
    out.extend_from_slice(&(g.height as u32).to_le_bytes());
    out.extend_from_slice(&g.pitch_um.to_le_bytes());
    for n in model.input_norm() {
        out.extend_from_slice(&n.offset.to_le_bytes());
        out.extend_from_slice(&n.scale.to_le_bytes());
    }
    for layer in model.layers() {
        for w in layer.weights().iter() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for b in layer.biases() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

pub fn deserialize(bytes: &[u8]) -> Result<MlpModel> {
    read_model(bytes)
}

pub fn read_model<R: Read>(r: R) -> Result<MlpModel> {
    let mut r = ByteReader::new(r);
    if &r.array::<4>()? != MAGIC {
        return Err(Error::BadMagic { expected: "PSFN" });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let n_layers = r.u32()?;
    if !(2..=64).contains(&n_layers) {
        return Err(Error::Format(format!("implausible layer count {n_layers}")));
    }
    let mut sizes = Vec::with_capacity(n_layers as usize);
    for _ in 0..n_layers {
        let s = r.u32()?;
        if s == 0 || s > MAX_LAYER_WIDTH {
            return Err(Error::Format(format!("implausible layer width {s}")));
        }
        sizes.push(s as usize);
    }
    let hidden = r.u8()?;
    let hidden = HiddenActivation::from_code(hidden)
        .ok_or_else(|| Error::Format(format!("unknown hidden activation code {hidden}")))?;
    let output = r.u8()?;
    let output = OutputActivation::from_code(output)
        .ok_or_else(|| Error::Format(format!("unknown output activation code {output}")))?;
    let grid = OutputGrid {
        width: r.u32()? as usize,
        height: r.u32()? as usize,
        pitch_um: r.f64()?,
    };
    let mut norm = [InputNorm::IDENTITY; 3];
    for n in &mut norm {
        n.offset = r.f64()?;
        n.scale = r.f64()?;
    }
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for pair in sizes.windows(2) {
        let (inputs, outputs) = (pair[0], pair[1]);
        let mut w = Vec::with_capacity(inputs * outputs);
        for _ in 0..inputs * outputs {
            w.push(r.f64()?);
        }
        let mut b = Vec::with_capacity(outputs);
        for _ in 0..outputs {
            b.push(r.f64()?);
        }
        let weights = Array2::from_shape_vec((outputs, inputs), w)
            .expect("buffer length matches layer shape");
        layers.push(DenseLayer::from_parts(weights, Array1::from(b)));
    }
    if !r.at_end()? {
        return Err(Error::Format("trailing bytes after model parameters".into()));
    }
    MlpModel::from_layers(layers, hidden, output, norm, grid)
}

impl MlpModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serialize(self))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        deserialize(&fs::read(path)?)
    }
}
