//! Binary PGM (P5) codec, 8- and 16-bit.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Raw P5 samples as stored in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

impl PgmDepth {
    pub fn maxval(self) -> u16 {
        match self {
            PgmDepth::Eight => 255,
            PgmDepth::Sixteen => 65535,
        }
    }
}

impl Pgm {
    /// Quantizes `values` (nominally in `[0, 1]`) with round-half-up, clamping
    /// anything outside the range.
    pub fn quantize(width: usize, height: usize, values: &[f64], depth: PgmDepth) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::dims(format!("{} values for a {width}x{height} image", values.len())));
        }
        let maxval = depth.maxval();
        let m = maxval as f64;
        let samples = values
            .iter()
            .map(|v| (v * m + 0.5).floor().clamp(0.0, m) as u16)
            .collect();
        Ok(Self {
            width,
            height,
            maxval,
            samples,
        })
    }

    /// Samples divided by `maxval`.
    pub fn unit_values(&self) -> Vec<f64> {
        let m = self.maxval as f64;
        self.samples.iter().map(|&s| s as f64 / m).collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let wide = self.maxval > 255;
        let header = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval);
        let mut out = Vec::with_capacity(header.len() + self.samples.len() * if wide { 2 } else { 1 });
        out.extend_from_slice(header.as_bytes());
        for &s in &self.samples {
            if wide {
                out.extend_from_slice(&s.to_be_bytes());
            } else {
                out.push(s as u8);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut header = Header { bytes, pos: 0 };
        if bytes.get(..2) != Some(b"P5") {
            return Err(Error::BadMagic { expected: "P5" });
        }
        header.pos = 2;
        let width = header.number()?;
        let height = header.number()?;
        let maxval = header.number()?;
        if width == 0 || height == 0 {
            return Err(Error::Format(format!("empty image {width}x{height}")));
        }
        if !(1..=65535).contains(&maxval) {
            return Err(Error::Format(format!("maxval {maxval} outside 1..=65535")));
        }
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(header.pos) {
            Some(b) if b.is_ascii_whitespace() => header.pos += 1,
            Some(_) => return Err(Error::Format("missing whitespace after maxval".into())),
            None => return Err(Error::TruncatedFile),
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
        let wide = maxval > 255;
        let need = n * if wide { 2 } else { 1 };
        let raster = &bytes[header.pos..];
        if raster.len() < need {
            return Err(Error::TruncatedFile);
        }
        let samples: Vec<u16> = if wide {
            raster[..need]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        } else {
            raster[..need].iter().map(|&b| b as u16).collect()
        };
        if let Some(s) = samples.iter().find(|&&s| s as usize > maxval) {
            return Err(Error::Format(format!("sample {s} exceeds maxval {maxval}")));
        }
        Ok(Self {
            width,
            height,
            maxval: maxval as u16,
            samples,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    /// Skips whitespace and `#` comments, then parses a decimal number.
    fn number(&mut self) -> Result<usize> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err(Error::TruncatedFile),
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("expected a number at header byte {start}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::Format("header number out of range".into()))
    }
}
