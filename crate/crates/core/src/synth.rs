//! Deterministic synthetic aberrated lens.
//!
//! Stands in for measured PSF captures. Each PSF is an anisotropic Gaussian
//! whose radial axis points along the field azimuth:
//!
//! - best focus moves with image height (field curvature), so the effective
//!   defocus is `dz - curvature * R^2`;
//! - defocus widens both axes, by a different amount on either side of focus
//!   when `asymmetry_eps > 0`;
//! - astigmatism widens the radial axis with `|R|`;
//! - a coma-like skew stretches the outward half of the radial profile, which
//!   pushes mass away from the optical axis.
//!
//! Pixel values are integrated over the pixel footprint by supersampling, so
//! coarse sensor-pitch grids are rendered without aliasing. Noise is a hash of
//! seed, field point and pixel index and never depends on evaluation order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::psf::{normalize_volume, FieldPoint, PsfDataset, PsfGrid, PsfSource, Sample};

/// Largest |defocus| in the measurement envelope, um.
pub const MAX_DEFOCUS_UM: f64 = 50.0;
/// Largest |image height| in the measurement envelope, mm.
pub const MAX_IMAGE_HEIGHT_MM: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthLensSpec {
    pub focal_length_mm: f64,
    pub seed: u64,
    pub base_sigma_um: f64,
    pub defocus_blur_rate: f64,
    pub field_curvature_um_per_mm2: f64,
    pub astigmatism_rate: f64,
    pub coma_skew_rate: f64,
    pub asymmetry_eps: f64,
    pub noise_floor: f64,
}

impl Default for SynthLensSpec {
    fn default() -> Self {
        Self {
            focal_length_mm: 6.0,
            seed: 0,
            base_sigma_um: 5.0,
            defocus_blur_rate: 0.25,
            field_curvature_um_per_mm2: 2.0,
            astigmatism_rate: 0.1,
            coma_skew_rate: 0.05,
            asymmetry_eps: 0.2,
            noise_floor: 0.002,
        }
    }
}

const SPEC_KEYS: [&str; 9] = [
    "focal_length_mm",
    "seed",
    "base_sigma_um",
    "defocus_blur_rate",
    "field_curvature_um_per_mm2",
    "astigmatism_rate",
    "coma_skew_rate",
    "asymmetry_eps",
    "noise_floor",
];

impl SynthLensSpec {
    /// A lens with no rotational or through-focus symmetry breaking and no noise.
    pub fn symmetric() -> Self {
        Self {
            field_curvature_um_per_mm2: 0.0,
            asymmetry_eps: 0.0,
            noise_floor: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("focal_length_mm", self.focal_length_mm),
            ("base_sigma_um", self.base_sigma_um),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("defocus_blur_rate", self.defocus_blur_rate),
            ("astigmatism_rate", self.astigmatism_rate),
            ("coma_skew_rate", self.coma_skew_rate),
            ("asymmetry_eps", self.asymmetry_eps),
            ("noise_floor", self.noise_floor),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !self.field_curvature_um_per_mm2.is_finite() {
            return Err(Error::invalid("field_curvature_um_per_mm2 must be finite"));
        }
        Ok(())
    }

    /// Flat `key=value` text, one field per line.
    pub fn to_kv(&self) -> String {
        let values = [
            self.focal_length_mm.to_string(),
            self.seed.to_string(),
            self.base_sigma_um.to_string(),
            self.defocus_blur_rate.to_string(),
            self.field_curvature_um_per_mm2.to_string(),
            self.astigmatism_rate.to_string(),
            self.coma_skew_rate.to_string(),
            self.asymmetry_eps.to_string(),
            self.noise_floor.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in SPEC_KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Parses `key=value` lines. Missing keys keep their defaults; unknown keys are errors.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key=value", n + 1)))?;
            let k = k.trim();
            if !SPEC_KEYS.contains(&k) {
                return Err(Error::Format(format!("line {}: unknown key {k:?}", n + 1)));
            }
            map.insert(k.to_string(), v.trim().to_string());
        }
        let mut spec = Self::default();
        for (k, v) in &map {
            let bad = || Error::Format(format!("bad value for {k}: {v:?}"));
            if k == "seed" {
                spec.seed = v.parse().map_err(|_| bad())?;
                continue;
            }
            let x: f64 = v.parse().map_err(|_| bad())?;
            match k.as_str() {
                "focal_length_mm" => spec.focal_length_mm = x,
                "base_sigma_um" => spec.base_sigma_um = x,
                "defocus_blur_rate" => spec.defocus_blur_rate = x,
                "field_curvature_um_per_mm2" => spec.field_curvature_um_per_mm2 = x,
                "astigmatism_rate" => spec.astigmatism_rate = x,
                "coma_skew_rate" => spec.coma_skew_rate = x,
                "asymmetry_eps" => spec.asymmetry_eps = x,
                "noise_floor" => spec.noise_floor = x,
                _ => unreachable!(),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Radial (inner half), radial outer half and tangential widths in um.
    fn widths(&self, fp: &FieldPoint) -> (f64, f64, f64) {
        let r = fp.r_mm().abs();
        let dz_eff = fp.dz_um() - self.field_curvature_um_per_mm2 * fp.r_mm() * fp.r_mm();
        let side = if dz_eff > 0.0 {
            1.0
        } else if dz_eff < 0.0 {
            -1.0
        } else {
            0.0
        };
        let defocus = self.defocus_blur_rate * dz_eff.abs() * (1.0 + side * self.asymmetry_eps);
        let radial = self.base_sigma_um * (1.0 + self.astigmatism_rate * r) + defocus;
        let tangential = self.base_sigma_um + defocus;
        let outer = radial * (1.0 + self.coma_skew_rate * r);
        (radial, outer, tangential)
    }
}

/// Cartesian product of defocus, image height and azimuth samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    pub dz_values: Vec<f64>,
    pub r_values: Vec<f64>,
    pub phi_values: Vec<f64>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

impl SamplingGrid {
    pub fn new(dz_values: Vec<f64>, r_values: Vec<f64>, phi_values: Vec<f64>) -> Result<Self> {
        let grid = Self {
            dz_values,
            r_values,
            phi_values,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn single(fp: FieldPoint) -> Self {
        Self {
            dz_values: vec![fp.dz_um()],
            r_values: vec![fp.r_mm()],
            phi_values: vec![fp.phi_deg()],
        }
    }

    /// Reconstruction of the first measurement series (243 points): dense in
    /// image height and azimuth, three defocus planes near focus.
    pub fn series_a() -> Self {
        Self {
            dz_values: vec![-10.0, 0.0, 10.0],
            r_values: linspace(0.0, MAX_IMAGE_HEIGHT_MM, 9),
            phi_values: (0..9).map(|i| 40.0 * i as f64).collect(),
        }
    }

    /// Reconstruction of the second measurement series (972 points): twelve
    /// defocus planes across the full +-50 um range, azimuths interleaved
    /// with series A.
    pub fn series_b() -> Self {
        Self {
            dz_values: linspace(-MAX_DEFOCUS_UM, MAX_DEFOCUS_UM, 12),
            r_values: linspace(0.0, MAX_IMAGE_HEIGHT_MM, 9),
            phi_values: (0..9).map(|i| 20.0 + 40.0 * i as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.len() == 0 {
            return Err(Error::invalid("sampling grid is empty"));
        }
        let all = self.dz_values.iter().chain(&self.r_values).chain(&self.phi_values);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sampling grid contains non-finite values"));
        }
        if let Some(dz) = self.dz_values.iter().find(|v| v.abs() > MAX_DEFOCUS_UM) {
            return Err(Error::invalid(format!("defocus {dz} um outside +-{MAX_DEFOCUS_UM}")));
        }
        if let Some(r) = self.r_values.iter().find(|v| v.abs() > MAX_IMAGE_HEIGHT_MM) {
            return Err(Error::invalid(format!(
                "image height {r} mm outside +-{MAX_IMAGE_HEIGHT_MM}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dz_values.len() * self.r_values.len() * self.phi_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Field points ordered defocus-major, then image height, then azimuth.
    pub fn points(&self) -> Vec<FieldPoint> {
        let mut pts = Vec::with_capacity(self.len());
        for &dz in &self.dz_values {
            for &r in &self.r_values {
                for &phi in &self.phi_values {
                    pts.push(FieldPoint::new(dz, r, phi));
                }
            }
        }
        pts
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` from the seed, the field point and a pixel index.
fn hash_unit(seed: u64, fp: &FieldPoint, pixel: usize) -> f64 {
    let mut h = mix64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for bits in [
        fp.dz_um().to_bits(),
        fp.r_mm().to_bits(),
        fp.phi_deg().to_bits(),
        pixel as u64,
    ] {
        h = mix64(h ^ bits);
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Renders the synthetic PSF at `fp` onto a `width x height` grid.
///
/// The optical axis sits at the grid center; the image y axis points up
/// (row 0 is the top). Values are peak-normalized before noise is added.
pub fn synth_psf(
    spec: &SynthLensSpec,
    fp: &FieldPoint,
    width: usize,
    height: usize,
    pitch_um: f64,
) -> Result<PsfGrid> {
    spec.validate()?;
    if width < 3 || height < 3 {
        return Err(Error::invalid(format!("synthetic PSF needs at least 3x3, got {width}x{height}")));
    }
    if !(pitch_um > 0.0 && pitch_um.is_finite()) {
        return Err(Error::invalid(format!("pitch must be > 0, got {pitch_um}")));
    }

    let (inner, outer, tangential) = spec.widths(fp);
    let sign = if fp.r_mm() < 0.0 { -1.0 } else { 1.0 };
    let (sin_phi, cos_phi) = fp.phi_deg().to_radians().sin_cos();
    let (ux, uy) = (sign * cos_phi, sign * sin_phi);

    // Sub-sample spacing at most half the narrowest width.
    let supersample = ((2.0 * pitch_um / tangential).ceil() as usize).clamp(1, 32);
    let offsets: Vec<f64> = (0..supersample)
        .map(|s| ((s as f64 + 0.5) / supersample as f64 - 0.5) * pitch_um)
        .collect();
    let inv_samples = 1.0 / (supersample * supersample) as f64;
    let (inv_inner, inv_outer, inv_tan) = (
        0.5 / (inner * inner),
        0.5 / (outer * outer),
        0.5 / (tangential * tangential),
    );

    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let mut values = Vec::with_capacity(width * height);
    for row in 0..height {
        let y0 = (cy - row as f64) * pitch_um;
        for col in 0..width {
            let x0 = (col as f64 - cx) * pitch_um;
            let mut acc = 0.0;
            for &oy in &offsets {
                // sub-sample rows run top to bottom like pixel rows
                let y = y0 - oy;
                for &ox in &offsets {
                    let x = x0 + ox;
                    let radial = x * ux + y * uy;
                    let tang = -x * uy + y * ux;
                    let k = if radial >= 0.0 { inv_outer } else { inv_inner };
                    acc += (-(radial * radial * k) - tang * tang * inv_tan).exp();
                }
            }
            let mut v = acc * inv_samples;
            if spec.noise_floor > 0.0 {
                v += spec.noise_floor * hash_unit(spec.seed, fp, row * width + col);
            }
            values.push(v);
        }
    }
    PsfGrid::new(width, height, pitch_um, values)
}

/// One synthetic PSF per grid point, in `SamplingGrid::points` order.
pub fn generate_dataset(
    spec: &SynthLensSpec,
    grid: &SamplingGrid,
    width: usize,
    height: usize,
    pitch_um: f64,
) -> Result<PsfDataset> {
    grid.validate()?;
    let samples = grid
        .points()
        .into_par_iter()
        .map(|field| {
            synth_psf(spec, &field, width, height, pitch_um).map(|psf| Sample { field, psf })
        })
        .collect::<Result<Vec<_>>>()?;
    PsfDataset::new(samples)
}

/// Merges one dataset per grid and normalizes every PSF to unit volume,
/// the form the trainer expects.
pub fn training_dataset(
    spec: &SynthLensSpec,
    grids: &[SamplingGrid],
    size: usize,
    pitch_um: f64,
) -> Result<PsfDataset> {
    let parts = grids
        .iter()
        .map(|g| generate_dataset(spec, g, size, size, pitch_um))
        .collect::<Result<Vec<_>>>()?;
    PsfDataset::merge(parts)?.normalized()
}

/// Series A and B merged at 13 x 13, 6.5 um.
pub fn series_ab(spec: &SynthLensSpec) -> Result<PsfDataset> {
    training_dataset(spec, &[SamplingGrid::series_a(), SamplingGrid::series_b()], 13, 6.5)
}

/// Unit-volume kernels straight from the synthetic lens.
#[derive(Debug, Clone)]
pub struct SynthKernel {
    pub spec: SynthLensSpec,
    pub size: usize,
    pub pitch_um: f64,
}

impl PsfSource for SynthKernel {
    fn psf(&self, fp: &FieldPoint) -> PsfGrid {
        let raw = synth_psf(&self.spec, fp, self.size, self.size, self.pitch_um)
            .expect("synthetic kernel parameters were validated at construction");
        normalize_volume(&raw).expect("synthetic PSFs have positive volume")
    }
}

impl SynthKernel {
    pub fn new(spec: SynthLensSpec, size: usize, pitch_um: f64) -> Result<Self> {
        // Render once to surface parameter errors up front.
        synth_psf(&spec, &FieldPoint::new(0.0, 0.0, 0.0), size, size, pitch_um)?;
        Ok(Self {
            spec,
            size,
            pitch_um,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let spec = SynthLensSpec {
            seed: 17,
            asymmetry_eps: 0.125,
            ..Default::default()
        };
        let text = spec.to_kv();
        assert!(text.lines().any(|l| l == "coma_skew_rate=0.05"));
        assert_eq!(SynthLensSpec::from_kv(&text).unwrap(), spec);
        assert!(SynthLensSpec::from_kv("bogus=1").is_err());
        assert!(SynthLensSpec::from_kv("noise_floor=-1").is_err());
    }

    #[test]
    fn presets_match_series_sizes() {
        assert_eq!(SamplingGrid::series_a().len(), 243);
        assert_eq!(SamplingGrid::series_b().len(), 972);
        assert!(SamplingGrid::series_a().validate().is_ok());
        assert!(SamplingGrid::series_b().validate().is_ok());
    }

    #[test]
    fn grid_envelope_is_enforced() {
        assert!(SamplingGrid::new(vec![60.0], vec![0.0], vec![0.0]).is_err());
        assert!(SamplingGrid::new(vec![0.0], vec![-3.5], vec![0.0]).is_err());
        assert!(SamplingGrid::new(vec![], vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn rejects_tiny_grids() {
        let fp = FieldPoint::new(0.0, 0.0, 0.0);
        assert!(synth_psf(&SynthLensSpec::default(), &fp, 2, 5, 1.0).is_err());
    }

    #[test]
    fn default_core_is_compact() {
        let g = synth_psf(&SynthLensSpec::default(), &FieldPoint::new(0.0, 0.0, 0.0), 13, 13, 6.5)
            .unwrap();
        let g = normalize_volume(&g).unwrap();
        let core: f64 = (5..8).flat_map(|y| (5..8).map(move |x| (x, y))).map(|(x, y)| g.get(x, y)).sum();
        assert!(core >= 0.6, "core fraction {core}");
    }

    #[test]
    fn widths_follow_field() {
        let spec = SynthLensSpec::default();
        let (inner, outer, tan) = spec.widths(&FieldPoint::new(0.0, 0.0, 0.0));
        assert_eq!((inner, outer, tan), (5.0, 5.0, 5.0));
        let (inner, outer, tan) = spec.widths(&FieldPoint::new(0.0, 3.0, 0.0));
        assert!(outer > inner && inner > tan);
    }
}
