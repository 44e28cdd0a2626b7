use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::psf::{FieldPoint, PsfGrid, PsfSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenActivation {
    Tanh,
    Sigmoid,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Linear,
    Sigmoid,
}

impl HiddenActivation {
    pub fn code(self) -> u8 {
        match self {
            Self::Tanh => 0,
            Self::Sigmoid => 1,
            Self::Relu => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Tanh),
            1 => Some(Self::Sigmoid),
            2 => Some(Self::Relu),
            _ => None,
        }
    }
}

impl OutputActivation {
    pub fn code(self) -> u8 {
        match self {
            Self::Linear => 0,
            Self::Sigmoid => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Linear),
            1 => Some(Self::Sigmoid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Act {
    Tanh,
    Sigmoid,
    Relu,
    Linear,
}

impl From<HiddenActivation> for Act {
    fn from(a: HiddenActivation) -> Self {
        match a {
            HiddenActivation::Tanh => Act::Tanh,
            HiddenActivation::Sigmoid => Act::Sigmoid,
            HiddenActivation::Relu => Act::Relu,
        }
    }
}

impl From<OutputActivation> for Act {
    fn from(a: OutputActivation) -> Self {
        match a {
            OutputActivation::Linear => Act::Linear,
            OutputActivation::Sigmoid => Act::Sigmoid,
        }
    }
}

impl Act {
    fn apply(self, z: f64) -> f64 {
        match self {
            Act::Tanh => z.tanh(),
            Act::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Act::Relu => z.max(0.0),
            Act::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Act::Tanh => 1.0 - a * a,
            Act::Sigmoid => a * (1.0 - a),
            Act::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Act::Linear => 1.0,
        }
    }
}

/// How the azimuth enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AzimuthEncoding {
    /// Normalized raw angle: three inputs.
    #[default]
    Raw,
    /// `(sin phi, cos phi)` in place of the angle: four inputs.
    SinCos,
}

impl AzimuthEncoding {
    pub fn input_width(self) -> usize {
        match self {
            Self::Raw => 3,
            Self::SinCos => 4,
        }
    }
}

/// Affine map `(raw - offset) / scale` for one network input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputNorm {
    pub offset: f64,
    pub scale: f64,
}

impl InputNorm {
    pub const IDENTITY: InputNorm = InputNorm {
        offset: 0.0,
        scale: 1.0,
    };

    /// Maps `[min, max]` onto `[-1, 1]`. A degenerate range keeps unit scale.
    pub fn from_range(min: f64, max: f64) -> Self {
        let half = (max - min) / 2.0;
        Self {
            offset: (max + min) / 2.0,
            scale: if half > 0.0 { half } else { 1.0 },
        }
    }

    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.offset) / self.scale
    }

    /// Raw-value interval that maps onto `[-1, 1]`.
    pub fn range(&self) -> (f64, f64) {
        (self.offset - self.scale, self.offset + self.scale)
    }
}

/// Normalized `(dz, R, phi)`; dataset-envelope extremes land on +-1.
pub fn normalize_inputs(fp: &FieldPoint, norm: &[InputNorm; 3]) -> [f64; 3] {
    [
        norm[0].apply(fp.dz_um()),
        norm[1].apply(fp.r_mm()),
        norm[2].apply(fp.phi_deg()),
    ]
}

/// Geometry of the kernel the output layer is unflattened into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputGrid {
    pub width: usize,
    pub height: usize,
    pub pitch_um: f64,
}

/// Dense layer; `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Array2<f64>,
    biases: Array1<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            biases: Array1::zeros(outputs),
        }
    }

    pub(crate) fn from_parts(weights: Array2<f64>, biases: Array1<f64>) -> Self {
        debug_assert_eq!(weights.nrows(), biases.len());
        Self { weights, biases }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn biases(&self) -> &Array1<f64> {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.weights.view_mut()
    }

    pub fn biases_mut(&mut self) -> ArrayViewMut1<'_, f64> {
        self.biases.view_mut()
    }
}

/// Per-parameter gradient, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    /// Every parameter block, weights first then biases, as dynamic-rank views.
    pub fn iter(&self) -> impl Iterator<Item = ndarray::ArrayViewD<'_, f64>> {
        self.weights
            .iter()
            .map(|w| w.view().into_dyn())
            .chain(self.biases.iter().map(|b| b.view().into_dyn()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = ndarray::ArrayViewMutD<'_, f64>> {
        self.weights
            .iter_mut()
            .map(|w| w.view_mut().into_dyn())
            .chain(self.biases.iter_mut().map(|b| b.view_mut().into_dyn()))
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Activations kept from a batch forward pass for backpropagation.
pub(crate) struct BatchCache {
    /// `pre[l]` and `post[l]` belong to layer `l`; `input` feeds layer 0.
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl BatchCache {
    pub(crate) fn output(&self) -> &Array2<f64> {
        self.post.last().expect("model has at least one layer")
    }
}

/// Feed-forward network mapping a field point to a PSF kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<DenseLayer>,
    hidden_activation: HiddenActivation,
    output_activation: OutputActivation,
    input_norm: [InputNorm; 3],
    output_grid: OutputGrid,
}

impl MlpModel {
    /// Zero-initialized network with the given layer sizes.
    pub fn new(
        layer_sizes: &[usize],
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
        input_norm: [InputNorm; 3],
        output_grid: OutputGrid,
    ) -> Result<Self> {
        let layers = layer_sizes
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1]))
            .collect();
        Self::from_layers(layers, hidden_activation, output_activation, input_norm, output_grid)
    }

    pub(crate) fn from_layers(
        layers: Vec<DenseLayer>,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
        input_norm: [InputNorm; 3],
        output_grid: OutputGrid,
    ) -> Result<Self> {
        let model = Self {
            layers,
            hidden_activation,
            output_activation,
            input_norm,
            output_grid,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let sizes = self.layer_sizes();
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::dims(format!("invalid layer sizes {sizes:?}")));
        }
        if sizes[0] != 3 && sizes[0] != 4 {
            return Err(Error::dims(format!(
                "input layer must have 3 (raw azimuth) or 4 (sin/cos azimuth) neurons, got {}",
                sizes[0]
            )));
        }
        for pair in self.layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::dims("consecutive layer shapes do not chain"));
            }
        }
        let g = self.output_grid;
        if g.width * g.height != *sizes.last().unwrap() {
            return Err(Error::dims(format!(
                "output grid {}x{} does not match {} output neurons",
                g.width,
                g.height,
                sizes.last().unwrap()
            )));
        }
        if !(g.pitch_um > 0.0 && g.pitch_um.is_finite()) {
            return Err(Error::invalid("output pitch must be > 0"));
        }
        if self
            .input_norm
            .iter()
            .any(|n| !(n.scale > 0.0 && n.scale.is_finite() && n.offset.is_finite()))
        {
            return Err(Error::invalid("input normalization scales must be > 0"));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers.first().map_or(0, DenseLayer::inputs)];
        sizes.extend(self.layers.iter().map(DenseLayer::outputs));
        sizes
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> HiddenActivation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn input_norm(&self) -> &[InputNorm; 3] {
        &self.input_norm
    }

    pub fn output_grid(&self) -> OutputGrid {
        self.output_grid
    }

    pub fn azimuth_encoding(&self) -> AzimuthEncoding {
        if self.layers[0].inputs() == 4 {
            AzimuthEncoding::SinCos
        } else {
            AzimuthEncoding::Raw
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn randomize<R: Rng>(&mut self, rng: &mut R) {
        for layer in &mut self.layers {
            let bound = 1.0 / (layer.inputs() as f64).sqrt();
            layer
                .weights
                .mapv_inplace(|_| rng.gen_range(-bound..bound));
            layer.biases.mapv_inplace(|_| rng.gen_range(-bound..bound));
        }
    }

    fn activation(&self, layer: usize) -> Act {
        if layer + 1 == self.layers.len() {
            self.output_activation.into()
        } else {
            self.hidden_activation.into()
        }
    }

    /// Network input vector for a field point.
    pub fn encode(&self, fp: &FieldPoint) -> Vec<f64> {
        let [dz, r, phi] = normalize_inputs(fp, &self.input_norm);
        match self.azimuth_encoding() {
            AzimuthEncoding::Raw => vec![dz, r, phi],
            AzimuthEncoding::SinCos => {
                let (s, c) = fp.phi_deg().to_radians().sin_cos();
                vec![dz, r, s, c]
            }
        }
    }

    /// Encoded inputs for many field points, one row each.
    pub(crate) fn encode_batch<'a>(
        &self,
        fields: impl ExactSizeIterator<Item = &'a FieldPoint>,
    ) -> Array2<f64> {
        let n = fields.len();
        let width = self.layers[0].inputs();
        let mut x = Array2::zeros((n, width));
        for (mut row, fp) in x.rows_mut().into_iter().zip(fields) {
            for (dst, v) in row.iter_mut().zip(self.encode(fp)) {
                *dst = v;
            }
        }
        x
    }

    /// Output-layer activations before any kernel post-processing.
    ///
    /// Shares the batch code path so single-sample results are bit-identical
    /// to the rows of a batch evaluation.
    pub fn predict_raw(&self, fp: &FieldPoint) -> Vec<f64> {
        let cache = self.forward_batch(self.encode_batch(std::iter::once(fp)));
        cache.output().iter().copied().collect()
    }

    /// Converts raw output activations into a usable kernel: negatives are
    /// clamped to zero and the grid is rescaled to unit volume.
    pub fn to_kernel(&self, raw: Vec<f64>) -> PsfGrid {
        let g = self.output_grid;
        let mut values = raw;
        if self.output_activation == OutputActivation::Linear {
            for v in &mut values {
                *v = v.max(0.0);
            }
        }
        let total: f64 = values.iter().sum();
        if total > 0.0 && total.is_finite() {
            for v in &mut values {
                *v /= total;
            }
        } else {
            // Nothing survived the clamp; fall back to a flat kernel.
            let n = values.len() as f64;
            values.iter_mut().for_each(|v| *v = 1.0 / n);
        }
        PsfGrid::from_parts_unchecked(g.width, g.height, g.pitch_um, values)
    }

    /// Inferred PSF kernel at `fp`: non-negative, unit volume.
    pub fn forward(&self, fp: &FieldPoint) -> PsfGrid {
        self.to_kernel(self.predict_raw(fp))
    }

    pub(crate) fn forward_batch(&self, input: Array2<f64>) -> BatchCache {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.activation(l);
            let prev = if l == 0 { &input } else { &post[l - 1] };
            let mut z = prev.dot(&layer.weights.t());
            z += &layer.biases;
            let a = z.mapv(|v| act.apply(v));
            pre.push(z);
            post.push(a);
        }
        BatchCache { input, pre, post }
    }

    /// Backpropagates `d_output` (gradient of the loss w.r.t. the output
    /// activations, one row per sample) through a cached forward pass.
    pub(crate) fn backward_batch(&self, cache: &BatchCache, d_output: Array2<f64>) -> Gradients {
        let n_layers = self.layers.len();
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        let mut delta = d_output;
        for l in (0..n_layers).rev() {
            let act = self.activation(l);
            ndarray::Zip::from(&mut delta)
                .and(&cache.pre[l])
                .and(&cache.post[l])
                .for_each(|d, &z, &a| *d *= act.derivative(z, a));
            let prev = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            weights.push(delta.t().dot(prev));
            biases.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                delta = delta.dot(&self.layers[l].weights);
            }
        }
        weights.reverse();
        biases.reverse();
        Gradients { weights, biases }
    }

    /// Exact gradient of `sum_i (raw_i - target_i)^2` for one field point.
    pub fn gradient(&self, fp: &FieldPoint, target: &[f64]) -> Result<Gradients> {
        let outputs = *self.layer_sizes().last().unwrap();
        if target.len() != outputs {
            return Err(Error::dims(format!(
                "target has {} values, network has {outputs} outputs",
                target.len()
            )));
        }
        let cache = self.forward_batch(self.encode_batch(std::iter::once(fp)));
        let mut d_out = cache.output().clone();
        for (d, t) in d_out.iter_mut().zip(target) {
            *d = 2.0 * (*d - t);
        }
        Ok(self.backward_batch(&cache, d_out))
    }

    /// Applies `param += step` layer by layer.
    pub(crate) fn apply_step(&mut self, step: &Gradients) {
        for ((layer, dw), db) in self.layers.iter_mut().zip(&step.weights).zip(&step.biases) {
            layer.weights += dw;
            layer.biases += db;
        }
    }

    pub(crate) fn zeros_like(&self) -> Gradients {
        Gradients {
            weights: self.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            biases: self.layers.iter().map(|l| Array1::zeros(l.biases.len())).collect(),
        }
    }
}

impl PsfSource for MlpModel {
    fn psf(&self, fp: &FieldPoint) -> PsfGrid {
        self.forward(fp)
    }
}

/// Euclidean distance between prediction and target: the root of the summed
/// squared pixel differences.
pub fn loss(prediction: &[f64], target: &[f64]) -> Result<f64> {
    if prediction.len() != target.len() {
        return Err(Error::dims(format!(
            "prediction has {} values, target {}",
            prediction.len(),
            target.len()
        )));
    }
    Ok(prediction
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(k: usize) -> OutputGrid {
        OutputGrid {
            width: k,
            height: k,
            pitch_um: 6.5,
        }
    }

    fn envelope_norm() -> [InputNorm; 3] {
        [
            InputNorm::from_range(-50.0, 50.0),
            InputNorm::from_range(-3.0, 3.0),
            InputNorm::from_range(0.0, 360.0),
        ]
    }

    #[test]
    fn input_normalization_examples() {
        let norm = envelope_norm();
        assert_eq!(normalize_inputs(&FieldPoint::new(50.0, 0.0, 0.0), &norm)[0], 1.0);
        assert_eq!(normalize_inputs(&FieldPoint::new(0.0, 0.0, 0.0), &norm)[0], 0.0);
        assert_eq!(normalize_inputs(&FieldPoint::new(0.0, 1.5, 0.0), &norm)[1], 0.5);
        assert_eq!(InputNorm::from_range(2.0, 2.0).scale, 1.0);
    }

    #[test]
    fn zero_weights_give_clamped_bias_kernel() {
        let mut m = MlpModel::new(
            &[3, 4, 9],
            HiddenActivation::Tanh,
            OutputActivation::Linear,
            envelope_norm(),
            grid(3),
        )
        .unwrap();
        m.layers_mut()[1].biases_mut().fill(0.7);
        let k = m.forward(&FieldPoint::new(10.0, 1.0, 45.0));
        assert!(k.values().iter().all(|v| (v - 1.0 / 9.0).abs() < 1e-15));

        let last = &mut m.layers_mut()[1];
        last.biases_mut()[0] = -1.0;
        last.biases_mut()[1] = 3.0;
        let k = m.forward(&FieldPoint::new(10.0, 1.0, 45.0));
        assert_eq!(k.values()[0], 0.0);
        assert!((k.values()[1] - 3.0 / (3.0 + 7.0 * 0.7)).abs() < 1e-15);
        assert!((k.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_negative_output_falls_back_to_flat_kernel() {
        let mut m = MlpModel::new(
            &[3, 2, 4],
            HiddenActivation::Tanh,
            OutputActivation::Linear,
            envelope_norm(),
            grid(2),
        )
        .unwrap();
        m.layers_mut()[1].biases_mut().fill(-1.0);
        assert_eq!(m.forward(&FieldPoint::new(0.0, 0.0, 0.0)).values(), &[0.25; 4]);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut m = MlpModel::new(
            &[3, 8, 9],
            HiddenActivation::Tanh,
            OutputActivation::Sigmoid,
            envelope_norm(),
            grid(3),
        )
        .unwrap();
        m.randomize(&mut ChaCha8Rng::seed_from_u64(3));
        let before = m.clone();
        let fp = FieldPoint::new(-20.0, 2.0, 100.0);
        assert_eq!(m.forward(&fp), m.forward(&fp));
        assert_eq!(m, before);
    }

    #[test]
    fn shape_validation() {
        let bad = MlpModel::new(
            &[3, 4, 8],
            HiddenActivation::Tanh,
            OutputActivation::Linear,
            envelope_norm(),
            grid(3),
        );
        assert!(matches!(bad, Err(Error::DimensionMismatch(_))));
        let mut norm = envelope_norm();
        norm[1].scale = 0.0;
        assert!(MlpModel::new(&[3, 4, 9], HiddenActivation::Tanh, OutputActivation::Linear, norm, grid(3)).is_err());
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((loss(&[0.1, 0.0, 0.0], &[0.0, 0.0, 0.0]).unwrap() - 0.1).abs() < 1e-15);
        assert!((loss(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap() - 14f64.sqrt()).abs() < 1e-15);
        assert!(matches!(loss(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn zero_error_gives_zero_gradient() {
        let mut m = MlpModel::new(
            &[3, 5, 4],
            HiddenActivation::Tanh,
            OutputActivation::Linear,
            envelope_norm(),
            grid(2),
        )
        .unwrap();
        m.randomize(&mut ChaCha8Rng::seed_from_u64(9));
        let fp = FieldPoint::new(5.0, 1.0, 30.0);
        let target = m.predict_raw(&fp);
        assert_eq!(m.gradient(&fp, &target).unwrap().max_abs(), 0.0);
        assert!(m.gradient(&fp, &target[..3]).is_err());
    }

    #[test]
    fn single_linear_neuron_gradient() {
        // Identity hidden unit via relu on a positive input, one linear output.
        let mut m = MlpModel::new(
            &[3, 1, 1],
            HiddenActivation::Relu,
            OutputActivation::Linear,
            [InputNorm::IDENTITY; 3],
            grid(1),
        )
        .unwrap();
        m.layers_mut()[0].weights_mut()[[0, 0]] = 1.0;
        let w = 0.75;
        m.layers_mut()[1].weights_mut()[[0, 0]] = w;
        let x = 2.0;
        let t = 0.5;
        let g = m.gradient(&FieldPoint::new(x, 0.0, 0.0), &[t]).unwrap();
        assert!((g.weights[1][[0, 0]] - 2.0 * x * (w * x - t)).abs() < 1e-15);
    }
}
