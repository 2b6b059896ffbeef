//! Fully-connected autoencoder that turns sensory streams into learnt
//! behavioural descriptors.
//!
//! Inputs are normalised per channel to [-1, 1] with statistics fitted on the
//! most recent training set. Training minimises the mean squared
//! reconstruction error with minibatch Adam. All reductions run in a fixed
//! order so a given seed reproduces the same weights bit for bit.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::archive::Container;
use crate::env::SensoryData;
use crate::error::{Error, Result};
use crate::exec;

pub const DEFAULT_LATENT_DIM: usize = 10;
pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// True at iterations 0, 10, 30, 60, 100, 150, ...: the gap between two
/// updates grows by 10 each time.
pub fn update_due(iteration: u64) -> bool {
    if !iteration.is_multiple_of(10) {
        return false;
    }
    // iteration / 10 must be a triangular number n(n-1)/2
    let m = iteration / 10;
    let mut n = 0u64;
    let mut tri = 0u64;
    while tri < m {
        n += 1;
        tri += n;
    }
    tri == m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::Checkpoint(format!("unknown activation `{other}`"))),
        }
    }
}

/// Dense layer, `weights` row-major `outputs x inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl Dense {
    /// Uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new<R: Rng>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-bound..=bound)).collect();
        let bias = (0..outputs).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for j in 0..self.outputs {
            let row = &self.weights[j * self.inputs..(j + 1) * self.inputs];
            let z = self.bias[j] + dot(row, x);
            out.push(match self.activation {
                Activation::Tanh => z.tanh(),
                Activation::Linear => z,
            });
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    fn zeros(layer: &Dense) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }
}

/// Per-channel min-max scaling to [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    /// Leaves values unchanged.
    pub fn identity(channels: usize) -> Self {
        Self {
            min: vec![-1.0; channels],
            max: vec![1.0; channels],
        }
    }

    pub fn fit<'a, I>(channels: usize, data: I) -> Self
    where
        I: IntoIterator<Item = &'a SensoryData>,
    {
        let mut min = vec![f64::INFINITY; channels];
        let mut max = vec![f64::NEG_INFINITY; channels];
        for d in data {
            for c in 0..channels {
                for &v in d.channel(c) {
                    min[c] = min[c].min(v);
                    max[c] = max[c].max(v);
                }
            }
        }
        for c in 0..channels {
            if !min[c].is_finite() {
                min[c] = -1.0;
                max[c] = 1.0;
            }
        }
        Self { min, max }
    }

    fn apply(&self, data: &SensoryData) -> Vec<f64> {
        let steps = data.steps();
        let mut out = Vec::with_capacity(data.as_flat().len());
        for c in 0..data.channels() {
            let (lo, hi) = (self.min[c], self.max[c]);
            let span = hi - lo;
            for &v in data.channel(c) {
                out.push(if span > 0.0 { 2.0 * (v - lo) / span - 1.0 } else { 0.0 });
            }
        }
        debug_assert_eq!(out.len(), steps * data.channels());
        out
    }

    fn invert(&self, channels: usize, steps: usize, values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(values.len());
        for c in 0..channels {
            let (lo, hi) = (self.min[c], self.max[c]);
            for &v in &values[c * steps..(c + 1) * steps] {
                out.push(lo + (v + 1.0) * 0.5 * (hi - lo));
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default)]
struct AdamState {
    step: u64,
    m: Vec<LayerGrad>,
    v: Vec<LayerGrad>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    /// Set when a non-finite loss stopped the phase; weights were restored.
    pub aborted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Encoder {
    channels: usize,
    steps: usize,
    /// Encoder layers followed by decoder layers.
    layers: Vec<Dense>,
    encoder_layers: usize,
    latent_dim: usize,
    norm: Normalizer,
    adam: AdamState,
    /// Number of completed training phases.
    version: u64,
}

impl PartialEq for Encoder {
    fn eq(&self, other: &Self) -> bool {
        self.channels == other.channels
            && self.steps == other.steps
            && self.layers == other.layers
            && self.encoder_layers == other.encoder_layers
            && self.norm == other.norm
    }
}

impl Encoder {
    /// `channels*steps -> hidden -> latent -> hidden -> channels*steps`,
    /// tanh hidden units and linear latent/output layers.
    pub fn new<R: Rng>(channels: usize, steps: usize, hidden: usize, latent_dim: usize, rng: &mut R) -> Self {
        let input = channels * steps;
        let layers = vec![
            Dense::new(input, hidden, Activation::Tanh, rng),
            Dense::new(hidden, latent_dim, Activation::Linear, rng),
            Dense::new(latent_dim, hidden, Activation::Tanh, rng),
            Dense::new(hidden, input, Activation::Linear, rng),
        ];
        Self::from_layers(channels, steps, layers, 2, Normalizer::identity(channels))
            .expect("layer shapes are consistent by construction")
    }

    /// Builds an encoder from explicit layers; the first `encoder_layers`
    /// map the input to the latent space, the rest decode it.
    pub fn from_layers(
        channels: usize,
        steps: usize,
        layers: Vec<Dense>,
        encoder_layers: usize,
        norm: Normalizer,
    ) -> Result<Self> {
        let input = channels * steps;
        if layers.is_empty() || encoder_layers == 0 || encoder_layers > layers.len() {
            return Err(Error::Checkpoint("encoder needs at least one layer".into()));
        }
        let mut width = input;
        for l in &layers {
            if l.inputs != width
                || l.weights.len() != l.inputs * l.outputs
                || l.bias.len() != l.outputs
            {
                return Err(Error::Checkpoint(format!(
                    "layer shape {}x{} does not chain from width {width}",
                    l.outputs, l.inputs
                )));
            }
            width = l.outputs;
        }
        if width != input && encoder_layers < layers.len() {
            return Err(Error::Checkpoint("decoder output must match input".into()));
        }
        if norm.min.len() != channels || norm.max.len() != channels {
            return Err(Error::Checkpoint("normalizer width mismatch".into()));
        }
        let latent_dim = layers[encoder_layers - 1].outputs;
        Ok(Self {
            channels,
            steps,
            layers,
            encoder_layers,
            latent_dim,
            norm,
            adam: AdamState::default(),
            version: 0,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (self.channels, self.steps)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.norm
    }

    pub fn set_normalizer(&mut self, norm: Normalizer) {
        assert_eq!(norm.min.len(), self.channels);
        self.norm = norm;
    }

    /// Completed training phases; changes whenever descriptors go stale.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    fn check_shape(&self, data: &SensoryData) -> Result<()> {
        if data.channels() != self.channels || data.steps() != self.steps {
            return Err(Error::SensoryShape {
                expected_channels: self.channels,
                expected_steps: self.steps,
                channels: data.channels(),
                steps: data.steps(),
            });
        }
        Ok(())
    }

    /// Normalised flat input as seen by the network.
    pub fn normalize(&self, data: &SensoryData) -> Result<Vec<f64>> {
        self.check_shape(data)?;
        Ok(self.norm.apply(data))
    }

    fn run(&self, layers: &[Dense], x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for l in layers {
            l.forward(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn encode(&self, data: &SensoryData) -> Result<Vec<f64>> {
        let x = self.normalize(data)?;
        Ok(self.run(&self.layers[..self.encoder_layers], &x))
    }

    /// Decodes a latent vector into a normalised flat reconstruction.
    pub fn decode_normalized(&self, latent: &[f64]) -> Result<Vec<f64>> {
        if latent.len() != self.latent_dim {
            return Err(Error::Dimension {
                expected: self.latent_dim,
                got: latent.len(),
            });
        }
        Ok(self.run(&self.layers[self.encoder_layers..], latent))
    }

    /// Decodes a latent vector back to sensory units.
    pub fn decode(&self, latent: &[f64]) -> Result<SensoryData> {
        let y = self.decode_normalized(latent)?;
        let raw = self.norm.invert(self.channels, self.steps, &y);
        SensoryData::new(self.channels, self.steps, raw)
    }

    /// Mean squared reconstruction error in normalised units.
    pub fn reconstruction_loss(&self, data: &SensoryData) -> Result<f64> {
        let x = self.normalize(data)?;
        Ok(self.loss(&[x.as_slice()]))
    }

    /// MSE over a batch of normalised inputs.
    pub fn loss(&self, batch: &[&[f64]]) -> f64 {
        let mut total = 0.0;
        for x in batch {
            let y = self.run(&self.layers, x);
            let se: f64 = y.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            total += se / x.len() as f64;
        }
        total / batch.len() as f64
    }

    /// Batch MSE and its gradient with respect to every weight and bias.
    pub fn loss_and_gradient(&self, batch: &[&[f64]]) -> (f64, Vec<LayerGrad>) {
        let mut grads: Vec<LayerGrad> = self.layers.iter().map(LayerGrad::zeros).collect();
        let mut total = 0.0;
        let scale = 1.0 / batch.len() as f64;
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len() + 1];
        let mut delta = Vec::new();
        let mut back = Vec::new();

        for x in batch {
            acts[0].clear();
            acts[0].extend_from_slice(x);
            for (i, l) in self.layers.iter().enumerate() {
                let (head, tail) = acts.split_at_mut(i + 1);
                l.forward(&head[i], &mut tail[0]);
            }
            let y = &acts[self.layers.len()];
            let d = x.len() as f64;
            let mut se = 0.0;
            delta.clear();
            for (a, b) in y.iter().zip(x.iter()) {
                let e = a - b;
                se += e * e;
                delta.push(2.0 * e / d * scale);
            }
            total += se / d;

            for (i, l) in self.layers.iter().enumerate().rev() {
                let out = &acts[i + 1];
                if l.activation == Activation::Tanh {
                    for (dz, a) in delta.iter_mut().zip(out) {
                        *dz *= 1.0 - a * a;
                    }
                }
                let input = &acts[i];
                let g = &mut grads[i];
                for j in 0..l.outputs {
                    let dj = delta[j];
                    g.bias[j] += dj;
                    let row = &mut g.weights[j * l.inputs..(j + 1) * l.inputs];
                    for (gw, xi) in row.iter_mut().zip(input) {
                        *gw += dj * xi;
                    }
                }
                if i > 0 {
                    back.clear();
                    back.resize(l.inputs, 0.0);
                    for j in 0..l.outputs {
                        let dj = delta[j];
                        let row = &l.weights[j * l.inputs..(j + 1) * l.inputs];
                        for (bk, w) in back.iter_mut().zip(row) {
                            *bk += dj * w;
                        }
                    }
                    std::mem::swap(&mut delta, &mut back);
                }
            }
        }
        (total * scale, grads)
    }

    fn adam_step(&mut self, grads: &[LayerGrad], lr: f64) {
        if self.adam.m.is_empty() {
            self.adam.m = self.layers.iter().map(LayerGrad::zeros).collect();
            self.adam.v = self.layers.iter().map(LayerGrad::zeros).collect();
        }
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
            }
        };
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let (m, v) = (&mut self.adam.m[l], &mut self.adam.v[l]);
            update(&mut layer.weights, &grads[l].weights, &mut m.weights, &mut v.weights);
            update(&mut layer.bias, &grads[l].bias, &mut m.bias, &mut v.bias);
        }
    }

    /// One training phase: refits the input normalisation on `dataset`, then
    /// runs `epochs` passes of shuffled minibatch Adam. On a non-finite loss
    /// the phase is abandoned and the pre-phase state restored.
    pub fn train<R: Rng>(
        &mut self,
        dataset: &[&SensoryData],
        params: TrainParams,
        rng: &mut R,
    ) -> Result<TrainReport> {
        let mut report = TrainReport {
            epoch_losses: Vec::with_capacity(params.epochs),
            aborted: false,
        };
        if params.epochs == 0 || dataset.is_empty() {
            return Ok(report);
        }
        for d in dataset {
            self.check_shape(d)?;
        }
        let snapshot = (self.layers.clone(), self.norm.clone(), self.adam.clone());
        self.norm = Normalizer::fit(self.channels, dataset.iter().copied());
        let inputs: Vec<Vec<f64>> = dataset.iter().map(|d| self.norm.apply(d)).collect();
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let batch_size = params.batch_size.max(1);

        for _ in 0..params.epochs {
            order.shuffle(rng);
            let mut epoch_loss = 0.0;
            let mut seen = 0usize;
            for chunk in order.chunks(batch_size) {
                let batch: Vec<&[f64]> = chunk.iter().map(|&i| inputs[i].as_slice()).collect();
                let (loss, grads) = self.loss_and_gradient(&batch);
                if !loss.is_finite() {
                    log::warn!("non-finite reconstruction loss, discarding encoder phase");
                    (self.layers, self.norm, self.adam) = snapshot;
                    report.aborted = true;
                    return Ok(report);
                }
                self.adam_step(&grads, params.learning_rate);
                epoch_loss += loss * chunk.len() as f64;
                seen += chunk.len();
            }
            report.epoch_losses.push(epoch_loss / seen as f64);
        }
        self.version += 1;
        Ok(report)
    }

    pub fn to_checkpoint(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        writeln!(s, "encoder,1").unwrap();
        writeln!(
            s,
            "shape,{},{},{},{}",
            self.channels,
            self.steps,
            self.layers.len(),
            self.encoder_layers
        )
        .unwrap();
        writeln!(s, "norm_min,{}", join(&self.norm.min)).unwrap();
        writeln!(s, "norm_max,{}", join(&self.norm.max)).unwrap();
        for l in &self.layers {
            writeln!(s, "layer,{},{},{}", l.inputs, l.outputs, l.activation.name()).unwrap();
            writeln!(s, "weights,{}", join(&l.weights)).unwrap();
            writeln!(s, "bias,{}", join(&l.bias)).unwrap();
        }
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut lines = text.lines();
        let mut next = |tag: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing `{tag}` line")))?;
            let mut parts = line.split(',');
            if parts.next() != Some(tag) {
                return Err(bad(&format!("expected `{tag}` line, got `{line}`")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let floats = |v: Vec<String>| -> Result<Vec<f64>> {
            v.iter()
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|e| bad(&format!("`{s}`: {e}"))))
                .collect()
        };
        let ints = |v: &[String]| -> Result<Vec<usize>> {
            v.iter()
                .map(|s| s.parse::<usize>().map_err(|e| bad(&format!("`{s}`: {e}"))))
                .collect()
        };

        let header = next("encoder")?;
        if header != ["1"] {
            return Err(bad("unsupported checkpoint version"));
        }
        let shape = ints(&next("shape")?)?;
        let [channels, steps, n_layers, encoder_layers] = shape[..] else {
            return Err(bad("shape line needs 4 fields"));
        };
        let norm = Normalizer {
            min: floats(next("norm_min")?)?,
            max: floats(next("norm_max")?)?,
        };
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let spec = next("layer")?;
            if spec.len() != 3 {
                return Err(bad("layer line needs 3 fields"));
            }
            let dims = ints(&spec[..2])?;
            layers.push(Dense {
                inputs: dims[0],
                outputs: dims[1],
                activation: Activation::parse(&spec[2])?,
                weights: floats(next("weights")?)?,
                bias: floats(next("bias")?)?,
            });
        }
        Self::from_layers(channels, steps, layers, encoder_layers, norm)
    }
}

/// Replaces every member descriptor with the encoding of its sensory data.
pub fn reencode_members(enc: &Encoder, container: &mut Container) -> Result<()> {
    let encoded = exec::map(container.members(), |m| enc.encode(&m.sensory));
    let encoded: Result<Vec<Vec<f64>>> = encoded.into_iter().collect();
    container.update_descriptors(encoded?)
}

/// Re-encodes every member and rebuilds the container, since the whole
/// descriptor geometry changed.
pub fn reencode_all(enc: &Encoder, container: &mut Container) -> Result<()> {
    reencode_members(enc, container)?;
    container.manage_size(true);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::test_support::individual;
    use crate::archive::{Container, ContainerParams};
    use crate::relevance::DistanceMetric;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn ramp(channels: usize, steps: usize) -> SensoryData {
        let v = (0..channels * steps).map(|i| ((i * 7) % 13) as f64 * 0.3 - 1.5).collect();
        SensoryData::new(channels, steps, v).unwrap()
    }

    #[test]
    fn schedule() {
        for it in [0, 10, 30, 60, 100, 150, 210] {
            assert!(update_due(it), "{it}");
        }
        for it in [1, 5, 20, 40, 90, 149] {
            assert!(!update_due(it), "{it}");
        }
        // closed form: N(I) = largest n with 5n(n-1) <= I
        for horizon in [0u64, 9, 10, 29, 30, 100, 999, 2000, 15000] {
            let counted = (0..=horizon).filter(|&i| update_due(i)).count() as u64;
            let closed = (1..).take_while(|n| 5 * n * (n - 1) <= horizon).last().unwrap();
            assert_eq!(counted, closed, "horizon {horizon}");
        }
    }

    #[test]
    fn encode_shape_and_determinism() {
        let enc = Encoder::new(6, 30, 64, 10, &mut rng());
        let x = ramp(6, 30);
        let a = enc.encode(&x).unwrap();
        assert_eq!(a.len(), 10);
        assert!(a.iter().all(|v| v.is_finite()));
        let b = enc.encode(&x).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let err = enc.encode(&ramp(5, 30)).unwrap_err();
        assert!(matches!(err, Error::SensoryShape { .. }));
    }

    #[test]
    fn overfits_a_single_sample() {
        let mut r = rng();
        let mut enc = Encoder::new(3, 10, 16, 4, &mut r);
        let x = ramp(3, 10);
        let data = vec![&x; 8];
        let params = TrainParams {
            epochs: 600,
            batch_size: 8,
            learning_rate: 1e-2,
        };
        let report = enc.train(&data, params, &mut r).unwrap();
        assert!(!report.aborted);
        let loss = enc.reconstruction_loss(&x).unwrap();
        assert!(loss < 1e-3, "loss {loss}");
        let rec = enc.decode(&enc.encode(&x).unwrap()).unwrap();
        assert_eq!(rec.channels(), 3);
    }

    #[test]
    fn constant_dataset_loss_decreases() {
        let mut r = rng();
        let mut enc = Encoder::new(2, 5, 8, 2, &mut r);
        let x = SensoryData::constant(2, 5, 0.7);
        let data = vec![&x; 20];
        let report = enc.train(&data, TrainParams { epochs: 20, ..Default::default() }, &mut r).unwrap();
        assert_eq!(report.epoch_losses.len(), 20);
        assert!(report.epoch_losses.last().unwrap() < &report.epoch_losses[0]);
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let mut r = rng();
        let mut enc = Encoder::new(2, 5, 8, 2, &mut r);
        let before = enc.clone();
        let x = ramp(2, 5);
        let report = enc.train(&[&x], TrainParams { epochs: 0, ..Default::default() }, &mut r).unwrap();
        assert!(report.epoch_losses.is_empty());
        assert_eq!(enc, before);
        assert_eq!(enc.version(), 0);
    }

    #[test]
    fn non_finite_loss_restores_weights() {
        let mut r = rng();
        let mut enc = Encoder::new(2, 5, 8, 2, &mut r);
        enc.layers_mut()[1].weights[0] = f64::MAX;
        enc.layers_mut()[3].weights[0] = f64::MAX;
        let before = enc.clone();
        let x = ramp(2, 5);
        let report = enc.train(&[&x], TrainParams::default(), &mut r).unwrap();
        assert!(report.aborted);
        assert_eq!(enc, before);
    }

    #[test]
    fn training_is_reproducible() {
        let x = ramp(3, 6);
        let y = SensoryData::constant(3, 6, 0.2);
        let run = || {
            let mut r = rng();
            let mut enc = Encoder::new(3, 6, 8, 3, &mut r);
            let report = enc.train(&[&x, &y, &x], TrainParams { epochs: 5, batch_size: 2, ..Default::default() }, &mut r).unwrap();
            (report.epoch_losses.iter().map(|l| l.to_bits()).collect::<Vec<_>>(), enc.to_checkpoint())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut r = rng();
        let mut enc = Encoder::new(6, 30, 64, 10, &mut r);
        let x = ramp(6, 30);
        enc.train(&[&x], TrainParams { epochs: 2, ..Default::default() }, &mut r).unwrap();
        let text = enc.to_checkpoint();
        let loaded = Encoder::from_checkpoint(&text).unwrap();
        assert_eq!(loaded, enc);
        assert_eq!(loaded.to_checkpoint(), text);
        assert_eq!(loaded.encode(&x).unwrap(), enc.encode(&x).unwrap());
        assert!(Encoder::from_checkpoint("encoder,2\n").is_err());
    }

    /// Single linear layer averaging each of the first `latent` channels.
    fn channel_mean_encoder(channels: usize, steps: usize, latent: usize) -> Encoder {
        let mut weights = vec![0.0; latent * channels * steps];
        for c in 0..latent {
            for t in 0..steps {
                weights[c * channels * steps + c * steps + t] = 1.0 / steps as f64;
            }
        }
        let layer = Dense {
            inputs: channels * steps,
            outputs: latent,
            weights,
            bias: vec![0.0; latent],
            activation: Activation::Linear,
        };
        Encoder::from_layers(channels, steps, vec![layer], 1, Normalizer::identity(channels)).unwrap()
    }

    #[test]
    fn reencode_with_hand_built_weights() {
        let enc = channel_mean_encoder(2, 3, 2);
        let mut c = Container::new(2, 0.01, DistanceMetric::euclidean(), ContainerParams { target_size: 3, ..Default::default() });
        let mut a = individual(0, &[9.0, 9.0]);
        a.sensory = SensoryData::new(2, 3, vec![0.0, 0.3, 0.6, -1.0, -1.0, -1.0]).unwrap();
        let mut b = individual(1, &[-9.0, 9.0]);
        b.sensory = a.sensory.clone();
        let mut lone = individual(2, &[0.0, 0.0]);
        lone.sensory = SensoryData::constant(2, 3, 0.5);
        c.try_add(a).unwrap();
        c.try_add(lone).unwrap();
        c.try_add(b.clone()).unwrap();
        reencode_members(&enc, &mut c).unwrap();
        let d0 = &c.get(0).unwrap().descriptor;
        assert!((d0[0] - 0.3).abs() < 1e-15 && d0[1] == -1.0);
        assert_eq!(c.get(0).unwrap().descriptor, c.get(1).unwrap().descriptor);
        assert_eq!(c.get(2).unwrap().descriptor, vec![0.5, 0.5]);

        let mut single = Container::new(2, 0.01, DistanceMetric::euclidean(), ContainerParams::default());
        single.try_add(b).unwrap();
        reencode_all(&enc, &mut single).unwrap();
        assert_eq!(single.ids(), vec![1]);
    }
}
