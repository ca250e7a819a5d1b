//! Multilayer perceptron with ReLU hidden layers and a single sigmoid output,
//! exact backpropagation, L2 penalty and a binary checkpoint format.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::divergence::PROB_CLIP;
use crate::error::{invalid, Error, Result};

/// Default hidden widths.
pub const DEFAULT_HIDDEN: [usize; 3] = [512, 256, 64];

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Layer weights and biases. Also used for gradients and optimizer moments,
/// which share the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; the last entry is the final hidden activation.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Array2<f64>>,
    pub logits: Vec<f64>,
    /// Sigmoid of the logits before clipping.
    raw_probs: Vec<f64>,
    /// Clipped into `[PROB_CLIP, 1 - PROB_CLIP]`.
    pub probs: Vec<f64>,
}

impl ForwardCache {
    /// Final hidden activations (`B x h`); the input itself when the network
    /// has no hidden layer.
    pub fn hidden(&self) -> &Array2<f64> {
        self.inputs.last().expect("at least one layer")
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn clip_prob(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases, deterministic per seed.
    pub fn init(hidden_sizes: &[usize], input_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return invalid("input dimension must be at least 1");
        }
        if hidden_sizes.contains(&0) {
            return invalid("hidden layer sizes must be at least 1");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden_sizes);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight =
                    Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..limit));
                Layer { weight, bias: Array1::zeros(fan_out) }
            })
            .collect();
        Ok(MlpParams { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return invalid("a network needs at least one layer");
        }
        for (k, l) in layers.iter().enumerate() {
            if l.weight.nrows() == 0 || l.weight.ncols() == 0 {
                return invalid(format!("layer {k} has a zero dimension"));
            }
            if l.bias.len() != l.weight.nrows() {
                return invalid(format!("layer {k}: bias length does not match output width"));
            }
            if k > 0 && layers[k - 1].weight.nrows() != l.weight.ncols() {
                return invalid(format!("layer {k}: input width does not chain"));
            }
            if l.weight.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return invalid(format!("layer {k} has non-finite entries"));
            }
        }
        if layers.last().unwrap().weight.nrows() != 1 {
            return invalid("output layer must have a single unit");
        }
        Ok(MlpParams { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    /// Layer widths from input to output, e.g. `[d, 32, 16, 1]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.weight.nrows()));
        w
    }

    pub fn zeros_like(&self) -> Self {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Number of weight entries (biases excluded).
    pub fn num_weights(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len()).sum()
    }

    /// All entries in layer order, weights (row-major) before biases.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params());
        let mut it = values.iter();
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v = *it.next().unwrap());
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &MlpParams, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.scaled_add(scale, &b.weight);
            a.bias.scaled_add(scale, &b.bias);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        if x.ncols() != self.input_dim() {
            return invalid(format!(
                "feature width {} does not match model input {}",
                x.ncols(),
                self.input_dim()
            ));
        }
        let n_hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(n_hidden);
        let mut a = x.to_owned();
        for l in &self.layers[..n_hidden] {
            let z = a.dot(&l.weight.t()) + &l.bias;
            let act = z.mapv(|v| v.max(0.0));
            inputs.push(a);
            pre.push(z);
            a = act;
        }
        let out = &self.layers[n_hidden];
        let logits: Vec<f64> = (a.dot(&out.weight.t()) + &out.bias).column(0).to_vec();
        inputs.push(a);
        let raw_probs: Vec<f64> = logits.iter().map(|&l| sigmoid(l)).collect();
        let probs = raw_probs.iter().map(|&p| clip_prob(p)).collect();
        Ok(ForwardCache { inputs, pre, logits, raw_probs, probs })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.probs)
    }

    /// Reverse-mode gradients of a loss given `∂L/∂z` at the clipped
    /// probabilities and, optionally, `∂L/∂h` at the final hidden layer.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        dloss_dz: &[f64],
        dloss_dhidden: Option<ArrayView2<f64>>,
    ) -> Result<MlpParams> {
        let batch = cache.probs.len();
        if dloss_dz.len() != batch {
            return invalid(format!("∂L/∂z has length {}, expected {batch}", dloss_dz.len()));
        }
        let hidden = cache.hidden();
        if let Some(dh) = dloss_dhidden {
            if dh.dim() != hidden.dim() {
                return invalid(format!(
                    "∂L/∂hidden has shape {:?}, expected {:?}",
                    dh.dim(),
                    hidden.dim()
                ));
            }
        }
        let mut grads = self.zeros_like();
        let n_hidden = self.layers.len() - 1;

        // sigmoid followed by clipping: zero derivative where the clip is active
        let dlogit = Array1::from_shape_fn(batch, |i| {
            let p = cache.raw_probs[i];
            if p < PROB_CLIP || p > 1.0 - PROB_CLIP {
                0.0
            } else {
                dloss_dz[i] * p * (1.0 - p)
            }
        });
        let out = &self.layers[n_hidden];
        grads.layers[n_hidden].weight = dlogit.view().insert_axis(Axis(0)).dot(hidden);
        grads.layers[n_hidden].bias = Array1::from_elem(1, dlogit.sum());

        if n_hidden == 0 {
            return Ok(grads);
        }
        let mut dact = dlogit.view().insert_axis(Axis(1)).dot(&out.weight);
        if let Some(dh) = dloss_dhidden {
            dact += &dh;
        }
        for k in (0..n_hidden).rev() {
            let dpre = &dact * &cache.pre[k].mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            grads.layers[k].weight = dpre.t().dot(&cache.inputs[k]);
            grads.layers[k].bias = dpre.sum_axis(Axis(0));
            if k > 0 {
                dact = dpre.dot(&self.layers[k].weight);
            }
        }
        Ok(grads)
    }

    /// `(β/2) Σ w²` over weights (biases excluded) and its gradient.
    pub fn l2_penalty(&self, beta: f64) -> Result<(f64, MlpParams)> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return invalid(format!("L2 weight must be finite and non-negative, got {beta}"));
        }
        let mut grads = self.zeros_like();
        let mut value = 0.0;
        for (g, l) in grads.layers.iter_mut().zip(&self.layers) {
            value += l.weight.iter().map(|w| w * w).sum::<f64>();
            g.weight = &l.weight * beta;
        }
        Ok((0.5 * beta * value, grads))
    }

    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for l in &self.layers {
            w.write_all(&(l.weight.nrows() as u32).to_le_bytes())?;
            w.write_all(&(l.weight.ncols() as u32).to_le_bytes())?;
        }
        for l in &self.layers {
            for v in l.weight.iter().chain(l.bias.iter()) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated checkpoint".into()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a model checkpoint".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let n = read_u32(&mut r)? as usize;
        if n == 0 || n > 1024 {
            return Err(Error::Format(format!("implausible layer count {n}")));
        }
        let mut shapes = Vec::with_capacity(n);
        for _ in 0..n {
            shapes.push((read_u32(&mut r)? as usize, read_u32(&mut r)? as usize));
        }
        let mut layers = Vec::with_capacity(n);
        for (out, inp) in shapes {
            let mut weight = Array2::zeros((out, inp));
            for v in weight.iter_mut() {
                *v = read_f64(&mut r)?;
            }
            let mut bias = Array1::zeros(out);
            for v in bias.iter_mut() {
                *v = read_f64(&mut r)?;
            }
            layers.push(Layer { weight, bias });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        MlpParams::from_layers(layers).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_checkpoint(bytes.as_slice())
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"CSFM";
const CHECKPOINT_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated checkpoint".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated checkpoint".into()))?;
    Ok(f64::from_le_bytes(b))
}

/// Mean binary cross-entropy `-(1/B) Σ [y log z + (1-y) log(1-z)]` and its
/// gradient with respect to `z`.
pub fn bce_loss(z: &[f64], y: &[u8]) -> Result<(f64, Vec<f64>)> {
    if z.len() != y.len() {
        return invalid(format!("length mismatch: {} probabilities vs {} labels", z.len(), y.len()));
    }
    if z.is_empty() {
        return invalid("BCE needs at least one sample");
    }
    let b = z.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(z.len());
    for (&zi, &yi) in z.iter().zip(y) {
        let zi = clip_prob(zi);
        let yi = yi as f64;
        value -= yi * zi.ln() + (1.0 - yi) * (1.0 - zi).ln();
        grad.push((zi - yi) / (zi * (1.0 - zi)) / b);
    }
    Ok((value / b, grad))
}
