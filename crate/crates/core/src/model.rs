//! Score models: the `Scorer` abstraction and a small ReLU MLP with sigmoid
//! output, exact backpropagation, Adam and JSON checkpoints.
//!
//! Parameters live in one flat vector. Layer `l` stores its weight matrix
//! (row-major, `out x in`) followed by its bias, so optimizers and finite
//! difference checks can treat the model as a plain `&mut [f64]`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything that maps `(x, s)` to a score in `[0, 1]`.
pub trait Scorer: Sync {
    /// Dimension of `x` (the sensitive attribute is passed separately).
    fn input_dim(&self) -> usize;

    fn score(&self, x: &[f64], s: u8) -> f64;

    fn score_all<P: AsRef<[f64]>>(&self, xs: &[P], s: u8) -> Vec<f64>
    where
        Self: Sized,
    {
        xs.iter().map(|x| self.score(x.as_ref(), s)).collect()
    }
}

impl<T: Scorer + ?Sized> Scorer for &T {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn score(&self, x: &[f64], s: u8) -> f64 {
        (**self).score(x, s)
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub const CE_CLAMP: f64 = 1e-7;

/// Binary cross-entropy and its derivative with respect to the score.
///
/// The score is clamped to `[1e-7, 1 - 1e-7]`; the derivative is taken at the
/// clamped value.
pub fn cross_entropy(score: f64, label: u8) -> (f64, f64) {
    let p = score.clamp(CE_CLAMP, 1.0 - CE_CLAMP);
    if label == 1 {
        (-p.ln(), -1.0 / p)
    } else {
        (-(1.0 - p).ln(), 1.0 / (1.0 - p))
    }
}

/// Fully connected network: ReLU hidden layers, sigmoid scalar output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    feature_dim: usize,
    include_sensitive: bool,
    /// Layer widths from network input to the scalar output.
    dims: Vec<usize>,
    params: Vec<f64>,
}

impl Mlp {
    /// Network over `feature_dim` features (plus `s` when `include_sensitive`)
    /// with the given hidden widths, He-uniform initialised.
    pub fn new<R: Rng + ?Sized>(feature_dim: usize, hidden: &[usize], include_sensitive: bool, rng: &mut R) -> Self {
        let mut mlp = Self::zeros(feature_dim, hidden, include_sensitive);
        let mut offset = 0;
        for l in 0..mlp.dims.len() - 1 {
            let (fan_in, fan_out) = (mlp.dims[l], mlp.dims[l + 1]);
            let bound = (6.0 / fan_in.max(1) as f64).sqrt();
            for w in &mut mlp.params[offset..offset + fan_in * fan_out] {
                *w = rng.random_range(-bound..bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        mlp
    }

    /// Two hidden layers as wide as the network input.
    pub fn with_default_width<R: Rng + ?Sized>(feature_dim: usize, include_sensitive: bool, rng: &mut R) -> Self {
        let width = feature_dim + usize::from(include_sensitive);
        Self::new(feature_dim, &[width, width], include_sensitive, rng)
    }

    pub fn zeros(feature_dim: usize, hidden: &[usize], include_sensitive: bool) -> Self {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(feature_dim + usize::from(include_sensitive));
        dims.extend_from_slice(hidden);
        dims.push(1);
        let n_params = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self {
            feature_dim,
            include_sensitive,
            dims,
            params: vec![0.0; n_params],
        }
    }

    pub fn from_parts(feature_dim: usize, include_sensitive: bool, dims: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 || dims[0] != feature_dim + usize::from(include_sensitive) || dims.last() != Some(&1) {
            return Err(Error::Checkpoint(format!("inconsistent layer dims {dims:?}")));
        }
        let expected: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if params.len() != expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} parameters, found {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(Self {
            feature_dim,
            include_sensitive,
            dims,
            params,
        })
    }

    pub fn include_sensitive(&self) -> bool {
        self.include_sensitive
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn write_input(&self, x: &[f64], s: u8, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(x);
        if self.include_sensitive {
            buf.push(f64::from(s));
        }
    }

    /// Forward pass keeping every layer's activation; returns the logit.
    fn forward_trace(&self, x: &[f64], s: u8, acts: &mut Vec<Vec<f64>>) -> f64 {
        let n_layers = self.dims.len() - 1;
        acts.resize_with(n_layers, Vec::new);
        self.write_input(x, s, &mut acts[0]);
        let mut offset = 0;
        let mut logit = 0.0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let mut out = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = b[o] + row.iter().zip(&acts[l]).map(|(a, b)| a * b).sum::<f64>();
                out.push(z);
            }
            if l + 1 < n_layers {
                for z in &mut out {
                    *z = z.max(0.0);
                }
                acts[l + 1] = out;
            } else {
                logit = out[0];
            }
        }
        logit
    }

    /// Score in `[0, 1]`; errors on a feature-dimension mismatch.
    pub fn forward(&self, x: &[f64], s: u8) -> Result<f64> {
        self.check_input(x)?;
        Ok(sigmoid(self.forward_trace(x, s, &mut Vec::new())))
    }

    pub fn forward_batch<P: AsRef<[f64]>>(&self, xs: &[P], ss: &[u8]) -> Result<Vec<f64>> {
        if xs.len() != ss.len() {
            return Err(Error::SizeMismatch {
                left: xs.len(),
                right: ss.len(),
            });
        }
        let mut acts = Vec::new();
        xs.iter()
            .zip(ss)
            .map(|(x, &s)| {
                self.check_input(x.as_ref())?;
                Ok(sigmoid(self.forward_trace(x.as_ref(), s, &mut acts)))
            })
            .collect()
    }

    /// Gradient of `sum_k upstream[k] * f(x_k, s_k)` with respect to every
    /// parameter.
    ///
    /// ReLU's derivative at 0 is taken as 0.
    pub fn backward<P: AsRef<[f64]>>(&self, xs: &[P], ss: &[u8], upstream: &[f64]) -> Result<Vec<f64>> {
        let mut grads = vec![0.0; self.params.len()];
        self.backward_into(xs, ss, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Accumulates into `grads` instead of allocating.
    pub fn backward_into<P: AsRef<[f64]>>(
        &self,
        xs: &[P],
        ss: &[u8],
        upstream: &[f64],
        grads: &mut [f64],
    ) -> Result<()> {
        if xs.len() != ss.len() || xs.len() != upstream.len() {
            return Err(Error::SizeMismatch {
                left: xs.len(),
                right: upstream.len().min(ss.len()),
            });
        }
        let n_layers = self.dims.len() - 1;
        let offsets: Vec<usize> = self
            .dims
            .windows(2)
            .scan(0, |acc, w| {
                let start = *acc;
                *acc += w[0] * w[1] + w[1];
                Some(start)
            })
            .collect();
        let mut acts = Vec::new();
        let mut delta: Vec<f64> = Vec::new();
        let mut prev_delta: Vec<f64> = Vec::new();
        for ((x, &s), &g) in xs.iter().zip(ss).zip(upstream) {
            let x = x.as_ref();
            self.check_input(x)?;
            if g == 0.0 {
                continue;
            }
            let p = sigmoid(self.forward_trace(x, s, &mut acts));
            delta.clear();
            delta.push(g * p * (1.0 - p));
            for l in (0..n_layers).rev() {
                let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
                let off = offsets[l];
                let input = &acts[l];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let gw = &mut grads[off + o * n_in..off + (o + 1) * n_in];
                    for (gwk, a) in gw.iter_mut().zip(input) {
                        *gwk += d * a;
                    }
                    grads[off + n_in * n_out + o] += d;
                }
                if l == 0 {
                    break;
                }
                let w = &self.params[off..off + n_in * n_out];
                prev_delta.clear();
                prev_delta.resize(n_in, 0.0);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (pd, wk) in prev_delta.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *pd += d * wk;
                    }
                }
                // acts[l] holds post-ReLU values of layer l's input.
                for (pd, a) in prev_delta.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *pd = 0.0;
                    }
                }
                std::mem::swap(&mut delta, &mut prev_delta);
            }
        }
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &Checkpoint::from(self))?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        ckpt.into_model()
    }
}

impl Scorer for Mlp {
    fn input_dim(&self) -> usize {
        self.feature_dim
    }

    fn score(&self, x: &[f64], s: u8) -> f64 {
        debug_assert_eq!(x.len(), self.feature_dim);
        sigmoid(self.forward_trace(x, s, &mut Vec::new()))
    }
}

pub const CHECKPOINT_FORMAT: &str = "ftm-mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk model layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub feature_dim: usize,
    pub include_sensitive: bool,
    pub dims: Vec<usize>,
    pub params: Vec<f64>,
}

impl From<&Mlp> for Checkpoint {
    fn from(m: &Mlp) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            feature_dim: m.feature_dim,
            include_sensitive: m.include_sensitive,
            dims: m.dims.clone(),
            params: m.params.clone(),
        }
    }
}

impl Checkpoint {
    pub fn into_model(self) -> Result<Mlp> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        Mlp::from_parts(self.feature_dim, self.include_sensitive, self.dims, self.params)
    }
}

/// Adam moments, step count and the current (decayed) learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub lr_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerState {
    pub fn new(num_params: usize, lr: f64, lr_decay: f64) -> Self {
        Self {
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step: 0,
            lr,
            lr_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Multiplies the learning rate by the decay factor.
    pub fn end_epoch(&mut self) {
        self.lr *= self.lr_decay;
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.first_moment.len());
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for k in 0..params.len() {
        let g = grads[k];
        let m = &mut state.first_moment[k];
        let v = &mut state.second_moment[k];
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        params[k] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
}
