//! Synthetic generators with closed-form oracles: Gaussian optimal transport,
//! a linear-Gaussian structural causal model, the uniform two-model
//! counterexample, and a shifted-Gaussian classification task.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{sigmoid, Scorer};
use crate::seed;

const EIGEN_FLOOR: f64 = 1e-12;

fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || (m - m.transpose()).amax() > 1e-10 * m.amax().max(1.0) {
        return Err(Error::NotSpd);
    }
    m.clone().cholesky().map(|_| ()).ok_or(Error::NotSpd)
}

/// `f(M)` for a symmetric matrix through its eigendecomposition, with
/// eigenvalues clamped at `1e-12`.
fn spectral(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| f(v.max(EIGEN_FLOOR)));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

pub fn sqrt_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral(m, f64::sqrt)
}

pub fn inv_sqrt_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral(m, |v| 1.0 / v.sqrt())
}

/// `x -> W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl AffineMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.w * DVector::from_column_slice(x) + &self.b).as_slice().to_vec()
    }
}

/// Linear-Gaussian structural model `X_s = mu_s + A X_s + eps_s` with
/// `eps_s ~ N(0, sigma_s^2 D)` and diagonal `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    pub a: DMatrix<f64>,
    pub mu: [DVector<f64>; 2],
    pub d: DVector<f64>,
    pub sigma: [f64; 2],
}

impl Scm {
    /// `B = (I - A)^{-1}`.
    pub fn b(&self) -> Result<DMatrix<f64>> {
        let n = self.a.nrows();
        (DMatrix::identity(n, n) - &self.a).try_inverse().ok_or(Error::Singular)
    }

    /// Counterfactual of `x` (observed in group `s`) in the other group:
    /// `B mu_s' + (sigma_s' / sigma_s) (x - B mu_s)`.
    pub fn counterfactual(&self, x: &[f64], s: u8) -> Result<Vec<f64>> {
        let b = self.b()?;
        let (s, t) = (s as usize, 1 - s as usize);
        let x = DVector::from_column_slice(x);
        let cf = &b * &self.mu[t] + (&x - &b * &self.mu[s]) * (self.sigma[t] / self.sigma[s]);
        Ok(cf.as_slice().to_vec())
    }

    /// Group distributions implied by the model:
    /// `N(B mu_s, sigma_s^2 B D B^T)`.
    pub fn implied_pair(&self) -> Result<GaussianPair> {
        let b = self.b()?;
        let bdb = &b * DMatrix::from_diagonal(&self.d) * b.transpose();
        let cov = |s: usize| &bdb * (self.sigma[s] * self.sigma[s]);
        GaussianPair::new(&b * &self.mu[0], &b * &self.mu[1], cov(0), cov(1))
    }
}

pub fn scm_counterfactual(x: &[f64], s: u8, scm: &Scm) -> Result<Vec<f64>> {
    scm.counterfactual(x, s)
}

/// Two Gaussian group distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPair {
    pub mu0: DVector<f64>,
    pub mu1: DVector<f64>,
    pub sigma0: DMatrix<f64>,
    pub sigma1: DMatrix<f64>,
}

impl GaussianPair {
    pub fn new(mu0: DVector<f64>, mu1: DVector<f64>, sigma0: DMatrix<f64>, sigma1: DMatrix<f64>) -> Result<Self> {
        let d = mu0.len();
        for (got, what) in [
            (mu1.len(), "mu1"),
            (sigma0.nrows(), "sigma0"),
            (sigma1.nrows(), "sigma1"),
        ] {
            if got != d {
                log::debug!("dimension mismatch in {what}");
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        check_spd(&sigma0)?;
        check_spd(&sigma1)?;
        Ok(Self {
            mu0,
            mu1,
            sigma0,
            sigma1,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    /// Draws `n` points from group `s`.
    pub fn sample<R: Rng + ?Sized>(&self, s: u8, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let (mu, cov) = if s == 0 {
            (&self.mu0, &self.sigma0)
        } else {
            (&self.mu1, &self.sigma1)
        };
        let l = cov.clone().cholesky().expect("covariance checked at construction").l();
        (0..n)
            .map(|_| {
                let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
                (mu + &l * z).as_slice().to_vec()
            })
            .collect()
    }
}

/// Closed-form optimal transport map from group 0 to group 1:
/// `W = S0^{-1/2} (S0^{1/2} S1 S0^{1/2})^{1/2} S0^{-1/2}`, `b = mu1 - W mu0`.
pub fn gaussian_ot_map(pair: &GaussianPair) -> Result<AffineMap> {
    check_spd(&pair.sigma0)?;
    check_spd(&pair.sigma1)?;
    let r = sqrt_spd(&pair.sigma0);
    let r_inv = inv_sqrt_spd(&pair.sigma0);
    let w = &r_inv * sqrt_spd(&(&r * &pair.sigma1 * &r)) * &r_inv;
    let b = &pair.mu1 - &w * &pair.mu0;
    Ok(AffineMap { w, b })
}

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// The two perfectly group-fair step models on `X | S ~ Unif(0, 1)`.
///
/// `Hat` predicts `1[x >= 1/2]` for group 0 and the opposite for group 1;
/// `Tilde` predicts `1[x >= 1/2]` for both. `sign(0)` is taken as `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepModel {
    Hat,
    Tilde,
}

impl StepModel {
    /// Analytic fair matching function.
    pub fn matcher(self, x: f64, s: u8) -> f64 {
        match self {
            StepModel::Hat => x - sign((2.0 * x - 1.0) * (1.0 - 2.0 * s as f64)) / 2.0,
            StepModel::Tilde => x,
        }
    }

    /// Expected squared distance moved by the analytic matcher.
    pub fn analytic_transport_cost(self) -> f64 {
        match self {
            StepModel::Hat => 0.25,
            StepModel::Tilde => 0.0,
        }
    }
}

impl Scorer for StepModel {
    fn input_dim(&self) -> usize {
        1
    }

    fn score(&self, x: &[f64], s: u8) -> f64 {
        let t = sign(2.0 * x[0] - 1.0);
        match self {
            StepModel::Hat => (t * (1.0 - 2.0 * s as f64) + 1.0) / 2.0,
            StepModel::Tilde => (t + 1.0) / 2.0,
        }
    }
}

pub fn step_models() -> (StepModel, StepModel) {
    (StepModel::Hat, StepModel::Tilde)
}

/// Midpoint grid `(k + 1/2) / n` in both groups, labelled `1[x >= 1/2]`.
/// Rows `0..n` belong to group 0 and rows `n..2n` to group 1.
pub fn grid_dataset(n_per_group: usize) -> Result<Dataset> {
    if n_per_group == 0 {
        return Err(Error::Empty("grid"));
    }
    let xs: Vec<f64> = (0..n_per_group)
        .map(|k| (k as f64 + 0.5) / n_per_group as f64)
        .collect();
    let rows: Vec<Vec<f64>> = xs.iter().chain(&xs).map(|&x| vec![x]).collect();
    let labels = rows.iter().map(|r| u8::from(r[0] >= 0.5)).collect();
    let sensitive = (0..2 * n_per_group).map(|i| u8::from(i >= n_per_group)).collect();
    Dataset::from_rows(
        &rows,
        labels,
        sensitive,
        &format!("uniform grid, {n_per_group} points per group"),
    )
}

/// Logistic labelling rule
/// `P(y = 1 | x, s) = sigmoid(w . x + bias + group_effect * (2s - 1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub group_effect: f64,
}

impl LabelRule {
    /// Weights `scale / sqrt(d)` in every coordinate, no bias, no group effect.
    pub fn aligned(d: usize, scale: f64) -> Self {
        Self {
            weights: vec![scale / (d as f64).sqrt(); d],
            bias: 0.0,
            group_effect: 0.0,
        }
    }
}

/// `n` rows with `s ~ Bernoulli(1/2)`, `x | s ~ N(s * shift * u, I_d)` where
/// `u = (1, .., 1) / sqrt(d)`, and labels drawn from `rule`.
pub fn make_synthetic_classification(
    n: usize,
    d: usize,
    group_shift: f64,
    rule: &LabelRule,
    seed: u64,
) -> Result<Dataset> {
    if rule.weights.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rule.weights.len(),
        });
    }
    if n == 0 || d == 0 {
        return Err(Error::Empty("synthetic dataset"));
    }
    let mut rng = seed::stream(seed, "synthetic-classification", 0);
    let offset = group_shift / (d as f64).sqrt();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut sensitive = Vec::with_capacity(n);
    for _ in 0..n {
        let s = u8::from(rng.random::<bool>());
        let x: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal) + s as f64 * offset)
            .collect();
        let logit = x.iter().zip(&rule.weights).map(|(a, b)| a * b).sum::<f64>()
            + rule.bias
            + rule.group_effect * (2.0 * s as f64 - 1.0);
        labels.push(u8::from(rng.random::<f64>() < sigmoid(logit)));
        sensitive.push(s);
        rows.push(x);
    }
    Dataset::from_rows(
        &rows,
        labels,
        sensitive,
        &format!("synthetic: n={n}, d={d}, shift={group_shift}, seed={seed}"),
    )
}
