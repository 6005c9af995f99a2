//! One-class SVM with an RBF kernel.
//!
//! The dual problem
//!
//! ```text
//! min  1/2 a' Q a    s.t.  0 <= a_i <= 1/(nu l),  sum_i a_i = 1,
//! Q_ij = exp(-gamma |x_i - x_j|^2)
//! ```
//!
//! is solved by pairwise coordinate descent on the maximal KKT-violating
//! pair, which keeps the equality constraint exact at every step. Inputs
//! are classified with `f(x) = sum_i a_i k(x_i, x) - b`, `f(x) >= 0` being
//! the positive (tumor) class.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Alphas at or below this are dropped from the model.
pub const ALPHA_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("feature", "non-finite value"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[inline]
fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn rbf_kernel(x: &FeatureVector, y: &FeatureVector, gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "feature lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if !(gamma > 0.0) {
        return Err(invalid("gamma", format!("{gamma} must be positive")));
    }
    Ok((-gamma * squared_distance(&x.0, &y.0)).exp())
}

/// Dense row-major kernel matrix.
pub fn kernel_matrix(samples: &[FeatureVector], gamma: f64) -> Vec<f64> {
    let n = samples.len();
    let mut q = vec![0.0; n * n];
    q.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j {
                1.0
            } else {
                (-gamma * squared_distance(&samples[i].0, &samples[j].0)).exp()
            };
        }
    });
    q
}

pub fn dual_objective(q: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut total = 0.0;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| q[i * n + j] * alpha[j]).sum();
        total += alpha[i] * row;
    }
    0.5 * total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub nu: f64,
    /// RBF width; `None` picks `1 / (dim * variance)` from the samples.
    pub gamma: Option<f64>,
    /// Bound on the maximal pairwise KKT violation.
    pub tolerance: f64,
    /// Pair updates allowed before giving up.
    pub max_passes: usize,
    /// Larger training sets are subsampled to this size.
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            nu: 0.1,
            gamma: None,
            tolerance: 1e-6,
            max_passes: 1_000_000,
            max_samples: 2000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(invalid("nu", format!("{} not in (0, 1]", self.nu)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(invalid("gamma", format!("{g} must be positive and finite")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        if self.max_passes == 0 {
            return Err(invalid("max_passes", "must be at least 1"));
        }
        if self.max_samples == 0 {
            return Err(invalid("max_samples", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BiasRule {
    /// Mean decision sum over margin support vectors.
    #[serde(rename = "margin-mean")]
    MarginMean,
    /// No margin support vector: maximum decision sum over support vectors.
    #[serde(rename = "fallback-max")]
    FallbackMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcsvmModel {
    pub feature_dim: usize,
    pub gamma: f64,
    pub nu: f64,
    pub b: f64,
    pub alphas: Vec<f64>,
    pub support_vectors: Vec<FeatureVector>,
    pub bias_rule: BiasRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Tumor,
    NonTumor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub score: f64,
    pub label: Label,
}

/// Result of the dual solve on the full training set.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// `Q a`, i.e. the decision sum at every training sample.
    pub gradient: Vec<f64>,
    pub upper_bound: f64,
    pub updates: usize,
    pub violation: f64,
}

fn max_violating_pair(alpha: &[f64], grad: &[f64], upper: f64) -> Option<(usize, usize, f64)> {
    let mut up: Option<usize> = None;
    let mut low: Option<usize> = None;
    for t in 0..alpha.len() {
        if alpha[t] < upper && up.is_none_or(|i| grad[t] < grad[i]) {
            up = Some(t);
        }
        if alpha[t] > 0.0 && low.is_none_or(|j| grad[t] > grad[j]) {
            low = Some(t);
        }
    }
    let (i, j) = (up?, low?);
    Some((i, j, grad[j] - grad[i]))
}

/// Minimizes `1/2 a'Qa` over `{0 <= a <= 1/(nu n), sum a = 1}` from `a = 1/n`.
pub fn solve_dual(q: &[f64], n: usize, nu: f64, tolerance: f64, max_passes: usize) -> Result<DualSolution> {
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let upper = 1.0 / (nu * n as f64);
    let mut alpha = vec![1.0 / n as f64; n];
    let mut grad: Vec<f64> = (0..n)
        .map(|i| q[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();

    let mut updates = 0;
    loop {
        let Some((i, j, violation)) = max_violating_pair(&alpha, &grad, upper) else {
            return Ok(DualSolution { alpha, gradient: grad, upper_bound: upper, updates, violation: 0.0 });
        };
        if violation <= tolerance {
            return Ok(DualSolution { alpha, gradient: grad, upper_bound: upper, updates, violation });
        }
        if updates >= max_passes {
            return Err(Error::NotConverged { passes: updates, violation });
        }
        let curvature = (q[i * n + i] + q[j * n + j] - 2.0 * q[i * n + j]).max(1e-12);
        let room_i = upper - alpha[i];
        let room_j = alpha[j];
        let step = violation / curvature;
        let delta = step.min(room_i).min(room_j);
        if delta >= room_i {
            alpha[i] = upper;
        } else {
            alpha[i] += delta;
        }
        if delta >= room_j {
            alpha[j] = 0.0;
        } else {
            alpha[j] -= delta;
        }
        for (t, g) in grad.iter_mut().enumerate() {
            *g += delta * (q[t * n + i] - q[t * n + j]);
        }
        updates += 1;
    }
}

/// Bias from the margin support vectors (`0 < a < C - tolerance`), or the
/// largest support-vector decision sum when none exists.
pub fn compute_bias(alpha: &[f64], decision_sums: &[f64], upper: f64, tolerance: f64) -> (f64, BiasRule) {
    let margin: Vec<f64> = alpha
        .iter()
        .zip(decision_sums)
        .filter(|(&a, _)| a > ALPHA_EPSILON && a < upper - tolerance)
        .map(|(_, &g)| g)
        .collect();
    if margin.is_empty() {
        let b = alpha
            .iter()
            .zip(decision_sums)
            .filter(|(&a, _)| a > ALPHA_EPSILON)
            .map(|(_, &g)| g)
            .fold(f64::NEG_INFINITY, f64::max);
        (b, BiasRule::FallbackMax)
    } else {
        (margin.iter().sum::<f64>() / margin.len() as f64, BiasRule::MarginMean)
    }
}

/// `1 / (dim * variance)` with the variance pooled over every feature value.
pub fn default_gamma(samples: &[FeatureVector]) -> f64 {
    let dim = samples.first().map_or(1, |s| s.len()).max(1);
    let values = samples.iter().flat_map(|s| s.0.iter().copied());
    let count = (samples.len() * dim) as f64;
    let mean = values.clone().sum::<f64>() / count;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    if var > 0.0 {
        1.0 / (dim as f64 * var)
    } else {
        1.0 / dim as f64
    }
}

fn check_dimensions(samples: &[FeatureVector]) -> Result<usize> {
    let first = samples.first().ok_or(Error::EmptyTrainingSet)?;
    let dim = first.len();
    if dim == 0 {
        return Err(invalid("feature", "zero-length feature vectors"));
    }
    if let Some(bad) = samples.iter().position(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "sample {bad} has length {}, expected {dim}",
            samples[bad].len()
        )));
    }
    Ok(dim)
}

pub fn train(samples: &[FeatureVector], config: &TrainConfig) -> Result<OcsvmModel> {
    config.validate()?;
    let feature_dim = check_dimensions(samples)?;
    let subsampled;
    let samples = if samples.len() > config.max_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut picks = index::sample(&mut rng, samples.len(), config.max_samples).into_vec();
        picks.sort_unstable();
        subsampled = picks.into_iter().map(|i| samples[i].clone()).collect::<Vec<_>>();
        &subsampled[..]
    } else {
        samples
    };
    let gamma = config.gamma.unwrap_or_else(|| default_gamma(samples));
    let n = samples.len();
    let q = kernel_matrix(samples, gamma);
    let sol = solve_dual(&q, n, config.nu, config.tolerance, config.max_passes)?;
    let (b, bias_rule) = compute_bias(&sol.alpha, &sol.gradient, sol.upper_bound, config.tolerance);

    let (alphas, support_vectors) = sol
        .alpha
        .iter()
        .zip(samples)
        .filter(|(&a, _)| a > ALPHA_EPSILON)
        .map(|(&a, s)| (a, s.clone()))
        .unzip();
    Ok(OcsvmModel {
        feature_dim,
        gamma,
        nu: config.nu,
        b,
        alphas,
        support_vectors,
        bias_rule,
    })
}

impl OcsvmModel {
    /// `sum_i a_i k(x_i, x)` without the bias.
    pub fn decision_sum(&self, x: &[f64]) -> f64 {
        self.alphas
            .iter()
            .zip(&self.support_vectors)
            .map(|(a, sv)| a * (-self.gamma * squared_distance(&sv.0, x)).exp())
            .sum()
    }

    pub fn decide(&self, x: &FeatureVector) -> Result<Decision> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch(format!(
                "query has length {}, model expects {}",
                x.len(),
                self.feature_dim
            )));
        }
        let score = self.decision_sum(&x.0) - self.b;
        let label = if score >= 0.0 { Label::Tumor } else { Label::NonTumor };
        Ok(Decision { score, label })
    }

    pub fn decide_batch(&self, xs: &[FeatureVector]) -> Result<Vec<Decision>> {
        xs.par_iter().map(|x| self.decide(x)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.alphas.len() != model.support_vectors.len() {
            return Err(invalid("alphas", "length differs from support_vectors"));
        }
        if model.support_vectors.iter().any(|s| s.len() != model.feature_dim) {
            return Err(Error::DimensionMismatch("support vector length != feature_dim".into()));
        }
        Ok(model)
    }
}

/// Free-function form of [`OcsvmModel::decide`].
pub fn decide(model: &OcsvmModel, x: &FeatureVector) -> Result<Decision> {
    model.decide(x)
}
