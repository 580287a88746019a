//! Soft-margin support vector machines.
//!
//! The dual
//!
//! ```text
//! max  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//! s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! is solved by sequential minimal optimization with second-order
//! working-set selection. Training stops when the maximal KKT violation
//! `m(a) - M(a)` drops below `tol`. The bias is averaged over free support
//! vectors (midpoint of the feasible interval when there are none).
//! Multiclass problems use one-vs-rest with the largest margin winning.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, Bandwidth};

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvmKind {
    Linear,
    Rbf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub kind: SvmKind,
    pub c: f64,
    /// RBF bandwidth; ignored for the linear kind.
    pub gamma: Bandwidth,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kind: SvmKind::Linear,
            c: 1.0,
            gamma: Bandwidth::default(),
            tol: 1e-6,
            max_iter: 10_000_000,
        }
    }
}

impl SvmParams {
    pub fn linear(c: f64) -> Self {
        SvmParams {
            kind: SvmKind::Linear,
            c,
            ..Default::default()
        }
    }

    pub fn rbf(c: f64, gamma: Bandwidth) -> Self {
        SvmParams {
            kind: SvmKind::Rbf,
            c,
            gamma,
            ..Default::default()
        }
    }
}

/// A trained binary SVM.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    kind: SvmKind,
    support_vectors: DMatrix<f64>,
    /// `a_i y_i` for each support vector.
    dual_coefs: Vec<f64>,
    bias: f64,
    c: f64,
    gamma: f64,
    weights: Option<Vec<f64>>,
}

impl SvmModel {
    /// Rebuilds a model from its stored parts (used by checkpoints).
    pub fn from_parts(
        kind: SvmKind,
        support_vectors: DMatrix<f64>,
        dual_coefs: Vec<f64>,
        bias: f64,
        c: f64,
        gamma: f64,
    ) -> Result<Self> {
        if dual_coefs.len() != support_vectors.nrows() {
            return Err(Error::DimensionMismatch {
                expected: support_vectors.nrows(),
                found: dual_coefs.len(),
            });
        }
        if !(c > 0.0) {
            return Err(Error::InvalidArgument("C must be positive".into()));
        }
        let weights = (kind == SvmKind::Linear).then(|| {
            (0..support_vectors.ncols())
                .map(|j| {
                    dual_coefs
                        .iter()
                        .enumerate()
                        .map(|(i, a)| a * support_vectors[(i, j)])
                        .sum()
                })
                .collect()
        });
        Ok(SvmModel {
            kind,
            support_vectors,
            dual_coefs,
            bias,
            c,
            gamma,
            weights,
        })
    }

    pub fn kind(&self) -> SvmKind {
        self.kind
    }

    pub fn support_vectors(&self) -> &DMatrix<f64> {
        &self.support_vectors
    }

    pub fn dual_coefs(&self) -> &[f64] {
        &self.dual_coefs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Explicit weight vector (linear kind only).
    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn dimension(&self) -> usize {
        self.support_vectors.ncols()
    }

    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            SvmKind::Linear => a.iter().zip(b).map(|(p, q)| p * q).sum(),
            SvmKind::Rbf => {
                let sq: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                (-self.gamma * sq).exp()
            }
        }
    }

    /// Decision values through the support-vector expansion.
    pub fn decision_expansion(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let svs: Vec<Vec<f64>> = self
            .support_vectors
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        x.row_iter()
            .map(|row| {
                let q: Vec<f64> = row.iter().copied().collect();
                svs.iter()
                    .zip(&self.dual_coefs)
                    .map(|(sv, a)| a * self.kernel(sv, &q))
                    .sum::<f64>()
                    + self.bias
            })
            .collect()
    }

    /// Decision values; the linear kind uses its explicit weights.
    pub fn decision(&self, x: &DMatrix<f64>) -> Vec<f64> {
        match &self.weights {
            Some(w) => x
                .row_iter()
                .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + self.bias)
                .collect(),
            None => self.decision_expansion(x),
        }
    }
}

/// Solver output including every training multiplier.
#[derive(Clone, Debug)]
pub struct SvmFit {
    pub model: SvmModel,
    pub alpha: Vec<f64>,
    pub iterations: usize,
    /// Final maximal KKT violation `m(a) - M(a)`.
    pub gap: f64,
}

fn gram(x: &DMatrix<f64>, kind: SvmKind, gamma: f64) -> DMatrix<f64> {
    match kind {
        SvmKind::Linear => x * x.transpose(),
        SvmKind::Rbf => kernels::pairwise_sq_dists(x).values().map(|d| (-gamma * d).exp()),
    }
}

/// Dual objective `sum a - 1/2 a^T Q a` for labels `y` and Gram matrix `k`.
pub fn dual_objective(alpha: &[f64], y: &[f64], k: &DMatrix<f64>) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[(i, j)];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Gram matrix the solver uses for `x` under `params`, and the resolved
/// `gamma` (0 for linear).
pub fn training_gram(x: &DMatrix<f64>, params: &SvmParams) -> Result<(DMatrix<f64>, f64)> {
    let gamma = match params.kind {
        SvmKind::Linear => 0.0,
        SvmKind::Rbf => params.gamma.resolve(&kernels::pairwise_sq_dists(x))?,
    };
    Ok((gram(x, params.kind, gamma), gamma))
}

/// Trains on labels in `{-1, +1}`, returning all multipliers.
pub fn svm_fit(x: &DMatrix<f64>, y: &[f64], params: &SvmParams) -> Result<SvmFit> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidArgument(format!("svm labels must be +-1, got {v}")));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::SingleClass);
    }
    if !(params.c > 0.0) || !params.c.is_finite() {
        return Err(Error::InvalidArgument("C must be positive".into()));
    }
    let c = params.c;
    let (k, gamma) = training_gram(x, params)?;

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let at_upper = |a: f64| a >= c;
    let at_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let gap = loop {
        // first index: maximal violation
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let eligible = if y[t] > 0.0 { !at_upper(alpha[t]) } else { !at_lower(alpha[t]) };
            if eligible && v >= gmax {
                gmax = v;
                i_sel = t;
            }
        }
        // second index: largest second-order decrease
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let eligible = if y[t] > 0.0 { !at_lower(alpha[t]) } else { !at_upper(alpha[t]) };
            if !eligible {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            if i_sel == usize::MAX {
                continue;
            }
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = k[(i_sel, i_sel)] + k[(t, t)] - 2.0 * k[(i_sel, t)];
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best {
                    best = obj;
                    j_sel = t;
                }
            }
        }
        let gap = gmax + gmax2;
        if gap < params.tol || i_sel == usize::MAX || j_sel == usize::MAX {
            break gap.max(0.0);
        }
        if iterations >= params.max_iter {
            return Err(Error::SvmNonConvergence { iterations, gap });
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * k[(i, j)];
        if y[i] != y[j] {
            let quad = k[(i, i)] + k[(j, j)] + 2.0 * qij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = k[(i, i)] + k[(j, j)] - 2.0 * qij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[(i, t)] * di + y[j] * k[(j, t)] * dj);
        }
    };

    // bias: -rho
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if at_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        0.5 * (ub + lb)
    };

    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let model = SvmModel::from_parts(
        params.kind,
        x.select_rows(&sv),
        sv.iter().map(|&t| alpha[t] * y[t]).collect(),
        -rho,
        c,
        gamma,
    )?;
    Ok(SvmFit {
        model,
        alpha,
        iterations,
        gap,
    })
}

pub fn svm_train(x: &DMatrix<f64>, y: &[f64], params: &SvmParams) -> Result<SvmModel> {
    Ok(svm_fit(x, y, params)?.model)
}

/// Predicted `+-1` labels (0 margin maps to -1) and raw margins.
pub fn svm_predict(model: &SvmModel, queries: &DMatrix<f64>) -> Result<(Vec<i8>, Vec<f64>)> {
    if queries.ncols() != model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            found: queries.ncols(),
        });
    }
    let margins = model.decision(queries);
    let labels = margins.iter().map(|&m| if m > 0.0 { 1 } else { -1 }).collect();
    Ok((labels, margins))
}

/// Class-index SVM: one binary model for two classes, one-vs-rest above.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmClassifier {
    n_classes: usize,
    models: Vec<SvmModel>,
}

impl SvmClassifier {
    pub fn fit(x: &DMatrix<f64>, labels: &[usize], n_classes: usize, params: &SvmParams) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::SingleClass);
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidArgument(format!("label {l} >= {n_classes} classes")));
        }
        // resolve gamma once so every one-vs-rest model shares it
        let mut params = params.clone();
        if params.kind == SvmKind::Rbf {
            params.gamma = Bandwidth::Fixed(params.gamma.resolve(&kernels::pairwise_sq_dists(x))?);
        }
        let positives: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
        let models = positives
            .into_iter()
            .map(|c| {
                let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
                svm_train(x, &y, &params)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SvmClassifier { n_classes, models })
    }

    pub fn from_models(n_classes: usize, models: Vec<SvmModel>) -> Result<Self> {
        let expected = if n_classes == 2 { 1 } else { n_classes };
        if n_classes < 2 || models.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{} models for {n_classes} classes",
                models.len()
            )));
        }
        Ok(SvmClassifier { n_classes, models })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn models(&self) -> &[SvmModel] {
        &self.models
    }

    /// Class indices; margin ties go to the smaller class index.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        let margins = self
            .models
            .iter()
            .map(|m| svm_predict(m, x).map(|(_, s)| s))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..x.nrows())
            .map(|i| {
                if self.n_classes == 2 {
                    usize::from(margins[0][i] > 0.0)
                } else {
                    let mut best = 0;
                    for c in 1..self.n_classes {
                        if margins[c][i] > margins[best][i] {
                            best = c;
                        }
                    }
                    best
                }
            })
            .collect())
    }
}
