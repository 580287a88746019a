//! Transfer diffusion map.
//!
//! Learns a linear map with orthonormal columns that keeps diffusion-graph
//! neighbors close while pulling the projected source and target
//! distributions together. The objective for a projection `W` is
//!
//! ```text
//! J(W) = sum_ij A_ij |W^T x_i - W^T x_j|^2 + lambda * D(W^T X_s, W^T X_t; sigma)
//! ```
//!
//! where `A = sym(diag(pi) P^t)` comes from the alpha-normalized diffusion
//! chain over source and target together, and `D` is the squared-L2
//! distance between Gaussian kernel density estimates, which has a closed
//! form:
//!
//! ```text
//! D = mean_ss G(y - y') - 2 mean_st G(y - z) + mean_tt G(z - z'),
//! G(v) = (4 pi sigma^2)^(-m/2) exp(-|v|^2 / (4 sigma^2)).
//! ```
//!
//! At `lambda = 0` the minimizer is spectral: the eigenvectors of the
//! graph quadratic form with the smallest eigenvalues. With whitening on
//! (the default) inputs are first mapped so the degree-weighted covariance
//! is the identity, which turns that eigenproblem into the generalized
//! one `X^T L X w = mu X^T D X w`. Fitting starts from the spectral
//! solution and runs projected gradient descent with step halving, so the
//! objective never increases.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::diffusion::{self, markov_normalize};
use crate::error::{Error, Result};
use crate::kernels::Bandwidth;
use crate::linalg;
use crate::rng;

const ORTHONORMAL_TOL: f64 = 1e-8;
const MEDIAN_PAIR_CAP: usize = 20_000;

/// Linear map with orthonormal columns (`input_dim x output_dim`).
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    w: DMatrix<f64>,
}

impl Projection {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if w.ncols() == 0 || w.ncols() > w.nrows() {
            return Err(Error::InvalidArgument(format!(
                "projection shape {}x{} is not tall",
                w.nrows(),
                w.ncols()
            )));
        }
        let err = linalg::orthonormality_error(&w);
        if !(err <= ORTHONORMAL_TOL) {
            return Err(Error::InvalidArgument(format!(
                "projection columns are not orthonormal (error {err:.2e})"
            )));
        }
        Ok(Projection { w })
    }

    /// First `m` coordinate axes of a `d`-dimensional space.
    pub fn axes(d: usize, m: usize) -> Result<Self> {
        Projection::new(DMatrix::identity(d, m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.ncols()
    }

    /// `header` is written as a single `#`-prefixed line, then one row per
    /// input dimension.
    pub fn write_csv(&self, mut out: impl Write, header: &str) -> Result<()> {
        let io = |e| Error::io("<projection csv>", e);
        writeln!(out, "# {}", header.replace('\n', " ")).map_err(io)?;
        for i in 0..self.w.nrows() {
            let row: Vec<String> = self.w.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(",")).map_err(io)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, header: &str) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), header)
    }

    /// Parses the format of [`Projection::write_csv`], returning the header.
    pub fn read_csv(input: impl BufRead) -> Result<(Self, String)> {
        let mut header = String::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (k, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<projection csv>", e))?;
            if let Some(h) = line.strip_prefix('#') {
                header = h.trim().to_string();
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|_| Error::NonNumeric {
                        row: k,
                        column: String::new(),
                        value: c.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok((Projection::new(linalg::from_rows(&rows)?)?, header))
    }
}

/// `Y = X W`.
pub fn trdm_embed(w: &Projection, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != w.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: w.input_dim(),
            found: x.ncols(),
        });
    }
    Ok(x * &w.w)
}

/// Isotropic Gaussian density with covariance `2 sigma^2 I` at a squared
/// distance.
#[inline]
fn gauss(sq: f64, sigma: f64, m: usize) -> f64 {
    let s2 = sigma * sigma;
    (4.0 * std::f64::consts::PI * s2).powf(-(m as f64) / 2.0) * (-sq / (4.0 * s2)).exp()
}

fn sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    a.row(i)
        .iter()
        .zip(b.row(j).iter())
        .map(|(p, q)| (p - q) * (p - q))
        .sum()
}

fn check_kde_args(ys: &DMatrix<f64>, yt: &DMatrix<f64>, sigma: f64) -> Result<()> {
    if ys.nrows() == 0 || yt.nrows() == 0 {
        return Err(Error::EmptyDomain);
    }
    if ys.ncols() != yt.ncols() {
        return Err(Error::DimensionMismatch {
            expected: ys.ncols(),
            found: yt.ncols(),
        });
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

fn within_sum(y: &DMatrix<f64>, sigma: f64) -> f64 {
    let m = y.ncols();
    let n = y.nrows();
    let mut off = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            off += gauss(sq_dist(y, i, y, j), sigma, m);
        }
    }
    n as f64 * gauss(0.0, sigma, m) + 2.0 * off
}

/// Quadratic (squared-L2) divergence between the Gaussian KDEs of two
/// point sets. Exactly symmetric in its arguments.
pub fn kde_divergence(ys: &DMatrix<f64>, yt: &DMatrix<f64>, sigma: f64) -> Result<f64> {
    check_kde_args(ys, yt, sigma)?;
    let m = ys.ncols();
    let (ns, nt) = (ys.nrows() as f64, yt.nrows() as f64);
    let mut cross: Vec<f64> = Vec::with_capacity(ys.nrows() * yt.nrows());
    for i in 0..ys.nrows() {
        for j in 0..yt.nrows() {
            cross.push(gauss(sq_dist(ys, i, yt, j), sigma, m));
        }
    }
    // summing the sorted multiset makes the cross term order-free
    cross.sort_by(f64::total_cmp);
    let cross_sum: f64 = cross.iter().sum();
    let within = within_sum(ys, sigma) / (ns * ns) + within_sum(yt, sigma) / (nt * nt);
    Ok(within - 2.0 * cross_sum / (ns * nt))
}

/// Analytic gradients of [`kde_divergence`] with respect to every row of
/// `ys` and `yt`.
pub fn kde_divergence_grad(
    ys: &DMatrix<f64>,
    yt: &DMatrix<f64>,
    sigma: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_kde_args(ys, yt, sigma)?;
    let m = ys.ncols();
    let (ns, nt) = (ys.nrows() as f64, yt.nrows() as f64);
    let inv = 1.0 / (2.0 * sigma * sigma);
    // sum_b G(a_i - b_j) (a_i - b_j) / (2 sigma^2), i.e. minus the gradient
    // of sum_j G(a_i - b_j) with respect to a_i
    let pull = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(a.nrows(), m);
        for i in 0..a.nrows() {
            for j in 0..b.nrows() {
                let g = gauss(sq_dist(a, i, b, j), sigma, m) * inv;
                for k in 0..m {
                    out[(i, k)] += g * (a[(i, k)] - b[(j, k)]);
                }
            }
        }
        out
    };
    let gs = pull(ys, yt) * (2.0 / (ns * nt)) - pull(ys, ys) * (2.0 / (ns * ns));
    let gt = pull(yt, ys) * (2.0 / (ns * nt)) - pull(yt, yt) * (2.0 / (nt * nt));
    Ok((gs, gt))
}

/// `sum_ij A_ij |y_i - y_j|^2` for `Y = X W`.
pub fn graph_smoothness(w: &Projection, x: &DMatrix<f64>, affinity: &DMatrix<f64>) -> Result<f64> {
    let y = trdm_embed(w, x)?;
    let n = y.nrows();
    if affinity.nrows() != n || affinity.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: affinity.nrows(),
        });
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = affinity[(i, j)];
            if a != 0.0 {
                total += a * sq_dist(&y, i, &y, j);
            }
        }
    }
    Ok(total)
}

/// Full objective for rows `x` ordered source first (`n_source` rows),
/// then target.
pub fn trdm_objective(
    w: &Projection,
    x: &DMatrix<f64>,
    affinity: &DMatrix<f64>,
    n_source: usize,
    lambda: f64,
    sigma: f64,
) -> Result<f64> {
    let smooth = graph_smoothness(w, x, affinity)?;
    if lambda == 0.0 {
        return Ok(smooth);
    }
    let y = trdm_embed(w, x)?;
    let n = y.nrows();
    if n_source == 0 || n_source >= n {
        return Err(Error::EmptyDomain);
    }
    let ys = y.rows(0, n_source).into_owned();
    let yt = y.rows(n_source, n - n_source).into_owned();
    Ok(smooth + lambda * kde_divergence(&ys, &yt, sigma)?)
}

/// Hyperparameters for [`trdm_fit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrdmParams {
    /// Weight of the divergence term.
    pub lambda: f64,
    /// kNN neighborhood size; `None` keeps the dense kernel.
    pub neighbors: Option<usize>,
    /// Diffusion time (random-walk steps).
    pub t: u32,
    pub gamma: Bandwidth,
    pub alpha: f64,
    /// KDE bandwidth; `None` uses the median pairwise distance of the
    /// initial projection.
    pub sigma: Option<f64>,
    pub learn_rate: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Output dimension.
    pub m: usize,
    /// Map inputs to unit degree-weighted covariance first.
    pub whiten: bool,
}

impl Default for TrdmParams {
    fn default() -> Self {
        TrdmParams {
            lambda: 1.0,
            neighbors: None,
            t: 1,
            gamma: Bandwidth::default(),
            alpha: 1.0,
            sigma: None,
            learn_rate: 0.5,
            max_iters: 200,
            tol: 1e-9,
            m: 2,
            whiten: true,
        }
    }
}

impl TrdmParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("trdm: {what}")));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be non-negative");
        }
        if self.neighbors == Some(0) {
            return bad("neighborhood size must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must be in [0,1]");
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return bad("sigma must be positive");
            }
        }
        if !(self.learn_rate > 0.0) {
            return bad("learn_rate must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.m == 0 {
            return bad("m must be positive");
        }
        Ok(())
    }

    /// One-line `key=value` summary used as the projection CSV header.
    pub fn header(&self, sigma: f64) -> String {
        format!(
            "trdm lambda={} neighbors={} t={} alpha={} sigma={} learn_rate={} max_iters={} tol={} m={} whiten={}",
            self.lambda,
            self.neighbors.map_or("dense".to_string(), |k| k.to_string()),
            self.t,
            self.alpha,
            sigma,
            self.learn_rate,
            self.max_iters,
            self.tol,
            self.m,
            self.whiten
        )
    }
}

/// Symmetrized `t`-step transition weights `diag(pi) P^t` over the rows of
/// `x`.
pub fn trdm_affinity(x: &DMatrix<f64>, params: &TrdmParams) -> Result<DMatrix<f64>> {
    let k = diffusion::affinity_for(x, &params.gamma, params.neighbors)?;
    let p = markov_normalize(&k, params.alpha)?;
    let pt = p.power(params.t);
    let pi = p.stationary();
    let a = DMatrix::from_fn(x.nrows(), x.nrows(), |i, j| pi[i] * pt[(i, j)]);
    Ok((&a + a.transpose()) * 0.5)
}

/// A fitted transfer projection and its optimization trace.
#[derive(Clone, Debug)]
pub struct TrdmModel {
    /// Maps raw inputs into the working space the projection acts on;
    /// `None` means the projection acts on raw inputs directly.
    input_map: Option<DMatrix<f64>>,
    projection: Projection,
    initial: Projection,
    sigma: f64,
    history: Vec<f64>,
    params: TrdmParams,
}

impl TrdmModel {
    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    /// The `lambda = 0` spectral solution the fit started from.
    pub fn initial_projection(&self) -> &Projection {
        &self.initial
    }

    pub fn input_map(&self) -> Option<&DMatrix<f64>> {
        self.input_map.as_ref()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Objective value at initialization and after every accepted step.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn params(&self) -> &TrdmParams {
        &self.params
    }

    /// Raw rows mapped into the working space.
    pub fn working_coords(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.input_map {
            None => Ok(x.clone()),
            Some(map) => {
                if x.ncols() != map.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: map.nrows(),
                        found: x.ncols(),
                    });
                }
                Ok(x * map)
            }
        }
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        trdm_embed(&self.projection, &self.working_coords(x)?)
    }

    /// Embedding under the `lambda = 0` starting point.
    pub fn transform_initial(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        trdm_embed(&self.initial, &self.working_coords(x)?)
    }

    /// The composite raw-input map `input_map * W` (`d x m`).
    pub fn effective_map(&self) -> DMatrix<f64> {
        match &self.input_map {
            None => self.projection.w.clone(),
            Some(map) => map * &self.projection.w,
        }
    }

    /// Spectral (`lambda = 0`) counterpart of [`TrdmModel::effective_map`].
    pub fn initial_effective_map(&self) -> DMatrix<f64> {
        match &self.input_map {
            None => self.initial.w.clone(),
            Some(map) => map * &self.initial.w,
        }
    }

    /// Divergence of the fitted projection at the frozen bandwidth.
    pub fn divergence(&self, xs: &DMatrix<f64>, xt: &DMatrix<f64>) -> Result<f64> {
        kde_divergence(&self.transform(xs)?, &self.transform(xt)?, self.sigma)
    }

    pub fn initial_divergence(&self, xs: &DMatrix<f64>, xt: &DMatrix<f64>) -> Result<f64> {
        kde_divergence(
            &self.transform_initial(xs)?,
            &self.transform_initial(xt)?,
            self.sigma,
        )
    }
}

/// Orthonormal basis (`d x r`) of the span of the centered rows of `x`,
/// or `None` when that span is the whole space.
fn difference_basis(x: &DMatrix<f64>) -> Result<Option<DMatrix<f64>>> {
    let (n, d) = x.shape();
    let mean = x.row_mean();
    let xc = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let rel = 1e-10;
    if d <= n {
        let (vals, vecs) = linalg::sym_eigen_desc(&(xc.transpose() * &xc))?;
        let top = vals.max().max(0.0);
        let rank = vals.iter().filter(|&&v| v > rel * top).count();
        if rank == d {
            return Ok(None);
        }
        Ok(Some(vecs.columns(0, rank).into_owned()))
    } else {
        let (vals, vecs) = linalg::sym_eigen_desc(&(&xc * xc.transpose()))?;
        let top = vals.max().max(0.0);
        let rank = vals.iter().filter(|&&v| v > rel * top).count();
        let scaled = DMatrix::from_fn(n, rank, |i, k| vecs[(i, k)] / vals[k].sqrt());
        Ok(Some(linalg::orthonormalize(&(xc.transpose() * scaled))))
    }
}

/// `C^{-1/2}` for the degree-weighted covariance of `z`.
fn whitening(z: &DMatrix<f64>, degree: &[f64]) -> Result<DMatrix<f64>> {
    let (n, r) = z.shape();
    let total: f64 = degree.iter().sum();
    let mut mean = vec![0.0; r];
    for i in 0..n {
        for k in 0..r {
            mean[k] += degree[i] * z[(i, k)] / total;
        }
    }
    let centered = DMatrix::from_fn(n, r, |i, k| (z[(i, k)] - mean[k]) * degree[i].sqrt());
    let cov = centered.transpose() * &centered;
    let (vals, vecs) = linalg::sym_eigen_desc(&cov)?;
    let floor = vals.max().max(f64::MIN_POSITIVE) * 1e-12;
    let inv_root = DMatrix::from_fn(r, r, |k, l| if k == l { 1.0 / vals[k].max(floor).sqrt() } else { 0.0 });
    Ok(&vecs * inv_root * vecs.transpose())
}

fn sign_fix_columns(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let lead = col
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
            .0;
        if col[lead] < 0.0 {
            col.neg_mut();
        }
    }
}

fn median_pairwise_distance(y: &DMatrix<f64>, seed: u64) -> f64 {
    let n = y.nrows();
    let total_pairs = n * (n - 1) / 2;
    let mut dists: Vec<f64> = if total_pairs <= MEDIAN_PAIR_CAP {
        let mut v = Vec::with_capacity(total_pairs);
        for i in 0..n {
            for j in i + 1..n {
                v.push(sq_dist(y, i, y, j).sqrt());
            }
        }
        v
    } else {
        let mut r = rng::seeded(seed);
        (0..MEDIAN_PAIR_CAP)
            .map(|_| {
                let i = r.random_range(0..n);
                let mut j = r.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                sq_dist(y, i, y, j).sqrt()
            })
            .collect()
    };
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let med = if dists.len() % 2 == 0 {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Fits the transfer projection on source rows `xs` and target rows `xt`.
///
/// `seed` only drives pair subsampling for the default bandwidth on large
/// inputs; fits are deterministic given it.
pub fn trdm_fit(
    xs: &DMatrix<f64>,
    xt: &DMatrix<f64>,
    params: &TrdmParams,
    seed: u64,
) -> Result<TrdmModel> {
    params.validate()?;
    if xs.nrows() == 0 || xt.nrows() == 0 {
        return Err(Error::EmptyDomain);
    }
    if xs.ncols() != xt.ncols() {
        return Err(Error::DimensionMismatch {
            expected: xs.ncols(),
            found: xt.ncols(),
        });
    }
    let (ns, nt, d) = (xs.nrows(), xt.nrows(), xs.ncols());
    let n = ns + nt;
    let x = DMatrix::from_fn(n, d, |i, j| if i < ns { xs[(i, j)] } else { xt[(i - ns, j)] });

    let affinity = trdm_affinity(&x, params)?;
    let degree: Vec<f64> = (0..n).map(|i| affinity.row(i).sum()).collect();

    let basis = difference_basis(&x)?;
    let rank = basis.as_ref().map_or(d, |b| b.ncols());
    if params.m > rank {
        return Err(Error::InvalidArgument(format!(
            "output dimension {} exceeds data rank {rank}",
            params.m
        )));
    }
    let mut z = match &basis {
        Some(b) => &x * b,
        None => x.clone(),
    };
    let input_map = if params.whiten {
        let t = whitening(&z, &degree)?;
        z = &z * &t;
        Some(match &basis {
            Some(b) => b * t,
            None => t,
        })
    } else {
        None
    };

    // graph quadratic form S = 2 Z^T (Deg - A) Z
    let r = z.ncols();
    let mut lap = -affinity.clone();
    for i in 0..n {
        lap[(i, i)] += degree[i];
    }
    let s = z.transpose() * lap * &z * 2.0;
    let s = (&s + s.transpose()) * 0.5;

    // smallest eigenvalues first
    let (_, vecs) = linalg::sym_eigen_desc(&s)?;
    let mut v = DMatrix::from_fn(r, params.m, |i, k| vecs[(i, r - 1 - k)]);
    sign_fix_columns(&mut v);

    let zs = z.rows(0, ns).into_owned();
    let zt = z.rows(ns, nt).into_owned();
    let sigma = match params.sigma {
        Some(s) => s,
        None => median_pairwise_distance(&(&z * &v), seed),
    };
    let objective = |v: &DMatrix<f64>| -> Result<f64> {
        let smooth = (v.transpose() * &s * v).trace();
        if params.lambda == 0.0 {
            return Ok(smooth);
        }
        Ok(smooth + params.lambda * kde_divergence(&(&zs * v), &(&zt * v), sigma)?)
    };

    let initial_v = v.clone();
    let mut j = objective(&v)?;
    if !j.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let mut history = vec![j];
    let mut step = params.learn_rate;
    let min_step = params.learn_rate * 1e-12;
    'outer: for iteration in 1..=params.max_iters {
        let mut grad = &s * &v * 2.0;
        if params.lambda != 0.0 {
            let (gs, gt) = kde_divergence_grad(&(&zs * &v), &(&zt * &v), sigma)?;
            grad += (zs.transpose() * gs + zt.transpose() * gt) * params.lambda;
        }
        loop {
            let candidate = linalg::orthonormalize(&(&v - &grad * step));
            let jc = objective(&candidate)?;
            if !jc.is_finite() {
                return Err(Error::NonFiniteObjective { iteration });
            }
            if jc <= j {
                let delta = j - jc;
                v = candidate;
                j = jc;
                history.push(j);
                if delta < params.tol {
                    break 'outer;
                }
                break;
            }
            step *= 0.5;
            if step < min_step {
                break 'outer;
            }
        }
    }

    let (projection, initial, input_map) = match (input_map, basis) {
        (Some(map), _) => (Projection::new(v)?, Projection::new(initial_v)?, Some(map)),
        (None, Some(b)) => (
            Projection::new(linalg::orthonormalize(&(&b * v)))?,
            Projection::new(linalg::orthonormalize(&(&b * initial_v)))?,
            None,
        ),
        (None, None) => (Projection::new(v)?, Projection::new(initial_v)?, None),
    };
    Ok(TrdmModel {
        input_map,
        projection,
        initial,
        sigma,
        history,
        params: params.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, vals: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, vals)
    }

    #[test]
    fn identical_sets_have_zero_divergence() {
        let y = mat(3, 2, &[0.0, 1.0, 2.0, -1.0, 0.5, 0.5]);
        assert!(kde_divergence(&y, &y, 0.7).unwrap().abs() < 1e-12);
        let (gs, gt) = kde_divergence_grad(&y, &y, 0.7).unwrap();
        assert!(gs.iter().chain(gt.iter()).all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn two_point_divergence() {
        let (sigma, delta) = (0.8, 1.3);
        let y = mat(1, 1, &[0.0]);
        let z = mat(1, 1, &[delta]);
        let g = |sq: f64| (4.0 * std::f64::consts::PI * sigma * sigma).powf(-0.5) * (-sq / (4.0 * sigma * sigma)).exp();
        let expect = 2.0 * (g(0.0) - g(delta * delta));
        assert!((kde_divergence(&y, &z, sigma).unwrap() - expect).abs() < 1e-14);

        // d/dy of 2(G(0) - G(y - z)) = -2 G'(y - z) = 2 G(delta) (y - z) / (2 sigma^2)
        let (gs, gt) = kde_divergence_grad(&y, &z, sigma).unwrap();
        let dy = 2.0 * g(delta * delta) * (0.0 - delta) / (2.0 * sigma * sigma);
        assert!((gs[(0, 0)] - dy).abs() < 1e-14);
        assert!((gt[(0, 0)] + dy).abs() < 1e-14);
    }

    #[test]
    fn far_apart_limit() {
        let sigma = 0.5;
        let y = mat(1, 2, &[0.0, 0.0]);
        let z = mat(1, 2, &[1e3, 0.0]);
        let limit = 2.0 / (4.0 * std::f64::consts::PI * sigma * sigma);
        assert!((kde_divergence(&y, &z, sigma).unwrap() - limit).abs() < 1e-12);
    }

    #[test]
    fn kde_argument_errors() {
        let y = mat(1, 2, &[0.0, 0.0]);
        let z = mat(1, 1, &[0.0]);
        assert!(kde_divergence(&y, &z, 1.0).is_err());
        assert!(kde_divergence(&y, &y, 0.0).is_err());
        assert!(kde_divergence(&y, &y.rows(0, 0).into_owned(), 1.0).is_err());
    }

    #[test]
    fn embed_examples() {
        let x = mat(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 4.0]);
        let id = Projection::axes(3, 3).unwrap();
        assert_eq!(trdm_embed(&id, &x).unwrap(), x);
        let first = Projection::axes(3, 1).unwrap();
        assert_eq!(trdm_embed(&first, &x).unwrap().column(0), x.column(0));
        assert!(trdm_embed(&first, &mat(1, 2, &[0.0, 0.0])).is_err());
        assert!(Projection::new(mat(2, 1, &[1.0, 1.0])).is_err());
    }

    #[test]
    fn zero_affinity_leaves_divergence() {
        let x = mat(4, 2, &[0.0, 0.0, 1.0, 0.0, 3.0, 1.0, 4.0, 2.0]);
        let w = Projection::axes(2, 1).unwrap();
        let a = DMatrix::zeros(4, 4);
        let j = trdm_objective(&w, &x, &a, 2, 1.0, 0.9).unwrap();
        let y = trdm_embed(&w, &x).unwrap();
        let div = kde_divergence(&y.rows(0, 2).into_owned(), &y.rows(2, 2).into_owned(), 0.9).unwrap();
        assert_eq!(j, div);
    }

    #[test]
    fn constant_projection_has_no_smoothness_cost() {
        // every point shares its second coordinate, so projecting on it is constant
        let x = mat(4, 2, &[0.0, 2.0, 1.0, 2.0, 0.0, 2.0, 1.0, 2.0]);
        let a = DMatrix::from_element(4, 4, 0.25);
        let w = Projection::new(mat(2, 1, &[0.0, 1.0])).unwrap();
        assert_eq!(graph_smoothness(&w, &x, &a).unwrap(), 0.0);
    }

    #[test]
    fn projection_csv_round_trip() {
        let w = linalg::orthonormalize(&mat(3, 2, &[1.0, 0.2, 0.3, 1.0, -0.5, 0.1]));
        let p = Projection::new(w).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf, "trdm lambda=1").unwrap();
        let (q, header) = Projection::read_csv(&buf[..]).unwrap();
        assert_eq!(header, "trdm lambda=1");
        assert_eq!(q, p);
    }

    #[test]
    fn params_validation() {
        assert!(TrdmParams::default().validate().is_ok());
        let bad = TrdmParams { lambda: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrdmParams { m: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn fit_rejects_bad_shapes() {
        let xs = mat(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let xt = mat(2, 3, &[0.0; 6]);
        assert!(trdm_fit(&xs, &xt, &TrdmParams::default(), 0).is_err());
        let params = TrdmParams { m: 3, ..Default::default() };
        assert!(trdm_fit(&xs, &xs, &params, 0).is_err());
    }
}
