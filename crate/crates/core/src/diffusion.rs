//! Diffusion maps.
//!
//! An affinity matrix `K` is density-normalized with exponent `alpha`
//! (`K'_ij = K_ij / (d_i^alpha d_j^alpha)`, `d` the row sums of `K`) and
//! row-normalized into a reversible Markov chain `P`. The spectrum of `P`
//! is obtained from the symmetric conjugate `Pi^{1/2} P Pi^{-1/2}`; right
//! eigenvectors are scaled so that `sum_i pi_i psi_k(i)^2 = 1` and the
//! diffusion coordinates at time `t` are `lambda_k^t psi_k`, `k >= 1`.
//! With all `n - 1` nontrivial coordinates, Euclidean distance in the
//! embedding equals the diffusion distance
//! `D_t(i,j)^2 = sum_u (P^t_iu - P^t_ju)^2 / pi_u`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Domain};
use crate::error::{Error, Result};
use crate::kernels::{self, Affinity, Bandwidth};
use crate::linalg;

/// Above this many points an unspecified neighborhood falls back to a
/// kNN graph instead of the dense kernel.
pub const DENSE_LIMIT: usize = 2000;
const AUTO_NEIGHBORS: usize = 15;

/// Row-stochastic transition matrix with its stationary distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovMatrix {
    values: DMatrix<f64>,
    alpha: f64,
    stationary: DVector<f64>,
}

impl MarkovMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.stationary
    }

    /// `P^t` by repeated multiplication.
    pub fn power(&self, t: u32) -> DMatrix<f64> {
        linalg::matrix_power(&self.values, t)
    }
}

pub fn markov_normalize(affinity: &impl Affinity, alpha: f64) -> Result<MarkovMatrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} not in [0,1]")));
    }
    let k = affinity.to_dense();
    let n = k.nrows();
    if k.ncols() != n || n == 0 {
        return Err(Error::InvalidArgument("affinity must be a nonempty square matrix".into()));
    }
    for i in 0..n {
        for j in 0..n {
            let v = k[(i, j)];
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument("affinities must be finite and non-negative".into()));
            }
            if (v - k[(j, i)]).abs() > 1e-12 * v.abs().max(1.0) {
                return Err(Error::InvalidArgument("affinity matrix must be symmetric".into()));
            }
        }
    }
    let degree: Vec<f64> = (0..n).map(|i| k.row(i).sum()).collect();
    if let Some(i) = degree.iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedVertex(i));
    }
    let scale: Vec<f64> = degree.iter().map(|d| d.powf(alpha)).collect();
    let normalized = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / (scale[i] * scale[j]));
    let q: Vec<f64> = (0..n).map(|i| normalized.row(i).sum()).collect();
    if let Some(i) = q.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::IsolatedVertex(i));
    }
    let total: f64 = q.iter().sum();
    let values = DMatrix::from_fn(n, n, |i, j| normalized[(i, j)] / q[i]);
    let stationary = DVector::from_iterator(n, q.iter().map(|v| v / total));
    Ok(MarkovMatrix {
        values,
        alpha,
        stationary,
    })
}

/// Spectral coordinates of a Markov chain.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionEmbedding {
    t: u32,
    /// `m + 1` eigenvalues, descending, starting with the trivial 1.
    eigenvalues: Vec<f64>,
    /// Nontrivial right eigenvectors `psi_1..psi_m` as columns.
    eigenvectors: DMatrix<f64>,
    coords: DMatrix<f64>,
}

impl DiffusionEmbedding {
    pub fn m(&self) -> usize {
        self.coords.ncols()
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    /// Coordinates of a subset of rows.
    pub fn rows(&self, indices: &[usize]) -> DMatrix<f64> {
        self.coords.select_rows(indices)
    }
}

/// Diffusion map with `m` nontrivial coordinates at diffusion time `t`.
///
/// Eigenvector signs are fixed so the largest-magnitude entry of each
/// `psi_k` is positive (first such entry on ties).
pub fn diffusion_embed(p: &MarkovMatrix, m: usize, t: u32) -> Result<DiffusionEmbedding> {
    let n = p.n();
    if m == 0 || m >= n {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension {m} must be in 1..{n}"
        )));
    }
    let pi = &p.stationary;
    let root: Vec<f64> = pi.iter().map(|v| v.sqrt()).collect();
    let mut s = DMatrix::from_fn(n, n, |i, j| root[i] / root[j] * p.values[(i, j)]);
    s = (&s + s.transpose()) * 0.5;
    // push the known trivial eigenvector (sqrt(pi), eigenvalue 1) to -2,
    // below the [-1, 1] spectrum, so repeated unit eigenvalues stay usable
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] -= 3.0 * root[i] * root[j];
        }
    }
    let (vals, vecs) = linalg::sym_eigen_desc(&s)?;
    let mut eigenvalues = Vec::with_capacity(m + 1);
    eigenvalues.push(1.0);
    let mut psi = DMatrix::zeros(n, m);
    for k in 0..m {
        eigenvalues.push(vals[k].clamp(-1.0, 1.0));
        let mut col: Vec<f64> = (0..n).map(|i| vecs[(i, k)] / root[i]).collect();
        let lead = col
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best })
            .0;
        if col[lead] < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        psi.column_mut(k).copy_from_slice(&col);
    }
    let coords = DMatrix::from_fn(n, m, |i, k| eigenvalues[k + 1].powi(t as i32) * psi[(i, k)]);
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNonConvergence);
    }
    Ok(DiffusionEmbedding {
        t,
        eigenvalues,
        eigenvectors: psi,
        coords,
    })
}

/// Diffusion distance between states `i` and `j` from an explicit matrix
/// power.
pub fn diffusion_distance(p: &MarkovMatrix, t: u32, i: usize, j: usize) -> Result<f64> {
    let n = p.n();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!("index out of range for {n} states")));
    }
    if i == j {
        return Ok(0.0);
    }
    let pt = p.power(t);
    let sum: f64 = (0..n)
        .map(|u| {
            let diff = pt[(i, u)] - pt[(j, u)];
            diff * diff / p.stationary[u]
        })
        .sum();
    Ok(sum.sqrt())
}

/// Settings for a joint source/target diffusion embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffusionParams {
    pub gamma: Bandwidth,
    pub alpha: f64,
    /// kNN neighborhood size; `None` uses the dense kernel up to
    /// [`DENSE_LIMIT`] points.
    pub neighbors: Option<usize>,
    pub m: usize,
    pub t: u32,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        DiffusionParams {
            gamma: Bandwidth::default(),
            alpha: 1.0,
            neighbors: None,
            m: 10,
            t: 1,
        }
    }
}

/// Row layout of a joint embedding: source rows first, then target rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointIndex {
    pub ids: Vec<String>,
    pub domains: Vec<Domain>,
    pub n_source: usize,
    pub n_target: usize,
}

impl JointIndex {
    pub fn source_rows(&self) -> std::ops::Range<usize> {
        0..self.n_source
    }

    pub fn target_rows(&self) -> std::ops::Range<usize> {
        self.n_source..self.n_source + self.n_target
    }
}

/// Affinity for `x` under `params`: dense Gaussian kernel, or its kNN graph.
pub fn affinity_for(
    x: &DMatrix<f64>,
    gamma: &Bandwidth,
    neighbors: Option<usize>,
) -> Result<DMatrix<f64>> {
    let dist = kernels::pairwise_sq_dists(x);
    let g = gamma.resolve(&dist)?;
    let kernel = kernels::rbf_kernel(&dist, g)?;
    let n = x.nrows();
    let k = match neighbors {
        Some(k) => Some(k),
        None if n > DENSE_LIMIT => Some(AUTO_NEIGHBORS.min(n - 1)),
        None => None,
    };
    match k {
        Some(k) => Ok(kernels::knn_sparsify(&kernel, k)?.to_dense()),
        None => Ok(kernel.to_dense()),
    }
}

/// One diffusion map over the concatenation `source ++ target`.
pub fn embed_joint(
    source: &Dataset,
    target: &Dataset,
    params: &DiffusionParams,
) -> Result<(DiffusionEmbedding, JointIndex)> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyDomain);
    }
    if source.dimension() != target.dimension() {
        return Err(Error::DimensionMismatch {
            expected: source.dimension(),
            found: target.dimension(),
        });
    }
    let (ns, nt) = (source.len(), target.len());
    let d = source.dimension();
    let x = DMatrix::from_fn(ns + nt, d, |i, j| {
        if i < ns {
            source.samples()[i].features[j]
        } else {
            target.samples()[i - ns].features[j]
        }
    });
    let affinity = affinity_for(&x, &params.gamma, params.neighbors)?;
    let p = markov_normalize(&affinity, params.alpha)?;
    let embedding = diffusion_embed(&p, params.m, params.t)?;
    let index = JointIndex {
        ids: source.ids().chain(target.ids()).map(str::to_string).collect(),
        domains: std::iter::repeat_n(Domain::Source, ns)
            .chain(std::iter::repeat_n(Domain::Target, nt))
            .collect(),
        n_source: ns,
        n_target: nt,
    };
    Ok((embedding, index))
}

/// Writes `id,domain,c1..cm`, one row per embedded sample.
pub fn write_embedding_csv(
    embedding: &DiffusionEmbedding,
    index: &JointIndex,
    mut out: impl Write,
) -> Result<()> {
    let io = |e| Error::io("<embedding csv>", e);
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain(std::iter::once("domain".to_string()))
        .chain((1..=embedding.m()).map(|k| format!("c{k}")))
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (row, (id, domain)) in index.ids.iter().zip(&index.domains).enumerate() {
        write!(out, "{id},{}", domain.as_str()).map_err(io)?;
        for k in 0..embedding.m() {
            write!(out, ",{}", embedding.coords[(row, k)]).map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    Ok(())
}

pub fn save_embedding_csv(
    embedding: &DiffusionEmbedding,
    index: &JointIndex,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_embedding_csv(embedding, index, std::io::BufWriter::new(file))
}
