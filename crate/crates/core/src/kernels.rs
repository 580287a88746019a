//! Pairwise squared distances, Gaussian affinities, the bandwidth
//! heuristic and k-nearest-neighbor sparsification.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric matrix of squared Euclidean distances with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    values: DMatrix<f64>,
}

impl DistanceMatrix {
    /// Wraps a precomputed matrix after checking shape, symmetry, zero
    /// diagonal and non-negativity.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: values.ncols(),
            });
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument("distance diagonal must be zero".into()));
            }
            for j in 0..n {
                let v = values[(i, j)];
                if !(v >= 0.0) || v != values[(j, i)] {
                    return Err(Error::InvalidArgument(
                        "distances must be symmetric and non-negative".into(),
                    ));
                }
            }
        }
        Ok(DistanceMatrix { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn write_flat(&self, w: impl Write) -> Result<()> {
        write_flat(&self.values, w)
    }

    pub fn read_flat(r: impl Read) -> Result<Self> {
        DistanceMatrix::from_matrix(read_flat(r)?)
    }
}

/// Gaussian affinity matrix `exp(-gamma * d^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    values: DMatrix<f64>,
    gamma: f64,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn write_flat(&self, w: impl Write) -> Result<()> {
        write_flat(&self.values, w)
    }

    /// Reads a cached kernel; the flat layout does not carry `gamma`.
    pub fn read_flat(r: impl Read, gamma: f64) -> Result<Self> {
        Ok(KernelMatrix {
            values: read_flat(r)?,
            gamma,
        })
    }
}

/// Sparse symmetric affinity graph, adjacency rows sorted by column.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborhoodGraph {
    n: usize,
    k: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl NeighborhoodGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |p| self.rows[i][p].1)
    }
}

/// Anything that can serve as a dense non-negative affinity matrix.
pub trait Affinity {
    fn to_dense(&self) -> DMatrix<f64>;
}

impl Affinity for KernelMatrix {
    fn to_dense(&self) -> DMatrix<f64> {
        self.values.clone()
    }
}

impl Affinity for NeighborhoodGraph {
    fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] = w;
            }
        }
        m
    }
}

impl Affinity for DMatrix<f64> {
    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// Squared distances between all rows of `x` (`n x d`), using the
/// norm-expansion form clamped at zero.
pub fn pairwise_sq_dists(x: &DMatrix<f64>) -> DistanceMatrix {
    let n = x.nrows();
    let gram = x * x.transpose();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    // evaluate with (min, max) ordering so (i, j) and (j, i) agree bitwise
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    (gram[(a, a)] + gram[(b, b)] - 2.0 * gram[(a, b)]).max(0.0)
                })
                .collect()
        })
        .collect();
    DistanceMatrix {
        values: DMatrix::from_fn(n, n, |i, j| rows[i][j]),
    }
}

/// Squared distances from every row of `a` to every row of `b`, by direct
/// differences.
pub fn cross_sq_dists(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        a.row(i)
            .iter()
            .zip(b.row(j).iter())
            .map(|(p, q)| (p - q) * (p - q))
            .sum()
    })
}

/// How the bandwidth heuristic turns pairwise distances into `gamma`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRule {
    /// `1 / (mean distance)^2`
    #[default]
    #[serde(alias = "heuristic")]
    InverseSquaredMeanDistance,
    /// `1 / mean(distance^2)`
    InverseMeanSquaredDistance,
}

/// A fixed `gamma` or a rule that derives it from the data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Fixed(f64),
    Rule(GammaRule),
}

impl Default for Bandwidth {
    fn default() -> Self {
        Bandwidth::Rule(GammaRule::default())
    }
}

impl Bandwidth {
    pub fn resolve(&self, d: &DistanceMatrix) -> Result<f64> {
        match *self {
            Bandwidth::Fixed(g) if g > 0.0 && g.is_finite() => Ok(g),
            Bandwidth::Fixed(g) => Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {g}"
            ))),
            Bandwidth::Rule(rule) => gamma_heuristic_with(d, rule),
        }
    }
}

/// `gamma = 1 / (mean over i<j of distance)^2`.
pub fn gamma_heuristic(d: &DistanceMatrix) -> Result<f64> {
    gamma_heuristic_with(d, GammaRule::default())
}

pub fn gamma_heuristic_with(d: &DistanceMatrix, rule: GammaRule) -> Result<f64> {
    let n = d.n();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "gamma heuristic needs at least two points".into(),
        ));
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let v = d.values[(i, j)];
            sum += match rule {
                GammaRule::InverseSquaredMeanDistance => v.sqrt(),
                GammaRule::InverseMeanSquaredDistance => v,
            };
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let mean = sum / pairs;
    if mean <= 0.0 {
        return Err(Error::ZeroDistances);
    }
    Ok(match rule {
        GammaRule::InverseSquaredMeanDistance => 1.0 / (mean * mean),
        GammaRule::InverseMeanSquaredDistance => 1.0 / mean,
    })
}

pub fn rbf_kernel(d: &DistanceMatrix, gamma: f64) -> Result<KernelMatrix> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    Ok(KernelMatrix {
        values: d.values.map(|v| (-gamma * v).exp()),
        gamma,
    })
}

/// Keeps each row's `k` largest off-diagonal affinities (ties to the
/// smaller column) and symmetrizes by elementwise maximum.
pub fn knn_sparsify(kernel: &KernelMatrix, k: usize) -> Result<NeighborhoodGraph> {
    let n = kernel.n();
    if k == 0 || k >= n {
        return Err(Error::NeighborhoodTooLarge { k, n });
    }
    let v = &kernel.values;
    let mut kept = vec![vec![false; n]; n];
    for (i, row) in kept.iter_mut().enumerate() {
        let mut cols: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        cols.sort_by(|&a, &b| v[(i, b)].total_cmp(&v[(i, a)]).then(a.cmp(&b)));
        for &j in &cols[..k] {
            row[j] = true;
        }
    }
    let weight = |i: usize, j: usize| if kept[i][j] { v[(i, j)] } else { 0.0 };
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| kept[i][j] || kept[j][i])
                .map(|j| (j, weight(i, j).max(weight(j, i))))
                .collect()
        })
        .collect();
    Ok(NeighborhoodGraph { n, k, rows })
}

/// Flat layout: `n` as little-endian u64, then `n * n` little-endian f64
/// values in row-major order.
pub fn write_flat(m: &DMatrix<f64>, mut w: impl Write) -> Result<()> {
    let io = |e| Error::io("<stream>", e);
    let n = m.nrows();
    w.write_all(&(n as u64).to_le_bytes()).map_err(io)?;
    for i in 0..n {
        for j in 0..n {
            w.write_all(&m[(i, j)].to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_flat(mut r: impl Read) -> Result<DMatrix<f64>> {
    let io = |e| Error::io("<stream>", e);
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(io)?;
    let n = u64::from_le_bytes(buf) as usize;
    let mut values = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        r.read_exact(&mut buf).map_err(io)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok(DMatrix::from_row_slice(n, n, &values))
}
