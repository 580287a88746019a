//! Dense linear-algebra helpers over `nalgebra` matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Stacks equal-length rows into an `n x d` matrix.
pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<DMatrix<f64>> {
    let d = rows.first().map_or(0, |r| r.as_ref().len());
    for r in rows {
        if r.as_ref().len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.as_ref().len(),
            });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i].as_ref()[j]))
}

pub fn row_vec(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order (eigenvectors permuted to match).
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let eig = SymmetricEigen::try_new(a.clone(), 1e-15, 100 * n.max(10))
        .ok_or(Error::EigenNonConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = DVector::from_fn(n, |k, _| eig.eigenvalues[order[k]]);
    let vectors = DMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Ok((values, vectors))
}

/// Orthonormalizes the columns of `a` with a QR factorization, flipping
/// column signs so the triangular factor has a non-negative diagonal.
pub fn orthonormalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    let qr = a.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..cols.min(rows) {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q.columns(0, cols).into_owned()
}

/// Cosines of the principal angles between the column spans of two
/// matrices, descending. Columns need not be orthonormal.
pub fn principal_angle_cosines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = orthonormalize(a);
    let qb = orthonormalize(b);
    let m = qa.transpose() * qb;
    let svd = m.svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().map(|v| v.min(1.0)).collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

/// Largest principal angle (radians) between two column spans of equal
/// rank. Uses the sine form, which stays accurate for tiny angles.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = orthonormalize(a);
    let qb = orthonormalize(b);
    let residual = &qb - &qa * (qa.transpose() * &qb);
    let svd = residual.svd(false, false);
    let s = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    s.min(1.0).asin()
}

pub fn matrix_power(p: &DMatrix<f64>, t: u32) -> DMatrix<f64> {
    let mut out = DMatrix::identity(p.nrows(), p.ncols());
    for _ in 0..t {
        out = &out * p;
    }
    out
}

/// `max |A^T A - I|` over all entries.
pub fn orthonormality_error(a: &DMatrix<f64>) -> f64 {
    let g = a.transpose() * a;
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}
