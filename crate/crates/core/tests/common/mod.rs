//! Independent reference implementations used by the integration and
//! acceptance tests. Everything here works on plain `Vec`s and avoids the
//! library's numerical routines.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(r: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u: f64 = r.random_range(f64::EPSILON..1.0);
    let v: f64 = r.random_range(0.0..1.0);
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

pub fn random_matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(n, d, |_, _| gauss(&mut r))
}

pub fn to_vecs(m: &DMatrix<f64>) -> Mat {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn to_dmatrix(m: &Mat) -> DMatrix<f64> {
    let cols = m.first().map_or(0, Vec::len);
    DMatrix::from_fn(m.len(), cols, |i, j| m[i][j])
}

pub fn transpose(a: &Mat) -> Mat {
    let (n, m) = (a.len(), a[0].len());
    (0..m).map(|j| (0..n).map(|i| a[i][j]).collect()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            let v = a[i][l];
            for j in 0..m {
                out[i][j] += v * b[l][j];
            }
        }
    }
    out
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// eigenvalues ascending and eigenvectors as columns of the second value.
pub fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.len();
    let mut a = a.clone();
    let mut v: Mat = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    (vals, vecs)
}

/// Lower-triangular `L` with `L L^T = a`.
pub fn cholesky(a: &Mat) -> Mat {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                assert!(d > 0.0, "matrix is not positive definite");
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Inverse of a lower-triangular matrix.
pub fn lower_inverse(l: &Mat) -> Mat {
    let n = l.len();
    let mut inv = vec![vec![0.0; n]; n];
    for c in 0..n {
        for i in 0..n {
            let rhs = f64::from(i == c);
            let s: f64 = (0..i).map(|k| l[i][k] * inv[k][c]).sum();
            inv[i][c] = (rhs - s) / l[i][i];
        }
    }
    inv
}

/// Bottom-`m` generalized eigenvectors of `s w = mu b w` (`b` positive definite).
pub fn generalized_bottom(s: &Mat, b: &Mat, m: usize) -> Mat {
    let li = lower_inverse(&cholesky(b));
    let c = matmul(&matmul(&li, s), &transpose(&li));
    let c: Mat = (0..c.len()).map(|i| (0..c.len()).map(|j| 0.5 * (c[i][j] + c[j][i])).collect()).collect();
    let (_, u) = jacobi_eigen(&c);
    let w = matmul(&transpose(&li), &u);
    w.iter().map(|row| row[..m].to_vec()).collect()
}

/// Gaussian affinity with `gamma = 1 / (mean pairwise distance)^2`, alpha
/// normalization, `t`-step chain and symmetrized `diag(pi) P^t`.
pub fn diffusion_affinity(x: &Mat, alpha: f64, t: u32) -> Mat {
    let n = x.len();
    let mut mean = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            mean += sq_dist(&x[i], &x[j]).sqrt();
        }
    }
    mean /= (n * (n - 1) / 2) as f64;
    let gamma = 1.0 / (mean * mean);
    let k: Mat = (0..n).map(|i| (0..n).map(|j| (-gamma * sq_dist(&x[i], &x[j])).exp()).collect()).collect();
    let deg: Vec<f64> = k.iter().map(|r| r.iter().sum()).collect();
    let kn: Mat = (0..n)
        .map(|i| (0..n).map(|j| k[i][j] / (deg[i].powf(alpha) * deg[j].powf(alpha))).collect())
        .collect();
    let q: Vec<f64> = kn.iter().map(|r| r.iter().sum()).collect();
    let total: f64 = q.iter().sum();
    let p: Mat = (0..n).map(|i| (0..n).map(|j| kn[i][j] / q[i]).collect()).collect();
    let mut pt = p.clone();
    for _ in 1..t {
        pt = matmul(&pt, &p);
    }
    (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (q[i] / total * pt[i][j] + q[j] / total * pt[j][i])).collect())
        .collect()
}

/// Spectral solution of the unregularized transfer objective with
/// degree-weighted whitening: bottom-`m` solutions of
/// `X^T L X w = mu X^T D_c X w` as a `d x m` basis.
pub fn dense_spectral_subspace(x: &Mat, m: usize, alpha: f64, t: u32) -> Mat {
    let (n, d) = (x.len(), x[0].len());
    let a = diffusion_affinity(x, alpha, t);
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let lap: Mat = (0..n).map(|i| (0..n).map(|j| if i == j { deg[i] - a[i][j] } else { -a[i][j] }).collect()).collect();
    let s = matmul(&matmul(&transpose(x), &lap), x);
    let total: f64 = deg.iter().sum();
    let mu: Vec<f64> = (0..d).map(|k| (0..n).map(|i| deg[i] * x[i][k]).sum::<f64>() / total).collect();
    let mut b = vec![vec![0.0; d]; d];
    for i in 0..n {
        for k in 0..d {
            for l in 0..d {
                b[k][l] += deg[i] * (x[i][k] - mu[k]) * (x[i][l] - mu[l]);
            }
        }
    }
    generalized_bottom(&s, &b, m)
}

/// Largest principal angle between the column spans of `a` and `b`
/// (Gram-Schmidt, then singular values via Jacobi on `Qa^T Qb Qb^T Qa`).
pub fn max_principal_angle(a: &Mat, b: &Mat) -> f64 {
    fn gram_schmidt(a: &Mat) -> Mat {
        let cols = transpose(a);
        let mut q: Vec<Vec<f64>> = Vec::new();
        for c in cols {
            let mut v = c.clone();
            for _ in 0..2 {
                for u in &q {
                    let dot: f64 = v.iter().zip(u).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            q.push(v.iter().map(|x| x / norm).collect());
        }
        transpose(&q)
    }
    let qa = gram_schmidt(a);
    let qb = gram_schmidt(b);
    // residual of qb outside span(qa): sine of the angles
    let proj = matmul(&qa, &matmul(&transpose(&qa), &qb));
    let resid: Mat = (0..qb.len()).map(|i| (0..qb[0].len()).map(|j| qb[i][j] - proj[i][j]).collect()).collect();
    let g = matmul(&transpose(&resid), &resid);
    let (vals, _) = jacobi_eigen(&g);
    vals.last().copied().unwrap_or(0.0).max(0.0).sqrt().min(1.0).asin()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting; `None`
/// when singular.
pub fn solve(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Mat = a.iter().zip(b).map(|(r, &v)| r.iter().copied().chain([v]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-12 {
            return None;
        }
        m.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

pub fn dual_value(alpha: &[f64], y: &[f64], k: &Mat) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Exact soft-margin dual optimum by enumerating every assignment of
/// multipliers to {0, C, free} and solving the free block's KKT system.
/// Requires a positive definite kernel matrix; meant for n <= 8.
pub fn svm_dual_oracle(k: &Mat, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    assert!(n <= 10);
    let mut best = f64::NEG_INFINITY;
    let mut state = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let upper: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let mut alpha = vec![0.0; n];
        for &i in &upper {
            alpha[i] = c;
        }
        let feasible = if free.is_empty() {
            upper.iter().map(|&i| y[i] * c).sum::<f64>().abs() < 1e-12
        } else {
            // [Q_FF  y_F] [a_F]   [1 - Q_FU a_U]
            // [y_F^T  0 ] [ b ] = [ -y_U^T a_U ]
            let f = free.len();
            let mut sys = vec![vec![0.0; f + 1]; f + 1];
            let mut rhs = vec![0.0; f + 1];
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    sys[r][s] = y[i] * y[j] * k[i][j];
                }
                sys[r][f] = y[i];
                sys[f][r] = y[i];
                rhs[r] = 1.0 - upper.iter().map(|&j| y[i] * y[j] * k[i][j] * c).sum::<f64>();
            }
            rhs[f] = -upper.iter().map(|&j| y[j] * c).sum::<f64>();
            match solve(&sys, &rhs) {
                Some(sol) if free.iter().enumerate().all(|(r, _)| sol[r] > -1e-12 && sol[r] < c + 1e-12) => {
                    for (r, &i) in free.iter().enumerate() {
                        alpha[i] = sol[r].clamp(0.0, c);
                    }
                    true
                }
                _ => false,
            }
        };
        if feasible {
            best = best.max(dual_value(&alpha, y, k));
        }
        // next assignment in base 3
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            state[pos] += 1;
            if state[pos] == 3 {
                state[pos] = 0;
                pos += 1;
            } else {
                break;
            }
        }
    }
}

/// Central finite difference of `f` along every coordinate of `x`.
pub fn central_diff(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let up = f(&p);
        p[i] = x[i] - h;
        let down = f(&p);
        p[i] = x[i];
        g.push((up - down) / (2.0 * h));
    }
    g
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Direct quadratic KDE divergence (no sorting or symmetry tricks).
pub fn kde_divergence_direct(ys: &Mat, yt: &Mat, sigma: f64) -> f64 {
    let m = ys[0].len() as f64;
    let norm = (4.0 * std::f64::consts::PI * sigma * sigma).powf(-m / 2.0);
    let g = |a: &[f64], b: &[f64]| norm * (-sq_dist(a, b) / (4.0 * sigma * sigma)).exp();
    let mean = |a: &Mat, b: &Mat| {
        let mut s = 0.0;
        for p in a {
            for q in b {
                s += g(p, q);
            }
        }
        s / (a.len() * b.len()) as f64
    };
    mean(ys, ys) - 2.0 * mean(ys, yt) + mean(yt, yt)
}
