mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use xferbench::diffusion::{affinity_for, diffusion_distance, diffusion_embed, embed_joint, markov_normalize, DiffusionParams};
use xferbench::kernels::{gamma_heuristic, knn_sparsify, pairwise_sq_dists, rbf_kernel, Affinity, Bandwidth, DistanceMatrix};
use xferbench::dataset::{Dataset, Domain};

fn points(max_n: usize, max_d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (4..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        proptest::collection::vec(-3.0..3.0f64, n * d).prop_map(move |v| DMatrix::from_row_slice(n, d, &v))
    })
}

fn distinct(x: &DMatrix<f64>) -> bool {
    let d = pairwise_sq_dists(x);
    (0..x.nrows()).all(|i| (0..i).all(|j| d.values()[(i, j)] > 1e-6))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_is_symmetric_with_unit_diagonal(x in points(20, 4)) {
        prop_assume!(distinct(&x));
        let d = pairwise_sq_dists(&x);
        let g = gamma_heuristic(&d).unwrap();
        let k = rbf_kernel(&d, g).unwrap();
        for i in 0..x.nrows() {
            prop_assert_eq!(k.values()[(i, i)], 1.0);
            for j in 0..x.nrows() {
                let v = k.values()[(i, j)];
                prop_assert_eq!(v, k.values()[(j, i)]);
                prop_assert!(v > 0.0 && v <= 1.0);
            }
        }
    }

    #[test]
    fn gamma_heuristic_matches_mean_distance(x in points(15, 3)) {
        prop_assume!(distinct(&x));
        let rows = to_vecs(&x);
        let n = rows.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                total += sq_dist(&rows[i], &rows[j]).sqrt();
            }
        }
        let mean = total / (n * (n - 1) / 2) as f64;
        let g = gamma_heuristic(&pairwise_sq_dists(&x)).unwrap();
        prop_assert!(rel_err(g, 1.0 / (mean * mean)) < 1e-12);
    }

    #[test]
    fn knn_graph_is_symmetric_and_sparse(x in points(25, 3), k in 1usize..6) {
        prop_assume!(distinct(&x));
        let d = pairwise_sq_dists(&x);
        let kernel = rbf_kernel(&d, gamma_heuristic(&d).unwrap()).unwrap();
        let k = k.min(x.nrows() - 1);
        let graph = knn_sparsify(&kernel, k).unwrap();
        let dense = graph.to_dense();
        for i in 0..x.nrows() {
            prop_assert!(graph.neighbors(i).len() >= k);
            for j in 0..x.nrows() {
                prop_assert_eq!(dense[(i, j)], dense[(j, i)]);
                if dense[(i, j)] != 0.0 {
                    prop_assert_eq!(dense[(i, j)], kernel.values()[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn markov_chain_is_reversible_with_stationary_pi(x in points(20, 3), alpha in 0.0..=1.0f64) {
        prop_assume!(distinct(&x));
        let k = affinity_for(&x, &Bandwidth::default(), None).unwrap();
        let p = markov_normalize(&k, alpha).unwrap();
        let (pv, pi) = (p.values(), p.stationary());
        let n = x.nrows();
        prop_assert!((pi.sum() - 1.0).abs() < 1e-12);
        for i in 0..n {
            prop_assert!((pv.row(i).sum() - 1.0).abs() < 1e-12);
            let flow: f64 = (0..n).map(|u| pi[u] * pv[(u, i)]).sum();
            prop_assert!((flow - pi[i]).abs() < 1e-12);
            for j in 0..n {
                prop_assert!((pi[i] * pv[(i, j)] - pi[j] * pv[(j, i)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn full_embedding_reproduces_diffusion_distance(x in points(14, 3), t in 1u32..4) {
        prop_assume!(distinct(&x));
        let k = affinity_for(&x, &Bandwidth::default(), None).unwrap();
        let p = markov_normalize(&k, 0.5).unwrap();
        let n = x.nrows();
        let emb = diffusion_embed(&p, n - 1, t).unwrap();
        for i in 0..n {
            for j in 0..n {
                let e = (emb.coords().row(i) - emb.coords().row(j)).norm();
                prop_assert!((e - diffusion_distance(&p, t, i, j).unwrap()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn eigenvectors_are_pi_orthonormal(x in points(16, 3)) {
        prop_assume!(distinct(&x));
        let k = affinity_for(&x, &Bandwidth::default(), None).unwrap();
        let p = markov_normalize(&k, 1.0).unwrap();
        let m = 3.min(x.nrows() - 1);
        let emb = diffusion_embed(&p, m, 1).unwrap();
        let psi = emb.eigenvectors();
        let pi = p.stationary();
        for a in 0..m {
            // orthogonal to the constant trivial vector as well
            let mean: f64 = (0..x.nrows()).map(|i| pi[i] * psi[(i, a)]).sum();
            prop_assert!(mean.abs() < 1e-9);
            for b in 0..m {
                let dot: f64 = (0..x.nrows()).map(|i| pi[i] * psi[(i, a)] * psi[(i, b)]).sum();
                prop_assert!((dot - f64::from(a == b)).abs() < 1e-9);
            }
        }
        let vals = emb.eigenvalues();
        prop_assert!(vals.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }
}

#[test]
fn eigenvalues_match_jacobi_oracle() {
    let x = random_matrix(18, 3, 5);
    let k = affinity_for(&x, &Bandwidth::default(), None).unwrap();
    let p = markov_normalize(&k, 0.5).unwrap();
    let pi = p.stationary();
    let n = 18;
    let conj: Mat = (0..n)
        .map(|i| (0..n).map(|j| (pi[i] / pi[j]).sqrt() * p.values()[(i, j)]).collect())
        .collect();
    let sym: Mat = (0..n).map(|i| (0..n).map(|j| 0.5 * (conj[i][j] + conj[j][i])).collect()).collect();
    let (mut vals, _) = jacobi_eigen(&sym);
    vals.reverse();
    let emb = diffusion_embed(&p, n - 1, 1).unwrap();
    for (a, b) in emb.eigenvalues().iter().zip(&vals) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn repeated_unit_eigenvalues_survive_disconnected_graphs() {
    // two components: the chain has eigenvalue 1 twice
    let mut w = DMatrix::zeros(6, 6);
    for (a, b) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
        w[(a, b)] = 1.0;
        w[(b, a)] = 1.0;
    }
    let p = markov_normalize(&w, 0.0).unwrap();
    let emb = diffusion_embed(&p, 2, 1).unwrap();
    assert!((emb.eigenvalues()[1] - 1.0).abs() < 1e-12);
    let c = emb.coords();
    assert!((c[(0, 0)] - c[(2, 0)]).abs() < 1e-12);
    assert!((c[(0, 0)] - c[(3, 0)]).abs() > 0.5);
}

#[test]
fn joint_embedding_orders_source_then_target() {
    let xs = random_matrix(12, 2, 1);
    let xt = random_matrix(8, 2, 2);
    let s = Dataset::from_matrix(&xs, &[0; 12], vec!["a".into()], Domain::Source, "s").unwrap();
    let t = Dataset::from_matrix(&xt, &[0; 8], vec!["a".into()], Domain::Target, "t").unwrap();
    let params = DiffusionParams { m: 3, ..DiffusionParams::default() };
    let (emb, index) = embed_joint(&s, &t, &params).unwrap();
    assert_eq!(emb.coords().shape(), (20, 3));
    assert_eq!(index.source_rows(), 0..12);
    assert_eq!(index.target_rows(), 12..20);
    assert_eq!(index.ids[12], "t0");
}

#[test]
fn flat_distance_format_round_trips() {
    let x = random_matrix(7, 2, 9);
    let d = pairwise_sq_dists(&x);
    let mut buf = Vec::new();
    d.write_flat(&mut buf).unwrap();
    let back = DistanceMatrix::read_flat(buf.as_slice()).unwrap();
    assert_eq!(back, d);
}
