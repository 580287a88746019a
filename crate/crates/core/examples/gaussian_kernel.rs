//! Pairwise distances, the bandwidth heuristic, the Gaussian kernel and its
//! symmetric kNN sparsification.
//!
//! cargo run --example gaussian_kernel

use nalgebra::DMatrix;
use xferbench::kernels::{gamma_heuristic_with, knn_sparsify, pairwise_sq_dists, rbf_kernel, GammaRule};

fn main() -> xferbench::Result<()> {
    let x = DMatrix::from_row_slice(6, 2, &[0.0, 0.0, 0.1, 0.0, 0.0, 0.2, 3.0, 3.0, 3.1, 2.9, 2.8, 3.2]);
    let d = pairwise_sq_dists(&x);
    for rule in [GammaRule::InverseSquaredMeanDistance, GammaRule::InverseMeanSquaredDistance] {
        println!("{rule:?}: gamma = {:.4}", gamma_heuristic_with(&d, rule)?);
    }
    let gamma = gamma_heuristic_with(&d, GammaRule::default())?;
    let k = rbf_kernel(&d, gamma)?;
    println!("kernel:\n{:.3}", k.values());

    let graph = knn_sparsify(&k, 2)?;
    for i in 0..graph.n() {
        let nbrs: Vec<usize> = graph.neighbors(i).iter().map(|&(j, _)| j).collect();
        println!("node {i} neighbors {nbrs:?}");
    }
    Ok(())
}
