//! Diffusion map of two noisy clusters: the first nontrivial coordinate
//! separates them, and the full embedding reproduces diffusion distances.
//!
//! cargo run --example diffusion_embedding

use nalgebra::DMatrix;
use rand::Rng;
use xferbench::diffusion::{affinity_for, diffusion_distance, diffusion_embed, markov_normalize};
use xferbench::kernels::Bandwidth;
use xferbench::rng::seeded;

fn main() -> xferbench::Result<()> {
    let mut r = seeded(1);
    let x = DMatrix::from_fn(40, 2, |i, _| if i < 20 { 0.0 } else { 4.0 } + r.random_range(-1.0..1.0));
    let k = affinity_for(&x, &Bandwidth::default(), None)?;
    let p = markov_normalize(&k, 1.0)?;
    let emb = diffusion_embed(&p, 3, 2)?;
    println!("eigenvalues {:?}", &emb.eigenvalues()[..4]);
    let first = emb.coords().column(0);
    println!(
        "psi_1 mean: cluster A {:+.3}, cluster B {:+.3}",
        first.rows(0, 20).mean(),
        first.rows(20, 20).mean()
    );

    let full = diffusion_embed(&p, 39, 2)?;
    let e = (full.coords().row(0) - full.coords().row(25)).norm();
    println!("embedding distance {e:.6} vs diffusion distance {:.6}", diffusion_distance(&p, 2, 0, 25)?);
    Ok(())
}
