//! Plain vs domain-adversarial network on a shifted target domain. The
//! domain head's accuracy shows how well the features hide the domain.
//!
//! cargo run --example domain_adversarial

use nalgebra::DMatrix;
use xferbench::classify::{da_mlp_train, mlp_predict, mlp_train, DaConfig, MlpConfig};
use xferbench::harness::synth::synth_covariate_shift;

fn main() -> xferbench::Result<()> {
    let (source, target) = synth_covariate_shift(200, 2, &[0.0, 3.0], 4)?;
    let (xs, xt) = (source.features(), target.features());
    let (ys, yt) = (source.labels().unwrap(), target.labels().unwrap());
    let acc = |pred: &[usize], truth: &[usize]| pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64;
    let mlp = MlpConfig { hidden: 32, epochs: 20, ..MlpConfig::default() };

    let (plain, report) = mlp_train(&xs, &ys, 2, &mlp, None)?;
    println!("plain: loss {:.4}, target accuracy {:.3}", report.loss.last().unwrap(), acc(&mlp_predict(&plain, &xt)?.0, &yt));

    let n = xs.nrows() + xt.nrows();
    let x = DMatrix::from_fn(n, 2, |i, j| if i < xs.nrows() { xs[(i, j)] } else { xt[(i - xs.nrows(), j)] });
    let domains: Vec<usize> = (0..n).map(|i| usize::from(i >= xs.nrows())).collect();
    let labels: Vec<Option<usize>> = (0..n).map(|i| ys.get(i).copied()).collect();
    for lambda_d in [0.1, 1.0] {
        let cfg = DaConfig { mlp: mlp.clone(), lambda_d };
        let (model, _) = da_mlp_train(&x, &domains, &labels, 2, &cfg, None)?;
        println!(
            "lambda_d {lambda_d}: target accuracy {:.3}, domain head accuracy {:.3}",
            acc(&mlp_predict(&model.base, &xt)?.0, &yt),
            acc(&model.domain_predict(&x)?, &domains)
        );
    }
    Ok(())
}
