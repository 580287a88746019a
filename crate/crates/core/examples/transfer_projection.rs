//! Fit a transfer diffusion map on a covariate-shift problem, compare it
//! with the lambda = 0 spectral solution and save the projection.
//!
//! cargo run --example transfer_projection

use xferbench::classify::{knn_predict, KnnModel};
use xferbench::harness::synth::synth_covariate_shift;
use xferbench::transfer::{trdm_fit, TrdmParams};

fn main() -> xferbench::Result<()> {
    let (source, target) = synth_covariate_shift(100, 5, &[0.0, 3.0, 0.0, 0.0, 0.0], 2)?;
    let (xs, xt) = (source.features(), target.features());
    let (ys, yt) = (source.labels().unwrap(), target.labels().unwrap());

    for lambda in [0.0, 1.0, 300.0] {
        let params = TrdmParams { lambda, ..TrdmParams::default() };
        let model = trdm_fit(&xs, &xt, &params, 0)?;
        let knn = KnnModel::new(model.transform(&xs)?, ys.clone(), 5)?;
        let pred = knn_predict(&knn, &model.transform(&xt)?)?;
        let acc = pred.iter().zip(&yt).filter(|(a, b)| a == b).count() as f64 / yt.len() as f64;
        println!(
            "lambda {lambda:>5}: divergence {:.5} (start {:.5}), {} steps, target accuracy {acc:.3}",
            model.divergence(&xs, &xt)?,
            model.initial_divergence(&xs, &xt)?,
            model.history().len() - 1
        );
        if lambda == 1.0 {
            let path = std::env::temp_dir().join("projection.csv");
            model.projection().save_csv(&path, &model.params().header(model.sigma()))?;
            println!("projection written to {}", path.display());
        }
    }
    Ok(())
}
