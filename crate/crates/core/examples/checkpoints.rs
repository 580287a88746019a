//! Save trained classifiers as binary checkpoints and load them back.
//!
//! cargo run --example checkpoints

use xferbench::classify::checkpoint::Checkpoint;
use xferbench::classify::{mlp_train, MlpConfig, SvmClassifier, SvmParams};
use xferbench::harness::synth::synth_covariate_shift;
use xferbench::kernels::Bandwidth;

fn main() -> xferbench::Result<()> {
    let (source, target) = synth_covariate_shift(50, 3, &[0.0, 0.0, 0.0], 1)?;
    let (x, y) = (source.features(), source.labels().unwrap());
    let dir = std::env::temp_dir();

    let svm = SvmClassifier::fit(&x, &y, 2, &SvmParams::rbf(1.0, Bandwidth::default()))?;
    let (mlp, _) = mlp_train(&x, &y, 2, &MlpConfig { epochs: 5, ..MlpConfig::default() }, None)?;
    for ck in [Checkpoint::Svm(svm), Checkpoint::Mlp(mlp)] {
        let path = dir.join(format!("{}.xfbm", ck.kind_name()));
        ck.save(&path)?;
        let back = Checkpoint::load(&path)?;
        let bytes = std::fs::metadata(&path).map_err(|e| xferbench::Error::io(&path, e))?.len();
        println!("{} -> {} ({bytes} bytes), identical: {}", ck.kind_name(), path.display(), back == ck);
        if let Checkpoint::Svm(m) = back {
            let pred = m.predict(&target.features())?;
            println!("  reloaded SVM predicts {:?}...", &pred[..8]);
        }
    }
    Ok(())
}
