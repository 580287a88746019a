//! kNN on a joint diffusion embedding, and the 1Known rule that labels one
//! random target exemplar per class.
//!
//! cargo run --example knn_one_known

use xferbench::classify::{knn_predict, one_known_rule, KnnModel};
use xferbench::diffusion::{embed_joint, DiffusionParams};
use xferbench::harness::synth::synth_cross_class;

fn main() -> xferbench::Result<()> {
    let (source, target) = synth_cross_class(80, 4, 0.7, 5)?;
    let params = DiffusionParams { m: 4, ..DiffusionParams::default() };
    let (emb, index) = embed_joint(&source, &target, &params)?;
    let src_rows: Vec<usize> = index.source_rows().collect();
    let tgt_rows: Vec<usize> = index.target_rows().collect();
    let yt = target.labels().unwrap();
    let acc = |pred: &[usize]| pred.iter().zip(&yt).filter(|(a, b)| a == b).count() as f64 / yt.len() as f64;

    let knn = KnnModel::new(emb.rows(&src_rows), source.labels().unwrap(), 5)?;
    println!("source-trained kNN on target: {:.3}", acc(&knn_predict(&knn, &emb.rows(&tgt_rows))?));

    for seed in 0..3 {
        let rule = one_known_rule(emb.coords(), &tgt_rows, &yt, target.class_count(), seed)?;
        println!("1Known (exemplar draw {seed}): {:.3}", acc(&knn_predict(&rule, &emb.rows(&tgt_rows))?));
    }
    Ok(())
}
