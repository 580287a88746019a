//! Run a JSON experiment config and write report.json, iterations.csv and
//! accuracy.svg.
//!
//! cargo run --release --example run_experiment -- crates/core/examples/configs/cross_class.json

use xferbench::harness::report::emit_report;
use xferbench::harness::{run_experiment, ExperimentConfig};

fn main() -> xferbench::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/covariate_shift.json").into());
    let config = ExperimentConfig::load(&path)?;
    let report = run_experiment(&config)?;
    for s in &report.summaries {
        let hi = s.high_res_mean.map(|h| format!("  high-res {h:.3}")).unwrap_or_default();
        println!("{:<14} {:.3} +- {:.3}{hi}", s.label, s.mean.unwrap_or(f64::NAN), s.std.unwrap_or(f64::NAN));
    }
    let out = config.output_dir.clone().unwrap_or_else(|| std::env::temp_dir().join("xferbench-report"));
    for f in emit_report(&report, &out)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
