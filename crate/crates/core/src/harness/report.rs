//! Report files: `report.json`, `iterations.csv` and an `accuracy.svg` bar
//! chart (mean with one-standard-deviation whiskers per algorithm).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::ExperimentReport;
use crate::error::{Error, Result};

pub fn load_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// One row per iteration and algorithm; failed iterations keep their rows
/// with empty accuracies.
pub fn write_iterations_csv(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["iteration", "algorithm", "accuracy", "high_res_accuracy", "low_res_accuracy", "status"])
        .map_err(csv_err)?;
    for it in &report.iterations {
        for spec in &report.config.algorithms {
            let label = spec.label();
            let r = it.results.iter().find(|r| r.label == label);
            let status = if it.error.is_some() { "failed" } else { "ok" };
            w.write_record([
                it.iteration.to_string(),
                label.to_string(),
                cell(r.map(|r| r.accuracy)),
                cell(r.and_then(|r| r.high_res_accuracy)),
                cell(r.and_then(|r| r.low_res_accuracy)),
                status.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PLOT_H: f64 = 240.0;
const TOP: f64 = 30.0;
const LEFT: f64 = 60.0;
const GROUP_W: f64 = 110.0;

fn y_of(acc: f64) -> f64 {
    TOP + PLOT_H * (1.0 - acc.clamp(0.0, 1.0))
}

/// Bar chart of mean accuracy. Degraded-transfer reports get a
/// high-resolution and a low-resolution bar per algorithm.
pub fn render_svg(report: &ExperimentReport) -> String {
    let paired = report.summaries.iter().any(|s| s.high_res_mean.is_some());
    let n = report.summaries.len().max(1) as f64;
    let width = LEFT + GROUP_W * n + 20.0;
    let height = TOP + PLOT_H + 70.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{v:.2}</text>"##,
            width - 20.0,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">accuracy</text>"#,
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0
    );
    for (g, summary) in report.summaries.iter().enumerate() {
        let x0 = LEFT + GROUP_W * g as f64;
        let label = escape(&summary.label);
        let _ = writeln!(s, r#"<g class="bar-group" data-algorithm="{label}">"#);
        let mut bars = Vec::new();
        if paired {
            bars.push((summary.high_res_mean, summary.high_res_std, "#4c72b0", "high"));
            bars.push((summary.mean, summary.std, "#dd8452", "low"));
        } else {
            bars.push((summary.mean, summary.std, "#4c72b0", "target"));
        }
        let bar_w = (GROUP_W - 30.0) / bars.len() as f64;
        for (b, (mean, std, colour, kind)) in bars.into_iter().enumerate() {
            let Some(mean) = mean else { continue };
            let x = x0 + 15.0 + bar_w * b as f64;
            let y = y_of(mean);
            let _ = writeln!(
                s,
                r#"<rect class="bar {kind}" x="{x}" y="{y}" width="{}" height="{}" fill="{colour}"/>"#,
                bar_w - 4.0,
                TOP + PLOT_H - y
            );
            let sd = std.unwrap_or(0.0);
            let cx = x + (bar_w - 4.0) / 2.0;
            let _ = writeln!(
                s,
                r#"<line class="whisker" x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#,
                y_of(mean + sd),
                y_of(mean - sd)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#,
            x0 + GROUP_W / 2.0,
            TOP + PLOT_H + 18.0
        );
        let _ = writeln!(s, "</g>");
    }
    if paired {
        let y = TOP + PLOT_H + 45.0;
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{}" width="10" height="10" fill="#4c72b0"/><text x="{}" y="{y}">high resolution</text><rect x="{}" y="{}" width="10" height="10" fill="#dd8452"/><text x="{}" y="{y}">low resolution</text>"##,
            y - 9.0,
            LEFT + 14.0,
            LEFT + 130.0,
            y - 9.0,
            LEFT + 144.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the three report files into `out_dir` (created if missing) and
/// returns their paths.
pub fn emit_report(report: &ExperimentReport, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("report.json");
    std::fs::write(&json, report.to_json()? + "\n").map_err(|e| Error::io(&json, e))?;
    let csv = dir.join("iterations.csv");
    write_iterations_csv(report, &csv)?;
    let svg = dir.join("accuracy.svg");
    std::fs::write(&svg, render_svg(report)).map_err(|e| Error::io(&svg, e))?;
    Ok(vec![json, csv, svg])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{
        AlgorithmName, AlgorithmResult, AlgorithmSpec, DatasetSpec, ExperimentConfig, IterationResult, Protocol,
    };

    fn fake_report() -> ExperimentReport {
        let config = ExperimentConfig::new(
            Protocol::CrossDomain,
            DatasetSpec::CovariateShift {
                n_per_class: 5,
                d: 2,
                shift: vec![0.0, 1.0],
            },
            vec![AlgorithmSpec::new(AlgorithmName::Knn), AlgorithmSpec::new(AlgorithmName::SvmLinear)],
        );
        let iterations = (0..3)
            .map(|i| IterationResult {
                iteration: i,
                results: ["knn", "svm_linear"]
                    .iter()
                    .map(|l| AlgorithmResult {
                        label: l.to_string(),
                        accuracy: 0.1 * (i + 3) as f64 + 0.123456789,
                        high_res_accuracy: None,
                        low_res_accuracy: None,
                        train_report: None,
                        seconds: Some(0.25),
                    })
                    .collect(),
                error: None,
            })
            .collect();
        ExperimentReport::aggregate(config, iterations)
    }

    #[test]
    fn emitted_files() {
        let report = fake_report();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report, dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("iterations.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 6);
        assert_eq!(load_report(dir.path().join("report.json")).unwrap(), report);
        let svg = std::fs::read_to_string(dir.path().join("accuracy.svg")).unwrap();
        assert_eq!(svg.matches(r#"class="bar-group""#).count(), 2);
        assert!(svg.contains(r#"data-algorithm="svm_linear""#));
    }

    #[test]
    fn failed_iterations_are_excluded() {
        let mut report = fake_report();
        report.iterations[1].error = Some("boom".into());
        let report = ExperimentReport::aggregate(report.config.clone(), report.iterations.clone());
        assert_eq!(report.failed_iterations, vec![1]);
        assert_eq!(report.summaries[0].completed, 2);
    }
}
