//! Command-line front end: `run`, `degrade`, `embed`, `report`, `train`
//! and `predict`. Exit codes: 0 success, 1 configuration or usage error,
//! 2 runtime failure (including a run that lost at least one iteration).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xferbench::classify::checkpoint::Checkpoint;
use xferbench::classify::{self, KnnModel, SvmClassifier};
use xferbench::dataset::{self, Dataset, Domain};
use xferbench::diffusion::{self, DiffusionParams};
use xferbench::harness::{self, Algorithm, Experiment, ExperimentConfig};
use xferbench::imageprep;
use xferbench::{Error, Result};

#[derive(Parser)]
#[command(name = "xferbench", version, about = "Transfer-learning benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write report.json, iterations.csv and accuracy.svg.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run iterations one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// Degrade every image in a directory (50x50, then 10x10, then WxH).
    Degrade {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Final size as WxH.
        #[arg(long = "final", value_parser = parse_size)]
        final_size: (usize, usize),
    },
    /// Joint diffusion embedding of the first iteration's training and target rows.
    Embed {
        #[arg(long)]
        config: PathBuf,
        /// CSV path; defaults to <output_dir>/embedding.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render the bar chart of a saved report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        svg: PathBuf,
    },
    /// Train a classifier on a labeled CSV and save a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        label_column: String,
        /// knn, svm_linear, svm_rbf, mlp or da_mlp.
        #[arg(long)]
        algorithm: String,
        /// Parameter block as JSON.
        #[arg(long)]
        params: Option<String>,
        /// Unlabeled target CSV (da_mlp only).
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict classes for a CSV with a saved checkpoint.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Label column of the CSV; empty cells are allowed.
        #[arg(long)]
        label_column: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w: usize = w.parse().map_err(|_| format!("bad width `{w}`"))?;
    let h: usize = h.parse().map_err(|_| format!("bad height `{h}`"))?;
    if w == 0 || h == 0 {
        return Err("sizes must be positive".into());
    }
    Ok((w, h))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_) | Error::InvalidArgument(_)) { 1 } else { 2 })
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run {
            config,
            seed,
            out,
            sequential,
        } => run(&config, seed, out, sequential),
        Command::Degrade {
            input,
            out,
            final_size,
        } => degrade_dir(&input, &out, final_size).map(|_| 0),
        Command::Embed { config, out } => embed(&config, out).map(|_| 0),
        Command::Report { input, svg } => {
            let report = harness::load_report(&input)?;
            std::fs::write(&svg, harness::render_svg(&report)).map_err(|e| Error::io(&svg, e))?;
            Ok(0)
        }
        Command::Train {
            data,
            label_column,
            algorithm,
            params,
            target,
            seed,
            out,
        } => train(&data, &label_column, &algorithm, params.as_deref(), target.as_deref(), seed, &out).map(|_| 0),
        Command::Predict {
            model,
            data,
            label_column,
            out,
        } => predict(&model, &data, &label_column, &out).map(|_| 0),
    }
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("xferbench-out"))
}

fn run(path: &Path, seed: Option<u64>, out: Option<PathBuf>, sequential: bool) -> Result<u8> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = Some(o);
    }
    if sequential {
        cfg.parallel = false;
    }
    let dir = output_dir(&cfg);
    let report = harness::run_experiment(&cfg)?;
    harness::emit_report(&report, &dir)?;
    for s in &report.summaries {
        match (s.mean, s.std) {
            (Some(m), Some(sd)) => println!("{:<16} {m:.4} +- {sd:.4} ({} iterations)", s.label, s.completed),
            _ => println!("{:<16} no completed iterations", s.label),
        }
    }
    for it in &report.iterations {
        if let Some(e) = &it.error {
            eprintln!("{e}");
        }
    }
    println!("report written to {}", dir.display());
    Ok(if report.failed_iterations.is_empty() { 0 } else { 2 })
}

fn degrade_dir(input: &Path, out: &Path, (w, h): (usize, usize)) -> Result<()> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(input)
        .map_err(|e| Error::io(input, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
            matches!(ext.as_str(), "png" | "pgm" | "ppm" | "pnm")
        })
        .collect();
    files.sort();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for f in &files {
        let chip = imageprep::load_image(f)?;
        let small = imageprep::degrade(&chip, w, h)?;
        imageprep::save_image(&small, out.join(f.file_name().expect("file entries have names")))?;
    }
    println!("degraded {} images into {}", files.len(), out.display());
    Ok(())
}

fn embed(path: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::load(path)?;
    let experiment = Experiment::new(cfg.clone())?;
    let params = experiment
        .algorithms()
        .iter()
        .find_map(|a| match &a.algorithm {
            Algorithm::DmKnn { params, .. } | Algorithm::Dm1Known(params) => Some(params.clone()),
            _ => None,
        })
        .unwrap_or_else(DiffusionParams::default);
    let data = experiment.prepare_iteration(0)?;
    let (embedding, index) = diffusion::embed_joint(&data.train, &data.target, &params)?;
    let out = out.unwrap_or_else(|| output_dir(&cfg).join("embedding.csv"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    diffusion::save_embedding_csv(&embedding, &index, &out)?;
    println!("{} rows x {} coordinates written to {}", index.ids.len(), embedding.m(), out.display());
    Ok(())
}

fn classes_path(model: &Path) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(".classes");
    PathBuf::from(name)
}

fn labeled(d: &Dataset) -> Result<Vec<usize>> {
    d.labels()
        .ok_or_else(|| Error::InvalidArgument("every training row needs a label".into()))
}

fn train(
    data: &Path,
    label_column: &str,
    algorithm: &str,
    params: Option<&str>,
    target: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let params: serde_json::Value = match params {
        Some(text) => serde_json::from_str(text).map_err(|e| Error::Config(format!("--params: {e}")))?,
        None => serde_json::Value::Null,
    };
    let name: harness::AlgorithmName = serde_json::from_value(serde_json::Value::String(algorithm.into()))
        .map_err(|_| Error::Config(format!("unknown algorithm `{algorithm}`")))?;
    let spec = harness::AlgorithmSpec::new(name).with_params(params);
    let resolved = Algorithm::from_spec(&spec, None, classify::MlpConfig::default().epochs)?;

    let source = dataset::load_tabular(data, label_column, Domain::Source)?;
    let x = source.features();
    let y = labeled(&source)?;
    let classes = source.class_count();
    let ckpt = match resolved {
        Algorithm::Knn { k } => Checkpoint::Knn(KnnModel::new(x, y, k)?),
        Algorithm::Svm(p) => Checkpoint::Svm(SvmClassifier::fit(&x, &y, classes, &p)?),
        Algorithm::Mlp(c) => {
            let c = classify::MlpConfig { seed, ..c };
            Checkpoint::Mlp(classify::mlp_train(&x, &y, classes, &c, None)?.0)
        }
        Algorithm::DaMlp(c) => {
            let target = target.ok_or_else(|| Error::Config("da_mlp needs --target".into()))?;
            let t = dataset::load_tabular(target, label_column, Domain::Target)?;
            let xt = t.features();
            if xt.ncols() != x.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: x.ncols(),
                    found: xt.ncols(),
                });
            }
            let n = x.nrows() + xt.nrows();
            let all = nalgebra::DMatrix::from_fn(n, x.ncols(), |i, j| {
                if i < x.nrows() {
                    x[(i, j)]
                } else {
                    xt[(i - x.nrows(), j)]
                }
            });
            let domains: Vec<usize> = (0..n).map(|i| usize::from(i >= x.nrows())).collect();
            let labels: Vec<Option<usize>> = (0..n).map(|i| y.get(i).copied()).collect();
            let c = classify::DaConfig {
                mlp: classify::MlpConfig { seed, ..c.mlp },
                lambda_d: c.lambda_d,
            };
            Checkpoint::DaMlp(classify::da_mlp_train(&all, &domains, &labels, classes, &c, None)?.0)
        }
        _ => {
            return Err(Error::Config(format!(
                "`{algorithm}` is transductive and has no standalone checkpoint"
            )))
        }
    };
    ckpt.save(out)?;
    let names = classes_path(out);
    std::fs::write(&names, source.class_names().join("\n") + "\n").map_err(|e| Error::io(&names, e))?;
    println!("{} model written to {}", ckpt.kind_name(), out.display());
    Ok(())
}

fn predict(model: &Path, data: &Path, label_column: &str, out: &Path) -> Result<()> {
    let ckpt = Checkpoint::load(model)?;
    let d = dataset::load_tabular(data, label_column, Domain::Target)?;
    let x = d.features();
    let pred = match &ckpt {
        Checkpoint::Knn(m) => classify::knn_predict(m, &x)?,
        Checkpoint::Svm(m) => m.predict(&x)?,
        Checkpoint::Mlp(m) => classify::mlp_predict(m, &x)?.0,
        Checkpoint::DaMlp(m) => classify::mlp_predict(&m.base, &x)?.0,
    };
    let names: Option<Vec<String>> = std::fs::read_to_string(classes_path(model))
        .ok()
        .map(|t| t.lines().map(str::to_string).collect());
    let name_of = |c: usize| names.as_ref().and_then(|n| n.get(c).cloned()).unwrap_or_else(|| c.to_string());
    let mut w = csv::Writer::from_path(out).map_err(|e| Error::Csv {
        path: out.to_path_buf(),
        message: e.to_string(),
    })?;
    let csv_err = |e: csv::Error| Error::Csv {
        path: out.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(["id", "predicted"]).map_err(csv_err)?;
    for (s, &p) in d.samples().iter().zip(&pred) {
        w.write_record([s.id.as_str(), name_of(p).as_str()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    // score rows whose label names a known class
    let scored: Vec<(usize, &str)> = d
        .samples()
        .iter()
        .zip(&pred)
        .filter_map(|(s, &p)| s.label.map(|l| (p, d.class_names()[l].as_str())))
        .collect();
    if !scored.is_empty() && names.is_some() {
        let hits = scored.iter().filter(|(p, truth)| name_of(*p) == *truth).count();
        println!("accuracy {:.4} on {} labeled rows", hits as f64 / scored.len() as f64, scored.len());
    }
    println!("{} predictions written to {}", pred.len(), out.display());
    Ok(())
}
