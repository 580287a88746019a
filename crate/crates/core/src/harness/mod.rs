//! Config-driven experiment runner for the three transfer protocols:
//! high-quality to degraded data, cross-class, and cross-domain.
//!
//! Every iteration derives its own seeds from `(master_seed, iteration,
//! key)`: data preparation uses the key `"data"`, each algorithm uses its
//! label. Iterations are independent and may run in parallel; results are
//! merged by iteration index, so parallel and sequential runs agree.

pub mod report;
pub mod synth;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classify::{
    da_mlp_train, knn_predict, mlp_predict, mlp_train, one_known_rule, DaConfig, KnnModel, MlpConfig,
    MlpModel, SvmClassifier, SvmKind, SvmParams, TrainReport,
};
use crate::dataset::{self, Dataset, Domain, Sample, SplitSpec};
use crate::diffusion::{self, DiffusionParams};
use crate::error::{Error, Result};
use crate::imageprep::{self, ImageChip};
use crate::rng::{child_seed, derive_seed};
use crate::transfer::{self, TrdmParams};

pub use report::{emit_report, load_report, render_svg, write_iterations_csv};
pub use synth::{synth_chips, synth_covariate_shift, synth_cross_class};

/// Stopping epochs used when neither the parameter block nor
/// `stopping_epochs` sets one.
pub const IMAGE_EPOCHS: usize = 20;
pub const VECTOR_EPOCHS: usize = 5;
pub const DEFAULT_K: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Train on high-quality samples, test on a degraded copy of the held-out split.
    DegradedTransfer,
    /// Train on source classes, test on the full set of new target classes.
    CrossClass,
    /// Train on the source domain, test on the full target domain.
    CrossDomain,
}

fn default_side() -> usize {
    16
}

fn yes() -> bool {
    true
}

/// Where the data comes from. Synthetic generators are re-drawn every
/// iteration from the iteration's data seed; files are read once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    CovariateShift {
        n_per_class: usize,
        d: usize,
        shift: Vec<f64>,
    },
    CrossClass {
        n_per_class: usize,
        d: usize,
        strength: f64,
    },
    /// Labeled CSV files. Without `target` both domains come from `source`,
    /// which only makes sense with class lists. `target_classes[i]` is
    /// scored as `source_classes[i]`; without lists, target classes are
    /// matched to source classes by name.
    Tabular {
        source: PathBuf,
        #[serde(default)]
        target: Option<PathBuf>,
        label_column: String,
        #[serde(default)]
        source_classes: Option<Vec<String>>,
        #[serde(default)]
        target_classes: Option<Vec<String>>,
        /// Restrict both files to their shared, sorted feature names.
        #[serde(default)]
        align: bool,
        /// Standardize each domain with its own statistics.
        #[serde(default)]
        zscore: bool,
    },
    SyntheticChips {
        n_per_class: usize,
        classes: usize,
        #[serde(default = "default_side")]
        side: usize,
    },
    AnnotatedChips {
        annotations: PathBuf,
        #[serde(default = "default_side")]
        side: usize,
        #[serde(default = "yes")]
        grayscale: bool,
    },
}

impl DatasetSpec {
    fn is_image(&self) -> bool {
        matches!(self, DatasetSpec::SyntheticChips { .. } | DatasetSpec::AnnotatedChips { .. })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DatasetSpec::Tabular { source, target, .. } => {
                join(source);
                if let Some(t) = target {
                    join(t);
                }
            }
            DatasetSpec::AnnotatedChips { annotations, .. } => join(annotations),
            _ => {}
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmName {
    #[serde(rename = "knn")]
    Knn,
    #[serde(rename = "svm_linear")]
    SvmLinear,
    #[serde(rename = "svm_rbf")]
    SvmRbf,
    #[serde(rename = "mlp")]
    Mlp,
    #[serde(rename = "da_mlp")]
    DaMlp,
    #[serde(rename = "dm_knn")]
    DmKnn,
    #[serde(rename = "dm_1known")]
    Dm1Known,
    #[serde(rename = "trdm_knn")]
    TrdmKnn,
    #[serde(rename = "trdm_1known")]
    Trdm1Known,
}

impl AlgorithmName {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmName::Knn => "knn",
            AlgorithmName::SvmLinear => "svm_linear",
            AlgorithmName::SvmRbf => "svm_rbf",
            AlgorithmName::Mlp => "mlp",
            AlgorithmName::DaMlp => "da_mlp",
            AlgorithmName::DmKnn => "dm_knn",
            AlgorithmName::Dm1Known => "dm_1known",
            AlgorithmName::TrdmKnn => "trdm_knn",
            AlgorithmName::Trdm1Known => "trdm_1known",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub name: AlgorithmName,
    /// Report label and seed key; defaults to the name. Must be unique.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
}

impl AlgorithmSpec {
    pub fn new(name: AlgorithmName) -> Self {
        AlgorithmSpec {
            name,
            label: None,
            params: Value::Null,
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn with_params(mut self, params: Value) -> Self {
        self.params = params;
        self
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.name.as_str())
    }
}

fn default_iterations() -> usize {
    10
}

fn default_split() -> SplitSpec {
    SplitSpec {
        test_fraction: 0.3,
        val_fraction_of_train: 0.3,
        seed: 0,
        stratified: false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub datasets: DatasetSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Partition fractions. The seed field is not used: every iteration
    /// derives its own split seed. Cross-class and cross-domain runs test
    /// on the whole target set and only use `val_fraction_of_train`.
    #[serde(default = "default_split")]
    pub split: SplitSpec,
    #[serde(default)]
    pub balance_per_class: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Training epochs per algorithm label (neural algorithms only).
    #[serde(default)]
    pub stopping_epochs: BTreeMap<String, usize>,
    #[serde(default = "yes")]
    pub parallel: bool,
    /// Record wall-clock seconds; timings make otherwise identical reports differ.
    #[serde(default = "yes")]
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn new(protocol: Protocol, datasets: DatasetSpec, algorithms: Vec<AlgorithmSpec>) -> Self {
        ExperimentConfig {
            protocol,
            datasets,
            algorithms,
            iterations: default_iterations(),
            master_seed: 0,
            split: default_split(),
            balance_per_class: None,
            output_dir: None,
            stopping_epochs: BTreeMap::new(),
            parallel: true,
            record_timing: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a JSON config; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.datasets.resolve_paths(base);
        if let Some(out) = &mut cfg.output_dir {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(cfg)
    }

    /// Checks the config and resolves every algorithm's parameters.
    pub fn resolve(&self) -> Result<Vec<ResolvedAlgorithm>> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.iterations == 0 {
            return cfg_err("iterations must be >= 1".into());
        }
        if self.algorithms.is_empty() {
            return cfg_err("no algorithms listed".into());
        }
        self.split.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.balance_per_class == Some(0) {
            return cfg_err("balance_per_class must be positive".into());
        }
        let image = self.datasets.is_image();
        match (self.protocol, image) {
            (Protocol::DegradedTransfer, false) => {
                return cfg_err("degraded_transfer needs an image dataset (synthetic_chips or annotated_chips)".into())
            }
            (Protocol::CrossClass | Protocol::CrossDomain, true) => {
                return cfg_err("cross_class and cross_domain need a source/target dataset".into())
            }
            _ => {}
        }
        match &self.datasets {
            DatasetSpec::Tabular {
                source,
                target,
                source_classes,
                target_classes,
                ..
            } => {
                for p in std::iter::once(source).chain(target) {
                    if !p.exists() {
                        return cfg_err(format!("dataset file {} does not exist", p.display()));
                    }
                }
                if source_classes.is_some() != target_classes.is_some() {
                    return cfg_err("source_classes and target_classes must be given together".into());
                }
                if let (Some(s), Some(t)) = (source_classes, target_classes) {
                    if s.len() != t.len() || s.len() < 2 {
                        return cfg_err("class lists must have equal length >= 2".into());
                    }
                }
                if target.is_none() && source_classes.is_none() {
                    return cfg_err("a single tabular file needs source_classes and target_classes".into());
                }
            }
            DatasetSpec::AnnotatedChips { annotations, side, .. } => {
                if !annotations.exists() {
                    return cfg_err(format!("annotation file {} does not exist", annotations.display()));
                }
                if *side == 0 {
                    return cfg_err("side must be positive".into());
                }
            }
            DatasetSpec::SyntheticChips { side, .. } if *side == 0 => {
                return cfg_err("side must be positive".into());
            }
            _ => {}
        }
        let default_epochs = if image { IMAGE_EPOCHS } else { VECTOR_EPOCHS };
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(self.algorithms.len());
        for spec in &self.algorithms {
            let label = spec.label().to_string();
            if !seen.insert(label.clone()) {
                return cfg_err(format!("duplicate algorithm label `{label}`"));
            }
            let algorithm = Algorithm::from_spec(spec, self.stopping_epochs.get(&label).copied(), default_epochs)
                .map_err(|e| Error::Config(format!("algorithm `{label}`: {e}")))?;
            out.push(ResolvedAlgorithm { label, algorithm });
        }
        for label in self.stopping_epochs.keys() {
            if !seen.contains(label) {
                return cfg_err(format!("stopping_epochs names unknown algorithm `{label}`"));
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct KnnSettings {
    k: usize,
}

impl Default for KnnSettings {
    fn default() -> Self {
        KnnSettings { k: DEFAULT_K }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct WithK<T> {
    #[serde(flatten)]
    inner: T,
    k: Option<usize>,
}

/// A decision rule with fully resolved parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Algorithm {
    Knn { k: usize },
    Svm(SvmParams),
    Mlp(MlpConfig),
    DaMlp(DaConfig),
    DmKnn { params: DiffusionParams, k: usize },
    Dm1Known(DiffusionParams),
    TrdmKnn { params: TrdmParams, k: usize },
    Trdm1Known(TrdmParams),
}

fn parse<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T> {
    let v = if v.is_null() { Value::Object(Default::default()) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
}

impl Algorithm {
    /// Resolves a parameter block. Epochs come from `stop`, then the block,
    /// then `default_epochs`.
    pub fn from_spec(spec: &AlgorithmSpec, stop: Option<usize>, default_epochs: usize) -> Result<Self> {
        let p = &spec.params;
        if !(p.is_null() || p.is_object()) {
            return Err(Error::Config("params must be an object".into()));
        }
        if p.get("seed").is_some() {
            return Err(Error::Config("seeds are derived from master_seed".into()));
        }
        let epochs = |explicit: Option<usize>| stop.or(explicit).unwrap_or(default_epochs);
        let k_of = |k: Option<usize>| match k {
            Some(0) => Err(Error::Config("k must be positive".into())),
            k => Ok(k.unwrap_or(DEFAULT_K)),
        };
        let svm = |kind: SvmKind| -> Result<Algorithm> {
            if p.get("kind").is_some() {
                return Err(Error::Config("the SVM kind follows from the algorithm name".into()));
            }
            let mut params: SvmParams = parse(p)?;
            params.kind = kind;
            if !(params.c > 0.0) {
                return Err(Error::Config("c must be positive".into()));
            }
            Ok(Algorithm::Svm(params))
        };
        let given_epochs = p.get("epochs").and_then(Value::as_u64).map(|e| e as usize);
        Ok(match spec.name {
            AlgorithmName::Knn => {
                let s: KnnSettings = parse(p)?;
                Algorithm::Knn { k: k_of(Some(s.k))? }
            }
            AlgorithmName::SvmLinear => svm(SvmKind::Linear)?,
            AlgorithmName::SvmRbf => svm(SvmKind::Rbf)?,
            AlgorithmName::Mlp => {
                let mut c: MlpConfig = parse(p)?;
                c.epochs = epochs(given_epochs);
                Algorithm::Mlp(c)
            }
            AlgorithmName::DaMlp => {
                let mut c: DaConfig = parse(p)?;
                c.mlp.epochs = epochs(given_epochs);
                if !(c.lambda_d >= 0.0) {
                    return Err(Error::Config("lambda_d must be >= 0".into()));
                }
                Algorithm::DaMlp(c)
            }
            AlgorithmName::DmKnn => {
                let w: WithK<DiffusionParams> = parse(p)?;
                Algorithm::DmKnn {
                    params: w.inner,
                    k: k_of(w.k)?,
                }
            }
            AlgorithmName::Dm1Known => Algorithm::Dm1Known(parse(p)?),
            AlgorithmName::TrdmKnn => {
                let w: WithK<TrdmParams> = parse(p)?;
                w.inner.validate()?;
                Algorithm::TrdmKnn {
                    params: w.inner,
                    k: k_of(w.k)?,
                }
            }
            AlgorithmName::Trdm1Known => {
                let t: TrdmParams = parse(p)?;
                t.validate()?;
                Algorithm::Trdm1Known(t)
            }
        })
    }

    /// Whether training sees the unlabeled target features.
    pub fn is_transductive(&self) -> bool {
        matches!(
            self,
            Algorithm::DaMlp(_)
                | Algorithm::DmKnn { .. }
                | Algorithm::Dm1Known(_)
                | Algorithm::TrdmKnn { .. }
                | Algorithm::Trdm1Known(_)
        )
    }

    /// Whether one labeled target exemplar per class is revealed.
    pub fn uses_exemplars(&self) -> bool {
        matches!(self, Algorithm::Dm1Known(_) | Algorithm::Trdm1Known(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedAlgorithm {
    pub label: String,
    pub algorithm: Algorithm,
}

/// The partitions one iteration trains and evaluates on.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationData {
    pub train: Dataset,
    pub validation: Dataset,
    /// Labeled target set all accuracies are measured on.
    pub target: Dataset,
    /// High-quality copy of the held-out split (degraded protocol only).
    pub source_test: Option<Dataset>,
}

/// What a training routine is handed. Source-only algorithms get no
/// unlabeled rows and `labeled` never contains target-domain samples.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingInputs {
    pub labeled: Dataset,
    pub validation: Option<Dataset>,
    pub unlabeled: Option<Dataset>,
}

/// Builds the training inputs of `algorithm` when evaluating on `eval`.
pub fn training_inputs(algorithm: &Algorithm, data: &IterationData, eval: &Dataset) -> TrainingInputs {
    let labeled = data.train.with_domain(Domain::Source);
    let validation = (!data.validation.is_empty()).then(|| data.validation.with_domain(Domain::Source));
    let unlabeled = algorithm
        .is_transductive()
        .then(|| eval.without_labels().with_domain(Domain::Target));
    TrainingInputs {
        labeled,
        validation,
        unlabeled,
    }
}

/// `matches / total`.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty prediction set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Mean and unbiased (`n - 1`) standard deviation; the deviation of a
/// single value is 0.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub label: String,
    /// Accuracy on the target set.
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_res_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_res_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_report: Option<TrainReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    pub iteration: usize,
    pub results: Vec<AlgorithmResult>,
    /// Set when the iteration failed; its results are then excluded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub label: String,
    pub algorithm: AlgorithmName,
    pub completed: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_res_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_res_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub summaries: Vec<AlgorithmSummary>,
    pub iterations: Vec<IterationResult>,
    pub failed_iterations: Vec<usize>,
}

impl ExperimentReport {
    /// Builds summaries from per-iteration results.
    pub fn aggregate(config: ExperimentConfig, mut iterations: Vec<IterationResult>) -> Self {
        iterations.sort_by_key(|r| r.iteration);
        let failed_iterations = iterations.iter().filter(|r| r.error.is_some()).map(|r| r.iteration).collect();
        let summaries = config
            .algorithms
            .iter()
            .map(|spec| {
                let label = spec.label();
                let done: Vec<&AlgorithmResult> = iterations
                    .iter()
                    .filter(|r| r.error.is_none())
                    .flat_map(|r| r.results.iter().filter(|a| a.label == label))
                    .collect();
                let acc: Vec<f64> = done.iter().map(|a| a.accuracy).collect();
                let hi: Vec<f64> = done.iter().filter_map(|a| a.high_res_accuracy).collect();
                let secs: Vec<f64> = done.iter().filter_map(|a| a.seconds).collect();
                let stats = mean_std(&acc);
                let hi_stats = mean_std(&hi);
                AlgorithmSummary {
                    label: label.to_string(),
                    algorithm: spec.name,
                    completed: done.len(),
                    mean: stats.map(|s| s.0),
                    std: stats.map(|s| s.1),
                    high_res_mean: hi_stats.map(|s| s.0),
                    high_res_std: hi_stats.map(|s| s.1),
                    seconds: (!secs.is_empty()).then(|| secs.iter().sum()),
                }
            })
            .collect();
        ExperimentReport {
            config,
            summaries,
            iterations,
            failed_iterations,
        }
    }

    /// Copy with every wall-clock measurement removed.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        for it in &mut out.iterations {
            for r in &mut it.results {
                r.seconds = None;
            }
        }
        for s in &mut out.summaries {
            s.seconds = None;
        }
        out
    }

    pub fn summary(&self, label: &str) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.label == label)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Data read from disk once per experiment.
#[derive(Clone, Debug)]
enum Loaded {
    Generated,
    Pair { source: Dataset, target: Dataset },
    Chips { hi: Dataset, lo: Dataset },
}

/// A validated experiment ready to run.
#[derive(Clone, Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    algorithms: Vec<ResolvedAlgorithm>,
    loaded: Loaded,
}

/// Keeps samples whose class is in `keep`; `keep[i]` becomes class `i` of
/// `class_names`.
fn relabel(d: &Dataset, keep: &[String], class_names: Vec<String>, domain: Domain) -> Result<Dataset> {
    for name in keep {
        if !d.class_names().contains(name) {
            return Err(Error::Config(format!("class `{name}` does not occur in the data")));
        }
    }
    let index: HashMap<&str, usize> = keep.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let samples: Vec<Sample> = d
        .samples()
        .iter()
        .filter_map(|s| {
            let l = index.get(d.class_names()[s.label?].as_str())?;
            Some(Sample {
                label: Some(*l),
                domain,
                ..s.clone()
            })
        })
        .collect();
    Dataset::new(samples, d.feature_names().map(<[String]>::to_vec), class_names, d.dimension())
}

/// Re-indexes target labels to the source class with the same name.
fn by_name(t: &Dataset, names: &[String]) -> Result<Dataset> {
    let samples = t
        .samples()
        .iter()
        .map(|s| {
            let label = match s.label {
                Some(l) => {
                    let name = &t.class_names()[l];
                    let pos = names
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| Error::Config(format!("target class `{name}` is not a source class")))?;
                    Some(pos)
                }
                None => None,
            };
            Ok(Sample {
                label,
                domain: Domain::Target,
                ..s.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, t.feature_names().map(<[String]>::to_vec), names.to_vec(), t.dimension())
}

/// High-quality and degraded feature sets for the same chips (same ids).
pub fn chip_features(chips: &[ImageChip], labels: &[usize], class_names: Vec<String>, side: usize, grayscale: bool) -> Result<(Dataset, Dataset)> {
    let mut hi = Vec::with_capacity(chips.len());
    let mut lo = Vec::with_capacity(chips.len());
    for (i, (chip, &label)) in chips.iter().zip(labels).enumerate() {
        let chip = if grayscale && chip.channels() == 3 {
            imageprep::to_grayscale(chip)?
        } else {
            chip.clone()
        };
        let id = format!("chip{i}");
        hi.push(Sample {
            id: id.clone(),
            features: imageprep::flatten(&imageprep::to_square(&chip, side)?),
            label: Some(label),
            domain: Domain::Source,
        });
        lo.push(Sample {
            id,
            features: imageprep::flatten(&imageprep::degrade(&chip, side, side)?),
            label: Some(label),
            domain: Domain::Target,
        });
    }
    let d = hi.first().map_or(0, |s| s.features.len());
    Ok((
        Dataset::new(hi, None, class_names.clone(), d)?,
        Dataset::new(lo, None, class_names, d)?,
    ))
}

fn load_annotated_chips(path: &Path, side: usize, grayscale: bool) -> Result<(Dataset, Dataset)> {
    let annotations = dataset::load_annotations(path)?;
    let mut images: HashMap<PathBuf, ImageChip> = HashMap::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut chips = Vec::with_capacity(annotations.len());
    let mut labels = Vec::with_capacity(annotations.len());
    for a in &annotations {
        if !images.contains_key(&a.image_path) {
            images.insert(a.image_path.clone(), imageprep::load_image(&a.image_path)?);
        }
        chips.push(imageprep::crop_chip(&images[&a.image_path], &a.bbox)?);
        let label = match class_names.iter().position(|c| *c == a.class) {
            Some(l) => l,
            None => {
                class_names.push(a.class.clone());
                class_names.len() - 1
            }
        };
        labels.push(label);
    }
    chip_features(&chips, &labels, class_names, side, grayscale)
}

fn load_pair(spec: &DatasetSpec) -> Result<(Dataset, Dataset)> {
    let DatasetSpec::Tabular {
        source,
        target,
        label_column,
        source_classes,
        target_classes,
        align,
        zscore,
    } = spec
    else {
        unreachable!("only tabular specs are loaded from disk")
    };
    let s = dataset::load_tabular(source, label_column, Domain::Source)?;
    let t = dataset::load_tabular(target.as_ref().unwrap_or(source), label_column, Domain::Target)?;
    let (s, t) = match (source_classes, target_classes) {
        (Some(sc), Some(tc)) => (
            relabel(&s, sc, sc.clone(), Domain::Source)?,
            relabel(&t, tc, sc.clone(), Domain::Target)?,
        ),
        _ => {
            let names = s.class_names().to_vec();
            let t = by_name(&t, &names)?;
            (s, t)
        }
    };
    let (s, t) = if *align { dataset::align_feature_spaces(&s, &t)? } else { (s, t) };
    if s.dimension() != t.dimension() {
        return Err(Error::DimensionMismatch {
            expected: s.dimension(),
            found: t.dimension(),
        });
    }
    Ok(if *zscore { (s.zscore(), t.zscore()) } else { (s, t) })
}

fn fraction_split(d: &Dataset, fraction: f64, stratified: bool, seed: u64) -> Result<(Dataset, Dataset)> {
    if fraction == 0.0 {
        return Ok((d.clone(), d.select(&[])));
    }
    let spec = SplitSpec {
        test_fraction: fraction,
        val_fraction_of_train: 0.0,
        seed,
        stratified,
    };
    let (train, _, held) = dataset::split(d, &spec)?;
    Ok((train, held))
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let algorithms = config.resolve()?;
        let loaded = match &config.datasets {
            spec @ DatasetSpec::Tabular { .. } => {
                let (source, target) = load_pair(spec)?;
                Loaded::Pair { source, target }
            }
            DatasetSpec::AnnotatedChips {
                annotations,
                side,
                grayscale,
            } => {
                let (hi, lo) = load_annotated_chips(annotations, *side, *grayscale)?;
                Loaded::Chips { hi, lo }
            }
            _ => Loaded::Generated,
        };
        Ok(Experiment {
            config,
            algorithms,
            loaded,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn algorithms(&self) -> &[ResolvedAlgorithm] {
        &self.algorithms
    }

    /// Source and target data for `iteration` before balancing; image data
    /// comes back as (high-quality, degraded) copies of the same chips.
    pub fn raw_data(&self, iteration: usize) -> Result<(Dataset, Dataset)> {
        let seed = child_seed(derive_seed(self.config.master_seed, iteration as u64, "data"), "generate");
        match (&self.loaded, &self.config.datasets) {
            (Loaded::Pair { source, target }, _) | (Loaded::Chips { hi: source, lo: target }, _) => {
                Ok((source.clone(), target.clone()))
            }
            (Loaded::Generated, DatasetSpec::CovariateShift { n_per_class, d, shift }) => {
                synth_covariate_shift(*n_per_class, *d, shift, seed)
            }
            (Loaded::Generated, DatasetSpec::CrossClass { n_per_class, d, strength }) => {
                synth_cross_class(*n_per_class, *d, *strength, seed)
            }
            (Loaded::Generated, DatasetSpec::SyntheticChips { n_per_class, classes, side }) => {
                let (chips, labels) = synth_chips(*n_per_class, *classes, seed)?;
                let names = (0..*classes).map(|c| format!("pattern{c}")).collect();
                chip_features(&chips, &labels, names, *side, false)
            }
            _ => unreachable!("file-backed datasets are loaded in Experiment::new"),
        }
    }

    /// Balancing, splitting and target construction for one iteration.
    pub fn prepare_iteration(&self, iteration: usize) -> Result<IterationData> {
        let cfg = &self.config;
        let seed = derive_seed(cfg.master_seed, iteration as u64, "data");
        let (mut source, mut target) = self.raw_data(iteration)?;
        let stratified = cfg.split.stratified;
        match cfg.protocol {
            Protocol::DegradedTransfer => {
                if let Some(n) = cfg.balance_per_class {
                    source = dataset::balance_classes(&source, n, child_seed(seed, "balance"))?;
                }
                let spec = SplitSpec {
                    seed: child_seed(seed, "split"),
                    ..cfg.split
                };
                let (train, validation, test) = dataset::split(&source, &spec)?;
                let degraded = target.select_ids(test.ids())?.with_domain(Domain::Target);
                Ok(IterationData {
                    train,
                    validation,
                    target: degraded,
                    source_test: Some(test),
                })
            }
            Protocol::CrossClass | Protocol::CrossDomain => {
                if let Some(n) = cfg.balance_per_class {
                    source = dataset::balance_classes(&source, n, child_seed(seed, "balance_source"))?;
                    target = dataset::balance_classes(&target, n, child_seed(seed, "balance_target"))?;
                }
                let (train, validation) = fraction_split(
                    &source,
                    cfg.split.val_fraction_of_train,
                    stratified,
                    child_seed(seed, "split"),
                )?;
                Ok(IterationData {
                    train,
                    validation,
                    target: target.with_domain(Domain::Target),
                    source_test: None,
                })
            }
        }
    }

    /// Runs every algorithm on one iteration; any failure fails the iteration.
    pub fn run_iteration(&self, iteration: usize) -> IterationResult {
        let attempt = || -> Result<Vec<AlgorithmResult>> {
            let data = self.prepare_iteration(iteration).map_err(|e| Error::Config(format!("data preparation: {e}")))?;
            let mut evals = vec![&data.target];
            if let Some(hi) = &data.source_test {
                evals.push(hi);
            }
            self.algorithms
                .iter()
                .map(|alg| {
                    let seed = derive_seed(self.config.master_seed, iteration as u64, &alg.label);
                    let start = Instant::now();
                    let (accs, report) = evaluate(&alg.algorithm, &data, &evals, seed)
                        .map_err(|e| Error::Config(format!("algorithm `{}`: {e}", alg.label)))?;
                    let seconds = self.config.record_timing.then(|| start.elapsed().as_secs_f64());
                    let degraded = data.source_test.is_some();
                    Ok(AlgorithmResult {
                        label: alg.label.clone(),
                        accuracy: accs[0],
                        high_res_accuracy: degraded.then(|| accs[1]),
                        low_res_accuracy: degraded.then(|| accs[0]),
                        train_report: report,
                        seconds,
                    })
                })
                .collect()
        };
        match attempt() {
            Ok(results) => IterationResult {
                iteration,
                results,
                error: None,
            },
            Err(e) => IterationResult {
                iteration,
                results: Vec::new(),
                error: Some(match e {
                    Error::Config(m) => format!("iteration {iteration}: {m}"),
                    other => format!("iteration {iteration}: {other}"),
                }),
            },
        }
    }

    pub fn run(&self) -> ExperimentReport {
        let n = self.config.iterations;
        let results: Vec<IterationResult> = if self.config.parallel {
            (0..n).into_par_iter().map(|i| self.run_iteration(i)).collect()
        } else {
            (0..n).map(|i| self.run_iteration(i)).collect()
        };
        ExperimentReport::aggregate(self.config.clone(), results)
    }
}

/// Validates `config`, loads its data and runs every iteration. Config
/// problems are errors; failures inside an iteration are recorded in the
/// report instead.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(Experiment::new(config.clone())?.run())
}

fn labels_of(d: &Dataset) -> Result<Vec<usize>> {
    d.labels()
        .ok_or_else(|| Error::InvalidArgument("evaluation set has unlabeled samples".into()))
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let na = a.nrows();
    DMatrix::from_fn(na + b.nrows(), a.ncols(), |i, j| if i < na { a[(i, j)] } else { b[(i - na, j)] })
}

enum SourceOnly {
    Knn(KnnModel),
    Svm(SvmClassifier),
    Mlp(MlpModel),
}

fn fit_source_only(algorithm: &Algorithm, inputs: &TrainingInputs, seed: u64) -> Result<(SourceOnly, Option<TrainReport>)> {
    let x = inputs.labeled.features();
    let y = labels_of(&inputs.labeled)?;
    let classes = inputs.labeled.class_count();
    let val = match &inputs.validation {
        Some(v) => Some((v.features(), labels_of(v)?)),
        None => None,
    };
    Ok(match algorithm {
        Algorithm::Knn { k } => (SourceOnly::Knn(KnnModel::new(x, y, *k)?), None),
        Algorithm::Svm(p) => (SourceOnly::Svm(SvmClassifier::fit(&x, &y, classes, p)?), None),
        Algorithm::Mlp(c) => {
            let cfg = MlpConfig { seed, ..c.clone() };
            let (m, r) = mlp_train(&x, &y, classes, &cfg, val.as_ref().map(|(a, b)| (a, b.as_slice())))?;
            (SourceOnly::Mlp(m), Some(r))
        }
        _ => unreachable!("transductive algorithms are fitted per evaluation set"),
    })
}

fn predict_source_only(model: &SourceOnly, x: &DMatrix<f64>) -> Result<Vec<usize>> {
    match model {
        SourceOnly::Knn(m) => knn_predict(m, x),
        SourceOnly::Svm(m) => m.predict(x),
        SourceOnly::Mlp(m) => Ok(mlp_predict(m, x)?.0),
    }
}

/// Fits a transductive algorithm against `eval` and predicts its rows.
fn fit_transductive(
    algorithm: &Algorithm,
    inputs: &TrainingInputs,
    eval: &Dataset,
    seed: u64,
) -> Result<(Vec<usize>, Option<TrainReport>)> {
    let unlabeled = inputs.unlabeled.as_ref().expect("transductive inputs carry target rows");
    let xs = inputs.labeled.features();
    let ys = labels_of(&inputs.labeled)?;
    let xt = unlabeled.features();
    let classes = inputs.labeled.class_count();
    let exemplars = |coords: &DMatrix<f64>| -> Result<KnnModel> {
        let truth = labels_of(eval)?;
        let rows: Vec<usize> = (0..coords.nrows()).collect();
        one_known_rule(coords, &rows, &truth, classes, child_seed(seed, "exemplars"))
    };
    match algorithm {
        Algorithm::DaMlp(c) => {
            let x = stack(&xs, &xt);
            let domains: Vec<usize> = (0..x.nrows()).map(|i| usize::from(i >= xs.nrows())).collect();
            let labels: Vec<Option<usize>> = (0..x.nrows()).map(|i| ys.get(i).copied()).collect();
            let cfg = DaConfig {
                mlp: MlpConfig { seed, ..c.mlp.clone() },
                lambda_d: c.lambda_d,
            };
            let val = match &inputs.validation {
                Some(v) => Some((v.features(), labels_of(v)?)),
                None => None,
            };
            let (m, r) = da_mlp_train(&x, &domains, &labels, classes, &cfg, val.as_ref().map(|(a, b)| (a, b.as_slice())))?;
            Ok((mlp_predict(&m.base, &xt)?.0, Some(r)))
        }
        Algorithm::DmKnn { params, .. } | Algorithm::Dm1Known(params) => {
            let (emb, index) = diffusion::embed_joint(&inputs.labeled, unlabeled, params)?;
            let source: Vec<usize> = index.source_rows().collect();
            let target: Vec<usize> = index.target_rows().collect();
            let ct = emb.rows(&target);
            let model = match algorithm {
                Algorithm::DmKnn { k, .. } => KnnModel::new(emb.rows(&source), ys, *k)?,
                _ => exemplars(&ct)?,
            };
            Ok((knn_predict(&model, &ct)?, None))
        }
        Algorithm::TrdmKnn { params, .. } | Algorithm::Trdm1Known(params) => {
            let fit = transfer::trdm_fit(&xs, &xt, params, seed)?;
            let ct = fit.transform(&xt)?;
            let model = match algorithm {
                Algorithm::TrdmKnn { k, .. } => KnnModel::new(fit.transform(&xs)?, ys, *k)?,
                _ => exemplars(&ct)?,
            };
            Ok((knn_predict(&model, &ct)?, None))
        }
        _ => unreachable!("source-only algorithms are fitted once"),
    }
}

/// Accuracy on each evaluation set and the training report of the first fit.
pub fn evaluate(
    algorithm: &Algorithm,
    data: &IterationData,
    evals: &[&Dataset],
    seed: u64,
) -> Result<(Vec<f64>, Option<TrainReport>)> {
    let mut accs = Vec::with_capacity(evals.len());
    if algorithm.is_transductive() {
        let mut first = None;
        for (i, eval) in evals.iter().enumerate() {
            let inputs = training_inputs(algorithm, data, eval);
            let (pred, report) = fit_transductive(algorithm, &inputs, eval, seed)?;
            accs.push(accuracy(&pred, &labels_of(eval)?)?);
            if i == 0 {
                first = report;
            }
        }
        Ok((accs, first))
    } else {
        let inputs = training_inputs(algorithm, data, evals[0]);
        let (model, report) = fit_source_only(algorithm, &inputs, seed)?;
        for eval in evals {
            let pred = predict_source_only(&model, &eval.features())?;
            accs.push(accuracy(&pred, &labels_of(eval)?)?);
        }
        Ok((accs, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 1, 1]).unwrap(), 0.75);
        assert_eq!(accuracy(&[2, 2], &[2, 2]).unwrap(), 1.0);
        let truth = [0, 1, 1, 0, 1];
        let pred = [0, 0, 1, 1, 1];
        let flipped: Vec<usize> = pred.iter().map(|p| 1 - p).collect();
        let a = accuracy(&pred, &truth).unwrap();
        assert!((accuracy(&flipped, &truth).unwrap() - (1.0 - a)).abs() < 1e-15);
        assert!(accuracy(&[0], &[0, 1]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn unbiased_std() {
        let (m, s) = mean_std(&[0.0, 1.0]).unwrap();
        assert_eq!(m, 0.5);
        assert!((s - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[0.3]).unwrap(), (0.3, 0.0));
        assert!(mean_std(&[]).is_none());
    }

    fn shift_config() -> ExperimentConfig {
        ExperimentConfig::new(
            Protocol::CrossDomain,
            DatasetSpec::CovariateShift {
                n_per_class: 20,
                d: 2,
                shift: vec![0.0, 0.0],
            },
            vec![AlgorithmSpec::new(AlgorithmName::Knn)],
        )
    }

    #[test]
    fn config_validation() {
        let mut c = shift_config();
        assert!(c.resolve().is_ok());
        c.iterations = 0;
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
        let mut c = shift_config();
        c.protocol = Protocol::DegradedTransfer;
        assert!(c.resolve().is_err());
        let mut c = shift_config();
        c.algorithms.push(AlgorithmSpec::new(AlgorithmName::Knn));
        assert!(c.resolve().is_err());
        let mut c = shift_config();
        c.algorithms = vec![AlgorithmSpec::new(AlgorithmName::Mlp).with_params(json!({"seed": 3}))];
        assert!(c.resolve().is_err());
        let mut c = shift_config();
        c.stopping_epochs.insert("nope".into(), 3);
        assert!(c.resolve().is_err());
        assert!(ExperimentConfig::from_json(r#"{"protocol": "cross_domain"}"#).is_err());
    }

    #[test]
    fn epochs_precedence() {
        let mut c = shift_config();
        c.algorithms = vec![
            AlgorithmSpec::new(AlgorithmName::Mlp),
            AlgorithmSpec::new(AlgorithmName::Mlp).with_label("m2").with_params(json!({"epochs": 7})),
            AlgorithmSpec::new(AlgorithmName::DaMlp).with_params(json!({"epochs": 7})),
        ];
        c.stopping_epochs.insert("da_mlp".into(), 2);
        let r = c.resolve().unwrap();
        let epochs: Vec<usize> = r
            .iter()
            .map(|a| match &a.algorithm {
                Algorithm::Mlp(m) => m.epochs,
                Algorithm::DaMlp(d) => d.mlp.epochs,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(epochs, vec![VECTOR_EPOCHS, 7, 2]);
    }

    #[test]
    fn json_config_parses() {
        let text = r#"{
            "protocol": "cross_class",
            "datasets": {"kind": "cross_class", "n_per_class": 10, "d": 2, "strength": -1.0},
            "algorithms": [{"name": "knn", "params": {"k": 3}}, {"name": "trdm_1known", "params": {"lambda": 0.5}}],
            "iterations": 2,
            "master_seed": 4,
            "split": {"test_fraction": 0.3, "val_fraction_of_train": 0.3},
            "balance_per_class": null,
            "output_dir": "out"
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r[0].algorithm, Algorithm::Knn { k: 3 });
        assert!(matches!(&r[1].algorithm, Algorithm::Trdm1Known(p) if p.lambda == 0.5));
    }
}
