//! Labeled sample collections: tabular ingestion, cross-domain feature
//! alignment, class balancing, and seeded train/validation/test splits.
//!
//! Class indices are assigned by first appearance in file order. Feature
//! alignment keeps the lexicographically sorted intersection of feature
//! names so both domains end up with identical column order.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageprep::BoundingBox;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub features: Vec<f64>,
    pub label: Option<usize>,
    pub domain: Domain,
}

/// An ordered collection of samples sharing one feature dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_names: Option<Vec<String>>,
    class_names: Vec<String>,
    dimension: usize,
}

impl Dataset {
    /// Builds a dataset and checks every invariant: shared dimension,
    /// unique feature names of the right length, labels in range.
    pub fn new(
        samples: Vec<Sample>,
        feature_names: Option<Vec<String>>,
        class_names: Vec<String>,
        dimension: usize,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if let Some(names) = &feature_names {
            if names.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: names.len(),
                });
            }
            let unique: BTreeSet<&String> = names.iter().collect();
            if unique.len() != names.len() {
                return Err(Error::InvalidArgument("duplicate feature names".into()));
            }
        }
        let unique: BTreeSet<&String> = class_names.iter().collect();
        if unique.len() != class_names.len() {
            return Err(Error::InvalidArgument("duplicate class names".into()));
        }
        for s in &samples {
            if s.features.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: s.features.len(),
                });
            }
            if let Some(l) = s.label {
                if l >= class_names.len() {
                    return Err(Error::InvalidArgument(format!(
                        "sample `{}` has label {l} but only {} classes",
                        s.id,
                        class_names.len()
                    )));
                }
            }
        }
        Ok(Dataset {
            samples,
            feature_names,
            class_names,
            dimension,
        })
    }

    /// Dataset from a feature matrix and labels, all samples in one domain.
    pub fn from_matrix(
        x: &DMatrix<f64>,
        labels: &[usize],
        class_names: Vec<String>,
        domain: Domain,
        id_prefix: &str,
    ) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: labels.len(),
            });
        }
        let samples = (0..x.nrows())
            .map(|i| Sample {
                id: format!("{id_prefix}{i}"),
                features: x.row(i).iter().copied().collect(),
                label: Some(labels[i]),
                domain,
            })
            .collect();
        Dataset::new(samples, None, class_names, x.ncols())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    /// `n x d` feature matrix in sample order.
    pub fn features(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.dimension, |i, j| self.samples[i].features[j])
    }

    /// Labels of every sample, or `None` if any sample is unlabeled.
    pub fn labels(&self) -> Option<Vec<usize>> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Sample counts per class index; unlabeled samples are not counted.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for s in &self.samples {
            if let Some(l) = s.label {
                counts[l] += 1;
            }
        }
        counts
    }

    pub fn count_domain(&self, domain: Domain) -> usize {
        self.samples.iter().filter(|s| s.domain == domain).count()
    }

    /// Subset by sample index, preserving the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            dimension: self.dimension,
        }
    }

    /// Subset by sample id, in the order of `ids`.
    pub fn select_ids<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Dataset> {
        let index: HashMap<&str, usize> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), i))
            .collect();
        let picked = ids
            .into_iter()
            .map(|id| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown sample id `{id}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select(&picked))
    }

    /// Copy with every sample re-tagged to `domain`.
    pub fn with_domain(&self, domain: Domain) -> Dataset {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.domain = domain;
        }
        out
    }

    /// Copy with all labels removed (unlabeled target features).
    pub fn without_labels(&self) -> Dataset {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.label = None;
        }
        out
    }

    /// Concatenates two datasets with identical dimension and class names.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: other.dimension,
            });
        }
        if self.class_names != other.class_names {
            return Err(Error::InvalidArgument(
                "cannot concatenate datasets with different class names".into(),
            ));
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Dataset::new(
            samples,
            self.feature_names.clone(),
            self.class_names.clone(),
            self.dimension,
        )
    }

    /// Per-feature z-score using this dataset's own mean and (population)
    /// standard deviation. Constant features are only centered.
    pub fn zscore(&self) -> Dataset {
        let n = self.len().max(1) as f64;
        let mut mean = vec![0.0; self.dimension];
        for s in &self.samples {
            for (m, v) in mean.iter_mut().zip(&s.features) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; self.dimension];
        for s in &self.samples {
            for ((acc, v), m) in var.iter_mut().zip(&s.features).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let scale: Vec<f64> = var
            .iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let mut out = self.clone();
        for s in &mut out.samples {
            for ((v, m), sd) in s.features.iter_mut().zip(&mean).zip(&scale) {
                *v = (*v - m) / sd;
            }
        }
        out
    }

    /// Writes the dataset in the tabular CSV format read by
    /// [`load_tabular`]: feature columns, then `label_column`.
    pub fn write_csv(&self, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |e: csv::Error| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header: Vec<String> = match &self.feature_names {
            Some(names) => names.clone(),
            None => (0..self.dimension).map(|j| format!("f{j}")).collect(),
        };
        header.push(label_column.to_string());
        w.write_record(&header).map_err(csv_err)?;
        for s in &self.samples {
            let mut rec: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
            rec.push(
                s.label
                    .map(|l| self.class_names[l].clone())
                    .unwrap_or_default(),
            );
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads a headered CSV. One sample per data row with id `row<k>`
/// (zero-based data-row index); an empty label cell yields an unlabeled
/// sample.
pub fn load_tabular(path: impl AsRef<Path>, label_column: &str, domain: Domain) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::UnknownLabelColumn(label_column.to_string()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::InvalidArgument("no feature columns".into()));
    }

    let mut class_names: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                found: record.len(),
                expected: header.len(),
            });
        }
        let mut features = Vec::with_capacity(feature_names.len());
        let mut label = None;
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if j == label_idx {
                if !cell.is_empty() {
                    let next = class_names.len();
                    let idx = *class_index.entry(cell.to_string()).or_insert_with(|| {
                        class_names.push(cell.to_string());
                        next
                    });
                    label = Some(idx);
                }
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row,
                column: header[j].clone(),
                value: cell.to_string(),
            })?;
            features.push(v);
        }
        samples.push(Sample {
            id: format!("row{row}"),
            features,
            label,
            domain,
        });
    }
    let d = feature_names.len();
    Dataset::new(samples, Some(feature_names), class_names, d)
}

/// Restricts both datasets to their shared feature names, columns in
/// lexicographic order.
pub fn align_feature_spaces(a: &Dataset, b: &Dataset) -> Result<(Dataset, Dataset)> {
    let names_a = a.feature_names().ok_or(Error::MissingFeatureNames)?;
    let names_b = b.feature_names().ok_or(Error::MissingFeatureNames)?;
    let set_b: BTreeSet<&str> = names_b.iter().map(String::as_str).collect();
    let shared: Vec<String> = names_a
        .iter()
        .map(String::as_str)
        .filter(|n| set_b.contains(n))
        .collect::<BTreeSet<&str>>()
        .into_iter()
        .map(str::to_string)
        .collect();
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok((restrict(a, &shared)?, restrict(b, &shared)?))
}

fn restrict(d: &Dataset, names: &[String]) -> Result<Dataset> {
    let pos: HashMap<&str, usize> = d
        .feature_names()
        .expect("checked by caller")
        .iter()
        .enumerate()
        .map(|(j, n)| (n.as_str(), j))
        .collect();
    let cols: Vec<usize> = names.iter().map(|n| pos[n.as_str()]).collect();
    let samples = d
        .samples
        .iter()
        .map(|s| Sample {
            id: s.id.clone(),
            features: cols.iter().map(|&j| s.features[j]).collect(),
            label: s.label,
            domain: s.domain,
        })
        .collect();
    Dataset::new(
        samples,
        Some(names.to_vec()),
        d.class_names.clone(),
        names.len(),
    )
}

/// Draws exactly `per_class` samples of every class without replacement.
/// Unlabeled samples are dropped; output keeps the input order.
pub fn balance_classes(d: &Dataset, per_class: usize, seed: u64) -> Result<Dataset> {
    if per_class == 0 {
        return Err(Error::InvalidArgument("per_class must be positive".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d.class_count()];
    for (i, s) in d.samples.iter().enumerate() {
        if let Some(l) = s.label {
            by_class[l].push(i);
        }
    }
    let mut rng = rng::seeded(seed);
    let mut keep = Vec::with_capacity(per_class * by_class.len());
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < per_class {
            return Err(Error::InsufficientSamples {
                class: d.class_names[class].clone(),
                available: members.len(),
                requested: per_class,
            });
        }
        let picked = rand::seq::index::sample(&mut rng, members.len(), per_class);
        keep.extend(picked.into_iter().map(|k| members[k]));
    }
    keep.sort_unstable();
    Ok(d.select(&keep))
}

/// Partition fractions and seed for [`split`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    #[serde(default)]
    pub val_fraction_of_train: f64,
    #[serde(default)]
    pub seed: u64,
    /// Split each class separately; off by default.
    #[serde(default)]
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, val_fraction_of_train: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            test_fraction,
            val_fraction_of_train,
            seed,
            stratified: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn stratified(mut self, on: bool) -> Self {
        self.stratified = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidSplit(format!(
                "test_fraction {} not in (0,1)",
                self.test_fraction
            )));
        }
        if !(self.val_fraction_of_train >= 0.0 && self.val_fraction_of_train < 1.0) {
            return Err(Error::InvalidSplit(format!(
                "val_fraction_of_train {} not in [0,1)",
                self.val_fraction_of_train
            )));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes for `n` samples.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let test = ((self.test_fraction * n as f64).round() as usize).min(n);
        let val = ((self.val_fraction_of_train * (n - test) as f64).round() as usize).min(n - test);
        (n - test - val, val, test)
    }
}

/// Seeded uniform split into disjoint train/validation/test partitions
/// covering the input. Each partition keeps the input order.
pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    if d.is_empty() {
        return Err(Error::InvalidSplit("empty dataset".into()));
    }
    let mut rng = rng::seeded(spec.seed);
    let groups: Vec<Vec<usize>> = if spec.stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d.class_count() + 1];
        for (i, s) in d.samples.iter().enumerate() {
            by_class[s.label.unwrap_or(d.class_count())].push(i);
        }
        by_class.into_iter().filter(|g| !g.is_empty()).collect()
    } else {
        vec![(0..d.len()).collect()]
    };
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for mut group in groups {
        group.shuffle(&mut rng);
        let (_, n_val, n_test) = spec.sizes(group.len());
        test.extend_from_slice(&group[..n_test]);
        val.extend_from_slice(&group[n_test..n_test + n_val]);
        train.extend_from_slice(&group[n_test + n_val..]);
    }
    if test.is_empty() {
        return Err(Error::EmptyPartition("test"));
    }
    if spec.val_fraction_of_train > 0.0 && val.is_empty() {
        return Err(Error::EmptyPartition("validation"));
    }
    if train.is_empty() {
        return Err(Error::EmptyPartition("train"));
    }
    for part in [&mut train, &mut val, &mut test] {
        part.sort_unstable();
    }
    Ok((d.select(&train), d.select(&val), d.select(&test)))
}

/// One row of a chip annotation file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChipAnnotation {
    pub image_path: PathBuf,
    pub bbox: BoundingBox,
    pub class: String,
}

/// Reads `image_path,xmin,ymin,xmax,ymax,class` rows. Relative image paths
/// are resolved against the annotation file's directory.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<ChipAnnotation>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let expected = ["image_path", "xmin", "ymin", "xmax", "ymax", "class"];
    if header != expected {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != expected.len() {
            return Err(Error::RaggedRow {
                row,
                found: record.len(),
                expected: expected.len(),
            });
        }
        let coord = |j: usize| -> Result<u32> {
            let cell = record[j].trim();
            cell.parse().map_err(|_| Error::NonNumeric {
                row,
                column: expected[j].to_string(),
                value: cell.to_string(),
            })
        };
        let bbox = BoundingBox::new(coord(1)?, coord(2)?, coord(3)?, coord(4)?)?;
        let image_path = PathBuf::from(record[0].trim());
        let image_path = if image_path.is_relative() {
            base.join(image_path)
        } else {
            image_path
        };
        out.push(ChipAnnotation {
            image_path,
            bbox,
            class: record[5].trim().to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    fn toy(counts: &[usize]) -> Dataset {
        let mut samples = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for k in 0..n {
                samples.push(Sample {
                    id: format!("c{c}_{k}"),
                    features: vec![k as f64, c as f64],
                    label: Some(c),
                    domain: Domain::Source,
                });
            }
        }
        let names = (0..counts.len()).map(|c| format!("class{c}")).collect();
        Dataset::new(samples, None, names, 2).unwrap()
    }

    #[test]
    fn loads_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "g1,g2,cls\n1,2,pos\n3,4,neg\n5,6,pos\n");
        let d = load_tabular(&p, "cls", Domain::Source).unwrap();
        assert_eq!(d.dimension(), 2);
        assert_eq!(d.len(), 3);
        assert_eq!(d.feature_names().unwrap(), &["g1", "g2"]);
        assert_eq!(d.class_names(), &["pos", "neg"]);
        assert_eq!(d.labels().unwrap(), vec![0, 1, 0]);
    }

    #[test]
    fn label_column_in_the_middle() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "g1,cls,g2\n1,x,2\n");
        let d = load_tabular(&p, "cls", Domain::Target).unwrap();
        assert_eq!(d.feature_names().unwrap(), &["g1", "g2"]);
        assert_eq!(d.samples()[0].features, vec![1.0, 2.0]);
        assert_eq!(d.samples()[0].domain, Domain::Target);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = write(&dir, "r.csv", "a,b,cls\n1,2,x\n1,y\n");
        assert!(matches!(
            load_tabular(&ragged, "cls", Domain::Source),
            Err(Error::RaggedRow { row: 1, found: 2, expected: 3 })
        ));
        let bad = write(&dir, "b.csv", "a,cls\nfoo,x\n");
        assert!(matches!(
            load_tabular(&bad, "cls", Domain::Source),
            Err(Error::NonNumeric { .. })
        ));
        let ok = write(&dir, "c.csv", "a,cls\n1,x\n");
        assert!(matches!(
            load_tabular(&ok, "label", Domain::Source),
            Err(Error::UnknownLabelColumn(_))
        ));
        assert!(matches!(
            load_tabular(dir.path().join("missing.csv"), "cls", Domain::Source),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "g1,g2,cls\n0.1,2e-7,pos\n3,-4.25,neg\n5,6,\n");
        let d = load_tabular(&p, "cls", Domain::Source).unwrap();
        let q = dir.path().join("b.csv");
        d.write_csv(&q, "cls").unwrap();
        assert_eq!(load_tabular(&q, "cls", Domain::Source).unwrap(), d);
    }

    fn named(names: &[&str]) -> Dataset {
        let samples = vec![Sample {
            id: "s".into(),
            features: (0..names.len()).map(|j| j as f64).collect(),
            label: None,
            domain: Domain::Source,
        }];
        Dataset::new(
            samples,
            Some(names.iter().map(|s| s.to_string()).collect()),
            vec![],
            names.len(),
        )
        .unwrap()
    }

    #[test]
    fn alignment_intersects_and_sorts() {
        let a = named(&["c", "a", "b"]);
        let b = named(&["d", "c", "b"]);
        let (a2, b2) = align_feature_spaces(&a, &b).unwrap();
        assert_eq!(a2.feature_names().unwrap(), &["b", "c"]);
        assert_eq!(b2.feature_names().unwrap(), &["b", "c"]);
        assert_eq!(a2.samples()[0].features, vec![2.0, 0.0]);
        assert_eq!(b2.samples()[0].features, vec![2.0, 1.0]);
        assert!(matches!(
            align_feature_spaces(&named(&["a"]), &named(&["b"])),
            Err(Error::EmptyIntersection)
        ));
        let unnamed = toy(&[1]);
        assert!(matches!(
            align_feature_spaces(&a, &unnamed),
            Err(Error::MissingFeatureNames)
        ));
    }

    #[test]
    fn balance_counts_and_errors() {
        let d = toy(&[1500, 2000]);
        let b = balance_classes(&d, 1000, 3).unwrap();
        assert_eq!(b.class_counts(), vec![1000, 1000]);
        assert_eq!(b, balance_classes(&d, 1000, 3).unwrap());
        assert_ne!(b, balance_classes(&d, 1000, 4).unwrap());

        let five = toy(&[5]);
        let all = balance_classes(&five, 5, 9).unwrap();
        let mut ids: Vec<&str> = all.ids().collect();
        ids.sort();
        let mut orig: Vec<&str> = five.ids().collect();
        orig.sort();
        assert_eq!(ids, orig);

        assert!(matches!(
            balance_classes(&toy(&[3]), 5, 0),
            Err(Error::InsufficientSamples { available: 3, requested: 5, .. })
        ));
    }

    #[test]
    fn split_sizes() {
        let d = toy(&[100]);
        let spec = SplitSpec::new(0.3, 0.3, 11).unwrap();
        let (tr, va, te) = split(&d, &spec).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (49, 21, 30));
        let (tr2, va2, te2) = split(&d, &spec).unwrap();
        assert_eq!((tr, va, te), (tr2, va2, te2));

        let d10 = toy(&[10]);
        let (tr, va, te) = split(&d10, &SplitSpec::new(0.3, 0.0, 1).unwrap()).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (7, 0, 3));
    }

    #[test]
    fn split_validation() {
        assert!(SplitSpec::new(0.0, 0.1, 0).is_err());
        assert!(SplitSpec::new(1.0, 0.1, 0).is_err());
        assert!(SplitSpec::new(0.5, 1.0, 0).is_err());
        let tiny = toy(&[1]);
        assert!(matches!(
            split(&tiny, &SplitSpec::new(0.3, 0.0, 0).unwrap()),
            Err(Error::EmptyPartition("test"))
        ));
        let two = toy(&[2]);
        assert!(matches!(
            split(&two, &SplitSpec::new(0.5, 0.3, 0).unwrap()),
            Err(Error::EmptyPartition("validation"))
        ));
    }

    #[test]
    fn stratified_split_keeps_class_shares() {
        let d = toy(&[50, 50]);
        let spec = SplitSpec::new(0.2, 0.0, 5).unwrap().stratified(true);
        let (_, _, te) = split(&d, &spec).unwrap();
        assert_eq!(te.class_counts(), vec![10, 10]);
    }

    #[test]
    fn zscore_standardizes() {
        let d = toy(&[4]).zscore();
        let x = d.features();
        let mean: f64 = x.column(0).iter().sum::<f64>() / 4.0;
        let var: f64 = x.column(0).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
        // constant column is centered, not scaled
        assert!(x.column(1).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn annotations_parse() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "ann.csv",
            "image_path,xmin,ymin,xmax,ymax,class\nimg/a.png,1,2,5,6,bus\n",
        );
        let rows = load_annotations(&p).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].class, "bus");
        assert_eq!(rows[0].bbox, BoundingBox::new(1, 2, 5, 6).unwrap());
        assert_eq!(rows[0].image_path, dir.path().join("img/a.png"));
        let bad = write(
            &dir,
            "bad.csv",
            "image_path,xmin,ymin,xmax,ymax,class\na.png,5,2,5,6,bus\n",
        );
        assert!(load_annotations(&bad).is_err());
    }
}
