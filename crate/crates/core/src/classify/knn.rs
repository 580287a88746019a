use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

/// Reference points with class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnModel {
    coords: DMatrix<f64>,
    labels: Vec<usize>,
    k: usize,
}

impl KnnModel {
    pub fn new(coords: DMatrix<f64>, labels: Vec<usize>, k: usize) -> Result<Self> {
        if coords.nrows() == 0 {
            return Err(Error::EmptyReferences);
        }
        if labels.len() != coords.nrows() {
            return Err(Error::DimensionMismatch {
                expected: coords.nrows(),
                found: labels.len(),
            });
        }
        if k == 0 || k > coords.nrows() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} with {} references",
                coords.nrows()
            )));
        }
        Ok(KnnModel { coords, labels, k })
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Majority vote among the `k` nearest references (Euclidean). Equal
/// distances go to the smaller reference index, equal votes to the smaller
/// class index.
pub fn knn_predict(model: &KnnModel, queries: &DMatrix<f64>) -> Result<Vec<usize>> {
    if queries.ncols() != model.coords.ncols() {
        return Err(Error::DimensionMismatch {
            expected: model.coords.ncols(),
            found: queries.ncols(),
        });
    }
    let n_ref = model.coords.nrows();
    let n_classes = model.labels.iter().max().map_or(0, |m| m + 1);
    let mut out = Vec::with_capacity(queries.nrows());
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n_ref);
    for q in 0..queries.nrows() {
        dist.clear();
        for r in 0..n_ref {
            let d: f64 = queries
                .row(q)
                .iter()
                .zip(model.coords.row(r).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dist.push((d, r));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if model.k < n_ref {
            dist.select_nth_unstable_by(model.k - 1, cmp);
        }
        let mut votes = vec![0usize; n_classes];
        for &(_, r) in &dist[..model.k] {
            votes[model.labels[r]] += 1;
        }
        let best = votes
            .iter()
            .enumerate()
            .fold((0, 0), |best, (c, &v)| if v > best.1 { (c, v) } else { best })
            .0;
        out.push(best);
    }
    Ok(out)
}

/// Labels one random target sample per class and returns the 1-NN rule over
/// those exemplars.
///
/// `target_rows` index rows of `coords`; `target_labels[i]` is the true
/// class of `target_rows[i]`.
pub fn one_known_rule(
    coords: &DMatrix<f64>,
    target_rows: &[usize],
    target_labels: &[usize],
    n_classes: usize,
    seed: u64,
) -> Result<KnnModel> {
    if target_rows.len() != target_labels.len() {
        return Err(Error::DimensionMismatch {
            expected: target_rows.len(),
            found: target_labels.len(),
        });
    }
    let mut r = rng::seeded(seed);
    let mut picks = Vec::with_capacity(n_classes);
    for class in 0..n_classes {
        let members: Vec<usize> = target_rows
            .iter()
            .zip(target_labels)
            .filter(|&(_, &l)| l == class)
            .map(|(&row, _)| row)
            .collect();
        if members.is_empty() {
            return Err(Error::NoTargetSamples(class.to_string()));
        }
        picks.push(members[r.random_range(0..members.len())]);
    }
    KnnModel::new(coords.select_rows(&picks), (0..n_classes).collect(), 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_k1() {
        let refs = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 5.0, 5.0, -3.0, 1.0]);
        let m = KnnModel::new(refs.clone(), vec![0, 1, 2], 1).unwrap();
        assert_eq!(knn_predict(&m, &refs).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn majority_and_ties() {
        let refs = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 10.0]);
        let m = KnnModel::new(refs, vec![0, 0, 1, 1], 3).unwrap();
        assert_eq!(knn_predict(&m, &DMatrix::from_row_slice(1, 1, &[1.0])).unwrap(), vec![0]);

        // two references equidistant: smaller index wins
        let refs = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let m = KnnModel::new(refs, vec![1, 0], 1).unwrap();
        assert_eq!(knn_predict(&m, &DMatrix::from_row_slice(1, 1, &[0.0])).unwrap(), vec![1]);

        // split vote: smaller class wins
        let refs = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let m = KnnModel::new(refs, vec![1, 0], 2).unwrap();
        assert_eq!(knn_predict(&m, &DMatrix::from_row_slice(1, 1, &[0.3])).unwrap(), vec![0]);
    }

    #[test]
    fn model_validation() {
        assert!(matches!(
            KnnModel::new(DMatrix::zeros(0, 2), vec![], 1),
            Err(Error::EmptyReferences)
        ));
        assert!(KnnModel::new(DMatrix::zeros(2, 2), vec![0, 1], 3).is_err());
        let m = KnnModel::new(DMatrix::zeros(2, 2), vec![0, 1], 1).unwrap();
        assert!(knn_predict(&m, &DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn one_known_picks_one_per_class() {
        let coords = DMatrix::from_fn(10, 2, |i, j| (i * 2 + j) as f64);
        let rows: Vec<usize> = (4..10).collect();
        let labels = vec![0, 1, 0, 1, 0, 1];
        let m = one_known_rule(&coords, &rows, &labels, 2, 3).unwrap();
        assert_eq!(m.k(), 1);
        assert_eq!(m.labels(), &[0, 1]);
        assert_eq!(m, one_known_rule(&coords, &rows, &labels, 2, 3).unwrap());
        // exemplars come from the target rows of the right class
        for (c, row) in m.coords().row_iter().enumerate() {
            let i = (row[0] / 2.0) as usize;
            assert!(rows.contains(&i));
            assert_eq!(labels[i - 4], c);
        }
        assert!(matches!(
            one_known_rule(&coords, &rows, &labels, 3, 0),
            Err(Error::NoTargetSamples(_))
        ));
    }

    #[test]
    fn one_known_perfect_when_targets_sit_on_exemplars() {
        // every target point of a class is a copy of the same location
        let coords = DMatrix::from_row_slice(6, 1, &[0.0, 0.0, 0.0, 9.0, 9.0, 9.0]);
        let rows: Vec<usize> = (0..6).collect();
        let labels = vec![0, 0, 0, 1, 1, 1];
        let m = one_known_rule(&coords, &rows, &labels, 2, 17).unwrap();
        assert_eq!(knn_predict(&m, &coords).unwrap(), labels);
    }
}
