//! Fully connected network (linear, ReLU, linear) trained with mini-batch
//! gradient descent on softmax cross-entropy, and a domain-adversarial
//! variant with a gradient-reversal domain head on the hidden layer.

use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl MlpModel {
    pub fn new(w1: DMatrix<f64>, b1: DVector<f64>, w2: DMatrix<f64>, b2: DVector<f64>) -> Result<Self> {
        let h = w1.ncols();
        if h == 0 || b1.len() != h || w2.nrows() != h {
            return Err(Error::InvalidArgument(format!(
                "hidden layer shapes disagree: W1 {}x{}, b1 {}, W2 {}x{}",
                w1.nrows(),
                h,
                b1.len(),
                w2.nrows(),
                w2.ncols()
            )));
        }
        if w2.ncols() < 2 || b2.len() != w2.ncols() {
            return Err(Error::InvalidArgument("output layer needs >= 2 classes".into()));
        }
        let finite = [&w1, &w2].iter().all(|m| m.iter().all(|v| v.is_finite()))
            && b1.iter().chain(b2.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("non-finite weights".into()));
        }
        Ok(MlpModel { w1, b1, w2, b2 })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(d_in: usize, hidden: usize, classes: usize, seed: u64) -> Result<Self> {
        if d_in == 0 || hidden == 0 || classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "network shape {d_in} -> {hidden} -> {classes}"
            )));
        }
        let mut r = rng::seeded(seed);
        let w1 = glorot(d_in, hidden, &mut r);
        let w2 = glorot(hidden, classes, &mut r);
        Ok(MlpModel {
            w1,
            b1: DVector::zeros(hidden),
            w2,
            b2: DVector::zeros(classes),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn classes(&self) -> usize {
        self.w2.ncols()
    }

    fn hidden_pre(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * &self.w1;
        for mut row in z.row_iter_mut() {
            row += self.b1.transpose();
        }
        z
    }

    /// Hidden pre-activations, useful for avoiding ReLU kinks in gradient checks.
    pub fn pre_activations(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.hidden_pre(x)
    }

    /// Output scores (logits).
    pub fn scores(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let h = self.hidden_pre(x).map(relu);
        affine(&h, &self.w2, &self.b2)
    }
}

fn glorot(fan_in: usize, fan_out: usize, r: &mut rng::Rng) -> DMatrix<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let u = Uniform::new_inclusive(-a, a).expect("finite bound");
    DMatrix::from_fn(fan_in, fan_out, |_, _| u.sample(r))
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn affine(x: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x * w;
    for mut row in out.row_iter_mut() {
        row += b.transpose();
    }
    out
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(scores: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = scores.clone();
    for mut row in p.row_iter_mut() {
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

/// Mean cross-entropy and its gradient with respect to the scores.
fn cross_entropy(scores: &DMatrix<f64>, labels: &[usize]) -> (f64, DMatrix<f64>) {
    let n = scores.nrows() as f64;
    let mut grad = softmax_rows(scores);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = scores.row(i);
        let m = row.max();
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        grad[(i, y)] -= 1.0;
    }
    (loss / n, grad / n)
}

fn column_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

/// Gradients of a loss with respect to every parameter of an [`MlpModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGradients {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

/// Mean softmax cross-entropy over `(x, labels)` and its gradients.
pub fn loss_and_grad(model: &MlpModel, x: &DMatrix<f64>, labels: &[usize]) -> (f64, MlpGradients) {
    let z = model.hidden_pre(x);
    let h = z.map(relu);
    let s = affine(&h, &model.w2, &model.b2);
    let (loss, ds) = cross_entropy(&s, labels);
    let w2 = h.transpose() * &ds;
    let b2 = column_sums(&ds);
    let mut dz = ds * model.w2.transpose();
    dz.zip_apply(&z, |g, zv| {
        if zv <= 0.0 {
            *g = 0.0
        }
    });
    let w1 = x.transpose() * &dz;
    let b1 = column_sums(&dz);
    (loss, MlpGradients { w1, b1, w2, b2 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learn_rate: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: 64,
            epochs: 20,
            learn_rate: 1e-2,
            batch: 32,
            seed: 0,
        }
    }
}

impl MlpConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.hidden == 0 || self.batch == 0 {
            return Err(Error::InvalidArgument("hidden width and batch size must be >= 1".into()));
        }
        if !(self.learn_rate > 0.0) || !self.learn_rate.is_finite() {
            return Err(Error::InvalidArgument(format!("learn_rate {}", self.learn_rate)));
        }
        Ok(())
    }
}

/// Per-epoch training loss and validation accuracy. Without a validation
/// set the accuracy column holds training accuracy.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

fn check_labels(x: &DMatrix<f64>, labels: &[usize], classes: usize) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if labels.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: labels.len(),
        });
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidArgument(format!("label {l} >= {classes} classes")));
    }
    Ok(())
}

fn fraction_correct(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len().max(1) as f64
}

fn descend(model: &mut MlpModel, g: &MlpGradients, lr: f64) {
    model.w1 -= &g.w1 * lr;
    model.b1 -= &g.b1 * lr;
    model.w2 -= &g.w2 * lr;
    model.b2 -= &g.b2 * lr;
}

/// Trains from a Glorot initialization. Each epoch visits the rows in a
/// fresh seeded shuffle, in mini-batches of `config.batch`.
pub fn mlp_train(
    x: &DMatrix<f64>,
    labels: &[usize],
    classes: usize,
    config: &MlpConfig,
    validation: Option<(&DMatrix<f64>, &[usize])>,
) -> Result<(MlpModel, TrainReport)> {
    config.validate()?;
    check_labels(x, labels, classes)?;
    let mut model = MlpModel::init(x.ncols(), config.hidden, classes, rng::child_seed(config.seed, "init"))?;
    let mut shuffle = rng::seeded(rng::child_seed(config.seed, "shuffle"));
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut report = TrainReport::default();
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch).enumerate() {
            let xb = x.select_rows(batch);
            let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (loss, g) = loss_and_grad(&model, &xb, &yb);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            total += loss * batch.len() as f64;
            descend(&mut model, &g, config.learn_rate);
        }
        report.loss.push(total / x.nrows() as f64);
        report.val_accuracy.push(match validation {
            Some((xv, yv)) => fraction_correct(&mlp_predict(&model, xv)?.0, yv),
            None => fraction_correct(&mlp_predict(&model, x)?.0, labels),
        });
    }
    Ok((model, report))
}

fn argmax_rows(scores: &DMatrix<f64>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Class indices (ties to the smaller index) and raw scores.
pub fn mlp_predict(model: &MlpModel, queries: &DMatrix<f64>) -> Result<(Vec<usize>, DMatrix<f64>)> {
    if queries.ncols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: queries.ncols(),
        });
    }
    let scores = model.scores(queries);
    Ok((argmax_rows(&scores), scores))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DaMlpModel {
    pub base: MlpModel,
    /// Domain head, `h x 2`; column 0 is source, column 1 target.
    pub wd: DMatrix<f64>,
    pub bd: DVector<f64>,
    pub lambda_d: f64,
}

/// Domain-loss gradients for the shared feature layer and the domain head.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainGradients {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub wd: DMatrix<f64>,
    pub bd: DVector<f64>,
}

/// One training step's gradients, kept separate so the reversal can be
/// audited: the feature layer moves along `class - lambda_d * domain`.
#[derive(Clone, Debug, PartialEq)]
pub struct DaGradients {
    pub class_loss: f64,
    pub domain_loss: f64,
    pub class: MlpGradients,
    pub domain: DomainGradients,
    pub feature_w1: DMatrix<f64>,
    pub feature_b1: DVector<f64>,
}

impl DaMlpModel {
    pub fn new(base: MlpModel, wd: DMatrix<f64>, bd: DVector<f64>, lambda_d: f64) -> Result<Self> {
        if wd.nrows() != base.hidden() || wd.ncols() != 2 || bd.len() != 2 {
            return Err(Error::InvalidArgument("domain head must be hidden x 2".into()));
        }
        if !(lambda_d >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda_d {lambda_d} must be >= 0")));
        }
        Ok(DaMlpModel { base, wd, bd, lambda_d })
    }

    /// Domain cross-entropy (0 = source, 1 = target) and its gradients.
    pub fn domain_loss_and_grad(&self, x: &DMatrix<f64>, domains: &[usize]) -> (f64, DomainGradients) {
        let z = self.base.hidden_pre(x);
        let h = z.map(relu);
        let s = affine(&h, &self.wd, &self.bd);
        let (loss, ds) = cross_entropy(&s, domains);
        let wd = h.transpose() * &ds;
        let bd = column_sums(&ds);
        let mut dz = ds * self.wd.transpose();
        dz.zip_apply(&z, |g, zv| {
            if zv <= 0.0 {
                *g = 0.0
            }
        });
        let w1 = x.transpose() * &dz;
        let b1 = column_sums(&dz);
        (loss, DomainGradients { w1, b1, wd, bd })
    }

    /// Gradients for one step: class loss on the labeled source batch,
    /// domain loss on `x_dom` with tags `domains`.
    pub fn gradients(
        &self,
        xs: &DMatrix<f64>,
        ys: &[usize],
        x_dom: &DMatrix<f64>,
        domains: &[usize],
    ) -> DaGradients {
        let (class_loss, class) = loss_and_grad(&self.base, xs, ys);
        let (domain_loss, domain) = self.domain_loss_and_grad(x_dom, domains);
        let feature_w1 = &class.w1 - &domain.w1 * self.lambda_d;
        let feature_b1 = &class.b1 - &domain.b1 * self.lambda_d;
        DaGradients {
            class_loss,
            domain_loss,
            class,
            domain,
            feature_w1,
            feature_b1,
        }
    }

    /// Gradient-descent update from [`DaMlpModel::gradients`].
    pub fn apply(&mut self, g: &DaGradients, lr: f64) {
        self.base.w1 -= &g.feature_w1 * lr;
        self.base.b1 -= &g.feature_b1 * lr;
        self.base.w2 -= &g.class.w2 * lr;
        self.base.b2 -= &g.class.b2 * lr;
        self.wd -= &g.domain.wd * lr;
        self.bd -= &g.domain.bd * lr;
    }

    /// Predicted domain per row (0 = source, 1 = target).
    pub fn domain_predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        if x.ncols() != self.base.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.base.input_dim(),
                found: x.ncols(),
            });
        }
        let h = self.base.hidden_pre(x).map(relu);
        Ok(argmax_rows(&affine(&h, &self.wd, &self.bd)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaConfig {
    #[serde(flatten)]
    pub mlp: MlpConfig,
    pub lambda_d: f64,
}

impl Default for DaConfig {
    fn default() -> Self {
        DaConfig {
            mlp: MlpConfig::default(),
            lambda_d: 1.0,
        }
    }
}

/// Domain-adversarial training.
///
/// `x` holds source and target rows; `domains[i]` tags row `i` (0 source,
/// 1 target) and `labels[i]` must be present for every source row. Source
/// batches follow exactly the schedule of [`mlp_train`] on the source rows
/// with the same seed; each step pairs them with the next `batch` target
/// rows from a separately seeded cycle. The domain loss covers both.
pub fn da_mlp_train(
    x: &DMatrix<f64>,
    domains: &[usize],
    labels: &[Option<usize>],
    classes: usize,
    config: &DaConfig,
    validation: Option<(&DMatrix<f64>, &[usize])>,
) -> Result<(DaMlpModel, TrainReport)> {
    let mlp = &config.mlp;
    mlp.validate()?;
    if domains.len() != x.nrows() {
        return Err(Error::MissingDomainTags("every row needs a domain tag"));
    }
    if domains.iter().any(|&d| d > 1) {
        return Err(Error::MissingDomainTags("domain tags must be 0 or 1"));
    }
    if labels.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: labels.len(),
        });
    }
    let source: Vec<usize> = (0..x.nrows()).filter(|&i| domains[i] == 0).collect();
    let target: Vec<usize> = (0..x.nrows()).filter(|&i| domains[i] == 1).collect();
    if target.is_empty() {
        return Err(Error::MissingDomainTags("no rows tagged as target"));
    }
    let xs = x.select_rows(&source);
    let ys = source
        .iter()
        .map(|&i| labels[i].ok_or(Error::InvalidArgument(format!("source row {i} has no label"))))
        .collect::<Result<Vec<_>>>()?;
    check_labels(&xs, &ys, classes)?;
    let xt = x.select_rows(&target);

    let base = MlpModel::init(x.ncols(), mlp.hidden, classes, rng::child_seed(mlp.seed, "init"))?;
    let mut head_rng = rng::seeded(rng::child_seed(mlp.seed, "domain_head"));
    let wd = glorot(mlp.hidden, 2, &mut head_rng);
    let mut model = DaMlpModel::new(base, wd, DVector::zeros(2), config.lambda_d)?;

    let mut shuffle = rng::seeded(rng::child_seed(mlp.seed, "shuffle"));
    let mut target_rng = rng::seeded(rng::child_seed(mlp.seed, "target"));
    let mut order: Vec<usize> = (0..xs.nrows()).collect();
    let mut t_order: Vec<usize> = (0..xt.nrows()).collect();
    t_order.shuffle(&mut target_rng);
    let mut t_pos = 0;
    let mut report = TrainReport::default();
    for epoch in 0..mlp.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for (b, batch) in order.chunks(mlp.batch).enumerate() {
            let xb = xs.select_rows(batch);
            let yb: Vec<usize> = batch.iter().map(|&i| ys[i]).collect();
            let mut t_batch = Vec::with_capacity(mlp.batch);
            while t_batch.len() < batch.len() {
                if t_pos == t_order.len() {
                    t_order.shuffle(&mut target_rng);
                    t_pos = 0;
                }
                t_batch.push(t_order[t_pos]);
                t_pos += 1;
            }
            let x_dom = DMatrix::from_fn(batch.len() + t_batch.len(), x.ncols(), |i, j| {
                if i < batch.len() {
                    xb[(i, j)]
                } else {
                    xt[(t_batch[i - batch.len()], j)]
                }
            });
            let d_dom: Vec<usize> = (0..x_dom.nrows()).map(|i| usize::from(i >= batch.len())).collect();
            let g = model.gradients(&xb, &yb, &x_dom, &d_dom);
            let loss = g.class_loss + g.domain_loss;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            total += loss * batch.len() as f64;
            model.apply(&g, mlp.learn_rate);
        }
        report.loss.push(total / xs.nrows() as f64);
        report.val_accuracy.push(match validation {
            Some((xv, yv)) => fraction_correct(&mlp_predict(&model.base, xv)?.0, yv),
            None => fraction_correct(&mlp_predict(&model.base, &xs)?.0, &ys),
        });
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn blobs(n: usize, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
        let mut r = rng::seeded(seed);
        let labels: Vec<usize> = (0..2 * n).map(|i| i % 2).collect();
        let x = DMatrix::from_fn(2 * n, 3, |i, j| {
            let centre = if j == 0 { 4.0 * labels[i] as f64 - 2.0 } else { 0.0 };
            centre + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut r)
        });
        (x, labels)
    }

    #[test]
    fn learns_separable_blobs() {
        let (x, y) = blobs(50, 1);
        let cfg = MlpConfig {
            hidden: 8,
            epochs: 50,
            seed: 3,
            ..Default::default()
        };
        let (model, report) = mlp_train(&x, &y, 2, &cfg, None).unwrap();
        assert_eq!(report.loss.len(), 50);
        assert_eq!(report.val_accuracy.len(), 50);
        assert!(*report.val_accuracy.last().unwrap() >= 0.99);
        let (xt, yt) = blobs(50, 2);
        let acc = fraction_correct(&mlp_predict(&model, &xt).unwrap().0, &yt);
        assert!(acc >= 0.99, "{acc}");
        let again = mlp_train(&x, &y, 2, &cfg, None).unwrap();
        assert_eq!(again.1, report);
    }

    #[test]
    fn zero_epochs_rejected() {
        let (x, y) = blobs(5, 1);
        let cfg = MlpConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(mlp_train(&x, &y, 2, &cfg, None).is_err());
    }

    #[test]
    fn zero_weights_predict_class_zero() {
        let m = MlpModel::new(DMatrix::zeros(3, 2), DVector::zeros(2), DMatrix::zeros(2, 4), DVector::zeros(4))
            .unwrap();
        let (pred, scores) = mlp_predict(&m, &DMatrix::from_element(5, 3, 1.5)).unwrap();
        assert_eq!(pred, vec![0; 5]);
        for row in softmax_rows(&scores).row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reversal_disabled_matches_plain_training() {
        let (xs, ys) = blobs(20, 4);
        let (xt, _) = blobs(15, 5);
        let x = DMatrix::from_fn(xs.nrows() + xt.nrows(), 3, |i, j| {
            if i < xs.nrows() { xs[(i, j)] } else { xt[(i - xs.nrows(), j)] }
        });
        let domains: Vec<usize> = (0..x.nrows()).map(|i| usize::from(i >= xs.nrows())).collect();
        let labels: Vec<Option<usize>> = (0..x.nrows()).map(|i| ys.get(i).copied()).collect();
        let mlp = MlpConfig {
            hidden: 6,
            epochs: 4,
            batch: 7,
            seed: 11,
            ..Default::default()
        };
        let da = DaConfig {
            mlp: mlp.clone(),
            lambda_d: 0.0,
        };
        let (plain, _) = mlp_train(&xs, &ys, 2, &mlp, None).unwrap();
        let (adv, _) = da_mlp_train(&x, &domains, &labels, 2, &da, None).unwrap();
        assert_eq!(plain.w1, adv.base.w1);
        assert_eq!(plain.b1, adv.base.b1);
        assert_eq!(plain.w2, adv.base.w2);
        assert!(matches!(
            da_mlp_train(&x, &domains[1..], &labels, 2, &da, None),
            Err(Error::MissingDomainTags(_))
        ));
    }
}
