//! Synthetic benchmark generators: two-blob covariate shift, cross-class
//! analogies, and textured image chips for the degradation protocol.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Dataset, Domain};
use crate::error::{Error, Result};
use crate::imageprep::ImageChip;
use crate::rng::{self, Rng};

/// Half the distance between the two source class means.
pub const CLASS_OFFSET: f64 = 2.0;

fn two_class_names() -> Vec<String> {
    vec!["class0".into(), "class1".into()]
}

/// `n_per_class` rows per class; class `c` is centred on `means[c]` with
/// unit covariance. Rows are grouped by class.
fn gaussian_classes(means: &[Vec<f64>], n_per_class: usize, r: &mut Rng) -> (DMatrix<f64>, Vec<usize>) {
    let d = means[0].len();
    let labels: Vec<usize> = (0..means.len()).flat_map(|c| std::iter::repeat_n(c, n_per_class)).collect();
    let mut x = DMatrix::zeros(labels.len(), d);
    for (i, &c) in labels.iter().enumerate() {
        for j in 0..d {
            let z: f64 = StandardNormal.sample(r);
            x[(i, j)] = means[c][j] + z;
        }
    }
    (x, labels)
}

fn check_shape(n_per_class: usize, d: usize) -> Result<()> {
    if n_per_class == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!(
            "need n_per_class >= 1 and d >= 1, got {n_per_class} and {d}"
        )));
    }
    Ok(())
}

fn axis(d: usize, k: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    if k < d {
        v[k] = scale;
    }
    v
}

/// Two unit-covariance Gaussian classes at `-2 e1` and `+2 e1`; the target
/// draws fresh samples from the same classes translated by `shift`.
pub fn synth_covariate_shift(
    n_per_class: usize,
    d: usize,
    shift: &[f64],
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    check_shape(n_per_class, d)?;
    if shift.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: shift.len(),
        });
    }
    let means = [axis(d, 0, -CLASS_OFFSET), axis(d, 0, CLASS_OFFSET)];
    let shifted: Vec<Vec<f64>> = means
        .iter()
        .map(|m| m.iter().zip(shift).map(|(a, b)| a + b).collect())
        .collect();
    let (xs, ys) = gaussian_classes(&means, n_per_class, &mut rng::seeded(rng::child_seed(seed, "source")));
    let (xt, yt) = gaussian_classes(&shifted, n_per_class, &mut rng::seeded(rng::child_seed(seed, "target")));
    Ok((
        Dataset::from_matrix(&xs, &ys, two_class_names(), Domain::Source, "s")?,
        Dataset::from_matrix(&xt, &yt, two_class_names(), Domain::Target, "t")?,
    ))
}

/// Source classes as in [`synth_covariate_shift`]. Target class `c` is
/// centred on `s * mu_c + (1 - |s|) * nu`, where `mu_c` is the source mean
/// and `nu = 2 e2` a prototype shared by both new classes. Strength 1 keeps
/// the source structure, -1 swaps the correspondence, 0 makes the two
/// target classes identically distributed.
pub fn synth_cross_class(
    n_per_class: usize,
    d: usize,
    analogy_strength: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    check_shape(n_per_class, d)?;
    if !(-1.0..=1.0).contains(&analogy_strength) {
        return Err(Error::InvalidArgument(format!(
            "analogy strength {analogy_strength} outside [-1, 1]"
        )));
    }
    let means = [axis(d, 0, -CLASS_OFFSET), axis(d, 0, CLASS_OFFSET)];
    let shared = axis(d, 1, CLASS_OFFSET);
    let blend = 1.0 - analogy_strength.abs();
    let target_means: Vec<Vec<f64>> = means
        .iter()
        .map(|m| m.iter().zip(&shared).map(|(a, b)| analogy_strength * a + blend * b).collect())
        .collect();
    let (xs, ys) = gaussian_classes(&means, n_per_class, &mut rng::seeded(rng::child_seed(seed, "source")));
    let (xt, yt) = gaussian_classes(&target_means, n_per_class, &mut rng::seeded(rng::child_seed(seed, "target")));
    let target_names = vec!["new0".to_string(), "new1".to_string()];
    Ok((
        Dataset::from_matrix(&xs, &ys, two_class_names(), Domain::Source, "s")?,
        Dataset::from_matrix(&xt, &yt, target_names, Domain::Target, "t")?,
    ))
}

/// Single-channel chips of random size in `[24, 48]` pixels. Class `c` is an
/// oriented sinusoidal grating (angle `c * pi / classes`) with random phase,
/// contrast and additive noise, so fine detail carries part of the class
/// signal and degradation hurts.
pub fn synth_chips(n_per_class: usize, classes: usize, seed: u64) -> Result<(Vec<ImageChip>, Vec<usize>)> {
    if n_per_class == 0 || classes < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n_per_class >= 1 and classes >= 2, got {n_per_class} and {classes}"
        )));
    }
    let mut r = rng::seeded(seed);
    let mut chips = Vec::with_capacity(n_per_class * classes);
    let mut labels = Vec::with_capacity(n_per_class * classes);
    for c in 0..classes {
        let angle = c as f64 * std::f64::consts::PI / classes as f64;
        let (dx, dy) = (angle.cos(), angle.sin());
        for _ in 0..n_per_class {
            let w = r.random_range(24..=48usize);
            let h = r.random_range(24..=48usize);
            let period = r.random_range(5.0..8.0) * w.min(h) as f64 / 32.0;
            let phase = r.random_range(0.0..std::f64::consts::TAU);
            let contrast = r.random_range(0.25..0.45);
            let mut pixels = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    let u = (x as f64 * dx + y as f64 * dy) * std::f64::consts::TAU / period;
                    let noise: f64 = StandardNormal.sample(&mut r);
                    pixels.push((0.5 + contrast * (u + phase).sin() + 0.08 * noise).clamp(0.0, 1.0));
                }
            }
            chips.push(ImageChip::new(w, h, 1, pixels)?);
            labels.push(c);
        }
    }
    Ok((chips, labels))
}
