mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use xferbench::linalg::orthonormality_error;
use xferbench::transfer::{
    graph_smoothness, kde_divergence, kde_divergence_grad, trdm_affinity, trdm_fit, Projection, TrdmParams,
};

fn cloud(n: usize, m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-2.0..2.0f64, n * m).prop_map(move |v| DMatrix::from_row_slice(n, m, &v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn divergence_is_nonnegative_symmetric_and_shift_invariant(
        ys in cloud(6, 2), yt in cloud(5, 2), sigma in 0.2..2.0f64, shift in -3.0..3.0f64
    ) {
        let d = kde_divergence(&ys, &yt, sigma).unwrap();
        prop_assert!(d >= -1e-15);
        prop_assert_eq!(d, kde_divergence(&yt, &ys, sigma).unwrap());
        let moved = kde_divergence(&ys.add_scalar(shift), &yt.add_scalar(shift), sigma).unwrap();
        prop_assert!((moved - d).abs() < 1e-12);
        let direct = kde_divergence_direct(&to_vecs(&ys), &to_vecs(&yt), sigma);
        prop_assert!((direct - d).abs() < 1e-12);
    }

    #[test]
    fn divergence_gradient_sums_to_zero(ys in cloud(5, 3), yt in cloud(7, 3), sigma in 0.3..2.0f64) {
        // translating both sets together leaves the divergence unchanged
        let (gs, gt) = kde_divergence_grad(&ys, &yt, sigma).unwrap();
        for k in 0..3 {
            let total = gs.column(k).sum() + gt.column(k).sum();
            prop_assert!(total.abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_gradient_matches_finite_differences(ys in cloud(4, 2), yt in cloud(3, 2), sigma in 0.4..1.5f64) {
        let (gs, gt) = kde_divergence_grad(&ys, &yt, sigma).unwrap();
        let flat: Vec<f64> = ys.iter().chain(yt.iter()).copied().collect();
        let fd = central_diff(&flat, 1e-5, |v| {
            let a = DMatrix::from_column_slice(4, 2, &v[..8]);
            let b = DMatrix::from_column_slice(3, 2, &v[8..]);
            kde_divergence(&a, &b, sigma).unwrap()
        });
        let analytic: Vec<f64> = gs.iter().chain(gt.iter()).copied().collect();
        let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-6);
        for (a, b) in fd.iter().zip(&analytic) {
            prop_assert!((a - b).abs() / scale < 1e-6);
        }
    }

    #[test]
    fn fitted_projection_is_orthonormal_and_monotone(seed in 0u64..500, lambda in 0.0..20.0f64) {
        let xs = random_matrix(12, 4, seed);
        let xt = random_matrix(9, 4, seed + 10_000).add_scalar(1.0);
        let params = TrdmParams { lambda, max_iters: 40, ..TrdmParams::default() };
        let model = trdm_fit(&xs, &xt, &params, seed).unwrap();
        prop_assert!(orthonormality_error(model.projection().matrix()) < 1e-10);
        prop_assert!(model.history().windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(model.transform(&xs).unwrap().shape(), (12, 2));
    }
}

#[test]
fn lambda_zero_matches_dense_oracle_without_whitening_on_raw_axes() {
    // unwhitened, the spectral solution is the bottom eigenspace of X^T L X
    let xs = random_matrix(9, 3, 1);
    let xt = random_matrix(9, 3, 2);
    let params = TrdmParams {
        lambda: 0.0,
        whiten: false,
        ..TrdmParams::default()
    };
    let model = trdm_fit(&xs, &xt, &params, 0).unwrap();
    let x = DMatrix::from_fn(18, 3, |i, j| if i < 9 { xs[(i, j)] } else { xt[(i - 9, j)] });
    let a = to_vecs(&trdm_affinity(&x, &params).unwrap());
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let lap: Mat = (0..18).map(|i| (0..18).map(|j| f64::from(i == j) * deg[i] - a[i][j]).collect()).collect();
    let xv = to_vecs(&x);
    let s = matmul(&matmul(&transpose(&xv), &lap), &xv);
    let (_, vecs) = jacobi_eigen(&s);
    let bottom: Mat = vecs.iter().map(|r| r[..2].to_vec()).collect();
    let angle = max_principal_angle(&to_vecs(&model.effective_map()), &bottom);
    assert!(angle < 1e-6, "angle {angle}");
}

#[test]
fn affinity_oracle_agrees() {
    let x = random_matrix(11, 3, 4);
    let params = TrdmParams { t: 2, alpha: 0.5, ..TrdmParams::default() };
    let lib = trdm_affinity(&x, &params).unwrap();
    let oracle = diffusion_affinity(&to_vecs(&x), 0.5, 2);
    for i in 0..11 {
        for j in 0..11 {
            assert!((lib[(i, j)] - oracle[i][j]).abs() < 1e-14);
        }
    }
}

#[test]
fn divergence_drops_under_regularization() {
    let xs = random_matrix(40, 3, 7);
    let mut xt = random_matrix(40, 3, 8);
    for i in 0..40 {
        xt[(i, 2)] += 4.0;
    }
    let heavy = TrdmParams { lambda: 200.0, ..TrdmParams::default() };
    let model = trdm_fit(&xs, &xt, &heavy, 0).unwrap();
    let before = model.initial_divergence(&xs, &xt).unwrap();
    let after = model.divergence(&xs, &xt).unwrap();
    assert!(after <= before, "{after} > {before}");
}

#[test]
fn rank_deficient_inputs_use_the_data_span() {
    // 3 points in 5 dimensions: rank 2 after centering
    let xs = DMatrix::from_row_slice(2, 5, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let xt = DMatrix::from_row_slice(1, 5, &[1.0, 1.0, 0.0, 0.0, 0.0]);
    let params = TrdmParams { lambda: 0.0, ..TrdmParams::default() };
    let model = trdm_fit(&xs, &xt, &params, 0).unwrap();
    let map = model.effective_map();
    assert_eq!(map.shape(), (5, 2));
    for i in 2..5 {
        assert!(map.row(i).norm() < 1e-12);
    }
    let too_many = TrdmParams { m: 3, ..params };
    assert!(trdm_fit(&xs, &xt, &too_many, 0).is_err());
}

#[test]
fn smoothness_matches_pairwise_sum() {
    let x = random_matrix(8, 3, 3);
    let w = Projection::axes(3, 2).unwrap();
    let a = DMatrix::from_fn(8, 8, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).abs()));
    let mut direct = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            let dy0 = x[(i, 0)] - x[(j, 0)];
            let dy1 = x[(i, 1)] - x[(j, 1)];
            direct += a[(i, j)] * (dy0 * dy0 + dy1 * dy1);
        }
    }
    assert!(rel_err(graph_smoothness(&w, &x, &a).unwrap(), direct) < 1e-12);
}

#[test]
fn projection_csv_round_trips() {
    let model = trdm_fit(&random_matrix(10, 4, 1), &random_matrix(10, 4, 2), &TrdmParams::default(), 0).unwrap();
    let mut buf = Vec::new();
    let header = model.params().header(model.sigma());
    model.projection().write_csv(&mut buf, &header).unwrap();
    let (back, h) = Projection::read_csv(buf.as_slice()).unwrap();
    assert_eq!(&back, model.projection());
    assert_eq!(h, header);
}
