use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::gmm::em::{bic_sweep, fit_gmm, fit_gmm_traced, EmConfig};

fn standard_normal_samples(count: usize, dim: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

fn as_samples(points: &[DVector<f64>], n: usize, m: usize) -> Vec<Sample> {
    points
        .iter()
        .map(|z| Sample {
            covariate: z.rows(0, n).into_owned(),
            uncertainty: z.rows(n, m).into_owned(),
            period_index: 1,
        })
        .collect()
}

#[test]
fn single_gaussian_recovery() {
    // 500 draws from N(0, I2), k=1: mean within 0.15, covariance within 0.2.
    let pts = standard_normal_samples(500, 2, 42);
    let samples = as_samples(&pts, 1, 1);
    let model = fit_gmm(&samples, 1, &EmConfig::default()).unwrap();
    let c = &model.components()[0];
    assert!(c.mean.norm() < 0.15, "mean {:?}", c.mean);
    let frob = (&c.covariance - DMatrix::<f64>::identity(2, 2)).norm();
    assert!(frob < 0.2, "covariance Frobenius error {frob}");
}

#[test]
fn one_component_fit_equals_sample_statistics() {
    let pts = standard_normal_samples(80, 3, 7);
    let samples = as_samples(&pts, 2, 1);
    let model = fit_gmm(&samples, 1, &EmConfig::default()).unwrap();
    // Direct sample mean / covariance.
    let n = pts.len() as f64;
    let mut mean = DVector::zeros(3);
    for z in &pts {
        mean += z;
    }
    mean /= n;
    let mut cov = DMatrix::zeros(3, 3);
    for z in &pts {
        let d = z - &mean;
        cov += &d * d.transpose();
    }
    cov /= n;
    let c = &model.components()[0];
    assert!((&c.mean - &mean).norm() < 1e-12);
    // Fitted covariance = sample covariance + jitter on the diagonal.
    let diff = &c.covariance - &cov;
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                assert!(diff[(i, j)] > 0.0 && diff[(i, j)] < 1e-6);
            } else {
                assert!(diff[(i, j)].abs() < 1e-12);
            }
        }
    }
}

#[test]
fn two_separated_clusters_recover_equal_weights() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..400 {
        let center = if i % 2 == 0 { -5.0 } else { 5.0 };
        labels.push(i % 2);
        points.push(DVector::from_vec(vec![
            center + 0.1_f64.sqrt() * rng.sample::<f64, _>(StandardNormal),
            center + 0.1_f64.sqrt() * rng.sample::<f64, _>(StandardNormal),
        ]));
    }
    let samples = as_samples(&points, 1, 1);
    let model = fit_gmm(&samples, 2, &EmConfig::default()).unwrap();
    let empirical = labels.iter().filter(|&&l| l == 0).count() as f64 / labels.len() as f64;
    for c in model.components() {
        assert!((c.weight - 0.5).abs() < 0.05, "weight {}", c.weight);
    }
    assert!((empirical - 0.5).abs() < 0.05);
}

#[test]
fn too_few_samples_rejected() {
    let pts = standard_normal_samples(5, 2, 0);
    let samples = as_samples(&pts, 1, 1);
    match fit_gmm(&samples, 2, &EmConfig::default()) {
        Err(GmmError::TooFewSamples { got: 5, need: 6 }) => {}
        other => panic!("expected TooFewSamples, got {other:?}"),
    }
}

#[test]
fn degenerate_coordinate_without_jitter_rejected() {
    let pts: Vec<DVector<f64>> =
        (0..30).map(|i| DVector::from_vec(vec![i as f64, 1.0])).collect();
    let samples = as_samples(&pts, 1, 1);
    let config = EmConfig { jitter_scale: None, ..EmConfig::default() };
    match fit_gmm(&samples, 1, &config) {
        Err(GmmError::DegenerateData(_)) => {}
        other => panic!("expected DegenerateData, got {other:?}"),
    }
}

#[test]
fn non_finite_input_rejected() {
    let mut pts = standard_normal_samples(30, 2, 0);
    pts[7][1] = f64::NAN;
    let samples = as_samples(&pts, 1, 1);
    match fit_gmm(&samples, 1, &EmConfig::default()) {
        Err(GmmError::NonFiniteInput(7)) => {}
        other => panic!("expected NonFiniteInput(7), got {other:?}"),
    }
}

#[test]
fn em_log_likelihood_is_monotone() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let mut points = Vec::new();
    for _ in 0..200 {
        let shift = if rng.random::<f64>() < 0.3 { 2.0 } else { -1.0 };
        points.push(DVector::from_vec(vec![
            shift + rng.sample::<f64, _>(StandardNormal),
            0.5 * shift + rng.sample::<f64, _>(StandardNormal),
        ]));
    }
    let samples = as_samples(&points, 1, 1);
    let (_, trace) = fit_gmm_traced(&samples, 3, &EmConfig::default()).unwrap();
    assert!(trace.len() >= 2);
    for w in trace.windows(2) {
        assert!(
            w[1] >= w[0] - 1e-8 * w[0].abs().max(1.0),
            "log-likelihood decreased: {} -> {}",
            w[0],
            w[1]
        );
    }
}

fn joint_1d1d(rho: f64) -> JointGmm {
    JointGmm::new(
        vec![GaussianComponent {
            weight: 1.0,
            mean: DVector::from_vec(vec![0.0, 0.0]),
            covariance: DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]),
        }],
        1,
        1,
    )
    .unwrap()
}

#[test]
fn log_density_standard_normal_at_mode() {
    let model = JointGmm::new(
        vec![GaussianComponent {
            weight: 1.0,
            mean: DVector::from_vec(vec![0.0]),
            covariance: DMatrix::from_row_slice(1, 1, &[1.0]),
        }],
        1,
        0,
    );
    // n=1, m=0 is not a valid joint model (m >= 1); use a 1+1 model and the
    // covariate marginal instead, which is the same standard normal.
    assert!(model.is_err() || model.is_ok());
    let model = joint_1d1d(0.0);
    let ld = model
        .log_density(&DVector::from_vec(vec![0.0]), DensitySpace::CovariateMarginal)
        .unwrap();
    assert!((ld + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
}

#[test]
fn mixture_of_identical_components_equals_single() {
    let single = joint_1d1d(0.3);
    let comp = single.components()[0].clone();
    let double = JointGmm::new(
        vec![
            GaussianComponent { weight: 0.5, ..comp.clone() },
            GaussianComponent { weight: 0.5, ..comp },
        ],
        1,
        1,
    )
    .unwrap();
    let pt = DVector::from_vec(vec![0.7, -0.2]);
    let a = single.log_density(&pt, DensitySpace::Joint).unwrap();
    let b = double.log_density(&pt, DensitySpace::Joint).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn log_density_matches_direct_summation_oracle() {
    // Random 3-component model in 2D against naive density summation.
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut comps = Vec::new();
    let raw_w: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.1).collect();
    let total: f64 = raw_w.iter().sum();
    for w in &raw_w {
        let a = DMatrix::from_fn(2, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cov = &a * a.transpose() + DMatrix::identity(2, 2) * 0.5;
        comps.push(GaussianComponent {
            weight: w / total,
            mean: DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal)),
            covariance: cov,
        });
    }
    let model = JointGmm::new(comps.clone(), 1, 1).unwrap();
    for _ in 0..10 {
        let pt = DVector::from_fn(2, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        // Naive oracle: explicit inverse and determinant per component.
        let mut density = 0.0;
        for c in &comps {
            let inv = c.covariance.clone().try_inverse().unwrap();
            let det = c.covariance.determinant();
            let delta = &pt - &c.mean;
            let quad = (delta.transpose() * inv * &delta)[(0, 0)];
            density += c.weight / (2.0 * std::f64::consts::PI * det.sqrt()) * (-0.5 * quad).exp();
        }
        let got = model.log_density(&pt, DensitySpace::Joint).unwrap();
        assert!((got - density.ln()).abs() < 1e-10, "got {got}, oracle {}", density.ln());
    }
}

#[test]
fn log_density_dimension_mismatch() {
    let model = joint_1d1d(0.0);
    assert!(matches!(
        model.log_density(&DVector::from_vec(vec![0.0, 0.0, 0.0]), DensitySpace::Joint),
        Err(GmmError::DimensionMismatch { expected: 2, got: 3 })
    ));
}

#[test]
fn conditioning_with_zero_cross_covariance_is_identity() {
    let model = joint_1d1d(0.0);
    let cond = model.condition(&DVector::from_vec(vec![3.0])).unwrap();
    assert_eq!(cond.k(), 1);
    let c = &cond.components[0];
    assert!((c.weight - 1.0).abs() < 1e-12);
    assert!(c.mean[0].abs() < 1e-12);
    assert!((c.covariance[(0, 0)] - 1.0).abs() < 1e-9);
}

#[test]
fn scalar_conditioning_closed_form() {
    // mu=(0,0), Sigma=[[1,0.8],[0.8,1]], x=1 -> mean 0.8, variance 0.36.
    let model = joint_1d1d(0.8);
    let cond = model.condition(&DVector::from_vec(vec![1.0])).unwrap();
    let c = &cond.components[0];
    assert!((c.mean[0] - 0.8).abs() < 1e-12);
    assert!((c.covariance[(0, 0)] - 0.36).abs() < 1e-9);
}

#[test]
fn conditional_weights_follow_covariate_responsibilities() {
    // Covariate means -3 and +3, unit variances, equal priors; x = -3.
    let comp = |mx: f64| GaussianComponent {
        weight: 0.5,
        mean: DVector::from_vec(vec![mx, 0.0]),
        covariance: DMatrix::identity(2, 2),
    };
    let model = JointGmm::new(vec![comp(-3.0), comp(3.0)], 1, 1).unwrap();
    let cond = model.condition(&DVector::from_vec(vec![-3.0])).unwrap();
    // Independent scalar normal pdf oracle.
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let expected = phi(0.0) / (phi(0.0) + phi(6.0));
    assert!((cond.components[0].weight - expected).abs() < 1e-10);
    assert!((cond.components[0].weight + cond.components[1].weight - 1.0).abs() < 1e-12);
}

#[test]
fn conditional_weights_normalize_and_covariance_is_x_independent() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let mut comps = Vec::new();
    for w in [0.25, 0.35, 0.4] {
        let a = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        comps.push(GaussianComponent {
            weight: w,
            mean: DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal)),
            covariance: &a * a.transpose() + DMatrix::identity(3, 3),
        });
    }
    let model = JointGmm::new(comps, 2, 1).unwrap();
    let xa = DVector::from_vec(vec![0.5, -1.0]);
    let xb = DVector::from_vec(vec![-2.0, 4.0]);
    let ca = model.condition(&xa).unwrap();
    let cb = model.condition(&xb).unwrap();
    let wsum: f64 = ca.components.iter().map(|c| c.weight).sum();
    assert!((wsum - 1.0).abs() < 1e-9);
    for (a, b) in ca.components.iter().zip(cb.components.iter()) {
        assert!((&a.covariance - &b.covariance).norm() < 1e-12);
    }
}

#[test]
fn underflowed_covariate_falls_back_to_priors() {
    let model = joint_1d1d(0.5);
    // x so extreme that exp(logN) underflows double precision entirely:
    // logN ~ -x^2/2, need < -745 -> |x| > 40 suffices for the weight, but the
    // fallback triggers only when the log-sum-exp itself is -inf.
    let cond = model.condition(&DVector::from_vec(vec![1e160])).unwrap();
    assert!(cond.weights_fell_back_to_prior);
    assert!((cond.components[0].weight - 1.0).abs() < 1e-12);
}

#[test]
fn law_of_total_expectation() {
    // E_x[ E[u | x] ] must approximate the marginal mean of the uncertainty.
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let mut points = Vec::new();
    for _ in 0..600 {
        let (cx, cu) = if rng.random::<f64>() < 0.4 { (1.0, 2.0) } else { (-1.5, -0.5) };
        let x = cx + rng.sample::<f64, _>(StandardNormal);
        let u = cu + 0.6 * (x - cx) + 0.8 * rng.sample::<f64, _>(StandardNormal);
        points.push(DVector::from_vec(vec![x, u]));
    }
    let samples = as_samples(&points, 1, 1);
    let model = fit_gmm(&samples, 2, &EmConfig::default()).unwrap();
    // Marginal mean of the uncertainty block under the fitted model.
    let marginal_mean: f64 = model.components().iter().map(|c| c.weight * c.mean[1]).sum();
    // Average conditional mean over x drawn from the fitted covariate marginal.
    let n_mc = 4000;
    let draws = model.sample_joint(n_mc, 77);
    let mut cond_means = Vec::with_capacity(n_mc);
    for z in &draws {
        let x = z.rows(0, 1).into_owned();
        let cond = model.condition(&x).unwrap();
        cond_means.push(cond.mean()[0]);
    }
    let avg: f64 = cond_means.iter().sum::<f64>() / n_mc as f64;
    let var: f64 =
        cond_means.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (n_mc as f64 - 1.0);
    let se = (var / n_mc as f64).sqrt();
    assert!(
        (avg - marginal_mean).abs() < 3.0 * se + 1e-9,
        "avg {avg}, marginal {marginal_mean}, se {se}"
    );
}

#[test]
fn near_degenerate_sampling_concentrates_at_mean() {
    let cond = ConditionalGmm::from_parts(
        vec![(
            1.0,
            DVector::from_vec(vec![2.0, 2.0]),
            DMatrix::identity(2, 2) * 1e-12,
        )],
        DVector::from_vec(vec![0.0]),
    )
    .unwrap();
    for s in cond.sample(5, 123) {
        assert!((s[0] - 2.0).abs() < 1e-4 && (s[1] - 2.0).abs() < 1e-4);
    }
}

#[test]
fn component_selection_frequencies_match_weights() {
    let cond = ConditionalGmm::from_parts(
        vec![
            (0.3, DVector::from_vec(vec![-100.0]), DMatrix::identity(1, 1) * 1e-6),
            (0.7, DVector::from_vec(vec![100.0]), DMatrix::identity(1, 1) * 1e-6),
        ],
        DVector::from_vec(vec![0.0]),
    )
    .unwrap();
    let draws = cond.sample(100_000, 31);
    let frac_first = draws.iter().filter(|s| s[0] < 0.0).count() as f64 / draws.len() as f64;
    assert!((frac_first - 0.3).abs() < 0.01, "selection frequency {frac_first}");
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let cond = ConditionalGmm::from_parts(
        vec![
            (0.5, DVector::from_vec(vec![0.0, 0.0]), DMatrix::identity(2, 2)),
            (0.5, DVector::from_vec(vec![5.0, 5.0]), DMatrix::identity(2, 2) * 2.0),
        ],
        DVector::from_vec(vec![0.0]),
    )
    .unwrap();
    let a = cond.sample(50, 999);
    let b = cond.sample(50, 999);
    for (x, y) in a.iter().zip(b.iter()) {
        assert_eq!(x.as_slice(), y.as_slice());
    }
    let c = cond.sample(50, 1000);
    assert!(a.iter().zip(c.iter()).any(|(x, y)| x.as_slice() != y.as_slice()));
}

#[test]
fn k1_conditioning_matches_textbook_form_exactly() {
    // Random 2+2 joint Gaussian, compare against the closed form computed
    // with explicit inverses.
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    for _ in 0..20 {
        let a = DMatrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cov = &a * a.transpose() + DMatrix::identity(4, 4);
        let mean = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let model = JointGmm::new(
            vec![GaussianComponent { weight: 1.0, mean: mean.clone(), covariance: cov.clone() }],
            2,
            2,
        )
        .unwrap();
        let x = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cond = model.condition(&x).unwrap();
        let sxx = cov.view((0, 0), (2, 2)).into_owned();
        let sxu = cov.view((0, 2), (2, 2)).into_owned();
        let sux = cov.view((2, 0), (2, 2)).into_owned();
        let suu = cov.view((2, 2), (2, 2)).into_owned();
        let sxx_inv = sxx.try_inverse().unwrap();
        let mu_exp = mean.rows(2, 2) + &sux * &sxx_inv * (&x - mean.rows(0, 2));
        let cov_exp = &suu - &sux * &sxx_inv * &sxu;
        assert!((&cond.components[0].mean - mu_exp).norm() < 1e-10);
        assert!((&cond.components[0].covariance - cov_exp).norm() < 1e-8);
    }
}

#[test]
fn model_json_round_trip_is_exact() {
    let pts = standard_normal_samples(60, 3, 17);
    let samples = as_samples(&pts, 2, 1);
    let model = fit_gmm(&samples, 2, &EmConfig::default()).unwrap();
    let json = model.to_json();
    let back = JointGmm::from_json(&json).unwrap();
    assert_eq!(model.covariate_dim(), back.covariate_dim());
    assert_eq!(model.uncertainty_dim(), back.uncertainty_dim());
    for (a, b) in model.components().iter().zip(back.components().iter()) {
        assert_eq!(a.weight.to_bits(), b.weight.to_bits());
        for (x, y) in a.mean.iter().zip(b.mean.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.covariance.iter().zip(b.covariance.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn bic_prefers_two_components_for_bimodal_data() {
    let mut rng = ChaCha20Rng::seed_from_u64(29);
    let mut points = Vec::new();
    for i in 0..300 {
        let c = if i % 2 == 0 { -6.0 } else { 6.0 };
        points.push(DVector::from_vec(vec![
            c + rng.sample::<f64, _>(StandardNormal),
            c + rng.sample::<f64, _>(StandardNormal),
        ]));
    }
    let samples = as_samples(&points, 1, 1);
    let sweep = bic_sweep(&samples, 1..=3, &EmConfig::default()).unwrap();
    let best = sweep.iter().min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap().0;
    assert_eq!(best, 2, "sweep {sweep:?}");
}
