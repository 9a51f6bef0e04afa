//! EM fitting of the joint mixture with k-means++ seeding on whitened data.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{
    cholesky_with_jitter_mut, gaussian_log_density, jitter_floor, GaussianComponent, GmmError,
    JointGmm, Sample,
};
use crate::math::log_sum_exp;

/// EM configuration.
#[derive(Debug, Clone)]
pub struct EmConfig {
    /// Hard iteration cap.
    pub max_iters: usize,
    /// Stop when the relative log-likelihood improvement drops below this.
    pub tol: f64,
    /// Jitter scale relative to the average covariance diagonal; `None`
    /// disables regularization (degenerate data then errors out).
    pub jitter_scale: Option<f64>,
    /// Seed for k-means++ initialization.
    pub seed: u64,
    /// Lloyd refinement iterations after seeding.
    pub kmeans_iters: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { max_iters: 500, tol: 1e-7, jitter_scale: Some(1e-8), seed: 0, kmeans_iters: 20 }
    }
}

/// Fit a joint mixture. See [`fit_gmm_traced`] for the log-likelihood trace.
pub fn fit_gmm(samples: &[Sample], k: usize, config: &EmConfig) -> Result<JointGmm, GmmError> {
    fit_gmm_traced(samples, k, config).map(|(model, _)| model)
}

/// Fit a joint mixture, returning the per-iteration data log-likelihood
/// alongside the model (the trace is non-decreasing up to 1e-8 slack).
pub fn fit_gmm_traced(
    samples: &[Sample],
    k: usize,
    config: &EmConfig,
) -> Result<(JointGmm, Vec<f64>), GmmError> {
    if k == 0 {
        return Err(GmmError::InvalidModel("component count must be at least 1".into()));
    }
    if samples.is_empty() {
        return Err(GmmError::TooFewSamples { got: 0, need: k });
    }
    let n = samples[0].covariate.len();
    let m = samples[0].uncertainty.len();
    if n == 0 || m == 0 {
        return Err(GmmError::InvalidModel("covariate and uncertainty must be nonempty".into()));
    }
    let d = n + m;
    let need = k * (d + 1);
    if samples.len() < need {
        return Err(GmmError::TooFewSamples { got: samples.len(), need });
    }

    let mut data = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if s.covariate.len() != n {
            return Err(GmmError::DimensionMismatch { expected: n, got: s.covariate.len() });
        }
        if s.uncertainty.len() != m {
            return Err(GmmError::DimensionMismatch { expected: m, got: s.uncertainty.len() });
        }
        let z = s.stacked();
        if z.iter().any(|v| !v.is_finite()) {
            return Err(GmmError::NonFiniteInput(i));
        }
        data.push(z);
    }
    let n_samples = data.len();

    // Whiten per coordinate for seeding.
    let mut mean = DVector::<f64>::zeros(d);
    for z in &data {
        mean += z;
    }
    mean /= n_samples as f64;
    let mut std = DVector::<f64>::zeros(d);
    for z in &data {
        for j in 0..d {
            std[j] += (z[j] - mean[j]).powi(2);
        }
    }
    for j in 0..d {
        std[j] = (std[j] / n_samples as f64).sqrt();
        if std[j] == 0.0 && config.jitter_scale.is_none() {
            return Err(GmmError::DegenerateData(format!(
                "coordinate {j} is constant and jitter is disabled"
            )));
        }
    }
    let whitened: Vec<DVector<f64>> = data
        .iter()
        .map(|z| DVector::from_fn(d, |j, _| (z[j] - mean[j]) / std[j].max(1e-12)))
        .collect();

    let assignments = kmeans_assignments(&whitened, k, config);

    // Initial components from hard assignments.
    let mut components = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<usize> = (0..n_samples).filter(|&i| assignments[i] == c).collect();
        let weight = members.len() as f64 / n_samples as f64;
        let mut mu = DVector::<f64>::zeros(d);
        for &i in &members {
            mu += &data[i];
        }
        mu /= members.len().max(1) as f64;
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for &i in &members {
            let delta = &data[i] - &mu;
            cov += &delta * delta.transpose();
        }
        cov /= members.len().max(1) as f64;
        regularize(&mut cov, config)?;
        components.push(GaussianComponent { weight, mean: mu, covariance: cov });
    }

    // EM loop.
    let mut trace = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    for _iter in 0..config.max_iters {
        // E-step in log space.
        let chols: Vec<_> = components
            .iter_mut()
            .map(|c| {
                let jitter = em_jitter(&c.covariance, config);
                cholesky_with_jitter_mut(&mut c.covariance, jitter)
                    .ok_or_else(|| GmmError::DegenerateData("covariance collapsed".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut resp = vec![vec![0.0; k]; n_samples];
        let mut ll = 0.0;
        for (i, z) in data.iter().enumerate() {
            let mut logs = Vec::with_capacity(k);
            for (c, comp) in components.iter().enumerate() {
                logs.push(comp.weight.ln() + gaussian_log_density(&comp.mean, &chols[c], z));
            }
            let lse = log_sum_exp(&logs);
            ll += lse;
            for c in 0..k {
                resp[i][c] = if lse.is_finite() { (logs[c] - lse).exp() } else { 1.0 / k as f64 };
            }
        }
        trace.push(ll);

        // M-step.
        for c in 0..k {
            let nk: f64 = (0..n_samples).map(|i| resp[i][c]).sum();
            let nk_safe = nk.max(1e-300);
            let mut mu = DVector::<f64>::zeros(d);
            for i in 0..n_samples {
                mu += resp[i][c] * &data[i];
            }
            mu /= nk_safe;
            let mut cov = DMatrix::<f64>::zeros(d, d);
            for i in 0..n_samples {
                let delta = &data[i] - &mu;
                cov += resp[i][c] * &delta * delta.transpose();
            }
            cov /= nk_safe;
            regularize(&mut cov, config)?;
            components[c] = GaussianComponent { weight: nk / n_samples as f64, mean: mu, covariance: cov };
        }

        let rel = (ll - prev_ll).abs() / prev_ll.abs().max(1.0);
        if prev_ll.is_finite() && rel < config.tol {
            break;
        }
        prev_ll = ll;
    }

    // Renormalize weights against accumulated roundoff.
    let total: f64 = components.iter().map(|c| c.weight).sum();
    for c in components.iter_mut() {
        c.weight /= total;
    }
    let model = JointGmm::new(components, n, m)?;
    Ok((model, trace))
}

/// BIC over a range of component counts. Lower is better.
pub fn bic_sweep(
    samples: &[Sample],
    k_range: std::ops::RangeInclusive<usize>,
    config: &EmConfig,
) -> Result<Vec<(usize, f64)>, GmmError> {
    let mut out = Vec::new();
    for k in k_range {
        let (model, trace) = fit_gmm_traced(samples, k, config)?;
        let ll = *trace.last().unwrap_or(&f64::NEG_INFINITY);
        let d = (model.covariate_dim() + model.uncertainty_dim()) as f64;
        // Free parameters: (k-1) weights + k*d means + k*d(d+1)/2 covariances.
        let params = (k as f64 - 1.0) + k as f64 * d + k as f64 * d * (d + 1.0) / 2.0;
        let bic = params * (samples.len() as f64).ln() - 2.0 * ll;
        out.push((k, bic));
    }
    Ok(out)
}

fn em_jitter(cov: &DMatrix<f64>, config: &EmConfig) -> f64 {
    match config.jitter_scale {
        Some(scale) => {
            let d = cov.nrows();
            let avg: f64 = (0..d).map(|i| cov[(i, i)].abs()).sum::<f64>() / d as f64;
            (scale * avg).max(1e-300)
        }
        None => 0.0,
    }
}

/// Guarantee minimum eigenvalue >= jitter by an unconditional diagonal bump
/// (sample covariances are PSD, so PSD + jitter*I is PD by construction).
fn regularize(cov: &mut DMatrix<f64>, config: &EmConfig) -> Result<(), GmmError> {
    match config.jitter_scale {
        Some(_) => {
            let j = em_jitter(cov, config).max(jitter_floor(cov));
            let d = cov.nrows();
            for i in 0..d {
                cov[(i, i)] += j;
            }
            Ok(())
        }
        None => {
            if nalgebra::Cholesky::new(cov.clone()).is_none() {
                return Err(GmmError::DegenerateData(
                    "singular covariance and jitter disabled".into(),
                ));
            }
            Ok(())
        }
    }
}

/// k-means++ seeding plus a few Lloyd iterations, all on whitened data.
fn kmeans_assignments(data: &[DVector<f64>], k: usize, config: &EmConfig) -> Vec<usize> {
    let n = data.len();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut centers: Vec<DVector<f64>> = Vec::with_capacity(k);
    centers.push(data[rng.random_range(0..n)].clone());
    let mut dist2: Vec<f64> = data.iter().map(|z| (z - &centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = dist2.iter().sum();
        let pick = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let target: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, &d2) in dist2.iter().enumerate() {
                acc += d2;
                if target <= acc {
                    idx = i;
                    break;
                }
            }
            idx
        };
        centers.push(data[pick].clone());
        for (i, z) in data.iter().enumerate() {
            dist2[i] = dist2[i].min((z - centers.last().unwrap()).norm_squared());
        }
    }

    let mut assignments = vec![0usize; n];
    for _ in 0..config.kmeans_iters {
        let mut changed = false;
        for (i, z) in data.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d2 = (z - center).norm_squared();
                if d2 < best_d {
                    best_d = d2;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        // Recompute centers; an emptied cluster steals the farthest point of
        // the most populous one.
        let mut counts = vec![0usize; k];
        let dim = data[0].len();
        let mut sums = vec![DVector::<f64>::zeros(dim); k];
        for (i, z) in data.iter().enumerate() {
            counts[assignments[i]] += 1;
            sums[assignments[i]] += z;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let donor =
                    (0..k).max_by_key(|&cc| counts[cc]).expect("at least one cluster nonempty");
                let far = (0..n)
                    .filter(|&i| assignments[i] == donor)
                    .max_by(|&a, &b| {
                        let da = (&data[a] - &centers[donor]).norm_squared();
                        let db = (&data[b] - &centers[donor]).norm_squared();
                        da.partial_cmp(&db).unwrap()
                    })
                    .expect("donor cluster nonempty");
                assignments[far] = c;
                counts[donor] -= 1;
                counts[c] = 1;
                sums[donor] -= &data[far];
                sums[c] = data[far].clone();
                changed = true;
            }
        }
        for c in 0..k {
            centers[c] = &sums[c] / counts[c] as f64;
        }
        if !changed {
            break;
        }
    }
    assignments
}
