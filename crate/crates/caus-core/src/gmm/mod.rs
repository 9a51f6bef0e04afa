//! Joint Gaussian mixture over stacked (covariate, uncertainty) vectors and
//! its conditioning on an observed covariate.
//!
//! The joint density is a K-component mixture with block covariance
//!
//! ```text
//! Sigma = [ Sxx  Sxu ]
//!         [ Sux  Suu ]
//! ```
//!
//! Conditioning on the covariate x keeps the mixture form: weights become the
//! posterior responsibilities of x under each component's covariate marginal,
//! means shift by `Sux Sxx^-1 (x - mu_x)`, and covariances shrink to the Schur
//! complement `Suu - Sux Sxx^-1 Sxu`, independent of x.

mod em;
mod wire;

pub use em::{bic_sweep, fit_gmm, fit_gmm_traced, EmConfig};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::math::log_sum_exp;

/// One historical (covariate, uncertainty) observation.
#[derive(Debug, Clone)]
pub struct Sample {
    pub covariate: DVector<f64>,
    pub uncertainty: DVector<f64>,
    /// 1-based dispatch period this row was observed in.
    pub period_index: usize,
}

impl Sample {
    pub fn new(covariate: Vec<f64>, uncertainty: Vec<f64>, period_index: usize) -> Self {
        Sample {
            covariate: DVector::from_vec(covariate),
            uncertainty: DVector::from_vec(uncertainty),
            period_index,
        }
    }

    /// Stacked (covariate, uncertainty) vector.
    pub fn stacked(&self) -> DVector<f64> {
        let mut z = DVector::zeros(self.covariate.len() + self.uncertainty.len());
        z.rows_mut(0, self.covariate.len()).copy_from(&self.covariate);
        z.rows_mut(self.covariate.len(), self.uncertainty.len()).copy_from(&self.uncertainty);
        z
    }
}

/// One component of the joint mixture.
#[derive(Debug, Clone)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianComponent {
    /// Validate weight positivity, symmetry, and near-PSD-ness
    /// (eigenvalues >= -1e-10 before regularization).
    pub fn validate(&self) -> Result<(), GmmError> {
        if !(self.weight > 0.0) {
            return Err(GmmError::InvalidModel("component weight must be positive".into()));
        }
        let d = self.mean.len();
        if self.covariance.nrows() != d || self.covariance.ncols() != d {
            return Err(GmmError::DimensionMismatch { expected: d, got: self.covariance.nrows() });
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (self.covariance[(i, j)] - self.covariance[(j, i)]).abs()
                    > 1e-8 * (1.0 + self.covariance[(i, j)].abs())
                {
                    return Err(GmmError::InvalidModel("covariance not symmetric".into()));
                }
            }
        }
        let eig = self.covariance.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l < -1e-10) {
            return Err(GmmError::InvalidModel("covariance has eigenvalue below -1e-10".into()));
        }
        Ok(())
    }
}

/// K-component joint mixture with covariate dimension `n` and uncertainty
/// dimension `m`. Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct JointGmm {
    components: Vec<GaussianComponent>,
    n: usize,
    m: usize,
}

/// Which density a point is evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensitySpace {
    /// Full (n+m)-dimensional joint density.
    Joint,
    /// n-dimensional covariate marginal.
    CovariateMarginal,
}

#[derive(Debug, Error)]
pub enum GmmError {
    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("non-finite input at sample {0}")]
    NonFiniteInput(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular covariate block in component {component}")]
    SingularCovariateBlock { component: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("serialization: {0}")]
    Serialization(String),
}

impl JointGmm {
    /// Build from parts, validating the invariants: weights sum to one,
    /// consistent dimensions, every covariate block factorizable.
    pub fn new(
        components: Vec<GaussianComponent>,
        n: usize,
        m: usize,
    ) -> Result<JointGmm, GmmError> {
        if components.is_empty() {
            return Err(GmmError::InvalidModel("need at least one component".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GmmError::InvalidModel(format!("weights sum to {total}, not 1")));
        }
        for c in &components {
            c.validate()?;
            if c.mean.len() != n + m {
                return Err(GmmError::DimensionMismatch { expected: n + m, got: c.mean.len() });
            }
        }
        let model = JointGmm { components, n, m };
        for k in 0..model.components.len() {
            let sxx = model.covariate_block(k);
            if cholesky_with_jitter(&sxx, 1e-12).is_none() {
                return Err(GmmError::SingularCovariateBlock { component: k });
            }
        }
        Ok(model)
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn covariate_dim(&self) -> usize {
        self.n
    }

    pub fn uncertainty_dim(&self) -> usize {
        self.m
    }

    fn covariate_block(&self, k: usize) -> DMatrix<f64> {
        self.components[k].covariance.view((0, 0), (self.n, self.n)).into_owned()
    }

    /// Log mixture density of `point`, in the joint space or the covariate
    /// marginal, combined with log-sum-exp.
    pub fn log_density(&self, point: &DVector<f64>, space: DensitySpace) -> Result<f64, GmmError> {
        let want = match space {
            DensitySpace::Joint => self.n + self.m,
            DensitySpace::CovariateMarginal => self.n,
        };
        if point.len() != want {
            return Err(GmmError::DimensionMismatch { expected: want, got: point.len() });
        }
        let mut terms = Vec::with_capacity(self.k());
        for (k, comp) in self.components.iter().enumerate() {
            let (mean, cov) = match space {
                DensitySpace::Joint => (comp.mean.clone(), comp.covariance.clone()),
                DensitySpace::CovariateMarginal => {
                    (comp.mean.rows(0, self.n).into_owned(), self.covariate_block(k))
                }
            };
            let chol = cholesky_with_jitter(&cov, 1e-12)
                .ok_or(GmmError::SingularCovariateBlock { component: k })?;
            terms.push(comp.weight.ln() + gaussian_log_density(&mean, &chol, point));
        }
        Ok(log_sum_exp(&terms))
    }

    /// Condition on an observed covariate. Weights follow the posterior
    /// responsibilities of `x`, means and covariances the block formulas.
    pub fn condition(&self, x: &DVector<f64>) -> Result<ConditionalGmm, GmmError> {
        if x.len() != self.n {
            return Err(GmmError::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let kc = self.k();
        let mut log_weights = Vec::with_capacity(kc);
        let mut means = Vec::with_capacity(kc);
        let mut covs = Vec::with_capacity(kc);
        for (k, comp) in self.components.iter().enumerate() {
            let mu_x = comp.mean.rows(0, self.n).into_owned();
            let mu_u = comp.mean.rows(self.n, self.m).into_owned();
            let sxx = self.covariate_block(k);
            let sxu = comp.covariance.view((0, self.n), (self.n, self.m)).into_owned();
            let sux = comp.covariance.view((self.n, 0), (self.m, self.n)).into_owned();
            let suu = comp.covariance.view((self.n, self.n), (self.m, self.m)).into_owned();

            let chol_xx = cholesky_with_jitter(&sxx, jitter_floor(&sxx))
                .ok_or(GmmError::SingularCovariateBlock { component: k })?;
            log_weights.push(comp.weight.ln() + gaussian_log_density(&mu_x, &chol_xx, x));

            // Sxx^-1 (x - mu_x) and Sxx^-1 Sxu via the factorization.
            let delta = x - &mu_x;
            let solve_vec = chol_xx.solve(&delta);
            means.push(&mu_u + &sux * solve_vec);
            let solve_mat = chol_xx.solve(&sxu);
            let mut cc = &suu - &sux * solve_mat;
            // Symmetrize against roundoff.
            cc = 0.5 * (&cc + cc.transpose());
            covs.push(cc);
        }

        let lse = log_sum_exp(&log_weights);
        let mut fell_back = false;
        let weights: Vec<f64> = if lse.is_finite() {
            log_weights.iter().map(|lw| (lw - lse).exp()).collect()
        } else {
            // Every covariate likelihood underflowed; fall back to priors.
            fell_back = true;
            self.components.iter().map(|c| c.weight).collect()
        };

        let mut components = Vec::with_capacity(kc);
        for k in 0..kc {
            let comp = ConditionalComponent::new(weights[k], means[k].clone(), covs[k].clone())?;
            components.push(comp);
        }
        Ok(ConditionalGmm {
            components,
            conditioning_covariate: x.clone(),
            weights_fell_back_to_prior: fell_back,
        })
    }

    /// Draw joint samples (used by demos and tests). Deterministic per seed.
    pub fn sample_joint(&self, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let chols: Vec<DMatrix<f64>> = self
            .components
            .iter()
            .map(|c| {
                cholesky_with_jitter(&c.covariance, jitter_floor(&c.covariance))
                    .expect("validated covariance")
                    .l()
            })
            .collect();
        (0..count).map(|_| draw_mixture(&mut rng, &self.components, &chols, self.n + self.m)).collect()
    }
}

fn draw_mixture(
    rng: &mut ChaCha20Rng,
    comps: &[GaussianComponent],
    chols: &[DMatrix<f64>],
    dim: usize,
) -> DVector<f64> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = comps.len() - 1;
    for (k, c) in comps.iter().enumerate() {
        acc += c.weight;
        if u <= acc {
            pick = k;
            break;
        }
    }
    let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    &comps[pick].mean + &chols[pick] * z
}

/// One component of a conditional mixture; the Cholesky factor of its
/// covariance is cached at construction for score and sampling duty.
#[derive(Debug, Clone)]
pub struct ConditionalComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    cholesky: DMatrix<f64>,
}

impl ConditionalComponent {
    pub fn new(
        weight: f64,
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
    ) -> Result<Self, GmmError> {
        let mut cov = covariance;
        let floor = jitter_floor(&cov);
        let chol = match cholesky_with_jitter_mut(&mut cov, floor) {
            Some(c) => c,
            None => {
                return Err(GmmError::InvalidModel(
                    "conditional covariance not positive definite".into(),
                ))
            }
        };
        Ok(ConditionalComponent { weight, mean, covariance: cov, cholesky: chol.l() })
    }

    /// Lower-triangular factor L with covariance = L L^T.
    pub fn cholesky_l(&self) -> &DMatrix<f64> {
        &self.cholesky
    }

    /// Squared Mahalanobis distance of `point` to this component, computed by
    /// a triangular solve against the cached factor.
    pub fn mahalanobis_sq(&self, point: &DVector<f64>) -> f64 {
        let delta = point - &self.mean;
        let y = self
            .cholesky
            .solve_lower_triangular(&delta)
            .expect("cached Cholesky factor is nonsingular");
        y.norm_squared()
    }
}

/// Per-period mixture over the uncertainty given an observed covariate.
#[derive(Debug, Clone)]
pub struct ConditionalGmm {
    pub components: Vec<ConditionalComponent>,
    pub conditioning_covariate: DVector<f64>,
    /// True when every covariate likelihood underflowed and the prior weights
    /// were used instead (flagged to the caller, who should warn).
    pub weights_fell_back_to_prior: bool,
}

impl ConditionalGmm {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    /// Build directly from (weight, mean, covariance) triples; used for known
    /// synthetic models in tests and demos.
    pub fn from_parts(
        parts: Vec<(f64, DVector<f64>, DMatrix<f64>)>,
        conditioning_covariate: DVector<f64>,
    ) -> Result<Self, GmmError> {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GmmError::InvalidModel(format!("weights sum to {total}, not 1")));
        }
        let components = parts
            .into_iter()
            .map(|(w, mu, cov)| ConditionalComponent::new(w, mu, cov))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ConditionalGmm {
            components,
            conditioning_covariate,
            weights_fell_back_to_prior: false,
        })
    }

    /// Mixture mean of the conditional distribution.
    pub fn mean(&self) -> DVector<f64> {
        let mut mu = DVector::zeros(self.dim());
        for c in &self.components {
            mu += c.weight * &c.mean;
        }
        mu
    }

    /// Draw i.i.d. conditional samples: component index from the weights,
    /// then a multivariate normal via the cached Cholesky factor.
    /// Bit-for-bit deterministic for a fixed seed.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let dim = self.dim();
        (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = self.components.len() - 1;
                for (k, c) in self.components.iter().enumerate() {
                    acc += c.weight;
                    if u <= acc {
                        pick = k;
                        break;
                    }
                }
                let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                &self.components[pick].mean + self.components[pick].cholesky_l() * z
            })
            .collect()
    }
}

/// Log density of N(mean, L L^T) at `point` given the Cholesky factorization.
pub(crate) fn gaussian_log_density(
    mean: &DVector<f64>,
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    point: &DVector<f64>,
) -> f64 {
    let d = mean.len() as f64;
    let l = chol.l_dirty();
    let mut log_det = 0.0;
    for i in 0..mean.len() {
        log_det += l[(i, i)].ln();
    }
    let delta = point - mean;
    let y = l
        .solve_lower_triangular(&delta)
        .expect("Cholesky factor is nonsingular");
    -0.5 * d * (2.0 * std::f64::consts::PI).ln() - log_det - 0.5 * y.norm_squared()
}

/// Default jitter: 1e-8 times the average diagonal magnitude.
pub(crate) fn jitter_floor(cov: &DMatrix<f64>) -> f64 {
    let d = cov.nrows();
    if d == 0 {
        return 1e-12;
    }
    let avg: f64 = (0..d).map(|i| cov[(i, i)].abs()).sum::<f64>() / d as f64;
    (1e-8 * avg).max(1e-300)
}

/// Cholesky with escalating jitter: returns the factorization of
/// `cov + t * I` for the smallest tried `t` in {0, j, 10j, ...} that works.
pub(crate) fn cholesky_with_jitter(
    cov: &DMatrix<f64>,
    jitter: f64,
) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let mut work = cov.clone();
    cholesky_with_jitter_mut(&mut work, jitter)
}

/// As [`cholesky_with_jitter`], but writes the regularized matrix back so the
/// caller keeps the exact covariance that was factorized.
pub(crate) fn cholesky_with_jitter_mut(
    cov: &mut DMatrix<f64>,
    jitter: f64,
) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = nalgebra::Cholesky::new(cov.clone()) {
        return Some(c);
    }
    let d = cov.nrows();
    let mut t = jitter.max(1e-300);
    for _ in 0..40 {
        let mut work = cov.clone();
        for i in 0..d {
            work[(i, i)] += t;
        }
        if let Some(c) = nalgebra::Cholesky::new(work.clone()) {
            *cov = work;
            return Some(c);
        }
        t *= 10.0;
    }
    None
}

#[cfg(test)]
mod tests;
