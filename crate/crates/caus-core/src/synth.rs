//! Synthetic (covariate, wind) history generator for demos and tests.
//!
//! The generating process is a two-regime mixture over a scalar covariate
//! (total day-ahead wind forecast, MW) and a per-farm output vector: regime A
//! allocates the total as a 70/30 split across the two farms, regime B as
//! 30/70, both with independent farm noise. Conditioning on the covariate
//! pins the level but not the allocation regime, so the conditional law stays
//! bimodal - the shape contextual sets are built to exploit.

use nalgebra::{DMatrix, DVector};

use crate::gmm::{ConditionalGmm, GaussianComponent, GmmError, JointGmm, Sample};

/// Parameters of the two-regime generator.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// Mean of the total-forecast covariate (MW).
    pub forecast_mean: f64,
    /// Standard deviation of the covariate (MW).
    pub forecast_std: f64,
    /// Farm share of regime A (regime B gets the mirrored split).
    pub split: f64,
    /// Per-farm noise standard deviation (MW).
    pub farm_noise_std: f64,
    /// Regime A weight.
    pub weight_a: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            forecast_mean: 50.0,
            forecast_std: 15.0,
            split: 0.7,
            farm_noise_std: 3.0,
            weight_a: 0.5,
        }
    }
}

impl SynthConfig {
    /// The exact joint mixture this generator draws from (n = 1 covariate,
    /// m = 2 farms). With `xi_i = s_i x + eps_i`, the blocks are
    /// `Cov(x, xi_i) = s_i Var(x)`, `Cov(xi_i, xi_j) = s_i s_j Var(x) +
    /// delta_ij sigma_eps^2`; the conditional covariance collapses to
    /// `sigma_eps^2 I`.
    pub fn ground_truth(&self) -> Result<JointGmm, GmmError> {
        let vx = self.forecast_std * self.forecast_std;
        let ve = self.farm_noise_std * self.farm_noise_std;
        let component = |weight: f64, s1: f64, s2: f64| {
            let mean = DVector::from_vec(vec![
                self.forecast_mean,
                s1 * self.forecast_mean,
                s2 * self.forecast_mean,
            ]);
            let cov = DMatrix::from_row_slice(
                3,
                3,
                &[
                    vx,
                    s1 * vx,
                    s2 * vx,
                    s1 * vx,
                    s1 * s1 * vx + ve,
                    s1 * s2 * vx,
                    s2 * vx,
                    s1 * s2 * vx,
                    s2 * s2 * vx + ve,
                ],
            );
            GaussianComponent { weight, mean, covariance: cov }
        };
        JointGmm::new(
            vec![
                component(self.weight_a, self.split, 1.0 - self.split),
                component(1.0 - self.weight_a, 1.0 - self.split, self.split),
            ],
            1,
            2,
        )
    }

    /// The exact conditional law at total forecast `x`: two components with
    /// means `(s x, (1-s) x)` and `((1-s) x, s x)`, covariance
    /// `sigma_eps^2 I`.
    pub fn conditional_at(&self, x: f64) -> Result<ConditionalGmm, GmmError> {
        let ve = self.farm_noise_std * self.farm_noise_std;
        let cov = DMatrix::identity(2, 2) * ve;
        ConditionalGmm::from_parts(
            vec![
                (
                    self.weight_a,
                    DVector::from_vec(vec![self.split * x, (1.0 - self.split) * x]),
                    cov.clone(),
                ),
                (
                    1.0 - self.weight_a,
                    DVector::from_vec(vec![(1.0 - self.split) * x, self.split * x]),
                    cov,
                ),
            ],
            DVector::from_vec(vec![x]),
        )
    }

    /// Draw a history of `count` rows, cycling `periods` period labels.
    /// Deterministic per seed.
    pub fn generate(&self, count: usize, periods: usize, seed: u64) -> Vec<Sample> {
        let truth = self.ground_truth().expect("generator parameters are valid");
        truth
            .sample_joint(count, seed)
            .into_iter()
            .enumerate()
            .map(|(i, z)| Sample {
                covariate: z.rows(0, 1).into_owned(),
                uncertainty: z.rows(1, 2).into_owned(),
                period_index: i % periods + 1,
            })
            .collect()
    }
}

/// Write samples as the history CSV: `period, covariate_1..n, uncertainty_1..m`.
pub fn history_to_csv(samples: &[Sample]) -> String {
    let n = samples[0].covariate.len();
    let m = samples[0].uncertainty.len();
    let mut out = String::from("period");
    for i in 1..=n {
        out.push_str(&format!(",covariate_{i}"));
    }
    for i in 1..=m {
        out.push_str(&format!(",uncertainty_{i}"));
    }
    out.push('\n');
    for s in samples {
        out.push_str(&s.period_index.to_string());
        for v in s.covariate.iter() {
            out.push_str(&format!(",{v}"));
        }
        for v in s.uncertainty.iter() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Parse the history CSV back into samples.
pub fn history_from_csv(text: &str) -> Result<Vec<Sample>, String> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or("empty history file")?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"period") {
        return Err("first column must be 'period'".into());
    }
    let n = cols.iter().filter(|c| c.starts_with("covariate_")).count();
    let m = cols.iter().filter(|c| c.starts_with("uncertainty_")).count();
    if n == 0 || m == 0 || cols.len() != 1 + n + m {
        return Err(format!(
            "header must be period, covariate_1..n, uncertainty_1..m; got {} columns",
            cols.len()
        ));
    }
    let mut samples = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 1 + n + m {
            return Err(format!("line {}: expected {} fields, got {}", lineno + 1, 1 + n + m, fields.len()));
        }
        let period: usize = fields[0]
            .parse()
            .map_err(|e| format!("line {}: bad period: {e}", lineno + 1))?;
        let parse = |s: &str| -> Result<f64, String> {
            s.parse::<f64>().map_err(|e| format!("line {}: bad number '{s}': {e}", lineno + 1))
        };
        let covariate = fields[1..1 + n].iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?;
        let uncertainty =
            fields[1 + n..].iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?;
        samples.push(Sample::new(covariate, uncertainty, period));
    }
    if samples.is_empty() {
        return Err("history has no data rows".into());
    }
    Ok(samples)
}
