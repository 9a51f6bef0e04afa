//! Out-of-sample risk reliability of a fixed commitment.
//!
//! The recourse LP is always feasible thanks to the shed/surplus slacks, so
//! "the recourse problem remains feasible" is measured as: no slack active
//! above 1e-6 MW at the optimal dispatch.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{sample_trajectories, solved, DispatchError, MatrixForm};
use crate::solver::{SolveOptions, SolveResult};
use crate::gmm::ConditionalGmm;
use crate::solver::SolverBackend;

/// Slack activity above this many MW classifies a realization as violated.
pub const SLACK_TOL_MW: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub n_samples: usize,
    /// Fraction of realizations with a slack-free optimal recourse.
    pub reliable_fraction: f64,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub cost_p05: f64,
    pub cost_p50: f64,
    pub cost_p95: f64,
    /// Violated realizations per period (a realization can hit several).
    pub per_period_violations: Vec<usize>,
    /// Recourse-cost histogram as (bin midpoint, count) over 50 equal bins.
    pub cost_histogram: Vec<(f64, usize)>,
    /// Largest slack observed (MW).
    pub worst_slack: f64,
    pub seed: u64,
}

/// Sample `n` conditional trajectories and solve the recourse for each;
/// reliable means no shed or surplus slack above [`SLACK_TOL_MW`].
pub fn evaluate_reliability(
    form: &MatrixForm,
    x: &[f64],
    models: &[ConditionalGmm],
    n: usize,
    seed: u64,
    backend: &dyn SolverBackend,
) -> Result<ReliabilityReport, DispatchError> {
    if models.len() != form.periods() {
        return Err(DispatchError::DimensionMismatch {
            expected: form.periods(),
            got: models.len(),
        });
    }
    let trajectories = sample_trajectories(models, n, seed);
    let template = form.recourse_lp(x, &vec![DVector::zeros(models[0].dim()); form.periods()])?;
    let rhs_base = {
        let mut rhs = form.l.clone();
        for &(r, cx, coeff) in &form.e_trip {
            rhs[r] -= coeff * x[cx];
        }
        rhs
    };
    let m_dim = models[0].dim();
    let buses = form.instance.buses();
    let t_count = form.periods();

    let mut hot = if backend.name() == "highs" {
        Some(
            crate::solver::HotLp::new(&template, &SolveOptions::default())
                .map_err(DispatchError::SolverFailure)?,
        )
    } else {
        None
    };
    let mut reliable = 0usize;
    let mut costs = Vec::with_capacity(n);
    let mut per_period = vec![0usize; t_count];
    let mut worst_slack = 0.0_f64;
    for xi in &trajectories {
        let mut rhs = rhs_base.clone();
        for &(r, cxi, coeff) in &form.u_trip {
            rhs[r] -= coeff * xi[cxi / m_dim][cxi % m_dim];
        }
        let res = match hot.as_mut() {
            Some(h) => {
                let sol = h.resolve(&rhs).map_err(DispatchError::SolverFailure)?;
                SolveResult {
                    status: crate::solver::SolveStatus::Optimal,
                    objective: sol.objective,
                    primal: sol.primal,
                    duals: Some(sol.duals),
                    mip_gap: 0.0,
                    stats: vec![],
                }
            }
            None => {
                let mut lp = template.clone();
                lp.rhs = rhs;
                solved(backend, &lp)?
            }
        };
        costs.push(res.objective);
        let mut ok = true;
        for t in 0..t_count {
            let mut violated = false;
            for b in 0..buses.len() {
                let shed = res.primal[form.y_shed(b, t)];
                let spill = res.primal[form.y_spill(b, t)];
                worst_slack = worst_slack.max(shed).max(spill);
                if shed > SLACK_TOL_MW || spill > SLACK_TOL_MW {
                    violated = true;
                }
            }
            if violated {
                per_period[t] += 1;
                ok = false;
            }
        }
        if ok {
            reliable += 1;
        }
    }

    costs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = costs.iter().sum::<f64>() / n as f64;
    let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
    let pct = |p: f64| costs[(p * (n as f64 - 1.0)).round() as usize];
    let cost_histogram = {
        let bins = 50usize;
        let lo = costs[0];
        let hi = costs[n - 1].max(lo + 1e-9);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &c in &costs {
            let idx = (((c - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (lo + (i as f64 + 0.5) * width, c))
            .collect()
    };
    Ok(ReliabilityReport {
        n_samples: n,
        reliable_fraction: reliable as f64 / n as f64,
        mean_cost: mean,
        std_cost: var.sqrt(),
        cost_p05: pct(0.05),
        cost_p50: pct(0.50),
        cost_p95: pct(0.95),
        per_period_violations: per_period,
        cost_histogram,
        worst_slack,
        seed,
    })
}
