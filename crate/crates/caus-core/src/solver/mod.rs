//! Neutral LP/MILP abstraction.
//!
//! Problems are stated once as a [`LinearProgram`] and run against any
//! [`SolverBackend`]. The default backend is HiGHS; a small exact rational
//! simplex ([`exact::ExactSimplex`]) is available for oracle-grade checks on
//! tiny instances. The `CAUS_BACKEND` environment variable selects the
//! backend (`highs` or `exact`).

mod exact;
mod format;
mod highs_backend;
pub mod hot;

pub use exact::ExactSimplex;
pub use format::{dump_lp, parse_lp};
pub use highs_backend::HighsBackend;
pub use hot::{HotLp, HotSolution};

use thiserror::Error;

/// Variable kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConstraintSense {
    Le,
    Ge,
    Eq,
}

/// Objective sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

/// A sparse linear (or mixed-integer linear) program.
///
/// Constraints are stored as a triplet list plus per-row sense and rhs.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LinearProgram {
    pub sense: ObjectiveSense,
    /// Objective coefficient per variable.
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub kinds: Vec<VarKind>,
    /// (row, col, coeff) triplets; rows and cols must be in range.
    pub triplets: Vec<(usize, usize, f64)>,
    pub senses: Vec<ConstraintSense>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    /// An empty minimization problem.
    pub fn minimize() -> Self {
        LinearProgram {
            sense: ObjectiveSense::Minimize,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            kinds: Vec::new(),
            triplets: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
        }
    }

    /// An empty maximization problem.
    pub fn maximize() -> Self {
        LinearProgram {
            sense: ObjectiveSense::Maximize,
            ..Self::minimize()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    /// Add a variable, returning its column index.
    pub fn add_var(&mut self, obj: f64, lower: f64, upper: f64, kind: VarKind) -> usize {
        let idx = self.objective.len();
        self.objective.push(obj);
        self.lower.push(lower);
        self.upper.push(upper);
        self.kinds.push(kind);
        idx
    }

    /// Add a constraint row from (col, coeff) terms, returning its row index.
    pub fn add_row(&mut self, terms: &[(usize, f64)], sense: ConstraintSense, rhs: f64) -> usize {
        let row = self.rhs.len();
        for &(col, coeff) in terms {
            if coeff != 0.0 {
                self.triplets.push((row, col, coeff));
            }
        }
        self.senses.push(sense);
        self.rhs.push(rhs);
        row
    }

    /// Validate the structural invariants: index ranges, finite coefficients,
    /// binary bounds within [0,1].
    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        let m = self.num_rows();
        if self.lower.len() != n || self.upper.len() != n || self.kinds.len() != n {
            return Err(SolverError::InvalidProblem("variable arrays disagree on length".into()));
        }
        if self.senses.len() != m {
            return Err(SolverError::InvalidProblem("row arrays disagree on length".into()));
        }
        for (i, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(SolverError::InvalidProblem(format!("objective[{i}] not finite")));
            }
        }
        for i in 0..n {
            if self.lower[i].is_nan() || self.upper[i].is_nan() {
                return Err(SolverError::InvalidProblem(format!("bounds[{i}] contain NaN")));
            }
            if self.lower[i] > self.upper[i] {
                return Err(SolverError::InvalidProblem(format!(
                    "bounds[{i}] inverted: {} > {}",
                    self.lower[i], self.upper[i]
                )));
            }
            if self.kinds[i] == VarKind::Binary && (self.lower[i] < 0.0 || self.upper[i] > 1.0) {
                return Err(SolverError::InvalidProblem(format!(
                    "binary variable {i} has bounds outside [0,1]"
                )));
            }
        }
        for &(r, c, v) in &self.triplets {
            if r >= m || c >= n {
                return Err(SolverError::InvalidProblem(format!(
                    "triplet ({r},{c}) out of range ({m} rows, {n} cols)"
                )));
            }
            if !v.is_finite() {
                return Err(SolverError::InvalidProblem(format!(
                    "coefficient at ({r},{c}) not finite"
                )));
            }
        }
        for (i, v) in self.rhs.iter().enumerate() {
            if !v.is_finite() {
                return Err(SolverError::InvalidProblem(format!("rhs[{i}] not finite")));
            }
        }
        Ok(())
    }

    /// True if any variable is non-continuous.
    pub fn is_mip(&self) -> bool {
        self.kinds.iter().any(|k| *k != VarKind::Continuous)
    }

    /// Evaluate the activity of every row at `point`.
    pub fn row_activities(&self, point: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.num_rows()];
        for &(r, c, v) in &self.triplets {
            act[r] += v * point[c];
        }
        act
    }
}

/// Solve termination status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped at an iteration/time/node limit without proving optimality.
    Limit,
}

/// Result of a solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// Row duals; present for pure LPs only.
    pub duals: Option<Vec<f64>>,
    /// Residual relative MIP gap reported by the backend (0 for LPs).
    pub mip_gap: f64,
    /// Backend-reported statistic lines (solver name, iteration counts).
    pub stats: Vec<(String, String)>,
}

/// Options shared by all backends.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub time_limit_secs: Option<f64>,
    /// Relative MIP gap; desk-scale default is effectively exact.
    pub mip_rel_gap: f64,
    /// Primal feasibility tolerance used both by the backend and by the
    /// interface-level re-verification.
    pub feasibility_tol: f64,
    /// Integrality tolerance.
    pub integrality_tol: f64,
    /// Optional starting point (full variable vector) for MIP solves.
    pub primal_hint: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit_secs: None,
            mip_rel_gap: 1e-6,
            feasibility_tol: 1e-6,
            integrality_tol: 1e-5,
            primal_hint: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
}

/// A backend that can solve [`LinearProgram`]s.
pub trait SolverBackend {
    fn name(&self) -> &'static str;

    /// Solve the problem. Implementations must return `Optimal` only for
    /// genuinely optimal results; the interface re-verifies primal
    /// feasibility afterwards.
    fn solve_raw(
        &self,
        problem: &LinearProgram,
        options: &SolveOptions,
    ) -> Result<SolveResult, SolverError>;
}

/// Solve with interface-level validation: problem invariants before the
/// call, primal feasibility of optimal results after it.
pub fn solve(
    backend: &dyn SolverBackend,
    problem: &LinearProgram,
    options: &SolveOptions,
) -> Result<SolveResult, SolverError> {
    problem.validate()?;
    let result = backend.solve_raw(problem, options)?;
    if result.status == SolveStatus::Optimal {
        let report = check_feasibility(problem, &result.primal)?;
        if report.max_violation > options.feasibility_tol.max(1e-9) * 10.0 {
            return Err(SolverError::NumericalFailure(format!(
                "backend {} reported optimal but row {} is violated by {:.3e}",
                backend.name(),
                report.worst_row.map(|r| r as i64).unwrap_or(-1),
                report.max_violation
            )));
        }
    }
    Ok(result)
}

/// Row-by-row feasibility report for a candidate point.
#[derive(Debug, Clone)]
pub struct ViolationReport {
    pub max_violation: f64,
    pub worst_row: Option<usize>,
    /// (row, violation) for every row violated beyond 1e-9.
    pub violated_rows: Vec<(usize, f64)>,
}

/// Evaluate every row and bound at `point` and report violations.
pub fn check_feasibility(
    problem: &LinearProgram,
    point: &[f64],
) -> Result<ViolationReport, SolverError> {
    if point.len() != problem.num_vars() {
        return Err(SolverError::DimensionMismatch {
            expected: problem.num_vars(),
            got: point.len(),
        });
    }
    let activities = problem.row_activities(point);
    let mut report = ViolationReport { max_violation: 0.0, worst_row: None, violated_rows: vec![] };
    let mut note = |row: Option<usize>, v: f64| {
        if v > report.max_violation {
            report.max_violation = v;
            report.worst_row = row;
        }
        if let Some(r) = row {
            if v > 1e-9 {
                report.violated_rows.push((r, v));
            }
        }
    };
    for (r, (&act, (&sense, &rhs))) in activities
        .iter()
        .zip(problem.senses.iter().zip(problem.rhs.iter()))
        .enumerate()
    {
        let v = match sense {
            ConstraintSense::Le => act - rhs,
            ConstraintSense::Ge => rhs - act,
            ConstraintSense::Eq => (act - rhs).abs(),
        };
        note(Some(r), v.max(0.0));
    }
    for i in 0..problem.num_vars() {
        note(None, (problem.lower[i] - point[i]).max(0.0));
        note(None, (point[i] - problem.upper[i]).max(0.0));
    }
    Ok(report)
}

/// Pick a backend from the `CAUS_BACKEND` environment variable.
pub fn backend_from_env() -> Result<Box<dyn SolverBackend>, SolverError> {
    match std::env::var("CAUS_BACKEND").as_deref() {
        Err(_) | Ok("") | Ok("highs") => Ok(Box::new(HighsBackend::default())),
        Ok("exact") => Ok(Box::new(ExactSimplex::default())),
        Ok(other) => Err(SolverError::BackendUnavailable(format!("unknown backend '{other}'"))),
    }
}
