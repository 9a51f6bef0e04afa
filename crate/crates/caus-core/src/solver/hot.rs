//! Repeated LP solves that differ only in their right-hand sides.
//!
//! Scenario evaluation and vertex enumeration solve the same dispatch LP
//! thousands of times with fresh rhs vectors. Rebuilding the model each time
//! wastes almost all of the solve budget, so this wrapper keeps one HiGHS
//! instance alive, rewrites the row bounds in place, and re-runs; HiGHS
//! warm-starts the dual simplex from the previous basis.

use std::os::raw::c_void;

use super::{ConstraintSense, LinearProgram, ObjectiveSense, SolveOptions, SolverError};

#[cfg(test)]
use super::VarKind;

/// A HiGHS model pinned for rhs-only resolves. LP only (no integrality).
pub struct HotLp {
    solved: highs::SolvedModel,
    senses: Vec<ConstraintSense>,
    num_vars: usize,
    num_rows: usize,
    sense_sign: f64,
}

/// One resolve outcome: objective, primal values, row duals.
pub struct HotSolution {
    pub objective: f64,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
}

impl HotLp {
    /// Build and solve once; later rhs swaps reuse the basis.
    pub fn new(lp: &LinearProgram, options: &SolveOptions) -> Result<HotLp, SolverError> {
        if lp.is_mip() {
            return Err(SolverError::InvalidProblem(
                "hot resolves support continuous LPs only".into(),
            ));
        }
        lp.validate()?;
        let backend = super::HighsBackend;
        let model = backend.build_model(lp, options)?;
        let mut solved = model.solve();
        // Basis reuse makes re-presolving counterproductive for rhs swaps.
        unsafe {
            highs_sys::Highs_setStringOptionValue(
                solved.as_mut_ptr(),
                c"presolve".as_ptr(),
                c"off".as_ptr(),
            );
        }
        Ok(HotLp {
            solved,
            senses: lp.senses.clone(),
            num_vars: lp.num_vars(),
            num_rows: lp.num_rows(),
            sense_sign: match lp.sense {
                ObjectiveSense::Minimize => 1.0,
                ObjectiveSense::Maximize => 1.0,
            },
        })
    }

    /// Swap the rhs and re-solve. Returns `None` for non-optimal statuses
    /// (infeasible or unbounded rhs configurations).
    pub fn resolve(&mut self, rhs: &[f64]) -> Result<HotSolution, SolverError> {
        if rhs.len() != self.num_rows {
            return Err(SolverError::DimensionMismatch {
                expected: self.num_rows,
                got: rhs.len(),
            });
        }
        let ptr = self.solved.as_mut_ptr();
        unsafe {
            for (r, &v) in rhs.iter().enumerate() {
                let (lo, hi) = match self.senses[r] {
                    ConstraintSense::Le => (f64::NEG_INFINITY, v),
                    ConstraintSense::Ge => (v, f64::INFINITY),
                    ConstraintSense::Eq => (v, v),
                };
                let status =
                    highs_sys::Highs_changeRowBounds(ptr, r as highs_sys::HighsInt, lo, hi);
                if status == highs_sys::STATUS_ERROR {
                    return Err(SolverError::NumericalFailure(
                        "Highs_changeRowBounds failed".into(),
                    ));
                }
            }
            if highs_sys::Highs_run(ptr) == highs_sys::STATUS_ERROR {
                return Err(SolverError::NumericalFailure("Highs_run failed".into()));
            }
            let status = highs_sys::Highs_getModelStatus(ptr);
            if status != highs_sys::MODEL_STATUS_OPTIMAL {
                return Err(SolverError::NumericalFailure(format!(
                    "hot resolve terminated with HiGHS status {status}"
                )));
            }
            let mut primal = vec![0.0; self.num_vars];
            let mut col_dual = vec![0.0; self.num_vars];
            let mut row_value = vec![0.0; self.num_rows];
            let mut duals = vec![0.0; self.num_rows];
            highs_sys::Highs_getSolution(
                ptr,
                primal.as_mut_ptr(),
                col_dual.as_mut_ptr(),
                row_value.as_mut_ptr(),
                duals.as_mut_ptr(),
            );
            let objective = highs_sys::Highs_getObjectiveValue(ptr) * self.sense_sign;
            Ok(HotSolution { objective, primal, duals })
        }
    }
}

// SAFETY: the HiGHS instance is exclusively owned and all access goes
// through &mut self.
unsafe impl Send for HotLp {}

#[allow(unused)]
fn _assert_ptr_type(p: *mut c_void) -> *mut c_void {
    p
}
