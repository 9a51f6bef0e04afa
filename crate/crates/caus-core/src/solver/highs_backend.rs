//! HiGHS-backed implementation of the solver interface.

use highs::{HighsModelStatus, RowProblem, Sense};

use super::{
    ConstraintSense, LinearProgram, ObjectiveSense, SolveOptions, SolveResult, SolveStatus,
    SolverBackend, SolverError, VarKind,
};

/// The mandatory open-source backend.
#[derive(Debug, Default, Clone)]
pub struct HighsBackend;

impl HighsBackend {
    /// Translate a problem into a configured, unsolved HiGHS model.
    pub(crate) fn build_model(
        &self,
        problem: &LinearProgram,
        options: &SolveOptions,
    ) -> Result<highs::Model, SolverError> {
        let n = problem.num_vars();
        let m = problem.num_rows();
        let mut pb = RowProblem::new();
        let mut cols = Vec::with_capacity(n);
        for i in 0..n {
            let col = match problem.kinds[i] {
                VarKind::Continuous => {
                    pb.add_column(problem.objective[i], problem.lower[i]..=problem.upper[i])
                }
                VarKind::Binary => pb.add_integer_column(
                    problem.objective[i],
                    problem.lower[i]..=problem.upper[i],
                ),
            };
            cols.push(col);
        }

        // Gather row coefficients; duplicate (row, col) entries are summed.
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for &(r, c, v) in &problem.triplets {
            rows[r].push((c, v));
        }
        for r in 0..m {
            rows[r].sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(highs::Col, f64)> = Vec::with_capacity(rows[r].len());
            for &(c, v) in &rows[r] {
                match merged.last_mut() {
                    Some(last) if last.0 == cols[c] => last.1 += v,
                    _ => merged.push((cols[c], v)),
                }
            }
            let rhs = problem.rhs[r];
            match problem.senses[r] {
                ConstraintSense::Le => pb.add_row(..=rhs, merged),
                ConstraintSense::Ge => pb.add_row(rhs.., merged),
                ConstraintSense::Eq => pb.add_row(rhs..=rhs, merged),
            };
        }

        let sense = match problem.sense {
            ObjectiveSense::Minimize => Sense::Minimise,
            ObjectiveSense::Maximize => Sense::Maximise,
        };
        let mut model = pb
            .try_optimise(sense)
            .map_err(|s| SolverError::BackendUnavailable(format!("HiGHS rejected problem: {s:?}")))?;
        if std::env::var("CAUS_SOLVER_LOG").is_ok() {
            model.set_option("output_flag", true);
            model.set_option("log_to_console", true);
        } else {
            model.make_quiet();
        }
        model.set_option("mip_rel_gap", options.mip_rel_gap);
        model.set_option("primal_feasibility_tolerance", options.feasibility_tol.min(1e-7));
        model.set_option("mip_feasibility_tolerance", options.integrality_tol.min(1e-6));
        // Determinism: keep HiGHS single-threaded.
        model.set_option("threads", 1i32);
        model.set_option("parallel", "off");
        if let Some(t) = options.time_limit_secs {
            model.set_option("time_limit", t);
        }

        if let Some(hint) = &options.primal_hint {
            if hint.len() == n {
                let _ = model.try_set_solution(Some(hint), None, None, None);
            }
        }
        Ok(model)
    }
}

impl SolverBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve_raw(
        &self,
        problem: &LinearProgram,
        options: &SolveOptions,
    ) -> Result<SolveResult, SolverError> {
        let n = problem.num_vars();
        let is_mip = problem.is_mip();
        let model = self.build_model(problem, options)?;
        let solved = model.solve();
        let status = match solved.status() {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
                SolveStatus::Unbounded
            }
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit => SolveStatus::Limit,
            other => {
                return Err(SolverError::NumericalFailure(format!(
                    "HiGHS terminated with status {other:?}"
                )))
            }
        };

        let (objective, primal, duals) = if status == SolveStatus::Optimal {
            let sol = solved.get_solution();
            let primal = sol.columns().to_vec();
            let duals = if is_mip { None } else { Some(sol.dual_rows().to_vec()) };
            (solved.objective_value(), primal, duals)
        } else {
            (f64::NAN, vec![0.0; n], None)
        };

        let mip_gap = if is_mip && status == SolveStatus::Optimal {
            let g = solved.mip_gap();
            if g.is_finite() {
                g
            } else {
                0.0
            }
        } else {
            0.0
        };
        let stats = vec![("backend".to_string(), "highs".to_string())];
        Ok(SolveResult { status, objective, primal, duals, mip_gap, stats })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve;

    #[test]
    fn small_mip_with_binary_selection() {
        // max 3a + 2b, a + b <= 1, binaries: picks a.
        let mut lp = LinearProgram::maximize();
        let a = lp.add_var(3.0, 0.0, 1.0, VarKind::Binary);
        let b = lp.add_var(2.0, 0.0, 1.0, VarKind::Binary);
        lp.add_row(&[(a, 1.0), (b, 1.0)], ConstraintSense::Le, 1.0);
        let res = solve(&HighsBackend, &lp, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective - 3.0).abs() < 1e-6);
        assert!((res.primal[a] - 1.0).abs() < 1e-6);
        assert!(res.primal[b].abs() < 1e-6);
        assert!(res.duals.is_none());
    }

    #[test]
    fn lp_duality_gap_is_tight() {
        // min 2x + 3y s.t. x + y >= 4, x - y <= 2, x,y >= 0
        let mut lp = LinearProgram::minimize();
        let x = lp.add_var(2.0, 0.0, f64::INFINITY, VarKind::Continuous);
        let y = lp.add_var(3.0, 0.0, f64::INFINITY, VarKind::Continuous);
        lp.add_row(&[(x, 1.0), (y, 1.0)], ConstraintSense::Ge, 4.0);
        lp.add_row(&[(x, 1.0), (y, -1.0)], ConstraintSense::Le, 2.0);
        let res = solve(&HighsBackend, &lp, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        // Both rows bind: x=3, y=1.
        assert!((res.objective - 9.0).abs() < 1e-8);
        // dual objective = sum dual_i * rhs_i (variable bounds inactive)
        let duals = res.duals.as_ref().unwrap();
        let dual_obj: f64 = duals[0] * 4.0 + duals[1] * 2.0;
        assert!((dual_obj - res.objective).abs() < 1e-6);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::maximize();
        let _x = lp.add_var(1.0, 0.0, f64::INFINITY, VarKind::Continuous);
        let res = solve(&HighsBackend, &lp, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Unbounded);
    }
}
