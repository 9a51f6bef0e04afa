//! Exact rational two-phase simplex for small oracle problems.
//!
//! Every coefficient is converted to an exact `BigRational`, so the optimum
//! is free of floating-point error. Bland's rule prevents cycling. Capped at
//! 50 variables / 60 rows; larger problems belong on the HiGHS backend.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::{
    ConstraintSense, LinearProgram, ObjectiveSense, SolveOptions, SolveResult, SolveStatus,
    SolverBackend, SolverError, VarKind,
};

const MAX_VARS: usize = 50;
const MAX_ROWS: usize = 60;

/// Exact-arithmetic simplex backend (LP only).
#[derive(Debug, Default, Clone)]
pub struct ExactSimplex;

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// How an original variable maps into the nonnegative standard form.
enum VarMap {
    /// x = lower + x'_idx
    Shifted { idx: usize, lower: BigRational },
    /// x = upper - x'_idx
    Reflected { idx: usize, upper: BigRational },
    /// x = x'_pos - x'_neg
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    /// Row coefficients over standard variables.
    rows: Vec<Vec<BigRational>>,
    senses: Vec<ConstraintSense>,
    rhs: Vec<BigRational>,
    cost: Vec<BigRational>,
    maps: Vec<VarMap>,
    n_std: usize,
}

fn to_standard_form(p: &LinearProgram) -> StandardForm {
    let n = p.num_vars();
    let mut maps = Vec::with_capacity(n);
    let mut n_std = 0usize;
    for i in 0..n {
        let lo = p.lower[i];
        let hi = p.upper[i];
        if lo.is_finite() {
            maps.push(VarMap::Shifted { idx: n_std, lower: rat(lo) });
            n_std += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Reflected { idx: n_std, upper: rat(hi) });
            n_std += 1;
        } else {
            maps.push(VarMap::Split { pos: n_std, neg: n_std + 1 });
            n_std += 2;
        }
    }

    // Dense original-space rows, then remap.
    let m = p.num_rows();
    let mut dense = vec![vec![BigRational::zero(); n]; m];
    for &(r, c, v) in &p.triplets {
        dense[r][c] += rat(v);
    }

    let mut rows = Vec::with_capacity(m + n);
    let mut senses = Vec::with_capacity(m + n);
    let mut rhs = Vec::with_capacity(m + n);

    let remap = |coeffs: &[BigRational], rhs0: BigRational| -> (Vec<BigRational>, BigRational) {
        let mut out = vec![BigRational::zero(); n_std];
        let mut b = rhs0;
        for (i, a) in coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            match &maps[i] {
                VarMap::Shifted { idx, lower } => {
                    out[*idx] += a;
                    b -= a * lower;
                }
                VarMap::Reflected { idx, upper } => {
                    out[*idx] -= a;
                    b -= a * upper;
                }
                VarMap::Split { pos, neg } => {
                    out[*pos] += a;
                    out[*neg] -= a;
                }
            }
        }
        (out, b)
    };

    for r in 0..m {
        let (row, b) = remap(&dense[r], rat(p.rhs[r]));
        rows.push(row);
        senses.push(p.senses[r]);
        rhs.push(b);
    }
    // Finite upper bounds of shifted variables become rows x' <= hi - lo.
    for i in 0..n {
        if let VarMap::Shifted { idx, lower } = &maps[i] {
            if p.upper[i].is_finite() {
                let mut row = vec![BigRational::zero(); n_std];
                row[*idx] = BigRational::from(BigInt::from(1));
                rows.push(row);
                senses.push(ConstraintSense::Le);
                rhs.push(rat(p.upper[i]) - lower);
            }
        }
    }

    // Cost over standard variables; minimization form.
    let sign = match p.sense {
        ObjectiveSense::Minimize => BigRational::from(BigInt::from(1)),
        ObjectiveSense::Maximize => BigRational::from(BigInt::from(-1)),
    };
    let mut cost = vec![BigRational::zero(); n_std];
    for i in 0..n {
        let c = rat(p.objective[i]) * &sign;
        if c.is_zero() {
            continue;
        }
        match &maps[i] {
            VarMap::Shifted { idx, .. } => cost[*idx] += &c,
            VarMap::Reflected { idx, .. } => cost[*idx] -= &c,
            VarMap::Split { pos, neg } => {
                cost[*pos] += &c;
                cost[*neg] -= &c;
            }
        }
    }

    StandardForm { rows, senses, rhs, cost, maps, n_std }
}

/// Objective constant induced by the variable substitutions.
fn objective_offset(p: &LinearProgram, sf: &StandardForm) -> BigRational {
    let sign = match p.sense {
        ObjectiveSense::Minimize => BigRational::from(BigInt::from(1)),
        ObjectiveSense::Maximize => BigRational::from(BigInt::from(-1)),
    };
    let mut off = BigRational::zero();
    for i in 0..p.num_vars() {
        let c = rat(p.objective[i]) * &sign;
        match &sf.maps[i] {
            VarMap::Shifted { lower, .. } => off += &c * lower,
            VarMap::Reflected { upper, .. } => off += &c * upper,
            VarMap::Split { .. } => {}
        }
    }
    off
}

struct Tableau {
    /// m rows of coefficients plus rhs in the last column.
    body: Vec<Vec<BigRational>>,
    cost: Vec<BigRational>,
    basis: Vec<usize>,
    n_cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.body[r][j].clone();
        for v in self.body[r].iter_mut() {
            *v /= &piv;
        }
        for i in 0..self.body.len() {
            if i != r && !self.body[i][j].is_zero() {
                let factor = self.body[i][j].clone();
                for k in 0..=self.n_cols {
                    let delta = &factor * &self.body[r][k];
                    self.body[i][k] -= delta;
                }
            }
        }
        if !self.cost[j].is_zero() {
            let factor = self.cost[j].clone();
            for k in 0..=self.n_cols {
                let delta = &factor * &self.body[r][k];
                self.cost[k] -= delta;
            }
        }
        self.basis[r] = j;
    }

    /// Run simplex with Bland's rule on the columns in `allowed`.
    /// Returns false when unbounded.
    fn run(&mut self, allowed: &[bool]) -> bool {
        loop {
            // Entering: smallest-index allowed column with negative reduced cost.
            let entering = (0..self.n_cols)
                .find(|&j| allowed[j] && self.cost[j] < BigRational::zero());
            let Some(j) = entering else { return true };
            // Leaving: min ratio, ties broken by smallest basis variable index.
            let mut best: Option<(usize, BigRational)> = None;
            for r in 0..self.body.len() {
                if self.body[r][j] > BigRational::zero() {
                    let ratio = &self.body[r][self.n_cols] / &self.body[r][j];
                    match &best {
                        None => best = Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < *bratio
                                || (ratio == *bratio && self.basis[r] < self.basis[*br])
                            {
                                best = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, j),
                None => return false,
            }
        }
    }
}

impl SolverBackend for ExactSimplex {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn solve_raw(
        &self,
        problem: &LinearProgram,
        _options: &SolveOptions,
    ) -> Result<SolveResult, SolverError> {
        if problem.kinds.iter().any(|k| *k != VarKind::Continuous) {
            return Err(SolverError::BackendUnavailable(
                "exact simplex handles continuous LPs only".into(),
            ));
        }
        if problem.num_vars() > MAX_VARS || problem.num_rows() > MAX_ROWS {
            return Err(SolverError::BackendUnavailable(format!(
                "exact simplex capped at {MAX_VARS} vars / {MAX_ROWS} rows"
            )));
        }

        let sf = to_standard_form(problem);
        let offset = objective_offset(problem, &sf);
        let m = sf.rows.len();

        // Count extra columns: one slack/surplus per inequality, one
        // artificial per >= / = row (and per <= row with negative rhs after
        // normalization).
        let mut n_cols = sf.n_std;
        let mut slack_col = vec![None; m];
        let mut needs_artificial = vec![false; m];
        let mut normalized: Vec<(Vec<BigRational>, BigRational)> = Vec::with_capacity(m);
        for r in 0..m {
            let mut row = sf.rows[r].clone();
            let mut b = sf.rhs[r].clone();
            let mut sense = sf.senses[r];
            if b < BigRational::zero() {
                for v in row.iter_mut() {
                    *v = -v.clone();
                }
                b = -b;
                sense = match sense {
                    ConstraintSense::Le => ConstraintSense::Ge,
                    ConstraintSense::Ge => ConstraintSense::Le,
                    ConstraintSense::Eq => ConstraintSense::Eq,
                };
            }
            match sense {
                ConstraintSense::Le => {
                    slack_col[r] = Some((n_cols, BigRational::from(BigInt::from(1))));
                    n_cols += 1;
                }
                ConstraintSense::Ge => {
                    slack_col[r] = Some((n_cols, BigRational::from(BigInt::from(-1))));
                    n_cols += 1;
                    needs_artificial[r] = true;
                }
                ConstraintSense::Eq => needs_artificial[r] = true,
            }
            normalized.push((row, b));
        }
        let first_artificial = n_cols;
        let mut artificial_col = vec![None; m];
        for r in 0..m {
            if needs_artificial[r] {
                artificial_col[r] = Some(n_cols);
                n_cols += 1;
            }
        }

        let mut body = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        for r in 0..m {
            let mut row = vec![BigRational::zero(); n_cols + 1];
            for j in 0..sf.n_std {
                row[j] = normalized[r].0[j].clone();
            }
            if let Some((j, sign)) = &slack_col[r] {
                row[*j] = sign.clone();
            }
            if let Some(j) = artificial_col[r] {
                row[j] = BigRational::from(BigInt::from(1));
                basis.push(j);
            } else {
                basis.push(slack_col[r].as_ref().unwrap().0);
            }
            row[n_cols] = normalized[r].1.clone();
            body.push(row);
        }

        let mut tab = Tableau { body, cost: vec![BigRational::zero(); n_cols + 1], basis, n_cols };

        // Phase 1.
        if first_artificial < n_cols {
            let mut cost = vec![BigRational::zero(); n_cols + 1];
            for j in first_artificial..n_cols {
                cost[j] = BigRational::from(BigInt::from(1));
            }
            tab.cost = cost;
            for r in 0..m {
                if tab.basis[r] >= first_artificial {
                    let row = tab.body[r].clone();
                    for k in 0..=n_cols {
                        let delta = &row[k];
                        tab.cost[k] -= delta;
                    }
                }
            }
            let allowed = vec![true; n_cols];
            if !tab.run(&allowed) {
                return Err(SolverError::NumericalFailure(
                    "phase-1 simplex unbounded: internal error".into(),
                ));
            }
            let phase1_obj = -tab.cost[n_cols].clone();
            if phase1_obj > BigRational::zero() {
                return Ok(SolveResult {
                    status: SolveStatus::Infeasible,
                    objective: f64::NAN,
                    primal: vec![0.0; problem.num_vars()],
                    duals: None,
                    mip_gap: 0.0,
                    stats: vec![("backend".into(), "exact".into())],
                });
            }
            // Pivot lingering artificials out of the basis where possible.
            for r in 0..m {
                if tab.basis[r] >= first_artificial {
                    if let Some(j) = (0..first_artificial).find(|&j| !tab.body[r][j].is_zero()) {
                        tab.pivot(r, j);
                    }
                }
            }
        }

        // Phase 2: original reduced costs; artificial columns barred.
        let mut cost = vec![BigRational::zero(); n_cols + 1];
        for (j, c) in sf.cost.iter().enumerate() {
            cost[j] = c.clone();
        }
        tab.cost = cost;
        for r in 0..m {
            let j = tab.basis[r];
            if !tab.cost[j].is_zero() {
                let factor = tab.cost[j].clone();
                let row = tab.body[r].clone();
                for k in 0..=n_cols {
                    let delta = &factor * &row[k];
                    tab.cost[k] -= delta;
                }
            }
        }
        let mut allowed = vec![true; n_cols];
        for a in allowed.iter_mut().take(n_cols).skip(first_artificial) {
            *a = false;
        }
        if !tab.run(&allowed) {
            return Ok(SolveResult {
                status: SolveStatus::Unbounded,
                objective: f64::NAN,
                primal: vec![0.0; problem.num_vars()],
                duals: None,
                mip_gap: 0.0,
                stats: vec![("backend".into(), "exact".into())],
            });
        }

        // Recover standard-variable values, then original variables.
        let mut x_std = vec![BigRational::zero(); n_cols];
        for r in 0..m {
            x_std[tab.basis[r]] = tab.body[r][n_cols].clone();
        }
        let mut primal = vec![0.0; problem.num_vars()];
        for (i, map) in sf.maps.iter().enumerate() {
            let v = match map {
                VarMap::Shifted { idx, lower } => lower + &x_std[*idx],
                VarMap::Reflected { idx, upper } => upper - &x_std[*idx],
                VarMap::Split { pos, neg } => &x_std[*pos] - &x_std[*neg],
            };
            primal[i] = v.to_f64().ok_or_else(|| {
                SolverError::NumericalFailure("rational-to-float conversion failed".into())
            })?;
        }
        let min_obj = -tab.cost[n_cols].clone() + offset;
        let obj = match problem.sense {
            ObjectiveSense::Minimize => min_obj,
            ObjectiveSense::Maximize => -min_obj,
        };
        Ok(SolveResult {
            status: SolveStatus::Optimal,
            objective: obj
                .to_f64()
                .ok_or_else(|| SolverError::NumericalFailure("objective conversion".into()))?,
            primal,
            duals: None,
            mip_gap: 0.0,
            stats: vec![("backend".into(), "exact".into())],
        })
    }
}
