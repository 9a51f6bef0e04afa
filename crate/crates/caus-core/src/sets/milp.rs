//! Mixed-integer encoding of the union-of-polytopes set and the exhaustive
//! enumeration oracle.
//!
//! Per period: binaries `alpha_{k,t}` with an SOS1 row, auxiliaries
//! `w_{k,t}` tied to `xi_t` by Big-M rows, and the summed face rows
//! `sum_k (D_k w_{k,t} - alpha_{k,t} d_k) <= 0`. Binary count is K*T and
//! auxiliary count K*T*m: linear in both, against the K^T growth of
//! enumeration.

use nalgebra::DVector;

use super::{PolyUnionSet, SetError};
use crate::solver::{
    solve, ConstraintSense, LinearProgram, SolveOptions, SolveStatus, SolverBackend, VarKind,
};

/// The encoded set as a standalone constraint system (zero objective).
#[derive(Debug, Clone)]
pub struct MilpEncoding {
    pub lp: LinearProgram,
    pub num_periods: usize,
    pub pieces: usize,
    pub dim: usize,
}

impl MilpEncoding {
    /// Column of `xi_{t,i}`.
    pub fn xi_index(&self, t: usize, i: usize) -> usize {
        t * self.dim + i
    }

    /// Column of `alpha_{k,t}`.
    pub fn alpha_index(&self, t: usize, k: usize) -> usize {
        self.num_periods * self.dim + t * self.pieces + k
    }

    /// Column of `w_{k,t,i}`.
    pub fn w_index(&self, t: usize, k: usize, i: usize) -> usize {
        self.num_periods * self.dim
            + self.num_periods * self.pieces
            + (t * self.pieces + k) * self.dim
            + i
    }

    pub fn num_binaries(&self) -> usize {
        self.lp.kinds.iter().filter(|k| **k == VarKind::Binary).count()
    }

    /// Auxiliary continuous variables beyond xi itself (the w block).
    pub fn num_auxiliaries(&self) -> usize {
        self.num_periods * self.pieces * self.dim
    }

    /// Dump in the neutral constraint-list text format.
    pub fn to_text(&self) -> String {
        crate::solver::dump_lp(&self.lp)
    }

    /// Append the encoding's variables and rows to another problem; returns
    /// the target-space indices of the xi and alpha blocks.
    pub fn embed_into(&self, target: &mut LinearProgram) -> EmbeddedSet {
        let var_offset = target.num_vars();
        let row_offset = target.num_rows();
        for i in 0..self.lp.num_vars() {
            target.add_var(0.0, self.lp.lower[i], self.lp.upper[i], self.lp.kinds[i]);
        }
        for &(r, c, v) in &self.lp.triplets {
            target.triplets.push((r + row_offset, c + var_offset, v));
        }
        target.senses.extend_from_slice(&self.lp.senses);
        target.rhs.extend_from_slice(&self.lp.rhs);
        EmbeddedSet {
            xi: (0..self.num_periods)
                .map(|t| (0..self.dim).map(|i| var_offset + self.xi_index(t, i)).collect())
                .collect(),
            alpha: (0..self.num_periods)
                .map(|t| (0..self.pieces).map(|k| var_offset + self.alpha_index(t, k)).collect())
                .collect(),
        }
    }
}

/// Target-space variable indices of an embedded encoding.
#[derive(Debug, Clone)]
pub struct EmbeddedSet {
    pub xi: Vec<Vec<usize>>,
    pub alpha: Vec<Vec<usize>>,
}

/// Build the mixed-integer encoding of a union set. Requires Big-M bounds
/// and an equal face count across the pieces of each period (the summed face
/// rows add vectors of that length).
pub fn encode_milp(set: &PolyUnionSet) -> Result<MilpEncoding, SetError> {
    if set.big_m.len() != set.periods.len()
        || set.big_m.iter().zip(&set.periods).any(|(bm, _)| bm.len() != set.dim())
    {
        return Err(SetError::MissingBigM);
    }
    let t_count = set.num_periods();
    let k_count = set.pieces_per_period();
    let m = set.dim();

    let mut lp = LinearProgram::minimize();
    // xi variables, bounded by the per-period Big-M.
    for t in 0..t_count {
        for i in 0..m {
            lp.add_var(0.0, -set.big_m[t][i], set.big_m[t][i], VarKind::Continuous);
        }
    }
    // alpha binaries.
    for _t in 0..t_count {
        for _k in 0..k_count {
            lp.add_var(0.0, 0.0, 1.0, VarKind::Binary);
        }
    }
    // w auxiliaries.
    for t in 0..t_count {
        for _k in 0..k_count {
            for i in 0..m {
                lp.add_var(0.0, -set.big_m[t][i], set.big_m[t][i], VarKind::Continuous);
            }
        }
    }
    let enc = MilpEncoding { lp: LinearProgram::minimize(), num_periods: t_count, pieces: k_count, dim: m };
    let mut lp = lp;

    for t in 0..t_count {
        let polys = &set.periods[t];
        if polys.len() != k_count {
            return Err(SetError::Inconsistent("period piece counts differ".into()));
        }
        let faces = polys[0].num_faces();
        if polys.iter().any(|p| p.num_faces() != faces) {
            return Err(SetError::Inconsistent(
                "pieces of one period must share a face count for the summed encoding".into(),
            ));
        }
        // SOS1 row.
        let terms: Vec<(usize, f64)> =
            (0..k_count).map(|k| (enc.alpha_index(t, k), 1.0)).collect();
        lp.add_row(&terms, ConstraintSense::Eq, 1.0);
        // Summed face rows: sum_k (D_k w_k - alpha_k d_k) <= 0.
        for j in 0..faces {
            let mut terms = Vec::new();
            for (k, poly) in polys.iter().enumerate() {
                for i in 0..m {
                    let coeff = poly.d_rows[j][i];
                    if coeff != 0.0 {
                        terms.push((enc.w_index(t, k, i), coeff));
                    }
                }
                terms.push((enc.alpha_index(t, k), -poly.d_rhs[j]));
            }
            lp.add_row(&terms, ConstraintSense::Le, 0.0);
        }
        // Linking rows per piece and coordinate.
        for k in 0..k_count {
            for i in 0..m {
                let big_m = set.big_m[t][i];
                let xi = enc.xi_index(t, i);
                let w = enc.w_index(t, k, i);
                let alpha = enc.alpha_index(t, k);
                // xi - w <= M (1 - alpha)
                lp.add_row(&[(xi, 1.0), (w, -1.0), (alpha, big_m)], ConstraintSense::Le, big_m);
                // -(xi - w) <= M (1 - alpha)
                lp.add_row(&[(xi, -1.0), (w, 1.0), (alpha, big_m)], ConstraintSense::Le, big_m);
                // w <= M alpha
                lp.add_row(&[(w, 1.0), (alpha, -big_m)], ConstraintSense::Le, 0.0);
                // -w <= M alpha
                lp.add_row(&[(w, -1.0), (alpha, -big_m)], ConstraintSense::Le, 0.0);
            }
        }
    }
    let MilpEncoding { num_periods, pieces, dim, .. } = enc;
    Ok(MilpEncoding { lp, num_periods, pieces, dim })
}

/// A worst-case point of the set for a linear objective.
#[derive(Debug, Clone)]
pub struct WorstCase {
    pub value: f64,
    pub trajectory: Vec<DVector<f64>>,
    /// Chosen piece per period.
    pub subset_indices: Vec<usize>,
}

/// Maximize `sum_t objective[t] . xi_t` over the encoded set with a MILP.
pub fn maximize_encoded(
    enc: &MilpEncoding,
    objective: &[DVector<f64>],
    backend: &dyn SolverBackend,
) -> Result<WorstCase, SetError> {
    if objective.len() != enc.num_periods {
        return Err(SetError::DimensionMismatch {
            expected: enc.num_periods,
            got: objective.len(),
        });
    }
    let mut lp = enc.lp.clone();
    lp.sense = crate::solver::ObjectiveSense::Maximize;
    for (t, obj) in objective.iter().enumerate() {
        if obj.len() != enc.dim {
            return Err(SetError::DimensionMismatch { expected: enc.dim, got: obj.len() });
        }
        for i in 0..enc.dim {
            lp.objective[enc.xi_index(t, i)] = obj[i];
        }
    }
    let res = solve(backend, &lp, &SolveOptions::default())?;
    if res.status != SolveStatus::Optimal {
        return Err(SetError::Inconsistent(format!(
            "set MILP terminated with {:?}",
            res.status
        )));
    }
    let trajectory = (0..enc.num_periods)
        .map(|t| DVector::from_fn(enc.dim, |i, _| res.primal[enc.xi_index(t, i)]))
        .collect();
    let subset_indices = (0..enc.num_periods)
        .map(|t| {
            (0..enc.pieces)
                .max_by(|&a, &b| {
                    res.primal[enc.alpha_index(t, a)]
                        .partial_cmp(&res.primal[enc.alpha_index(t, b)])
                        .unwrap()
                })
                .unwrap()
        })
        .collect();
    Ok(WorstCase { value: res.objective, trajectory, subset_indices })
}

/// Exact maximizer of a linear objective by solving one LP per subset
/// combination (K^T of them, capped). Ties break to the lexicographically
/// smallest combination. This is the oracle for [`encode_milp`].
pub fn worst_case_enumerate(
    set: &PolyUnionSet,
    objective: &[DVector<f64>],
    backend: &dyn SolverBackend,
    cap: Option<u128>,
) -> Result<WorstCase, SetError> {
    let t_count = set.num_periods();
    let k_count = set.pieces_per_period();
    let m = set.dim();
    if objective.len() != t_count {
        return Err(SetError::DimensionMismatch { expected: t_count, got: objective.len() });
    }
    let cap = cap.unwrap_or(1_000_000);
    let combinations = (k_count as u128)
        .checked_pow(t_count as u32)
        .ok_or(SetError::EnumerationTooLarge { combinations: u128::MAX, cap })?;
    if combinations > cap {
        return Err(SetError::EnumerationTooLarge { combinations, cap });
    }

    let mut best: Option<WorstCase> = None;
    let mut combo = vec![0usize; t_count];
    loop {
        // One LP over the product polytope of this combination.
        let mut lp = LinearProgram::maximize();
        for (t, obj) in objective.iter().enumerate() {
            for i in 0..m {
                lp.add_var(obj[i], f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous);
            }
            let poly = &set.periods[t][combo[t]];
            for (row, &rhs) in poly.d_rows.iter().zip(poly.d_rhs.iter()) {
                let terms: Vec<(usize, f64)> =
                    row.iter().enumerate().map(|(i, &c)| (t * m + i, c)).collect();
                lp.add_row(&terms, ConstraintSense::Le, rhs);
            }
        }
        let res = solve(backend, &lp, &SolveOptions::default())?;
        if res.status == SolveStatus::Optimal {
            let better = match &best {
                None => true,
                Some(b) => res.objective > b.value + 1e-12,
            };
            if better {
                best = Some(WorstCase {
                    value: res.objective,
                    trajectory: (0..t_count)
                        .map(|t| DVector::from_fn(m, |i, _| res.primal[t * m + i]))
                        .collect(),
                    subset_indices: combo.clone(),
                });
            }
        } else if res.status == SolveStatus::Unbounded {
            return Err(SetError::Inconsistent("unbounded piece in enumeration".into()));
        }

        // Next combination in lexicographic order.
        let mut t = t_count;
        loop {
            if t == 0 {
                return best.ok_or_else(|| {
                    SetError::Inconsistent("every subset combination was infeasible".into())
                });
            }
            t -= 1;
            combo[t] += 1;
            if combo[t] < k_count {
                break;
            }
            combo[t] = 0;
        }
    }
}
