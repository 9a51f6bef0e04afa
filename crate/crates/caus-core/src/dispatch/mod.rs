//! Two-stage robust unit commitment over a pluggable uncertainty set.
//!
//! The abstract problem is
//!
//! ```text
//! min_X  c^T X + max_{xi in W} min_Y  b^T Y
//! s.t.   A X <= h
//!        E X + G Y  {<=,=}  l - U xi
//! ```
//!
//! with binary first-stage X (commitment and startup), continuous recourse Y
//! (dispatch, slacks, flows), and the uncertainty entering the balance
//! right-hand sides only. Shed and surplus slacks make the recourse feasible
//! for every realization, so infeasibility shows up as penalty cost.

mod ccg;
mod reliability;

pub use ccg::{
    solve_ccg, solve_subproblem_enum, solve_subproblem_milp, solve_subproblem_milp_hinted,
    CcgConfig, RobustSolution, SubproblemMethod, SubproblemResult,
};
pub use reliability::{evaluate_reliability, ReliabilityReport};

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gmm::ConditionalGmm;
use crate::solver::{
    solve, ConstraintSense, LinearProgram, SolveOptions, SolveResult, SolveStatus, SolverBackend,
    SolverError, VarKind,
};

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("inconsistent instance: {0}")]
    InconsistentInstance(String),
    #[error("solver failure: {0}")]
    SolverFailure(#[from] SolverError),
    #[error("set error: {0}")]
    Set(#[from] crate::sets::SetError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0}")]
    Numerical(String),
}

/// One thermal unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Unit {
    pub name: String,
    #[serde(default)]
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub min_up: usize,
    pub min_down: usize,
    pub cost_commit: f64,
    pub cost_startup: f64,
    pub cost_energy: f64,
}

/// One wind farm, mapped to a bus; its output is the uncertainty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindFarm {
    pub name: String,
    #[serde(default)]
    pub bus: usize,
}

/// A transport line (susceptance-free): capacity-limited flow between buses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
}

/// Loads: one aggregate profile (single-bus systems) or per-bus profiles.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Loads {
    Total(Vec<f64>),
    PerBus(BTreeMap<String, Vec<f64>>),
}

/// A unit-commitment instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UcInstance {
    pub name: String,
    pub periods: usize,
    pub units: Vec<Unit>,
    pub loads: Loads,
    #[serde(default)]
    pub wind_farms: Vec<WindFarm>,
    #[serde(default)]
    pub lines: Vec<Line>,
    pub shed_penalty: f64,
    pub spill_penalty: f64,
}

impl UcInstance {
    pub fn from_json(text: &str) -> Result<UcInstance, DispatchError> {
        let inst: UcInstance = serde_json::from_str(text)
            .map_err(|e| DispatchError::InconsistentInstance(format!("JSON: {e}")))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }

    /// Sorted distinct bus ids referenced anywhere in the instance.
    pub fn buses(&self) -> Vec<usize> {
        let mut set = std::collections::BTreeSet::new();
        for u in &self.units {
            set.insert(u.bus);
        }
        for f in &self.wind_farms {
            set.insert(f.bus);
        }
        for l in &self.lines {
            set.insert(l.from);
            set.insert(l.to);
        }
        if let Loads::PerBus(map) = &self.loads {
            for key in map.keys() {
                if let Ok(b) = key.parse::<usize>() {
                    set.insert(b);
                }
            }
        }
        if set.is_empty() {
            set.insert(0);
        }
        set.into_iter().collect()
    }

    /// Load of bus `bus` at period `t` (0-based).
    pub fn load_at_pub(&self, bus: usize, t: usize) -> f64 {
        self.load_at(bus, t)
    }

    /// Load of bus `bus` at period `t` (0-based).
    fn load_at(&self, bus: usize, t: usize) -> f64 {
        match &self.loads {
            Loads::Total(v) => {
                // Aggregate loads sit on the first bus of a single-bus system.
                if bus == self.buses()[0] {
                    v[t]
                } else {
                    0.0
                }
            }
            Loads::PerBus(map) => {
                map.get(&bus.to_string()).map(|v| v[t]).unwrap_or(0.0)
            }
        }
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        let err = |msg: String| Err(DispatchError::InconsistentInstance(msg));
        if self.periods == 0 {
            return err("periods must be at least 1".into());
        }
        if self.units.is_empty() {
            return err("need at least one unit".into());
        }
        for u in &self.units {
            if !(u.p_min >= 0.0 && u.p_min <= u.p_max) {
                return err(format!("unit {}: p_min must lie in [0, p_max]", u.name));
            }
            if u.ramp_up < 0.0 || u.ramp_down < 0.0 {
                return err(format!("unit {}: ramps must be nonnegative", u.name));
            }
            if u.min_up == 0 || u.min_down == 0 {
                return err(format!("unit {}: min up/down must be at least 1", u.name));
            }
            if u.cost_commit < 0.0 || u.cost_startup < 0.0 || u.cost_energy < 0.0 {
                return err(format!("unit {}: costs must be nonnegative", u.name));
            }
            if self.shed_penalty <= u.cost_energy {
                return err(format!(
                    "shed penalty {} must strictly exceed every energy cost (unit {} has {})",
                    self.shed_penalty, u.name, u.cost_energy
                ));
            }
        }
        if self.spill_penalty < 0.0 {
            return err("spill penalty must be nonnegative".into());
        }
        match &self.loads {
            Loads::Total(v) => {
                if v.len() != self.periods {
                    return err(format!("loads has {} entries, expected {}", v.len(), self.periods));
                }
                if !self.lines.is_empty() {
                    return err("aggregate loads cannot be combined with lines; use per-bus loads".into());
                }
            }
            Loads::PerBus(map) => {
                for (k, v) in map {
                    if k.parse::<usize>().is_err() {
                        return err(format!("load key '{k}' is not a bus id"));
                    }
                    if v.len() != self.periods {
                        return err(format!(
                            "loads for bus {k} have {} entries, expected {}",
                            v.len(),
                            self.periods
                        ));
                    }
                }
            }
        }
        for l in &self.lines {
            if l.capacity <= 0.0 {
                return err(format!("line {}-{} capacity must be positive", l.from, l.to));
            }
        }
        if self.loads_iter().any(|v| v < 0.0) {
            return err("loads must be nonnegative".into());
        }
        Ok(())
    }

    fn loads_iter(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match &self.loads {
            Loads::Total(v) => Box::new(v.iter().cloned()),
            Loads::PerBus(map) => Box::new(map.values().flat_map(|v| v.iter().cloned())),
        }
    }

    pub fn num_farms(&self) -> usize {
        self.wind_farms.len()
    }
}

/// Dimension report for an assembled instance; frozen counts live in the
/// instance's sidecar file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub n_x: usize,
    pub n_y: usize,
    pub n_xi: usize,
    pub first_stage_rows: usize,
    pub recourse_eq_rows: usize,
    pub recourse_ineq_rows: usize,
}

/// Which constraint family a recourse row belongs to; drives the per-row
/// dual-magnitude bounds of the complementarity encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Balance,
    GenUpper,
    GenLower,
    RampUp,
    RampDown,
    FlowUpper,
    FlowLower,
    ShedNonneg,
    SpillNonneg,
}

/// The assembled matrices of the two-stage problem, sparse triplet form,
/// plus variable index maps.
#[derive(Debug, Clone)]
pub struct MatrixForm {
    pub instance: UcInstance,
    pub n_x: usize,
    pub n_y: usize,
    pub n_xi: usize,
    /// First-stage objective (commitment, startup).
    pub c: Vec<f64>,
    /// Recourse objective (energy, penalties).
    pub b: Vec<f64>,
    /// A X <= h.
    pub a_trip: Vec<(usize, usize, f64)>,
    pub h: Vec<f64>,
    /// E X + G Y {sense} l - U xi.
    pub e_trip: Vec<(usize, usize, f64)>,
    pub g_trip: Vec<(usize, usize, f64)>,
    pub u_trip: Vec<(usize, usize, f64)>,
    pub l: Vec<f64>,
    pub recourse_senses: Vec<ConstraintSense>,
    pub row_kinds: Vec<RowKind>,
    /// Upper activity bounds per Y variable at any optimal recourse, used to
    /// size complementarity constants.
    pub y_bound: Vec<f64>,
    num_buses: usize,
}

impl MatrixForm {
    pub fn num_units(&self) -> usize {
        self.instance.units.len()
    }

    pub fn periods(&self) -> usize {
        self.instance.periods
    }

    /// Commitment variable u[g, t] (0-based period).
    pub fn x_u(&self, g: usize, t: usize) -> usize {
        g * self.periods() + t
    }

    /// Startup indicator v[g, t].
    pub fn x_v(&self, g: usize, t: usize) -> usize {
        self.num_units() * self.periods() + g * self.periods() + t
    }

    pub fn y_p(&self, g: usize, t: usize) -> usize {
        g * self.periods() + t
    }

    pub fn y_shed(&self, b: usize, t: usize) -> usize {
        (self.num_units() + b) * self.periods() + t
    }

    pub fn y_spill(&self, b: usize, t: usize) -> usize {
        (self.num_units() + self.num_buses + b) * self.periods() + t
    }

    pub fn y_flow(&self, line: usize, t: usize) -> usize {
        (self.num_units() + 2 * self.num_buses + line) * self.periods() + t
    }

    /// Uncertainty column for (farm, period); period-major to match the set
    /// encoding layout.
    pub fn xi_index(&self, farm: usize, t: usize) -> usize {
        t * self.n_xi / self.periods() + farm
    }

    pub fn dimension_report(&self) -> DimensionReport {
        DimensionReport {
            n_x: self.n_x,
            n_y: self.n_y,
            n_xi: self.n_xi,
            first_stage_rows: self.h.len(),
            recourse_eq_rows: self
                .recourse_senses
                .iter()
                .filter(|s| **s == ConstraintSense::Eq)
                .count(),
            recourse_ineq_rows: self
                .recourse_senses
                .iter()
                .filter(|s| **s != ConstraintSense::Eq)
                .count(),
        }
    }

    /// First-stage cost of a commitment vector.
    pub fn first_stage_cost(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x.iter()).map(|(c, v)| c * v).sum()
    }

    /// Recourse right-hand side `l - E x - U xi` for fixed first stage and
    /// uncertainty trajectory (per-period vectors).
    pub fn recourse_rhs(&self, x: &[f64], xi: &[DVector<f64>]) -> Result<Vec<f64>, DispatchError> {
        if x.len() != self.n_x {
            return Err(DispatchError::DimensionMismatch { expected: self.n_x, got: x.len() });
        }
        let m = self.n_xi / self.periods();
        if xi.len() != self.periods() || xi.iter().any(|v| v.len() != m) {
            return Err(DispatchError::DimensionMismatch {
                expected: self.periods(),
                got: xi.len(),
            });
        }
        let mut rhs = self.l.clone();
        for &(r, cx, coeff) in &self.e_trip {
            rhs[r] -= coeff * x[cx];
        }
        for &(r, cxi, coeff) in &self.u_trip {
            let t = cxi / m;
            let f = cxi % m;
            rhs[r] -= coeff * xi[t][f];
        }
        Ok(rhs)
    }

    /// The recourse LP for fixed (x, xi): `min b^T Y, G Y {sense} rhs` with
    /// free Y (all bounds are rows of G).
    pub fn recourse_lp(&self, x: &[f64], xi: &[DVector<f64>]) -> Result<LinearProgram, DispatchError> {
        let rhs = self.recourse_rhs(x, xi)?;
        let mut lp = LinearProgram::minimize();
        for &cost in &self.b {
            lp.add_var(cost, f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous);
        }
        lp.triplets = self.g_trip.clone();
        lp.senses = self.recourse_senses.clone();
        lp.rhs = rhs;
        Ok(lp)
    }

    /// Append first-stage variables and rows to `lp`; returns the X offset.
    fn push_first_stage(&self, lp: &mut LinearProgram) -> usize {
        let offset = lp.num_vars();
        for g in 0..self.num_units() {
            for _t in 0..self.periods() {
                lp.add_var(self.c[self.x_u(g, _t)], 0.0, 1.0, VarKind::Binary);
            }
        }
        for g in 0..self.num_units() {
            for _t in 0..self.periods() {
                lp.add_var(self.c[self.x_v(g, _t)], 0.0, 1.0, VarKind::Binary);
            }
        }
        let row_offset = lp.num_rows();
        for &(r, c, v) in &self.a_trip {
            lp.triplets.push((r + row_offset, c + offset, v));
        }
        for &h in &self.h {
            lp.senses.push(ConstraintSense::Le);
            lp.rhs.push(h);
        }
        offset
    }

    /// Append one recourse block (Y variables and the coupling rows) for a
    /// fixed uncertainty trajectory; X lives at `x_offset`. Returns the Y
    /// offset.
    fn push_recourse_block(
        &self,
        lp: &mut LinearProgram,
        x_offset: usize,
        xi: &[DVector<f64>],
        y_cost_scale: f64,
    ) -> usize {
        let y_offset = lp.num_vars();
        for &cost in &self.b {
            lp.add_var(cost * y_cost_scale, f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous);
        }
        let row_offset = lp.num_rows();
        let m = self.n_xi / self.periods();
        let mut rhs = self.l.clone();
        for &(r, cxi, coeff) in &self.u_trip {
            rhs[r] -= coeff * xi[cxi / m][cxi % m];
        }
        for &(r, cx, v) in &self.e_trip {
            lp.triplets.push((r + row_offset, cx + x_offset, v));
        }
        for &(r, cy, v) in &self.g_trip {
            lp.triplets.push((r + row_offset, cy + y_offset, v));
        }
        lp.senses.extend_from_slice(&self.recourse_senses);
        lp.rhs.extend(rhs);
        y_offset
    }
}

/// Assemble the matrices from an instance. Variable layout documented on the
/// index methods; every recourse bound is a row of G so that the inner LP's
/// duality is plain.
pub fn assemble(instance: &UcInstance) -> Result<MatrixForm, DispatchError> {
    instance.validate()?;
    let buses = instance.buses();
    let g_count = instance.units.len();
    let t_count = instance.periods;
    let b_count = buses.len();
    let f_count = instance.wind_farms.len();
    let l_count = instance.lines.len();

    let n_x = 2 * g_count * t_count;
    let n_y = (g_count + 2 * b_count + l_count) * t_count;
    let n_xi = f_count * t_count;

    // Local index maps mirroring the MatrixForm accessors.
    let x_u = |g: usize, t: usize| g * t_count + t;
    let x_v = |g: usize, t: usize| g_count * t_count + g * t_count + t;
    let y_p = |g: usize, t: usize| g * t_count + t;
    let y_shed = |b: usize, t: usize| (g_count + b) * t_count + t;
    let y_spill = |b: usize, t: usize| (g_count + b_count + b) * t_count + t;
    let y_flow = |li: usize, t: usize| (g_count + 2 * b_count + li) * t_count + t;
    let xi_col = |f: usize, t: usize| t * f_count + f;

    let mut c = vec![0.0; n_x];
    let mut b = vec![0.0; n_y];
    for (g, unit) in instance.units.iter().enumerate() {
        for t in 0..t_count {
            c[x_u(g, t)] = unit.cost_commit;
            c[x_v(g, t)] = unit.cost_startup;
            b[y_p(g, t)] = unit.cost_energy;
        }
    }
    for bi in 0..b_count {
        for t in 0..t_count {
            b[y_shed(bi, t)] = instance.shed_penalty;
            b[y_spill(bi, t)] = instance.spill_penalty;
        }
    }

    // First-stage rows: startup linking and minimum up/down windows.
    // Initial state: all units off with zero output.
    let mut a_trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut h: Vec<f64> = Vec::new();
    for (g, unit) in instance.units.iter().enumerate() {
        for t in 0..t_count {
            // u[t] - u[t-1] - v[t] <= 0 (u[-1] = 0).
            let mut row = h.len();
            a_trip.push((row, x_u(g, t), 1.0));
            if t > 0 {
                a_trip.push((row, x_u(g, t - 1), -1.0));
            }
            a_trip.push((row, x_v(g, t), -1.0));
            h.push(0.0);

            // Minimum up: sum_{tau in (t-UT, t]} v[tau] <= u[t].
            row = h.len();
            for tau in t.saturating_sub(unit.min_up - 1)..=t {
                a_trip.push((row, x_v(g, tau), 1.0));
            }
            a_trip.push((row, x_u(g, t), -1.0));
            h.push(0.0);

            // Minimum down: sum_{tau in (t-DT, t]} v[tau] <= 1 - u[t-DT]
            // (u before the horizon is the off initial state).
            row = h.len();
            for tau in t.saturating_sub(unit.min_down - 1)..=t {
                a_trip.push((row, x_v(g, tau), 1.0));
            }
            if t >= unit.min_down {
                a_trip.push((row, x_u(g, t - unit.min_down), 1.0));
            }
            h.push(1.0);
        }
    }

    // Recourse rows.
    let mut e_trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut g_trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut u_trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut l: Vec<f64> = Vec::new();
    let mut senses: Vec<ConstraintSense> = Vec::new();
    let mut kinds: Vec<RowKind> = Vec::new();
    let push_row = |senses: &mut Vec<ConstraintSense>,
                    l: &mut Vec<f64>,
                    kinds: &mut Vec<RowKind>,
                    sense: ConstraintSense,
                    kind: RowKind,
                    rhs: f64|
     -> usize {
        senses.push(sense);
        kinds.push(kind);
        l.push(rhs);
        l.len() - 1
    };

    // Balance per (bus, period): generation + inflow - outflow + shed -
    // spill = load - wind.
    for (bi, &bus) in buses.iter().enumerate() {
        for t in 0..t_count {
            let row = push_row(&mut senses, &mut l, &mut kinds, ConstraintSense::Eq, RowKind::Balance, instance.load_at(bus, t));
            for (g, unit) in instance.units.iter().enumerate() {
                if unit.bus == bus {
                    g_trip.push((row, y_p(g, t), 1.0));
                }
            }
            for (li, line) in instance.lines.iter().enumerate() {
                if line.to == bus {
                    g_trip.push((row, y_flow(li, t), 1.0));
                }
                if line.from == bus {
                    g_trip.push((row, y_flow(li, t), -1.0));
                }
            }
            g_trip.push((row, y_shed(bi, t), 1.0));
            g_trip.push((row, y_spill(bi, t), -1.0));
            for (f, farm) in instance.wind_farms.iter().enumerate() {
                if farm.bus == bus {
                    u_trip.push((row, xi_col(f, t), 1.0));
                }
            }
        }
    }

    // Generation limits gated by commitment.
    for (g, unit) in instance.units.iter().enumerate() {
        for t in 0..t_count {
            let row = push_row(&mut senses, &mut l, &mut kinds, ConstraintSense::Le, RowKind::GenUpper, 0.0);
            g_trip.push((row, y_p(g, t), 1.0));
            e_trip.push((row, x_u(g, t), -unit.p_max));
            let row = push_row(&mut senses, &mut l, &mut kinds, ConstraintSense::Le, RowKind::GenLower, 0.0);
            g_trip.push((row, y_p(g, t), -1.0));
            e_trip.push((row, x_u(g, t), unit.p_min));
        }
    }

    // Ramping with free startup/shutdown transitions (startup and shutdown
    // ramp at p_max): p[t] - p[t-1] <= RU u[t-1] + p_max (1 - u[t-1]).
    for (g, unit) in instance.units.iter().enumerate() {
        for t in 0..t_count {
            let row = push_row(&mut senses, &mut l, &mut kinds, ConstraintSense::Le, RowKind::RampUp, unit.p_max);
            g_trip.push((row, y_p(g, t), 1.0));
            if t > 0 {
                g_trip.push((row, y_p(g, t - 1), -1.0));
                e_trip.push((row, x_u(g, t - 1), unit.p_max - unit.ramp_up));
            }
            let row = push_row(&mut senses, &mut l, &mut kinds, ConstraintSense::Le, RowKind::RampDown, unit.p_max);
            g_trip.push((row, y_p(g, t), -1.0));
            if t > 0 {
                g_trip.push((row, y_p(g, t - 1), 1.0));
            }
            e_trip.push((row, x_u(g, t), unit.p_max - unit.ramp_down));
        }
    }

    // Line capacities.
    for (li, line) in instance.lines.iter().enumerate() {
        for t in 0..t_count {
            let row = push_row(&mut senses, &mut l, &mut kinds, ConstraintSense::Le, RowKind::FlowUpper, line.capacity);
            g_trip.push((row, y_flow(li, t), 1.0));
            let row = push_row(&mut senses, &mut l, &mut kinds, ConstraintSense::Le, RowKind::FlowLower, line.capacity);
            g_trip.push((row, y_flow(li, t), -1.0));
        }
    }

    // Slack nonnegativity.
    for bi in 0..b_count {
        for t in 0..t_count {
            let row = push_row(&mut senses, &mut l, &mut kinds, ConstraintSense::Le, RowKind::ShedNonneg, 0.0);
            g_trip.push((row, y_shed(bi, t), -1.0));
            let row = push_row(&mut senses, &mut l, &mut kinds, ConstraintSense::Le, RowKind::SpillNonneg, 0.0);
            g_trip.push((row, y_spill(bi, t), -1.0));
        }
    }

    // Activity bounds for complementarity sizing: optimal recourse never
    // sheds or spills more than the system-wide extremes.
    let total_pmax: f64 = instance.units.iter().map(|u| u.p_max).sum();
    let max_load: f64 = (0..t_count)
        .map(|t| buses.iter().map(|&bu| instance.load_at(bu, t)).sum::<f64>())
        .fold(0.0, f64::max);
    let slack_bound = max_load + total_pmax + 1.0;
    let mut y_bound = vec![0.0; n_y];
    for (g, unit) in instance.units.iter().enumerate() {
        for t in 0..t_count {
            y_bound[y_p(g, t)] = unit.p_max;
        }
    }
    for bi in 0..b_count {
        for t in 0..t_count {
            y_bound[y_shed(bi, t)] = slack_bound;
            y_bound[y_spill(bi, t)] = slack_bound;
        }
    }
    for (li, line) in instance.lines.iter().enumerate() {
        for t in 0..t_count {
            y_bound[y_flow(li, t)] = line.capacity;
        }
    }

    Ok(MatrixForm {
        instance: instance.clone(),
        n_x,
        n_y,
        n_xi,
        c,
        b,
        a_trip,
        h,
        e_trip,
        g_trip,
        u_trip,
        l,
        recourse_senses: senses,
        row_kinds: kinds,
        y_bound,
        num_buses: b_count,
    })
}

/// Deterministic two-stage solve at a fixed uncertainty trajectory: one MILP
/// over (X, Y).
pub fn solve_deterministic(
    form: &MatrixForm,
    xi: &[DVector<f64>],
    backend: &dyn SolverBackend,
) -> Result<(f64, Vec<f64>, Vec<f64>), DispatchError> {
    let mut lp = LinearProgram::minimize();
    let x_offset = form.push_first_stage(&mut lp);
    let y_offset = form.push_recourse_block(&mut lp, x_offset, xi, 1.0);
    let res = solved(backend, &lp)?;
    let x = res.primal[x_offset..x_offset + form.n_x].to_vec();
    let y = res.primal[y_offset..y_offset + form.n_y].to_vec();
    Ok((res.objective, round_binaries(&x), y))
}

/// Sample-average two-stage solve: one MILP with a recourse copy per
/// scenario, costs averaged.
pub fn solve_saa(
    form: &MatrixForm,
    models: &[ConditionalGmm],
    n_scenarios: usize,
    seed: u64,
    backend: &dyn SolverBackend,
) -> Result<(f64, Vec<f64>), DispatchError> {
    if models.len() != form.periods() {
        return Err(DispatchError::DimensionMismatch {
            expected: form.periods(),
            got: models.len(),
        });
    }
    let scenarios = sample_trajectories(models, n_scenarios, seed);
    let mut lp = LinearProgram::minimize();
    let x_offset = form.push_first_stage(&mut lp);
    let weight = 1.0 / n_scenarios as f64;
    for xi in &scenarios {
        form.push_recourse_block(&mut lp, x_offset, xi, weight);
    }
    let res = solved(backend, &lp)?;
    let x = res.primal[x_offset..x_offset + form.n_x].to_vec();
    Ok((res.objective, round_binaries(&x)))
}

/// Draw `count` trajectories: per period, an independent conditional sample.
pub fn sample_trajectories(
    models: &[ConditionalGmm],
    count: usize,
    seed: u64,
) -> Vec<Vec<DVector<f64>>> {
    let per_period: Vec<Vec<DVector<f64>>> = models
        .iter()
        .enumerate()
        .map(|(t, model)| model.sample(count, seed.wrapping_add(t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
        .collect();
    (0..count)
        .map(|i| per_period.iter().map(|draws| draws[i].clone()).collect())
        .collect()
}

pub(crate) fn solved(
    backend: &dyn SolverBackend,
    lp: &LinearProgram,
) -> Result<SolveResult, DispatchError> {
    let res = solve(backend, lp, &SolveOptions::default())?;
    if res.status != SolveStatus::Optimal {
        return Err(DispatchError::Numerical(format!(
            "solve terminated with {:?}",
            res.status
        )));
    }
    Ok(res)
}

pub(crate) fn round_binaries(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| if *v > 0.5 { 1.0 } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests;
