//! Per-period union-of-polytopes uncertainty sets.
//!
//! Each mixture component's calibrated ellipsoid is outer-approximated by J
//! supporting halfspaces (rows `v_j^T L^-1`, offsets `sqrt(gamma) + v_j^T
//! L^-1 mu`), giving one polytope per component per period. The full set is
//! the Cartesian product over periods of the per-period unions. Baselines:
//! a per-period box, and a union of affine images of the
//! `{|eta|_inf <= 1, |eta|_1 <= Phi}` latent polytope built from the
//! marginal mixture.

mod milp;

pub use milp::{encode_milp, maximize_encoded, worst_case_enumerate, MilpEncoding, WorstCase};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibratedRadius;
use crate::gmm::{ConditionalComponent, ConditionalGmm};
use crate::solver::{
    solve, ConstraintSense, LinearProgram, SolveOptions, SolveStatus, SolverBackend, SolverError,
    VarKind,
};

/// Membership tolerance for halfspace evaluation.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SetError {
    #[error("too few directions: need at least {need} for boundedness in dimension {dim}, got {got}")]
    TooFewDirections { need: usize, got: usize, dim: usize },
    #[error("singular Cholesky factor in component covariance")]
    SingularCholesky,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("big-M bounds missing from set")]
    MissingBigM,
    #[error("enumeration too large: {combinations} subset combinations exceed the cap {cap}")]
    EnumerationTooLarge { combinations: u128, cap: u128 },
    #[error("empty bounds: {0}")]
    EmptyBounds(String),
    #[error("inconsistent set construction: {0}")]
    Inconsistent(String),
    #[error("solver failure during set construction: {0}")]
    Solver(#[from] SolverError),
}

/// A finite set of unit direction vectors that positively spans the space
/// (the first 2m are the signed coordinate axes).
#[derive(Debug, Clone)]
pub struct DirectionSet {
    directions: Vec<DVector<f64>>,
    dim: usize,
}

impl DirectionSet {
    pub fn directions(&self) -> &[DVector<f64>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Default direction count: the signed axes plus a couple of extras, and
/// never fewer than the 8 used for two-dimensional illustrations.
pub fn default_direction_count(m: usize) -> usize {
    (2 * m + 2).max(8)
}

/// Build `j` unit directions in dimension `m`: the 2m signed axes first,
/// then deterministic low-discrepancy sphere points. In 2D the extras are
/// evenly spaced between the axes, so (m=2, j=8) yields the four diagonals.
pub fn make_directions(m: usize, j: usize, seed: u64) -> Result<DirectionSet, SetError> {
    if m == 0 {
        return Err(SetError::DimensionMismatch { expected: 1, got: 0 });
    }
    if j < 2 * m {
        return Err(SetError::TooFewDirections { need: 2 * m, got: j, dim: m });
    }
    let mut dirs = Vec::with_capacity(j);
    for i in 0..m {
        let mut plus = DVector::zeros(m);
        plus[i] = 1.0;
        dirs.push(plus);
        let mut minus = DVector::zeros(m);
        minus[i] = -1.0;
        dirs.push(minus);
    }
    let extras = j - 2 * m;
    if extras > 0 {
        match m {
            1 => {
                // Only two unit vectors exist; repeat alternately (redundant
                // halfspaces are harmless).
                for i in 0..extras {
                    let mut v = DVector::zeros(1);
                    v[0] = if i % 2 == 0 { 1.0 } else { -1.0 };
                    dirs.push(v);
                }
            }
            2 => {
                // Evenly spaced angles offset half a step from the axes.
                for i in 0..extras {
                    let theta = (i as f64 + 0.5) * 2.0 * std::f64::consts::PI / extras as f64;
                    dirs.push(DVector::from_vec(vec![theta.cos(), theta.sin()]));
                }
            }
            _ => {
                // Kronecker low-discrepancy sequence mapped through the
                // inverse normal CDF, then normalized to the sphere. The seed
                // rotates the sequence start.
                let alphas: Vec<f64> = primes(m).iter().map(|p| (*p as f64).sqrt()).collect();
                let offset = (seed as f64 * 0.618_033_988_749_894_9).fract();
                for i in 0..extras {
                    let mut v = DVector::zeros(m);
                    for (c, a) in alphas.iter().enumerate() {
                        let u = ((i as f64 + 1.0) * a + offset).fract().clamp(1e-9, 1.0 - 1e-9);
                        v[c] = crate::math::inverse_normal_cdf(u);
                    }
                    let norm = v.norm();
                    if norm < 1e-9 {
                        v[0] = 1.0;
                    } else {
                        v /= norm;
                    }
                    dirs.push(v);
                }
            }
        }
    }
    for v in dirs.iter_mut() {
        let n = v.norm();
        *v /= n;
    }
    Ok(DirectionSet { directions: dirs, dim: m })
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while out.len() < count {
        if (2..candidate).all(|d| d * d > candidate || candidate % d != 0) {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

/// A nonempty bounded polytope `{xi : D xi <= d}` carrying the component
/// center and the Cholesky factor it was built from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Polytope {
    /// Row-major J x m matrix.
    pub d_rows: Vec<Vec<f64>>,
    pub d_rhs: Vec<f64>,
    pub center: Vec<f64>,
    /// Lower-triangular factor, row-major; identity for box-derived pieces.
    pub cholesky: Vec<Vec<f64>>,
}

impl Polytope {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_faces(&self) -> usize {
        self.d_rhs.len()
    }

    /// Elementwise halfspace check with tolerance.
    pub fn contains(&self, point: &DVector<f64>) -> bool {
        self.d_rows.iter().zip(self.d_rhs.iter()).all(|(row, &rhs)| {
            let act: f64 = row.iter().zip(point.iter()).map(|(a, x)| a * x).sum();
            act <= rhs + MEMBERSHIP_TOL
        })
    }

    /// Max of `direction . xi` over the polytope via an LP.
    pub fn support_lp(
        &self,
        direction: &[f64],
        backend: &dyn SolverBackend,
    ) -> Result<f64, SetError> {
        let m = self.dim();
        let mut lp = LinearProgram::maximize();
        for &c in direction.iter().take(m) {
            lp.add_var(c, f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous);
        }
        for (row, &rhs) in self.d_rows.iter().zip(self.d_rhs.iter()) {
            let terms: Vec<(usize, f64)> = row.iter().cloned().enumerate().collect();
            lp.add_row(&terms, ConstraintSense::Le, rhs);
        }
        let res = solve(backend, &lp, &SolveOptions::default())?;
        match res.status {
            SolveStatus::Optimal => Ok(res.objective),
            SolveStatus::Unbounded => Err(SetError::Inconsistent(
                "polytope unbounded: directions do not positively span".into(),
            )),
            s => Err(SetError::Inconsistent(format!("support LP terminated with {s:?}"))),
        }
    }
}

/// Build one supporting-halfspace polytope for a conditional component:
/// rows `v_j^T L^-1`, offsets `sqrt(gamma) + v_j^T L^-1 mu`.
pub fn build_subset_polytope(
    component: &ConditionalComponent,
    gamma: f64,
    dirs: &DirectionSet,
) -> Result<Polytope, SetError> {
    let m = component.mean.len();
    if dirs.dim() != m {
        return Err(SetError::DimensionMismatch { expected: m, got: dirs.dim() });
    }
    if !(gamma >= 0.0) {
        return Err(SetError::Inconsistent(format!("negative radius {gamma}")));
    }
    let l = component.cholesky_l();
    let sqrt_gamma = gamma.sqrt();
    let mut d_rows = Vec::with_capacity(dirs.len());
    let mut d_rhs = Vec::with_capacity(dirs.len());
    for v in dirs.directions() {
        // Row = v^T L^-1, computed as solve(L^T w = v).
        let w = l
            .transpose()
            .solve_upper_triangular(v)
            .ok_or(SetError::SingularCholesky)?;
        let offset = sqrt_gamma + w.dot(&component.mean);
        d_rows.push(w.iter().cloned().collect());
        d_rhs.push(offset);
    }
    let poly = Polytope {
        d_rows,
        d_rhs,
        center: component.mean.iter().cloned().collect(),
        cholesky: (0..m)
            .map(|i| (0..m).map(|j| l[(i, j)]).collect())
            .collect(),
    };
    // Nonemptiness: the center must satisfy every row (tight at gamma = 0).
    if !poly.contains(&component.mean) {
        return Err(SetError::Inconsistent("component center escaped its own polytope".into()));
    }
    Ok(poly)
}

/// Per-period union of polytopes with per-coordinate Big-M bounds: the
/// shared backbone of every set family here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyUnionSet {
    /// `periods[t][k]` is the k-th polytope of period t.
    pub periods: Vec<Vec<Polytope>>,
    /// `big_m[t][i]` bounds `|xi_i|` over every polytope of period t,
    /// with margin.
    pub big_m: Vec<Vec<f64>>,
}

impl PolyUnionSet {
    pub fn num_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn dim(&self) -> usize {
        self.periods[0][0].dim()
    }

    pub fn pieces_per_period(&self) -> usize {
        self.periods[0].len()
    }

    /// True iff every period's point lies in at least one of that period's
    /// polytopes.
    pub fn membership(&self, trajectory: &[DVector<f64>]) -> Result<bool, SetError> {
        if trajectory.len() != self.num_periods() {
            return Err(SetError::DimensionMismatch {
                expected: self.num_periods(),
                got: trajectory.len(),
            });
        }
        for (t, point) in trajectory.iter().enumerate() {
            if point.len() != self.dim() {
                return Err(SetError::DimensionMismatch { expected: self.dim(), got: point.len() });
            }
            if !self.periods[t].iter().any(|p| p.contains(point)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// A guaranteed member: per period, the center of the first polytope
    /// (every center belongs to its own polytope).
    pub fn center_trajectory(&self) -> Vec<DVector<f64>> {
        self.periods
            .iter()
            .map(|polys| DVector::from_vec(polys[0].center.clone()))
            .collect()
    }

    /// Compute per-coordinate Big-M bounds: max over polytopes of the LP
    /// maximum of |xi_i|, times a 10% margin (plus a hair for the degenerate
    /// all-zero case). Errors if any support LP is unbounded, which doubles
    /// as the boundedness check.
    pub fn compute_big_m(&mut self, backend: &dyn SolverBackend) -> Result<(), SetError> {
        let m = self.dim();
        let mut big_m = Vec::with_capacity(self.periods.len());
        for polys in &self.periods {
            let mut per_coord = vec![0.0_f64; m];
            for poly in polys {
                for i in 0..m {
                    let mut dir = vec![0.0; m];
                    dir[i] = 1.0;
                    let hi = poly.support_lp(&dir, backend)?;
                    dir[i] = -1.0;
                    let lo = -poly.support_lp(&dir, backend)?;
                    per_coord[i] = per_coord[i].max(hi.abs()).max(lo.abs());
                }
            }
            big_m.push(per_coord.iter().map(|v| 1.1 * v + 1e-6).collect());
        }
        self.big_m = big_m;
        Ok(())
    }
}

/// The calibrated contextual set: per period, one polytope per mixture
/// component, radius from the order-statistic rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CausSet {
    pub union: PolyUnionSet,
    pub gamma_per_period: Vec<CalibratedRadius>,
}

/// Build the contextual set from per-period conditional models and radii.
/// `dirs` is shared across periods; `backend` sizes the Big-M bounds.
pub fn build_caus(
    models: &[ConditionalGmm],
    radii: &[CalibratedRadius],
    dirs: &DirectionSet,
    backend: &dyn SolverBackend,
) -> Result<CausSet, SetError> {
    if models.is_empty() || models.len() != radii.len() {
        return Err(SetError::Inconsistent(format!(
            "{} models vs {} radii",
            models.len(),
            radii.len()
        )));
    }
    let k = models[0].k();
    let m = models[0].dim();
    let mut periods = Vec::with_capacity(models.len());
    for (t, model) in models.iter().enumerate() {
        if model.k() != k {
            return Err(SetError::Inconsistent(format!(
                "period {t} has {} components, period 0 has {k}",
                model.k()
            )));
        }
        if model.dim() != m {
            return Err(SetError::DimensionMismatch { expected: m, got: model.dim() });
        }
        let polys = model
            .components
            .iter()
            .map(|c| build_subset_polytope(c, radii[t].gamma, dirs))
            .collect::<Result<Vec<_>, _>>()?;
        periods.push(polys);
    }
    let mut union = PolyUnionSet { periods, big_m: Vec::new() };
    union.compute_big_m(backend)?;
    Ok(CausSet { union, gamma_per_period: radii.to_vec() })
}

/// Replace every per-period radius with the maximum across periods
/// (the shared-radius reading of the calibration rule).
pub fn share_max_radius(radii: &[CalibratedRadius]) -> Vec<CalibratedRadius> {
    let max_gamma = radii.iter().map(|r| r.gamma).fold(f64::NEG_INFINITY, f64::max);
    radii.iter().map(|r| CalibratedRadius { gamma: max_gamma, ..*r }).collect()
}

/// Per-period axis-aligned box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxSet {
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

impl BoxSet {
    /// Componentwise min/max of per-period samples.
    pub fn from_samples(samples_per_period: &[Vec<DVector<f64>>]) -> Result<BoxSet, SetError> {
        if samples_per_period.is_empty() || samples_per_period.iter().any(|s| s.is_empty()) {
            return Err(SetError::EmptyBounds("no samples to bound".into()));
        }
        let m = samples_per_period[0][0].len();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for samples in samples_per_period {
            let mut lo = vec![f64::INFINITY; m];
            let mut hi = vec![f64::NEG_INFINITY; m];
            for s in samples {
                if s.len() != m {
                    return Err(SetError::DimensionMismatch { expected: m, got: s.len() });
                }
                for i in 0..m {
                    lo[i] = lo[i].min(s[i]);
                    hi[i] = hi[i].max(s[i]);
                }
            }
            lower.push(lo);
            upper.push(hi);
        }
        BoxSet::from_bounds(lower, upper)
    }

    pub fn from_bounds(lower: Vec<Vec<f64>>, upper: Vec<Vec<f64>>) -> Result<BoxSet, SetError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(SetError::EmptyBounds("bounds must be nonempty and aligned".into()));
        }
        for (lo, hi) in lower.iter().zip(upper.iter()) {
            if lo.len() != hi.len() {
                return Err(SetError::DimensionMismatch { expected: lo.len(), got: hi.len() });
            }
            if lo.iter().zip(hi.iter()).any(|(a, b)| a > b || !a.is_finite() || !b.is_finite()) {
                return Err(SetError::EmptyBounds("lower bound exceeds upper bound".into()));
            }
        }
        Ok(BoxSet { lower, upper })
    }

    /// Express as a one-piece-per-period union.
    pub fn to_union(&self) -> PolyUnionSet {
        let m = self.lower[0].len();
        let mut periods = Vec::new();
        let mut big_m = Vec::new();
        for (lo, hi) in self.lower.iter().zip(self.upper.iter()) {
            let mut rows = Vec::with_capacity(2 * m);
            let mut rhs = Vec::with_capacity(2 * m);
            for i in 0..m {
                let mut up = vec![0.0; m];
                up[i] = 1.0;
                rows.push(up);
                rhs.push(hi[i]);
                let mut dn = vec![0.0; m];
                dn[i] = -1.0;
                rows.push(dn);
                rhs.push(-lo[i]);
            }
            let center: Vec<f64> = lo.iter().zip(hi.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
            periods.push(vec![Polytope {
                d_rows: rows,
                d_rhs: rhs,
                center,
                cholesky: identity_rows(m),
            }]);
            big_m.push(
                lo.iter().zip(hi.iter()).map(|(a, b)| 1.1 * a.abs().max(b.abs()) + 1e-6).collect(),
            );
        }
        PolyUnionSet { periods, big_m }
    }
}

fn identity_rows(m: usize) -> Vec<Vec<f64>> {
    (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Union-of-subsets baseline from the marginal mixture: each subset is the
/// affine image `mu_k + Lambda * Sigma_k^{1/2} eta` of the latent polytope
/// `{|eta|_inf <= 1, |eta|_1 <= Phi_k}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UosBaselineSet {
    pub union: PolyUnionSet,
    pub lambda: f64,
    pub phi: Vec<f64>,
}

/// Marginal mixture parameters for the baseline: (weight, mean, covariance).
pub type MarginalComponent = (f64, DVector<f64>, DMatrix<f64>);

/// Build the baseline. `phi[k]` must lie in (0, m]; `lambda > 0`. The same
/// set is used at every period (the marginal model carries no covariate).
pub fn build_uos_baseline(
    marginal: &[MarginalComponent],
    lambda: f64,
    phi: &[f64],
    num_periods: usize,
    backend: &dyn SolverBackend,
) -> Result<UosBaselineSet, SetError> {
    if marginal.is_empty() || marginal.len() != phi.len() {
        return Err(SetError::Inconsistent("marginal components and phi must align".into()));
    }
    let m = marginal[0].1.len();
    if !(lambda > 0.0) {
        return Err(SetError::Inconsistent(format!("lambda must be positive, got {lambda}")));
    }
    if m > 12 {
        return Err(SetError::Inconsistent(
            "latent budget polytope has 2^m sign facets; dimension capped at 12".into(),
        ));
    }
    for &p in phi {
        if !(p > 0.0 && p <= m as f64) {
            return Err(SetError::Inconsistent(format!("phi must lie in (0, {m}], got {p}")));
        }
    }
    let mut pieces = Vec::with_capacity(marginal.len());
    for ((_, mu, cov), &phi_k) in marginal.iter().zip(phi.iter()) {
        // Symmetric PSD square root via the eigendecomposition.
        let eig = cov.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l < -1e-10) {
            return Err(SetError::SingularCholesky);
        }
        let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let sqrt_cov =
            &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
        let map = lambda * sqrt_cov;
        let inv = map.clone().try_inverse().ok_or(SetError::SingularCholesky)?;

        // Latent H-representation: +-eta_i <= 1 and s^T eta <= phi for every
        // sign pattern s.
        let mut h_rows: Vec<Vec<f64>> = Vec::new();
        let mut h_rhs: Vec<f64> = Vec::new();
        for i in 0..m {
            let mut r = vec![0.0; m];
            r[i] = 1.0;
            h_rows.push(r.clone());
            h_rhs.push(1.0);
            r[i] = -1.0;
            h_rows.push(r);
            h_rhs.push(1.0);
        }
        for mask in 0..(1u32 << m) {
            let row: Vec<f64> =
                (0..m).map(|i| if mask & (1 << i) != 0 { -1.0 } else { 1.0 }).collect();
            h_rows.push(row);
            h_rhs.push(phi_k);
        }
        // Image rows: H * inv, rhs h + H * inv * mu.
        let mut d_rows = Vec::with_capacity(h_rows.len());
        let mut d_rhs = Vec::with_capacity(h_rows.len());
        for (hr, &hv) in h_rows.iter().zip(h_rhs.iter()) {
            let hrow = DVector::from_vec(hr.clone());
            let mapped = inv.transpose() * &hrow;
            d_rhs.push(hv + mapped.dot(mu));
            d_rows.push(mapped.iter().cloned().collect());
        }
        pieces.push(Polytope {
            d_rows,
            d_rhs,
            center: mu.iter().cloned().collect(),
            cholesky: (0..m).map(|i| (0..m).map(|j| map[(i, j)]).collect()).collect(),
        });
    }
    let mut union = PolyUnionSet {
        periods: (0..num_periods).map(|_| pieces.clone()).collect(),
        big_m: Vec::new(),
    };
    union.compute_big_m(backend)?;
    Ok(UosBaselineSet { union, lambda, phi: phi.to_vec() })
}

/// Serialization wrapper naming the set family, for CLI artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SetFile {
    Caus(CausSet),
    Box(BoxSet),
    Uos(UosBaselineSet),
}

impl SetFile {
    pub fn to_union(&self) -> PolyUnionSet {
        match self {
            SetFile::Caus(s) => s.union.clone(),
            SetFile::Box(b) => b.to_union(),
            SetFile::Uos(u) => u.union.clone(),
        }
    }
}
