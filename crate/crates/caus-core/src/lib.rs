//! Contextual uncertainty sets for robust dispatch.
//!
//! The pipeline: fit a joint Gaussian mixture over (covariate, uncertainty)
//! histories, condition it on observed covariates, calibrate a per-period
//! radius from union Mahalanobis scores of conditional samples, assemble a
//! union-of-polytopes uncertainty set, and solve a two-stage robust unit
//! commitment against that set by column-and-constraint generation.
//!
//! Modules:
//! - [`gmm`]: joint mixture fitting (EM) and conditioning.
//! - [`calibration`]: union Mahalanobis scores and the order-statistic radius.
//! - [`sets`]: polyhedral uncertainty sets, their mixed-integer encoding, and
//!   the enumeration oracle.
//! - [`solver`]: LP/MILP abstraction with a HiGHS backend and an exact
//!   rational simplex for small oracle problems.
//! - [`dispatch`]: the two-stage robust unit-commitment model and solvers.
//! - [`synth`]: synthetic history generation for demos and tests.

pub mod calibration;
pub mod dispatch;
pub mod gmm;
pub mod math;
pub mod sets;
pub mod solver;
pub mod synth;

pub use calibration::{CalibratedRadius, CalibrationError, ScoreSet};
pub use dispatch::{MatrixForm, RobustSolution, UcInstance};
pub use gmm::{
    ConditionalComponent, ConditionalGmm, EmConfig, GaussianComponent, GmmError, JointGmm, Sample,
};
pub use sets::{
    BoxSet, CausSet, DirectionSet, MilpEncoding, PolyUnionSet, Polytope, SetError, UosBaselineSet,
};
pub use solver::{
    ConstraintSense, LinearProgram, SolveOptions, SolveResult, SolveStatus, SolverBackend,
    SolverError, VarKind,
};
