//! Shared fixtures for the benchmark targets.

use nalgebra::{DMatrix, DVector};

use caus_core::calibration::{calibrate, CalibratedRadius};
use caus_core::gmm::ConditionalGmm;
use caus_core::sets::{build_caus, make_directions, CausSet};
use caus_core::solver::HighsBackend;

/// A two-component, two-farm conditional model at a fixed covariate.
pub fn bimodal_conditional() -> ConditionalGmm {
    let cov = DMatrix::identity(2, 2) * 9.0;
    ConditionalGmm::from_parts(
        vec![
            (0.5, DVector::from_vec(vec![35.0, 15.0]), cov.clone()),
            (0.5, DVector::from_vec(vec![15.0, 35.0]), cov),
        ],
        DVector::from_vec(vec![50.0]),
    )
    .expect("valid fixture")
}

/// Calibrated contextual set over `t` periods of the fixture model.
pub fn fixture_caus(t: usize, ns: usize) -> CausSet {
    let models: Vec<ConditionalGmm> = (0..t).map(|_| bimodal_conditional()).collect();
    let radii: Vec<CalibratedRadius> =
        models.iter().map(|m| calibrate(m, ns, 0.05, 11).expect("calibrates")).collect();
    let dirs = make_directions(2, 8, 0).expect("directions");
    build_caus(&models, &radii, &dirs, &HighsBackend).expect("builds")
}
