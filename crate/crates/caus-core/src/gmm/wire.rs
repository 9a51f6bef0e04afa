//! JSON serialization of fitted models.
//!
//! Schema: `{n, m, components: [{weight, mean, covariance}]}` with the
//! covariance stored row-major. Floats round-trip exactly (shortest
//! representation that parses back to the same bits).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{GaussianComponent, GmmError, JointGmm};

#[derive(Serialize, Deserialize)]
struct ComponentWire {
    weight: f64,
    mean: Vec<f64>,
    covariance: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct JointGmmWire {
    n: usize,
    m: usize,
    components: Vec<ComponentWire>,
}

impl JointGmm {
    pub fn to_json(&self) -> String {
        let wire = JointGmmWire {
            n: self.covariate_dim(),
            m: self.uncertainty_dim(),
            components: self
                .components()
                .iter()
                .map(|c| ComponentWire {
                    weight: c.weight,
                    mean: c.mean.iter().cloned().collect(),
                    covariance: row_major(&c.covariance),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&wire).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<JointGmm, GmmError> {
        let wire: JointGmmWire =
            serde_json::from_str(text).map_err(|e| GmmError::Serialization(e.to_string()))?;
        let d = wire.n + wire.m;
        let components = wire
            .components
            .into_iter()
            .map(|c| {
                if c.mean.len() != d || c.covariance.len() != d * d {
                    return Err(GmmError::Serialization(format!(
                        "component arrays inconsistent with n+m={d}"
                    )));
                }
                Ok(GaussianComponent {
                    weight: c.weight,
                    mean: DVector::from_vec(c.mean),
                    covariance: DMatrix::from_row_slice(d, d, &c.covariance),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        JointGmm::new(components, wire.n, wire.m)
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}
