//! File formats shared by the subcommands: the per-period covariates CSV and
//! the JSON artifact bodies.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use caus_core::calibration::CalibrationReport;
use caus_core::gmm::{ConditionalGmm, JointGmm};
use caus_core::sets::SetFile;

use crate::CliError;

/// Parse the covariates CSV: header `period,x_1..x_n`, one row per period,
/// periods 1..T in order.
pub fn parse_covariates(text: &str) -> Result<Vec<DVector<f64>>, CliError> {
    let mut lines = text.lines().enumerate();
    let (_, header) =
        lines.next().ok_or_else(|| CliError::Parse("covariates file is empty".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"period") || cols.len() < 2 {
        return Err(CliError::Parse("covariates header must be 'period,x_1..x_n'".into()));
    }
    let n = cols.len() - 1;
    let mut out = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            return Err(CliError::Parse(format!(
                "covariates line {}: expected {} fields, got {}",
                lineno + 1,
                n + 1,
                fields.len()
            )));
        }
        let period: usize = fields[0].parse().map_err(|e| {
            CliError::Parse(format!("covariates line {}: bad period: {e}", lineno + 1))
        })?;
        if period != out.len() + 1 {
            return Err(CliError::Parse(format!(
                "covariates line {}: period {} out of order (expected {})",
                lineno + 1,
                period,
                out.len() + 1
            )));
        }
        let values = fields[1..]
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|e| {
                    CliError::Parse(format!("covariates line {}: bad number '{s}': {e}", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(DVector::from_vec(values));
    }
    if out.is_empty() {
        return Err(CliError::Parse("covariates file has no data rows".into()));
    }
    Ok(out)
}

/// Condition a joint model on each period's covariate, warning on prior
/// fallback.
pub fn condition_per_period(
    model: &JointGmm,
    covariates: &[DVector<f64>],
) -> Result<Vec<ConditionalGmm>, CliError> {
    covariates
        .iter()
        .enumerate()
        .map(|(t, x)| {
            let cond = model.condition(x).map_err(CliError::from_core)?;
            if cond.weights_fell_back_to_prior {
                eprintln!(
                    "warning: period {}: covariate likelihood underflowed; using prior weights",
                    t + 1
                );
            }
            Ok(cond)
        })
        .collect()
}

/// Serialize the model with its envelope, preserving the `{n, m,
/// components}` schema for consumers.
pub fn model_to_artifact(model: &JointGmm, meta: crate::meta::Meta) -> String {
    let body: serde_json::Value =
        serde_json::from_str(&model.to_json()).expect("model JSON is valid");
    let mut root = serde_json::Map::new();
    root.insert("meta".into(), serde_json::to_value(&meta).expect("meta serializes"));
    for (k, v) in body.as_object().expect("model JSON is an object") {
        root.insert(k.clone(), v.clone());
    }
    serde_json::to_string_pretty(&serde_json::Value::Object(root)).expect("artifact serializes")
}

/// Calibration artifact.
#[derive(Serialize, Deserialize)]
pub struct RadiiFile {
    pub meta: crate::meta::Meta,
    pub periods: Vec<CalibrationReport>,
}

/// Set artifact.
#[derive(Serialize, Deserialize)]
pub struct SetArtifact {
    pub meta: crate::meta::Meta,
    #[serde(flatten)]
    pub set: SetFile,
}

/// Solution artifact.
#[derive(Serialize, Deserialize)]
pub struct SolutionFile {
    pub meta: crate::meta::Meta,
    pub commitment: Vec<Vec<f64>>,
    pub startup: Vec<Vec<f64>>,
    pub x: Vec<f64>,
    pub first_stage_cost: f64,
    pub worst_recourse_cost: f64,
    pub total_cost: f64,
    pub iterations: usize,
    pub gap: f64,
    pub converged: bool,
    pub worst_scenarios: Vec<Vec<Vec<f64>>>,
}

/// Reliability artifact.
#[derive(Serialize, Deserialize)]
pub struct ReportFile {
    pub meta: crate::meta::Meta,
    #[serde(flatten)]
    pub report: caus_core::dispatch::ReliabilityReport,
}
