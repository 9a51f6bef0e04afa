//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use caus_core::calibration::{calibrate, CalibratedRadius, CalibrationReport, ScoreSet};
use caus_core::dispatch::{
    assemble, evaluate_reliability, solve_ccg, solve_deterministic, solve_saa, CcgConfig,
    SubproblemMethod, UcInstance,
};
use caus_core::gmm::{fit_gmm, EmConfig, JointGmm};
use caus_core::math::chi_square_quantile;
use caus_core::sets::{
    build_caus, build_uos_baseline, default_direction_count, make_directions, share_max_radius,
    BoxSet, SetFile,
};
use caus_core::solver::{backend_from_env, SolverBackend};
use caus_core::synth::{history_from_csv, history_to_csv, SynthConfig};

use crate::io::{
    condition_per_period, model_to_artifact, parse_covariates, RadiiFile, ReportFile,
    SetArtifact, SolutionFile,
};
use crate::meta::{read_input, write_output, Meta};
use crate::CliError;

fn backend(name: Option<&str>) -> Result<Box<dyn SolverBackend>, CliError> {
    match name {
        Some("highs") => Ok(Box::new(caus_core::solver::HighsBackend)),
        Some("exact") => Ok(Box::new(caus_core::solver::ExactSimplex)),
        Some(other) => Err(CliError::InvalidConfig(format!(
            "unknown backend '{other}' (expected highs or exact)"
        ))),
        None => backend_from_env().map_err(|e| CliError::Solver(e.to_string())),
    }
}

fn load_instance(path: &Path, meta: &mut Meta) -> Result<UcInstance, CliError> {
    let text = read_input(path, meta)?;
    let instance: UcInstance = serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    instance.validate().map_err(CliError::from_core)?;
    Ok(instance)
}

pub fn gen_data(out: &Path, count: usize, periods: usize, seed: u64) -> Result<(), CliError> {
    if count == 0 || periods == 0 {
        return Err(CliError::InvalidConfig("count and periods must be positive".into()));
    }
    let config = SynthConfig::default();
    let samples = config.generate(count, periods, seed);
    write_output(out, &history_to_csv(&samples))?;
    println!("wrote {} rows to {}", count, out.display());
    Ok(())
}

pub fn fit(history: &Path, k: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let mut meta = Meta::new("fit");
    meta.param("k", k);
    meta.param("seed", seed);
    let text = read_input(history, &mut meta)?;
    let samples = history_from_csv(&text).map_err(CliError::Parse)?;
    let config = EmConfig { seed, ..EmConfig::default() };
    let model = fit_gmm(&samples, k, &config).map_err(CliError::from_core)?;
    let weights: Vec<f64> = model.components().iter().map(|c| c.weight).collect();
    write_output(out, &model_to_artifact(&model, meta))?;
    println!(
        "fitted {}-component model on {} rows (weights {:?}) -> {}",
        k,
        samples.len(),
        weights,
        out.display()
    );
    Ok(())
}

fn load_model(path: &Path, meta: &mut Meta) -> Result<JointGmm, CliError> {
    let text = read_input(path, meta)?;
    JointGmm::from_json(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
pub fn calibrate_cmd(
    model_path: &Path,
    covariates_path: &Path,
    epsilon: f64,
    ns: usize,
    seed: u64,
    share_gamma: bool,
    out: &Path,
    scores_csv: Option<&Path>,
) -> Result<(), CliError> {
    let mut meta = Meta::new("calibrate");
    meta.param("epsilon", epsilon);
    meta.param("ns", ns);
    meta.param("seed", seed);
    meta.param("share_gamma", share_gamma);
    let model = load_model(model_path, &mut meta)?;
    let covariates = parse_covariates(&read_input(covariates_path, &mut meta)?)?;
    let conditionals = condition_per_period(&model, &covariates)?;
    let mut radii = Vec::new();
    for (t, cond) in conditionals.iter().enumerate() {
        let r = calibrate(cond, ns, epsilon, seed.wrapping_add(t as u64))
            .map_err(CliError::from_core)?;
        radii.push(r);
    }
    if share_gamma {
        radii = share_max_radius(&radii);
    }
    let reports: Vec<CalibrationReport> = radii
        .iter()
        .enumerate()
        .map(|(t, r)| CalibrationReport {
            period: t + 1,
            epsilon: r.epsilon,
            n_samples: r.n_samples,
            kappa: r.kappa,
            gamma: r.gamma,
            seed: seed.wrapping_add(t as u64),
        })
        .collect();
    for r in &reports {
        println!(
            "period {}: kappa={} gamma={:.6} (epsilon={}, ns={})",
            r.period, r.kappa, r.gamma, r.epsilon, r.n_samples
        );
    }
    if let Some(csv_path) = scores_csv {
        let cond = &conditionals[0];
        let draws = cond.sample(ns, seed);
        let scores: Vec<f64> = draws
            .iter()
            .map(|p| caus_core::calibration::union_score(cond, p).expect("dimension matches"))
            .collect();
        let set = ScoreSet::new(scores, 1).map_err(CliError::from_core)?;
        let mut csv = String::from("score,count\n");
        for (mid, count) in set.histogram(50) {
            csv.push_str(&format!("{mid},{count}\n"));
        }
        write_output(csv_path, &csv)?;
    }
    let file = RadiiFile { meta, periods: reports };
    write_output(out, &serde_json::to_string_pretty(&file).expect("radii serialize"))?;
    Ok(())
}

fn load_radii(path: &Path, meta: &mut Meta) -> Result<Vec<CalibratedRadius>, CliError> {
    let text = read_input(path, meta)?;
    let file: RadiiFile =
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok(file
        .periods
        .iter()
        .map(|r| CalibratedRadius {
            gamma: r.gamma,
            epsilon: r.epsilon,
            kappa: r.kappa,
            n_samples: r.n_samples,
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn build_set(
    model_path: &Path,
    covariates_path: &Path,
    radii_path: Option<&Path>,
    family: &str,
    j: Option<usize>,
    ns: usize,
    seed: u64,
    lambda: Option<f64>,
    phi: Option<f64>,
    backend_name: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let mut meta = Meta::new("build-set");
    meta.param("set", family);
    meta.param("ns", ns);
    meta.param("seed", seed);
    let model = load_model(model_path, &mut meta)?;
    let covariates = parse_covariates(&read_input(covariates_path, &mut meta)?)?;
    let conditionals = condition_per_period(&model, &covariates)?;
    let m = model.uncertainty_dim();
    let backend = backend(backend_name)?;
    let set = match family {
        "caus" => {
            let radii_path = radii_path
                .ok_or_else(|| CliError::InvalidConfig("caus sets need --radii".into()))?;
            let radii = load_radii(radii_path, &mut meta)?;
            if radii.len() != conditionals.len() {
                return Err(CliError::InvalidConfig(format!(
                    "radii file has {} periods, covariates have {}",
                    radii.len(),
                    conditionals.len()
                )));
            }
            let j_count = j.unwrap_or_else(|| default_direction_count(m));
            meta.param("j", j_count);
            let dirs = make_directions(m, j_count, seed).map_err(CliError::from_core)?;
            SetFile::Caus(
                build_caus(&conditionals, &radii, &dirs, backend.as_ref())
                    .map_err(CliError::from_core)?,
            )
        }
        "box" => {
            let samples: Vec<Vec<DVector<f64>>> = conditionals
                .iter()
                .enumerate()
                .map(|(t, cond)| cond.sample(ns, seed.wrapping_add(t as u64)))
                .collect();
            SetFile::Box(BoxSet::from_samples(&samples).map_err(CliError::from_core)?)
        }
        "uos" => {
            let lambda = lambda.unwrap_or_else(|| chi_square_quantile(m, 0.95).sqrt());
            let phi = phi.unwrap_or(m as f64);
            meta.param("lambda", lambda);
            meta.param("phi", phi);
            let marginal: Vec<(f64, DVector<f64>, DMatrix<f64>)> = model
                .components()
                .iter()
                .map(|c| {
                    let n = model.covariate_dim();
                    (
                        c.weight,
                        c.mean.rows(n, m).into_owned(),
                        c.covariance.view((n, n), (m, m)).into_owned(),
                    )
                })
                .collect();
            SetFile::Uos(
                build_uos_baseline(
                    &marginal,
                    lambda,
                    &vec![phi; marginal.len()],
                    conditionals.len(),
                    backend.as_ref(),
                )
                .map_err(CliError::from_core)?,
            )
        }
        other => {
            return Err(CliError::InvalidConfig(format!(
                "unknown set family '{other}' (expected caus, box, or uos)"
            )))
        }
    };
    let artifact = SetArtifact { meta, set };
    write_output(out, &serde_json::to_string_pretty(&artifact).expect("set serialize"))?;
    println!("wrote {family} set -> {}", out.display());
    Ok(())
}

fn subproblem_method(name: &str) -> Result<SubproblemMethod, CliError> {
    match name {
        "enum" => Ok(SubproblemMethod::Enumerate),
        "milp" => Ok(SubproblemMethod::Milp),
        other => Err(CliError::InvalidConfig(format!(
            "unknown subproblem '{other}' (expected enum or milp)"
        ))),
    }
}

pub fn solve_cmd(
    instance_path: &Path,
    set_path: &Path,
    subproblem: &str,
    tol: f64,
    max_iters: usize,
    backend_name: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let mut meta = Meta::new("solve");
    meta.param("subproblem", subproblem);
    meta.param("tol", tol);
    meta.param("max_iters", max_iters);
    let instance = load_instance(instance_path, &mut meta)?;
    let set_text = read_input(set_path, &mut meta)?;
    let artifact: SetArtifact = serde_json::from_str(&set_text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", set_path.display())))?;
    let union = artifact.set.to_union();
    let form = assemble(&instance).map_err(CliError::from_core)?;
    let config = CcgConfig {
        tol_rel: tol,
        max_iters,
        method: subproblem_method(subproblem)?,
        ..CcgConfig::default()
    };
    let backend = backend(backend_name)?;
    let solution =
        solve_ccg(&form, &union, &config, backend.as_ref()).map_err(|e| CliError::Solver(e.to_string()))?;
    if !solution.converged {
        eprintln!(
            "warning: iteration limit reached with relative gap {:.3e}; reporting the incumbent",
            solution.gap
        );
    }
    let file = SolutionFile {
        meta,
        commitment: solution.commitment.clone(),
        startup: solution.startup.clone(),
        x: solution.x.clone(),
        first_stage_cost: solution.first_stage_cost,
        worst_recourse_cost: solution.worst_recourse_cost,
        total_cost: solution.total_cost,
        iterations: solution.iterations,
        gap: solution.gap,
        converged: solution.converged,
        worst_scenarios: solution
            .worst_scenarios
            .iter()
            .map(|traj| traj.iter().map(|p| p.iter().cloned().collect()).collect())
            .collect(),
    };
    write_output(out, &serde_json::to_string_pretty(&file).expect("solution serialize"))?;
    println!(
        "robust cost {:.4} (gap {:.2e}, {} iterations) -> {}",
        solution.total_cost,
        solution.gap,
        solution.iterations,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate_cmd(
    instance_path: &Path,
    solution_path: &Path,
    model_path: &Path,
    covariates_path: &Path,
    n: usize,
    seed: u64,
    backend_name: Option<&str>,
    out: &Path,
    costs_csv: Option<&Path>,
) -> Result<(), CliError> {
    let mut meta = Meta::new("evaluate");
    meta.param("n", n);
    meta.param("seed", seed);
    let instance = load_instance(instance_path, &mut meta)?;
    let solution: SolutionFile = serde_json::from_str(&read_input(solution_path, &mut meta)?)
        .map_err(|e| CliError::Parse(format!("{}: {e}", solution_path.display())))?;
    let model = load_model(model_path, &mut meta)?;
    let covariates = parse_covariates(&read_input(covariates_path, &mut meta)?)?;
    let conditionals = condition_per_period(&model, &covariates)?;
    let form = assemble(&instance).map_err(CliError::from_core)?;
    if solution.x.len() != form.n_x {
        return Err(CliError::InvalidConfig(format!(
            "solution has {} first-stage variables, instance needs {}",
            solution.x.len(),
            form.n_x
        )));
    }
    let backend = backend(backend_name)?;
    let report = evaluate_reliability(&form, &solution.x, &conditionals, n, seed, backend.as_ref())
        .map_err(|e| CliError::Solver(e.to_string()))?;
    println!(
        "reliability {:.4} over {} realizations (mean recourse cost {:.2})",
        report.reliable_fraction, n, report.mean_cost
    );
    if let Some(csv_path) = costs_csv {
        let mut csv = String::from("cost,count\n");
        for (mid, count) in &report.cost_histogram {
            csv.push_str(&format!("{mid},{count}\n"));
        }
        write_output(csv_path, &csv)?;
    }
    let file = ReportFile { meta, report };
    write_output(out, &serde_json::to_string_pretty(&file).expect("report serialize"))?;
    Ok(())
}

/// Compare-run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareConfig {
    pub instance: String,
    pub history: String,
    pub covariates: String,
    pub k: usize,
    pub epsilon: f64,
    pub ns: usize,
    #[serde(default)]
    pub j: Option<usize>,
    pub n_eval: usize,
    #[serde(default = "default_so_scenarios")]
    pub so_scenarios: usize,
    #[serde(default)]
    pub epsilon_sweep: Vec<f64>,
    #[serde(default = "default_subproblem")]
    pub subproblem: String,
    pub seeds: CompareSeeds,
}

fn default_so_scenarios() -> usize {
    50
}

fn default_subproblem() -> String {
    "enum".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareSeeds {
    #[serde(default)]
    pub fit: u64,
    #[serde(default = "one")]
    pub calibrate: u64,
    #[serde(default = "eval_seed")]
    pub evaluate: u64,
    #[serde(default = "so_seed")]
    pub so: u64,
    #[serde(default = "dir_seed")]
    pub directions: u64,
}

fn one() -> u64 {
    1
}
fn eval_seed() -> u64 {
    777
}
fn so_seed() -> u64 {
    4242
}
fn dir_seed() -> u64 {
    7
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub cost: f64,
    pub reliability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub cost: f64,
    pub reliability: f64,
}

#[derive(Serialize, Deserialize)]
pub struct CompareOutput {
    pub meta: Meta,
    pub methods: Vec<MethodRow>,
    pub sweep: Vec<SweepRow>,
}

pub fn compare_cmd(config_path: &Path, out_dir: &Path, backend_name: Option<&str>) -> Result<(), CliError> {
    let mut meta = Meta::new("compare");
    let config: CompareConfig = serde_json::from_str(&read_input(config_path, &mut meta)?)
        .map_err(|e| CliError::Parse(format!("{}: {e}", config_path.display())))?;
    meta.param("k", config.k);
    meta.param("epsilon", config.epsilon);
    meta.param("ns", config.ns);
    meta.param("n_eval", config.n_eval);
    meta.param("so_scenarios", config.so_scenarios);
    meta.param("subproblem", &config.subproblem);

    let instance = load_instance(Path::new(&config.instance), &mut meta)?;
    let history = history_from_csv(&read_input(Path::new(&config.history), &mut meta)?)
        .map_err(CliError::Parse)?;
    let covariates = parse_covariates(&read_input(Path::new(&config.covariates), &mut meta)?)?;
    if covariates.len() != instance.periods {
        return Err(CliError::InvalidConfig(format!(
            "covariates have {} periods, instance has {}",
            covariates.len(),
            instance.periods
        )));
    }

    let backend = backend(backend_name)?;
    let form = assemble(&instance).map_err(CliError::from_core)?;
    let em = EmConfig { seed: config.seeds.fit, ..EmConfig::default() };
    let model = fit_gmm(&history, config.k, &em).map_err(CliError::from_core)?;
    let conditionals = condition_per_period(&model, &covariates)?;
    let m = model.uncertainty_dim();
    let j_count = config.j.unwrap_or_else(|| default_direction_count(m));
    let dirs =
        make_directions(m, j_count, config.seeds.directions).map_err(CliError::from_core)?;
    let method = subproblem_method(&config.subproblem)?;
    let ccg = CcgConfig { method, ..CcgConfig::default() };
    let evaluate = |x: &[f64]| {
        evaluate_reliability(&form, x, &conditionals, config.n_eval, config.seeds.evaluate, backend.as_ref())
            .map_err(|e| CliError::Solver(e.to_string()))
    };

    let mut methods = Vec::new();
    let mut timings: Vec<(String, f64)> = Vec::new();

    // Deterministic at the conditional mean.
    let t0 = Instant::now();
    let mean_xi: Vec<DVector<f64>> = conditionals.iter().map(|c| c.mean()).collect();
    let (do_cost, do_x, _) = solve_deterministic(&form, &mean_xi, backend.as_ref())
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let do_secs = t0.elapsed().as_secs_f64();
    let do_rel = evaluate(&do_x)?;
    methods.push(MethodRow { method: "DO".into(), cost: do_cost, reliability: do_rel.reliable_fraction });
    timings.push(("DO".into(), do_secs));

    // Stochastic (sample-average) baseline.
    let t0 = Instant::now();
    let (so_cost, so_x) =
        solve_saa(&form, &conditionals, config.so_scenarios, config.seeds.so, backend.as_ref())
            .map_err(|e| CliError::Solver(e.to_string()))?;
    let so_secs = t0.elapsed().as_secs_f64();
    let so_rel = evaluate(&so_x)?;
    methods.push(MethodRow { method: "SO".into(), cost: so_cost, reliability: so_rel.reliable_fraction });
    timings.push(("SO".into(), so_secs));

    // Robust: box from the calibration samples.
    let t0 = Instant::now();
    let box_samples: Vec<Vec<DVector<f64>>> = conditionals
        .iter()
        .enumerate()
        .map(|(t, cond)| cond.sample(config.ns, config.seeds.calibrate.wrapping_add(t as u64)))
        .collect();
    let box_set = BoxSet::from_samples(&box_samples).map_err(CliError::from_core)?;
    let box_solution = solve_ccg(&form, &box_set.to_union(), &ccg, backend.as_ref())
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let box_secs = t0.elapsed().as_secs_f64();
    let box_rel = evaluate(&box_solution.x)?;
    methods.push(MethodRow {
        method: "RO-box".into(),
        cost: box_solution.total_cost,
        reliability: box_rel.reliable_fraction,
    });
    timings.push(("RO-box".into(), box_secs));

    // Robust: marginal union-of-subsets baseline.
    let t0 = Instant::now();
    let lambda = chi_square_quantile(m, 0.95).sqrt();
    let n_dim = model.covariate_dim();
    let marginal: Vec<(f64, DVector<f64>, DMatrix<f64>)> = model
        .components()
        .iter()
        .map(|c| {
            (
                c.weight,
                c.mean.rows(n_dim, m).into_owned(),
                c.covariance.view((n_dim, n_dim), (m, m)).into_owned(),
            )
        })
        .collect();
    let uos = build_uos_baseline(
        &marginal,
        lambda,
        &vec![m as f64; marginal.len()],
        instance.periods,
        backend.as_ref(),
    )
    .map_err(CliError::from_core)?;
    let uos_solution = solve_ccg(&form, &uos.union, &ccg, backend.as_ref())
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let uos_secs = t0.elapsed().as_secs_f64();
    let uos_rel = evaluate(&uos_solution.x)?;
    methods.push(MethodRow {
        method: "RO-uos".into(),
        cost: uos_solution.total_cost,
        reliability: uos_rel.reliable_fraction,
    });
    timings.push(("RO-uos".into(), uos_secs));

    // Robust: the contextual set at the main epsilon, then the sweep.
    let caus_at = |epsilon: f64| -> Result<(f64, f64), CliError> {
        let radii: Vec<CalibratedRadius> = conditionals
            .iter()
            .enumerate()
            .map(|(t, cond)| {
                calibrate(cond, config.ns, epsilon, config.seeds.calibrate.wrapping_add(t as u64))
            })
            .collect::<Result<_, _>>()
            .map_err(CliError::from_core)?;
        let caus =
            build_caus(&conditionals, &radii, &dirs, backend.as_ref()).map_err(CliError::from_core)?;
        let solution = solve_ccg(&form, &caus.union, &ccg, backend.as_ref())
            .map_err(|e| CliError::Solver(e.to_string()))?;
        let rel = evaluate(&solution.x)?;
        Ok((solution.total_cost, rel.reliable_fraction))
    };

    let t0 = Instant::now();
    let (caus_cost, caus_rel) = caus_at(config.epsilon)?;
    let caus_secs = t0.elapsed().as_secs_f64();
    methods.push(MethodRow { method: "RO-caus".into(), cost: caus_cost, reliability: caus_rel });
    timings.push(("RO-caus".into(), caus_secs));

    let mut sweep = Vec::new();
    for &eps in &config.epsilon_sweep {
        let (cost, reliability) = if (eps - config.epsilon).abs() < 1e-12 {
            (caus_cost, caus_rel)
        } else {
            caus_at(eps)?
        };
        sweep.push(SweepRow { epsilon: eps, cost, reliability });
    }

    // Table artifact (deterministic payload) and CSVs (wall time included in
    // the CSV only).
    let timing_map: BTreeMap<String, f64> = timings.into_iter().collect();
    let mut table_csv = String::from("method,cost,reliability,wall_time_s\n");
    for row in &methods {
        table_csv.push_str(&format!(
            "{},{},{},{:.3}\n",
            row.method,
            row.cost,
            row.reliability,
            timing_map.get(&row.method).copied().unwrap_or(0.0)
        ));
    }
    let mut sweep_csv = String::from("epsilon,cost,reliability\n");
    for row in &sweep {
        sweep_csv.push_str(&format!("{},{},{}\n", row.epsilon, row.cost, row.reliability));
    }
    let output = CompareOutput { meta, methods, sweep };
    write_output(&out_dir.join("compare.json"), &serde_json::to_string_pretty(&output).expect("serialize"))?;
    write_output(&out_dir.join("compare.csv"), &table_csv)?;
    write_output(&out_dir.join("sweep.csv"), &sweep_csv)?;
    print!("{table_csv}");
    Ok(())
}
