use nalgebra::{DMatrix, DVector};

use super::*;
use crate::calibration::{calibrate, CalibratedRadius};
use crate::gmm::ConditionalGmm;
use crate::sets::{build_caus, encode_milp, make_directions, BoxSet};
use crate::solver::HighsBackend;

fn single_bus_instance(loads: Vec<f64>, farms: usize) -> UcInstance {
    UcInstance {
        name: "tiny".into(),
        periods: loads.len(),
        units: vec![Unit {
            name: "G1".into(),
            bus: 0,
            p_min: 0.0,
            p_max: 100.0,
            ramp_up: 100.0,
            ramp_down: 100.0,
            min_up: 1,
            min_down: 1,
            cost_commit: 10.0,
            cost_startup: 5.0,
            cost_energy: 20.0,
        }],
        loads: Loads::Total(loads),
        wind_farms: (0..farms)
            .map(|i| WindFarm { name: format!("W{i}"), bus: 0 })
            .collect(),
        lines: vec![],
        shed_penalty: 500.0,
        spill_penalty: 50.0,
    }
}

fn six_bus() -> UcInstance {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/six_bus.json"
    ))
    .expect("bundled instance present");
    UcInstance::from_json(&text).unwrap()
}

fn degenerate_cond(mean: Vec<f64>) -> ConditionalGmm {
    let m = mean.len();
    ConditionalGmm::from_parts(
        vec![(1.0, DVector::from_vec(mean), DMatrix::identity(m, m) * 1e-16)],
        DVector::zeros(1),
    )
    .unwrap()
}

#[test]
fn minimal_instance_has_expected_shape() {
    // 1 unit, T=1, load 50, no wind: the balance row carries one generation
    // column, one shed slack, one spill slack.
    let form = assemble(&single_bus_instance(vec![50.0], 0)).unwrap();
    let report = form.dimension_report();
    assert_eq!(report.n_x, 2);
    assert_eq!(report.n_y, 3); // p, shed, spill
    assert_eq!(report.n_xi, 0);
    assert_eq!(report.recourse_eq_rows, 1);
    let balance_cols: Vec<usize> = form
        .g_trip
        .iter()
        .filter(|(r, _, _)| form.recourse_senses[*r] == ConstraintSense::Eq)
        .map(|&(_, c, _)| c)
        .collect();
    assert_eq!(balance_cols.len(), 3);
    assert!(balance_cols.contains(&form.y_p(0, 0)));
    assert!(balance_cols.contains(&form.y_shed(0, 0)));
    assert!(balance_cols.contains(&form.y_spill(0, 0)));
}

#[test]
fn each_farm_adds_one_u_column_per_period() {
    let no_wind = assemble(&single_bus_instance(vec![50.0, 60.0], 0)).unwrap();
    let one_farm = assemble(&single_bus_instance(vec![50.0, 60.0], 1)).unwrap();
    let two_farms = assemble(&single_bus_instance(vec![50.0, 60.0], 2)).unwrap();
    assert_eq!(no_wind.u_trip.len(), 0);
    assert_eq!(one_farm.u_trip.len(), 2);
    assert_eq!(two_farms.u_trip.len(), 4);
    // Every U entry lands on a balance (equality) row.
    for &(r, _, coeff) in &two_farms.u_trip {
        assert_eq!(two_farms.recourse_senses[r], ConstraintSense::Eq);
        assert_eq!(coeff, 1.0);
    }
}

#[test]
fn six_bus_dimension_report_matches_sidecar() {
    let form = assemble(&six_bus()).unwrap();
    let sidecar: DimensionReport = serde_json::from_str(
        &std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../data/six_bus.counts.json"
        ))
        .unwrap(),
    )
    .unwrap();
    assert_eq!(form.dimension_report(), sidecar);
}

#[test]
fn zero_load_zero_wind_costs_nothing() {
    let inst = single_bus_instance(vec![0.0, 0.0], 0);
    let form = assemble(&inst).unwrap();
    let (cost, x, _) =
        solve_deterministic(&form, &[DVector::zeros(0), DVector::zeros(0)], &HighsBackend)
            .unwrap();
    assert!(cost.abs() < 1e-9);
    assert!(x.iter().all(|v| *v == 0.0));
}

#[test]
fn overload_activates_shed_penalty() {
    // Load 150 vs p_max 100: 50 MW shed at 500 $/MWh.
    let inst = single_bus_instance(vec![150.0], 0);
    let form = assemble(&inst).unwrap();
    let (cost, _, y) = solve_deterministic(&form, &[DVector::zeros(0)], &HighsBackend).unwrap();
    let shed = y[form.y_shed(0, 0)];
    assert!((shed - 50.0).abs() < 1e-6, "shed {shed}");
    // commit 10 + startup 5 + 100*20 energy + 50*500 shed
    assert!((cost - (10.0 + 5.0 + 2000.0 + 25000.0)).abs() < 1e-5, "cost {cost}");
}

#[test]
fn six_bus_deterministic_regression_anchor() {
    // Deterministic cost at the nominal conditional-mean forecast; value
    // frozen from the first verified run.
    let form = assemble(&six_bus()).unwrap();
    let x_totals = [45.0, 60.0, 70.0, 55.0];
    let xi: Vec<DVector<f64>> =
        x_totals.iter().map(|x| DVector::from_vec(vec![0.5 * x, 0.5 * x])).collect();
    let (cost, x, y) = solve_deterministic(&form, &xi, &HighsBackend).unwrap();
    // Structural facts: U3 never committed at the mean forecast; no slack.
    for t in 0..4 {
        assert_eq!(x[form.x_u(2, t)], 0.0, "U3 committed at t={t}");
    }
    for b in 0..6 {
        for t in 0..4 {
            assert!(y[form.y_shed(b, t)] < 1e-6);
            assert!(y[form.y_spill(b, t)] < 1e-6);
        }
    }
    let frozen = 20036.0;
    assert!(
        (cost - frozen).abs() < 1e-3,
        "deterministic cost {cost:.10} drifted from frozen anchor {frozen}"
    );
}

#[test]
fn singleton_set_equals_deterministic() {
    let inst = single_bus_instance(vec![80.0, 90.0], 1);
    let form = assemble(&inst).unwrap();
    let point = vec![DVector::from_vec(vec![30.0]), DVector::from_vec(vec![25.0])];
    let set = BoxSet::from_bounds(
        vec![vec![30.0], vec![25.0]],
        vec![vec![30.0], vec![25.0]],
    )
    .unwrap()
    .to_union();
    let config = CcgConfig::default();
    let robust = solve_ccg(&form, &set, &config, &HighsBackend).unwrap();
    let (det_cost, _, _) = solve_deterministic(&form, &point, &HighsBackend).unwrap();
    assert!(robust.converged);
    assert_eq!(robust.iterations, 1);
    assert!(
        (robust.total_cost - det_cost).abs() < 1e-6 * (1.0 + det_cost.abs()),
        "robust {} vs deterministic {det_cost}",
        robust.total_cost
    );
}

#[test]
fn box_worst_case_is_low_wind_vertex() {
    // Wind only reduces net load, so the worst box vertex is the lowest wind
    // path; CCG must match the deterministic solve there in <= 2 iterations.
    let inst = single_bus_instance(vec![80.0, 90.0], 1);
    let form = assemble(&inst).unwrap();
    let set = BoxSet::from_bounds(vec![vec![10.0], vec![5.0]], vec![vec![40.0], vec![35.0]])
        .unwrap()
        .to_union();
    let robust = solve_ccg(&form, &set, &CcgConfig::default(), &HighsBackend).unwrap();
    let low = vec![DVector::from_vec(vec![10.0]), DVector::from_vec(vec![5.0])];
    let (det_cost, _, _) = solve_deterministic(&form, &low, &HighsBackend).unwrap();
    assert!(robust.converged);
    assert!(robust.iterations <= 2, "iterations {}", robust.iterations);
    assert!(
        (robust.total_cost - det_cost).abs() < 1e-6 * (1.0 + det_cost.abs()),
        "robust {} vs deterministic-at-worst-vertex {det_cost}",
        robust.total_cost
    );
}

fn bimodal_models(t_count: usize) -> (Vec<ConditionalGmm>, Vec<CalibratedRadius>) {
    let x_totals = [45.0, 60.0, 70.0, 55.0];
    let models: Vec<ConditionalGmm> = (0..t_count)
        .map(|t| crate::synth::SynthConfig::default().conditional_at(x_totals[t]).unwrap())
        .collect();
    let radii: Vec<CalibratedRadius> =
        models.iter().map(|m| calibrate(m, 4_000, 0.05, 11).unwrap()).collect();
    (models, radii)
}

#[test]
fn subproblem_milp_agrees_with_enumeration_oracle() {
    // K=2, T=2 contextual set on the bundled network data; the KKT MILP and
    // the vertex-profile enumeration must agree on the worst-case value.
    let mut inst = six_bus();
    inst.periods = 2;
    let loads = match &inst.loads {
        Loads::PerBus(map) => {
            let mut new = std::collections::BTreeMap::new();
            for (k, v) in map {
                new.insert(k.clone(), v[..2].to_vec());
            }
            Loads::PerBus(new)
        }
        other => other.clone(),
    };
    inst.loads = loads;
    let form = assemble(&inst).unwrap();
    let (models, radii) = bimodal_models(2);
    let dirs = make_directions(2, 8, 0).unwrap();
    let backend = HighsBackend;
    let caus = build_caus(&models, &radii, &dirs, &backend).unwrap();
    let encoding = encode_milp(&caus.union).unwrap();
    let config = CcgConfig::default();

    // A plausible commitment: U1 and U2 on everywhere.
    let mut x = vec![0.0; form.n_x];
    for g in 0..2 {
        for t in 0..2 {
            x[form.x_u(g, t)] = 1.0;
        }
        x[form.x_v(g, 0)] = 1.0;
    }
    let milp = solve_subproblem_milp(&form, &x, &caus.union, &encoding, &backend, &config).unwrap();
    let enumerated =
        solve_subproblem_enum(&form, &x, &caus.union, &backend, 1_000_000).unwrap();
    assert!(
        (milp.value - enumerated.value).abs() <= 1e-5 * (1.0 + enumerated.value.abs()),
        "milp {} vs enumeration {}",
        milp.value,
        enumerated.value
    );
    assert!(caus.union.membership(&milp.trajectory).unwrap());
    assert!(caus.union.membership(&enumerated.trajectory).unwrap());
}

#[test]
fn full_commitment_with_ample_wind_hits_vertex() {
    // One unit, T=1, m=1: wind large enough to cover the load; subproblem
    // value equals the minimal dispatch cost and sits at a set vertex.
    let inst = single_bus_instance(vec![50.0], 1);
    let form = assemble(&inst).unwrap();
    let set = BoxSet::from_bounds(vec![vec![40.0]], vec![vec![60.0]]).unwrap().to_union();
    let mut x = vec![0.0; form.n_x];
    x[form.x_u(0, 0)] = 1.0;
    x[form.x_v(0, 0)] = 1.0;
    let enc = encode_milp(&set).unwrap();
    let milp =
        solve_subproblem_milp(&form, &x, &set, &enc, &HighsBackend, &CcgConfig::default()).unwrap();
    let enumerated = solve_subproblem_enum(&form, &x, &set, &HighsBackend, 1_000).unwrap();
    // Vertex oracle: recourse at wind 40 costs 10 MW * 20 (generate the
    // shortfall); at wind 60 it costs 10 MW * 50 (surplus absorbed by the
    // spill slack). The worst case is the high vertex.
    for sub in [&milp, &enumerated] {
        assert!((sub.value - 10.0 * 50.0).abs() < 1e-5, "value {}", sub.value);
        assert!((sub.trajectory[0][0] - 60.0).abs() < 1e-6);
    }
}

#[test]
fn ccg_bounds_are_monotone_and_certified() {
    let form = assemble(&six_bus()).unwrap();
    let (models, radii) = bimodal_models(4);
    let dirs = make_directions(2, 8, 0).unwrap();
    let backend = HighsBackend;
    let caus = build_caus(&models, &radii, &dirs, &backend).unwrap();
    let robust = solve_ccg(&form, &caus.union, &CcgConfig::default(), &backend).unwrap();
    assert!(robust.converged, "gap {} after {} iterations", robust.gap, robust.iterations);
    assert!(robust.gap >= -1e-6);
    assert!(robust.gap <= 1e-4);
    for w in robust.lower_bounds.windows(2) {
        assert!(w[1] >= w[0] - 1e-6 * w[0].abs().max(1.0), "master bound decreased");
    }
    for xi in &robust.worst_scenarios {
        assert!(caus.union.membership(xi).unwrap(), "scenario escaped the set");
    }
    // Deterministic at the conditional mean is a relaxation-style lower
    // anchor on this instance.
    let mean_xi: Vec<DVector<f64>> = models.iter().map(|m| m.mean()).collect();
    let (det_cost, _, _) = solve_deterministic(&form, &mean_xi, &backend).unwrap();
    assert!(det_cost <= robust.total_cost + 1e-6);
}

#[test]
fn reliability_sentinels() {
    // Overwhelming capacity, zero load: fully reliable.
    let mut inst = single_bus_instance(vec![0.0, 0.0], 1);
    inst.units[0].p_min = 0.0;
    let form = assemble(&inst).unwrap();
    let models: Vec<ConditionalGmm> =
        vec![degenerate_cond(vec![0.0]), degenerate_cond(vec![0.0])];
    let mut x = vec![0.0; form.n_x];
    let report = evaluate_reliability(&form, &x, &models, 50, 77, &HighsBackend).unwrap();
    assert_eq!(report.reliable_fraction, 1.0);

    // Zero capacity, positive load: fully unreliable.
    let mut inst2 = single_bus_instance(vec![30.0, 30.0], 1);
    inst2.units[0].p_max = 0.0;
    inst2.units[0].p_min = 0.0;
    let form2 = assemble(&inst2).unwrap();
    x = vec![0.0; form2.n_x];
    let report2 = evaluate_reliability(&form2, &x, &models, 50, 78, &HighsBackend).unwrap();
    assert_eq!(report2.reliable_fraction, 0.0);
    assert_eq!(report2.per_period_violations, vec![50, 50]);
}

#[test]
fn saa_commits_against_sampled_scenarios() {
    let inst = single_bus_instance(vec![80.0], 1);
    let form = assemble(&inst).unwrap();
    let models = vec![degenerate_cond(vec![30.0])];
    let (cost, x) = solve_saa(&form, &models, 10, 5, &HighsBackend).unwrap();
    assert_eq!(x[form.x_u(0, 0)], 1.0);
    // All scenarios identical: SAA equals deterministic at that point.
    let (det, _, _) =
        solve_deterministic(&form, &[DVector::from_vec(vec![30.0])], &HighsBackend).unwrap();
    assert!((cost - det).abs() < 1e-5);
}

#[test]
fn instance_validation_rejects_bad_data() {
    let mut inst = single_bus_instance(vec![10.0], 0);
    inst.units[0].p_min = 200.0;
    assert!(matches!(assemble(&inst), Err(DispatchError::InconsistentInstance(_))));

    let mut inst = single_bus_instance(vec![10.0], 0);
    inst.shed_penalty = 1.0; // below energy cost
    assert!(matches!(assemble(&inst), Err(DispatchError::InconsistentInstance(_))));

    let mut inst = single_bus_instance(vec![10.0, 20.0], 0);
    inst.periods = 3; // loads length mismatch
    assert!(matches!(assemble(&inst), Err(DispatchError::InconsistentInstance(_))));
}

#[test]
fn instance_json_round_trip() {
    let inst = six_bus();
    let back = UcInstance::from_json(&inst.to_json()).unwrap();
    assert_eq!(back.units.len(), 3);
    assert_eq!(back.periods, 4);
    assert_eq!(back.buses(), vec![1, 2, 3, 4, 5, 6]);
}

#[test]
fn set_inclusion_implies_cost_monotonicity() {
    // The contextual set is contained in the bounding box of its own
    // calibration samples (verified by membership sampling), so its robust
    // cost can be no larger.
    let inst = single_bus_instance(vec![80.0, 90.0], 2);
    let form = assemble(&inst).unwrap();
    let parts = vec![
        (0.5, vec![30.0, 8.0], vec![4.0, 0.0, 0.0, 2.0]),
        (0.5, vec![10.0, 25.0], vec![3.0, 0.0, 0.0, 3.0]),
    ];
    let models: Vec<ConditionalGmm> = (0..2)
        .map(|_| {
            ConditionalGmm::from_parts(
                parts
                    .iter()
                    .map(|(w, mu, cov)| {
                        (*w, DVector::from_vec(mu.clone()), DMatrix::from_row_slice(2, 2, cov))
                    })
                    .collect(),
                DVector::zeros(1),
            )
            .unwrap()
        })
        .collect();
    let radii: Vec<CalibratedRadius> =
        models.iter().map(|m| calibrate(m, 3_000, 0.05, 9).unwrap()).collect();
    let dirs = make_directions(2, 8, 0).unwrap();
    let backend = HighsBackend;
    let caus = build_caus(&models, &radii, &dirs, &backend).unwrap();
    let samples: Vec<Vec<DVector<f64>>> =
        models.iter().map(|m| m.sample(3_000, 9)).collect();
    let box_set = BoxSet::from_samples(&samples).unwrap();
    let box_union = box_set.to_union();

    // Membership sampling: every member of the contextual set drawn here
    // must lie in the box.
    let mut members = 0;
    for t in 0..2 {
        for p in models[t].sample(10_000, 31 + t as u64) {
            if caus.union.periods[t].iter().any(|poly| poly.contains(&p)) {
                members += 1;
                assert!(
                    box_union.periods[t][0].contains(&p),
                    "contextual member escaped the box at period {t}"
                );
            }
        }
    }
    assert!(members > 15_000, "sampling produced too few members: {members}");

    let config = CcgConfig::default();
    let caus_solution = solve_ccg(&form, &caus.union, &config, &backend).unwrap();
    let box_solution = solve_ccg(&form, &box_union, &config, &backend).unwrap();
    assert!(
        caus_solution.total_cost <= box_solution.total_cost + 1e-6,
        "contained set cost {} exceeds container cost {}",
        caus_solution.total_cost,
        box_solution.total_cost
    );
}

#[test]
fn shared_types_are_send_and_sync() {
    fn check<T: Send + Sync>() {}
    check::<crate::gmm::JointGmm>();
    check::<crate::gmm::ConditionalGmm>();
    check::<crate::sets::CausSet>();
    check::<crate::sets::PolyUnionSet>();
    check::<MatrixForm>();
    check::<RobustSolution>();
}
