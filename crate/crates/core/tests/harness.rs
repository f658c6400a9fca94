use belbic_grid::config::Config;
use belbic_grid::harness::{
    evaluate, mean_square_error, objective, run_scenario, sensitivity_sweep, settling_time,
    tune_gains, ControllerSpec, ObjectiveWeights, Scenario, SweepTarget, TuneError, TuneSettings,
};
use belbic_grid::plant::MachineParam;

fn default_scenarios() -> Vec<(String, Scenario)> {
    let cfg = Config::default();
    cfg.controllers
        .iter()
        .map(|e| (e.name.clone(), cfg.scenario_for(e)))
        .collect()
}

fn shortened(s: &Scenario, horizon: f64) -> Scenario {
    Scenario {
        horizon,
        ..s.clone()
    }
}

#[test]
fn constant_offset_mse() {
    let x = vec![1.01; 500];
    assert!((mean_square_error(&x, 1.0).unwrap() - 1e-4).abs() < 1e-15);
}

#[test]
fn settling_matches_exponential_crossing() {
    let (dt, tau, band) = (0.001, 0.3, 0.01);
    let t: Vec<f64> = (0..5000).map(|k| k as f64 * dt).collect();
    let x: Vec<f64> = t.iter().map(|t| 1.0 + 0.1 * (-t / tau).exp()).collect();
    let crossing = tau * (0.1f64 / band).ln();
    let settled = settling_time(&t, &x, 1.0, band, 0.0).unwrap();
    assert!((settled - crossing).abs() <= dt, "{settled} vs {crossing}");
}

#[test]
fn runs_are_pure_functions_of_the_scenario() {
    for (name, s) in default_scenarios() {
        let s = shortened(&s, 2.0);
        assert_eq!(
            run_scenario(&s).unwrap(),
            run_scenario(&s).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn pre_islanding_prefix_is_shared_by_all_controllers() {
    let runs: Vec<_> = default_scenarios()
        .into_iter()
        .map(|(_, s)| run_scenario(&shortened(&s, 0.5)).unwrap())
        .collect();
    let reference = &runs[0].trace;
    for r in &runs[1..] {
        for k in 0..200 {
            for i in 0..2 {
                assert!((r.trace.omega[i][k] - reference.omega[i][k]).abs() < 1e-9);
                assert!((r.trace.v[i][k] - reference.v[i][k]).abs() < 1e-9);
            }
            assert!(r.trace.u_sec[k].abs() < 1e-9 && r.trace.t_sec[k].abs() < 1e-9);
        }
    }
}

#[test]
fn metrics_ignore_internal_logging() {
    let cfg = Config::default();
    let base = shortened(&cfg.scenario_for(cfg.controller("belbic").unwrap()), 2.0);
    let plain = run_scenario(&base).unwrap();
    for every in [1, 7, 1000] {
        let mut s = base.clone();
        s.log.internals = true;
        s.log.internals_every = every;
        let logged = run_scenario(&s).unwrap();
        assert_eq!(logged.metrics, plain.metrics);
        assert_eq!(logged.trace, plain.trace);
        assert_eq!(
            logged.internals.unwrap().rows.len(),
            2000usize.div_ceil(every)
        );
    }
}

#[test]
fn sweep_covers_every_cell() {
    let cfg = Config::default();
    let controllers: Vec<_> = ["pid", "nn", "belbic"]
        .iter()
        .map(|n| {
            (
                n.to_string(),
                cfg.scenario_for(cfg.controller(n).unwrap()).controller,
            )
        })
        .collect();
    let base = shortened(&Scenario::islanding(ControllerSpec::None), 1.0);
    let table = sensitivity_sweep(
        &base,
        &controllers,
        MachineParam::TurbineGain,
        &[0.5, 1.0, 2.0],
        SweepTarget::Sm1,
    )
    .unwrap();
    assert_eq!(table.cells.len(), 9);
    for (i, c) in table.cells.iter().enumerate() {
        assert_eq!(c.multiplier, [0.5, 1.0, 2.0][i / 3]);
        assert_eq!(c.controller, ["pid", "nn", "belbic"][i % 3]);
        assert!(c.metrics.is_some() && c.fault.is_none());
    }
}

#[test]
fn faulted_sweep_cells_are_recorded() {
    // a turbine this fast is far too stiff for the 1 ms step
    let base = shortened(&Scenario::islanding(ControllerSpec::None), 1.0);
    let table = sensitivity_sweep(
        &base,
        &[("none".into(), ControllerSpec::None)],
        MachineParam::TurbineTimeConstant,
        &[1e-5, 1.0],
        SweepTarget::Both,
    )
    .unwrap();
    assert_eq!(table.cells.len(), 2);
    assert!(table.cells[0].fault.is_some());
    assert!(table.cells[1].fault.is_none());
}

#[test]
fn null_objective_is_the_uncontrolled_baseline() {
    let s = Scenario::islanding(ControllerSpec::None);
    let weights = ObjectiveWeights::default();
    let m = run_scenario(&s).unwrap().metrics.unwrap();
    let (score, metrics) = evaluate(&s, &weights).unwrap();
    assert_eq!(metrics, m);
    assert_eq!(
        score,
        weights.frequency * m.omega_sm1.mse + weights.voltage * m.v_sm1.mse
    );
    assert_eq!(score, objective(&m, &weights));
    let tuned = tune_gains(&s, &TuneSettings::default()).unwrap();
    assert_eq!(tuned.evaluations, 1);
    assert_eq!(tuned.score, score);
}

fn tuning_case() -> (Scenario, TuneSettings) {
    let cfg = Config::default();
    let s = shortened(&cfg.scenario_for(cfg.controller("pid").unwrap()), 2.0);
    let settings = TuneSettings {
        budget: 30,
        random_samples: 10,
        seed: 5,
        ..TuneSettings::default()
    };
    (s, settings)
}

#[test]
fn tuner_best_score_never_increases() {
    let (s, settings) = tuning_case();
    let out = tune_gains(&s, &settings).unwrap();
    assert_eq!(out.score_trace.len(), out.evaluations);
    assert!(out.evaluations <= settings.budget);
    for w in out.score_trace.windows(2) {
        assert!(w[1] <= w[0]);
    }
    assert_eq!(*out.score_trace.last().unwrap(), out.score);
}

#[test]
fn tuner_with_budget_one_returns_the_start() {
    let (s, settings) = tuning_case();
    let out = tune_gains(
        &s,
        &TuneSettings {
            budget: 1,
            ..settings.clone()
        },
    )
    .unwrap();
    assert_eq!(out.evaluations, 1);
    assert_eq!(out.spec, s.controller);
    assert_eq!(out.score, evaluate(&s, &settings.weights).unwrap().0);
}

#[test]
fn tuner_is_seeded() {
    let (s, settings) = tuning_case();
    let a = tune_gains(&s, &settings).unwrap();
    let b = tune_gains(&s, &settings).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.score_trace, b.score_trace);
}

#[test]
fn zero_budget_is_rejected() {
    let (s, settings) = tuning_case();
    let r = tune_gains(
        &s,
        &TuneSettings {
            budget: 0,
            ..settings
        },
    );
    assert!(matches!(r, Err(TuneError::EmptyBudget)));
}
