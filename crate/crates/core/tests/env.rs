use std::io::Write;

use bidsim::agent::{AgentAction, ExplorationUnits, RiskSchedule, SacConfig};
use bidsim::config::{load_config, ConfigError, DemandSource, ExperimentConfig};
use bidsim::env::demand::read_demand_csv;
use bidsim::env::{
    default_stack, run_simulation, settle, synth_demand, DataError, DemandSeries, ForecastMode, Policy,
    RunOutput, SimConfig, SyntheticDemand,
};
use proptest::prelude::*;

fn demand(days: usize, seed: u64) -> DemandSeries {
    synth_demand(
        &SyntheticDemand {
            days,
            ..SyntheticDemand::default()
        },
        seed,
    )
}

fn run(policy: Policy, days: usize, config: &SimConfig, seed: u64) -> RunOutput {
    run_simulation(policy, &demand(days, seed), &default_stack(), config, seed).unwrap()
}

fn no_env() -> std::iter::Empty<(String, String)> {
    std::iter::empty()
}

#[test]
fn runs_are_deterministic() {
    let cfg = SimConfig::default();
    for policy in [Policy::Mpc, Policy::Sac] {
        let a = run(policy, 3, &cfg, 11);
        let b = run(policy, 3, &cfg, 11);
        assert_eq!(a.trace, b.trace, "{}", policy.name());
        assert_eq!(a.metrics, b.metrics);
    }
    assert_ne!(run(Policy::Sac, 3, &cfg, 11).trace, run(Policy::Sac, 3, &cfg, 12).trace);
}

#[test]
fn frozen_supervisor_weight_reproduces_mpc() {
    let cfg = SimConfig {
        sac: SacConfig {
            schedule: RiskSchedule::frozen(),
            ..SacConfig::default()
        },
        ..SimConfig::default()
    };
    let mpc = run(Policy::Mpc, 4, &cfg, 5);
    let sac = run(Policy::Sac, 4, &cfg, 5);
    assert_eq!(mpc.metrics, sac.metrics);
    for (m, s) in mpc.trace.iter().zip(&sac.trace) {
        assert_eq!((m.executed_price, m.executed_quantity), (s.executed_price, s.executed_quantity));
    }
}

#[test]
fn revenue_is_settled_at_the_clearing_price() {
    let out = run(Policy::Sac, 4, &SimConfig::default(), 3);
    let mut total = 0.0;
    for (r, cum) in out.trace.iter().zip(&out.metrics.cumulative_revenue_series) {
        let expected = r.clearing_price * r.cleared_quantity;
        assert!((r.revenue - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        total += r.revenue;
        assert_eq!(*cum, total);
    }
    assert_eq!(out.metrics.summary.total_revenue, total);
}

#[test]
fn nothing_unsafe_is_executed() {
    for units in [ExplorationUnits::Physical, ExplorationUnits::Normalized] {
        let cfg = SimConfig {
            sac: SacConfig {
                exploration_units: units,
                ..SacConfig::default()
            },
            ..SimConfig::default()
        };
        let out = run(Policy::Sac, 5, &cfg, 8);
        assert_eq!(out.metrics.summary.post_shield_violations, 0);
        let p = cfg.battery;
        assert!(out.trace.iter().all(|r| r.soe >= p.soe_floor - 1e-9 && r.soe <= p.energy_capacity + 1e-9));
    }
}

#[test]
fn perfect_foresight_runs_cover_the_series() {
    let foresight = SimConfig {
        forecast: bidsim::env::ForecastConfig {
            mode: ForecastMode::PerfectForesight,
            prior_price: None,
        },
        ..SimConfig::default()
    };
    let idle = run(Policy::Idle, 3, &foresight, 2);
    assert_eq!(idle.metrics.summary.total_revenue, 0.0);
    // forecasts ignore the battery's own price impact, so only sanity is checked
    let mpc = run(Policy::Mpc, 3, &foresight, 2);
    assert!(mpc.metrics.summary.total_revenue.is_finite());
    assert_eq!(mpc.trace.len(), 3 * 48);
}

#[test]
fn synthetic_demand_has_the_configured_mean() {
    let spec = SyntheticDemand {
        days: 100,
        ..SyntheticDemand::default()
    };
    let d = synth_demand(&spec, 9);
    let n = d.len() as f64;
    let mean = d.demand.iter().sum::<f64>() / n;
    // the sinusoid averages to zero over whole days
    assert!((mean - spec.base).abs() < 3.0 * spec.noise_std / n.sqrt(), "mean {mean}");
    assert_eq!(d.len(), 100 * 48);
    assert_eq!((d.timestamps[1] - d.timestamps[0]).num_minutes(), 30);
}

#[test]
fn csv_round_trip() {
    let d = demand(2, 4);
    let mut buf = Vec::new();
    d.write_csv(&mut buf).unwrap();
    let back = read_demand_csv(buf.as_slice()).unwrap();
    assert_eq!(back.timestamps, d.timestamps);
    assert_eq!(back.steps_per_day, 48);
    for (a, b) in back.demand.iter().zip(&d.demand) {
        assert_eq!(a, b);
    }
}

#[test]
fn csv_errors_name_the_line() {
    let two = "timestamp,demand_mwh\n2018-06-01T00:00:00,2000\n2018-06-01T00:30:00,2100\n";
    assert_eq!(read_demand_csv(two.as_bytes()).unwrap().len(), 2);

    let negative = "timestamp,demand_mwh\n2018-06-01T00:00:00,2000\n2018-06-01T00:30:00,-5\n";
    match read_demand_csv(negative.as_bytes()) {
        Err(DataError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }

    let uneven = "timestamp,demand_mwh\n2018-06-01T00:00:00,1\n2018-06-01T00:30:00,1\n2018-06-01T01:15:00,1\n";
    assert!(matches!(
        read_demand_csv(uneven.as_bytes()),
        Err(DataError::NonUniformStep { line: 4, expected: 1800, actual: 2700 })
    ));

    assert!(matches!(read_demand_csv("time,load\n".as_bytes()), Err(DataError::Parse { line: 1, .. })));
}

#[test]
fn csv_demand_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    demand(2, 6).save_csv(&dir.path().join("demand.csv")).unwrap();
    let mut file = std::fs::File::create(dir.path().join("cfg.json")).unwrap();
    writeln!(file, r#"{{"demand": {{"source": "csv", "path": "demand.csv"}}}}"#).unwrap();
    let cfg = load_config(Some(&dir.path().join("cfg.json")), no_env()).unwrap();
    assert!(matches!(cfg.demand, DemandSource::Csv { .. }));
    let series = cfg.demand_series(Some(dir.path())).unwrap();
    assert_eq!(series.len(), 96);
}

#[test]
fn config_files_layer_over_the_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"seed": 3, "sac": {"gamma": 0.9}}"#).unwrap();
    let cfg = load_config(Some(&path), no_env()).unwrap();
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.sac.gamma, 0.9);
    assert_eq!(cfg.battery, ExperimentConfig::default().battery);

    std::fs::write(&path, r#"{"sac": {"gama": 0.9}}"#).unwrap();
    assert!(matches!(load_config(Some(&path), no_env()), Err(ConfigError::Parse { .. })));
}

#[test]
fn environment_overrides_and_validation() {
    let vars = |k: &str, v: &str| vec![(k.to_string(), v.to_string())];
    let cfg = load_config(None, vars("BIDSIM_SAC__GAMMA", "0.5")).unwrap();
    assert_eq!(cfg.sac.gamma, 0.5);
    let cfg = load_config(None, vars("BIDSIM_DEMAND__DAYS", "10")).unwrap();
    assert!(matches!(cfg.demand, DemandSource::Synthetic(ref s) if s.days == 10));
    // unrelated variables are ignored
    assert!(load_config(None, vars("HOME", "/root")).is_ok());

    match load_config(None, vars("BIDSIM_SAC__GAMMA", "1.5")) {
        Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "sac.gamma"),
        other => panic!("{other:?}"),
    }
    assert!(load_config(None, vars("BIDSIM_SAC__NOPE", "1")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generating_never_raises_the_price(base in 0.0f64..4900.0, q in 0.0f64..300.0, price in 0.0f64..120.0) {
        let stack = default_stack();
        let alone = settle(&stack, base, &AgentAction::new(price, 0.0)).unwrap();
        let selling = settle(&stack, base, &AgentAction::new(price, q)).unwrap();
        prop_assert!(selling.clearing_price <= alone.clearing_price);
        prop_assert!(selling.generation <= q);
    }

    #[test]
    fn charging_never_lowers_the_price(base in 0.0f64..4600.0, q in 0.0f64..400.0) {
        let stack = default_stack();
        let alone = settle(&stack, base, &AgentAction::new(0.0, 0.0)).unwrap();
        let buying = settle(&stack, base, &AgentAction::new(0.0, -q)).unwrap();
        prop_assert!(buying.clearing_price >= alone.clearing_price);
        prop_assert_eq!(buying.load, q);
        prop_assert!(buying.revenue() <= 0.0);
    }
}
