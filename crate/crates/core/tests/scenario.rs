mod common;

use std::fs;

use tlc_core::agents::{state_action_pairs, ActionMode, InProcessBus, Variant};
use tlc_core::control_api::InProcessClient;
use tlc_core::metrics::{read_aggregates, vehicles_csv};
use tlc_core::scenario::{
    build_engine, demand_csv, demand_for, read_demand, run_experiment, run_labels, run_matrix,
    write_demand, Experiment, PlanVariant,
};

use common::{shared, small_config};

#[test]
fn demand_replays_from_file() {
    let cfg = small_config();
    let demand = demand_for(&cfg, 7000, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_demand(&demand, &path).unwrap();
    let back = read_demand(&path).unwrap();
    assert_eq!(back, demand);
    let a = run_experiment(&cfg, PlanVariant::Fixed, 7000, 9, &demand).unwrap();
    let b = run_experiment(&cfg, PlanVariant::Fixed, 7000, 9, &back).unwrap();
    assert_eq!(vehicles_csv(&a.records), vehicles_csv(&b.records));
    assert_ne!(
        demand_csv(&demand),
        demand_csv(&demand_for(&cfg, 7000, 10).unwrap())
    );
}

#[test]
fn q_tables_stay_within_the_state_space() {
    let mut cfg = small_config();
    cfg.agents.action_mode = ActionMode::PerPhase;
    let demand = demand_for(&cfg, 7000, 2).unwrap();
    for (plan, variant) in [
        (PlanVariant::QLearningA, Variant::A),
        (PlanVariant::QLearningB, Variant::B),
    ] {
        let client = InProcessClient::new(shared(build_engine(&cfg, plan, &demand).unwrap()));
        let mut exp = Experiment::new(
            &cfg,
            plan,
            run_labels(plan, 7000, 2),
            demand.len(),
            Box::new(client),
            Box::new(InProcessBus::new()),
        )
        .unwrap();
        let bound = state_action_pairs(2, variant, ActionMode::PerPhase).unwrap();
        let mut ticks = 0;
        while !exp.is_done() {
            for t in exp.advance().unwrap() {
                ticks += 1;
                assert!(t
                    .durations
                    .iter()
                    .all(|d| (20..=60).contains(d) && d % 5 == 0));
                assert_eq!(t.polled, t.replies);
            }
        }
        assert!(ticks > 0);
        for agent in exp.agents().unwrap().agents() {
            assert!(
                agent.table().len() <= bound,
                "{} holds {}",
                agent.name(),
                agent.table().len()
            );
            for (s, _, v) in agent.table().entries() {
                assert!(v.is_finite() && v <= 0.0, "rewards are never positive");
                assert_eq!(s.period.is_some(), variant == Variant::B);
            }
        }
    }
}

#[test]
fn matrix_writes_every_run() {
    let mut cfg = small_config();
    cfg.plans = vec![PlanVariant::Fixed, PlanVariant::QLearningA];
    let dir = tempfile::tempdir().unwrap();
    let rows = run_matrix(&cfg, dir.path(), 2).unwrap();
    assert_eq!(rows.len(), 4);
    let order: Vec<(String, u64)> = rows
        .iter()
        .map(|r| (r.labels.plan.clone(), r.labels.interval))
        .collect();
    assert_eq!(
        order,
        vec![
            ("fixed".into(), 7000),
            ("qa".into(), 7000),
            ("fixed".into(), 10000),
            ("qa".into(), 10000)
        ]
    );
    let matrix = fs::read_to_string(dir.path().join("matrix.csv")).unwrap();
    assert_eq!(read_aggregates(&matrix).unwrap(), rows);
    for name in ["fixed_7000", "qa_7000", "fixed_10000", "qa_10000"] {
        assert!(dir.path().join(name).join("vehicles.csv").is_file());
        assert!(dir.path().join(name).join("aggregate.csv").is_file());
    }
    assert!(dir.path().join("demand_7000.csv").is_file());

    let serial = tempfile::tempdir().unwrap();
    assert_eq!(run_matrix(&cfg, serial.path(), 1).unwrap(), rows);
}
