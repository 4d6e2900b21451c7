use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tlc_core::agents::{
    combined_reward, legal_actions, select_action, ActionMode, NeighborWeighting, QAction, QState,
    QTable,
};
use tlc_core::metrics::{aggregate, RunLabels, VehicleRecord, WaitMeasure};
use tlc_core::network::{build_grid, JunctionId};
use tlc_core::scenario::{day_steps, TrafficSchedule};
use tlc_core::signal::{is_legal_variable_duration, PlanTemplate};
use tlc_core::sim::{Engine, EngineConfig};

fn green() -> impl Strategy<Value = u32> {
    (4u32..=12).prop_map(|k| k * 5)
}

fn labels() -> RunLabels {
    RunLabels {
        plan: "p".into(),
        interval: 1,
        seed: 1,
    }
}

proptest! {
    #[test]
    fn phases_partition_the_cycle(g in prop::collection::vec(green(), 3), yellow in 1u32..8, six in any::<bool>()) {
        let (template, greens) = if six { (PlanTemplate::Six, &g[..]) } else { (PlanTemplate::Four, &g[..2]) };
        let plan = template.build(greens, yellow).unwrap();
        let starts = plan.phase_starts();
        prop_assert_eq!(plan.cycle_length(), plan.phases().iter().map(|p| p.duration).sum::<u32>());
        for t in 0..plan.cycle_length() {
            let i = plan.current_phase(t).unwrap();
            prop_assert!(starts[i] <= t && t < starts[i] + plan.phases()[i].duration);
        }
        prop_assert!(plan.current_phase(plan.cycle_length()).is_err());
    }

    #[test]
    fn legal_actions_stay_in_bounds(g in prop::collection::vec(green(), 2..=3), per_phase in any::<bool>()) {
        let mode = if per_phase { ActionMode::PerPhase } else { ActionMode::Uniform };
        let template = if g.len() == 2 { PlanTemplate::Four } else { PlanTemplate::Six };
        let plan = template.build(&g, 5).unwrap();
        let legal = legal_actions(mode, &g);
        prop_assert!(legal.iter().any(QAction::is_maintain));
        for a in mode.all_actions(g.len()) {
            let applied = plan.apply_deltas(&a.deltas(g.len()));
            prop_assert_eq!(applied.is_ok(), legal.contains(&a));
            if let Ok(p) = applied {
                prop_assert!(p.variable_durations().into_iter().all(is_legal_variable_duration));
                prop_assert!(p.same_structure(&plan));
            }
        }
    }

    #[test]
    fn reward_scales_linearly(
        own in -50.0f64..0.0,
        n in prop::collection::vec((-50.0f64..0.0, 1.0f64..1000.0), 0..5),
        k in 0.01f64..20.0,
        distance_weighting in any::<bool>(),
    ) {
        let w = if distance_weighting { NeighborWeighting::Distance } else { NeighborWeighting::InverseDistance };
        let base = combined_reward(own, &n, 0.5, 0.5, w).unwrap();
        let scaled: Vec<(f64, f64)> = n.iter().map(|&(r, d)| (k * r, d)).collect();
        let r = combined_reward(k * own, &scaled, 0.5, 0.5, w).unwrap();
        prop_assert!((r - k * base).abs() <= 1e-9 * (1.0 + base.abs() * k));
        // Uniform distance rescaling leaves the weights unchanged.
        let stretched: Vec<(f64, f64)> = n.iter().map(|&(r, d)| (r, d * 3.0)).collect();
        prop_assert!((combined_reward(own, &stretched, 0.5, 0.5, w).unwrap() - base).abs() < 1e-9);
        // The result lies between the extremes of its inputs.
        let lo = n.iter().map(|x| x.0).fold(own, f64::min);
        let hi = n.iter().map(|x| x.0).fold(own, f64::max);
        prop_assert!(base >= lo - 1e-9 && base <= hi + 1e-9);
    }

    #[test]
    fn greedy_choice_ignores_a_common_offset(
        values in prop::collection::vec(-10i32..10, 9),
        offset in -100.0f64..100.0,
        g in prop::collection::vec(green(), 2),
    ) {
        let state = QState::new(g.clone(), None);
        let legal = legal_actions(ActionMode::PerPhase, &g);
        let mut a = QTable::new();
        let mut b = QTable::new();
        for (action, v) in legal.iter().zip(&values) {
            a.set(state.clone(), action.clone(), *v as f64);
            b.set(state.clone(), action.clone(), *v as f64 + offset);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pa = select_action(&a, &state, &legal, 0.0, &mut rng).unwrap();
        let pb = select_action(&b, &state, &legal, 0.0, &mut rng).unwrap();
        prop_assert_eq!(&pa, &pb);
        let best = legal.iter().map(|x| a.get(&state, x)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(a.get(&state, &pa), best);
        let first = legal.iter().position(|x| a.get(&state, x) == best).unwrap();
        prop_assert_eq!(&pa, &legal[first]);
    }

    #[test]
    fn aggregate_ignores_record_order(
        raw in prop::collection::vec((0u64..500, 1u64..500, 0u64..400, 0u64..5), 1..40),
        shuffle_seed in any::<u64>(),
    ) {
        let records: Vec<VehicleRecord> = raw
            .iter()
            .enumerate()
            .map(|(i, &(d, t, w, s))| VehicleRecord::new(i as u64, d, d + t, w.min(t), s))
            .collect();
        let mut shuffled = records.clone();
        rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        for m in [WaitMeasure::Total, WaitMeasure::PerStop] {
            let a = aggregate(&records, m, labels(), 0).unwrap();
            let b = aggregate(&shuffled, m, labels(), 0).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn level_repeats_every_day(step in 0u64..10_000_000, sph in 1u64..30_000) {
        let s = TrafficSchedule::default();
        prop_assert_eq!(s.level_at(step, sph), s.level_at(step + day_steps(sph), sph));
    }

    #[test]
    fn engine_conserves_vehicles(
        trips in prop::collection::vec((0usize..8, 0usize..8, 0u64..120), 1..60),
        g in prop::collection::vec(green(), 2),
        fft in 1u32..25,
        length in 20.0f64..200.0,
    ) {
        let net = Arc::new(build_grid(2, 2, length, fft, 1).unwrap());
        let boundary: Vec<JunctionId> = net.boundary().map(|j| j.id).collect();
        let plan = PlanTemplate::Four.build(&g, 3).unwrap();
        let mut engine = Engine::new(Arc::clone(&net), &plan, EngineConfig::default()).unwrap();
        let mut total = 0usize;
        for (i, &(o, d, t)) in trips.iter().enumerate() {
            let (o, d) = (boundary[o], boundary[d]);
            if o == d {
                continue;
            }
            engine.insert_vehicle(i as u64, net.shortest_route(o, d).unwrap(), t).unwrap();
            total += 1;
        }
        let mut arrived = 0;
        for _ in 0..3000 {
            let report = engine.step().unwrap();
            arrived += report.arrivals.len();
            let c = engine.census();
            prop_assert!(c.is_conserved());
            prop_assert_eq!(c.inserted, total);
            prop_assert_eq!(c.arrived, arrived);
        }
        for r in engine.arrived_vehicles() {
            prop_assert!(r.waiting_steps <= r.travel_time);
            prop_assert!(r.travel_time >= fft as u64);
        }
    }
}
