use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DayPeriod, Variant};
use crate::error::{Error, Result};
use crate::signal::{is_legal_variable_duration, DURATION_STEP, MAX_VARIABLE, MIN_VARIABLE};

/// Number of admissible values of one variable duration (20, 25, ..., 60).
const LEVELS: usize = ((MAX_VARIABLE - MIN_VARIABLE) / DURATION_STEP + 1) as usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QState {
    pub durations: Vec<u32>,
    pub period: Option<DayPeriod>,
}

impl QState {
    pub fn new(durations: Vec<u32>, period: Option<DayPeriod>) -> Self {
        QState { durations, period }
    }
}

/// How duration changes are combined across variable phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// One delta applied to every variable phase: 3 actions.
    Uniform,
    /// An independent delta per variable phase: 3^k actions.
    PerPhase,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QAction {
    Uniform(i32),
    PerPhase(Vec<i32>),
}

impl QAction {
    /// Per-phase deltas for `k` variable phases.
    pub fn deltas(&self, k: usize) -> Vec<i32> {
        match self {
            QAction::Uniform(d) => vec![*d; k],
            QAction::PerPhase(v) => v.clone(),
        }
    }

    pub fn is_maintain(&self) -> bool {
        match self {
            QAction::Uniform(d) => *d == 0,
            QAction::PerPhase(v) => v.iter().all(|d| *d == 0),
        }
    }
}

const DELTAS: [i32; 3] = [-(DURATION_STEP as i32), 0, DURATION_STEP as i32];

impl ActionMode {
    /// Every action in canonical order: Uniform −5 < 0 < +5, PerPhase lexicographic.
    pub fn all_actions(self, k: usize) -> Vec<QAction> {
        match self {
            ActionMode::Uniform => DELTAS.iter().map(|&d| QAction::Uniform(d)).collect(),
            ActionMode::PerPhase => {
                let mut out: Vec<Vec<i32>> = vec![Vec::new()];
                for _ in 0..k {
                    out = out
                        .into_iter()
                        .flat_map(|prefix| {
                            DELTAS.iter().map(move |&d| {
                                let mut p = prefix.clone();
                                p.push(d);
                                p
                            })
                        })
                        .collect();
                }
                out.into_iter().map(QAction::PerPhase).collect()
            }
        }
    }
}

/// Actions that keep every variable duration within bounds, in canonical order.
pub fn legal_actions(mode: ActionMode, durations: &[u32]) -> Vec<QAction> {
    mode.all_actions(durations.len())
        .into_iter()
        .filter(|a| {
            durations
                .iter()
                .zip(a.deltas(durations.len()))
                .all(|(&d, delta)| {
                    let next = d as i64 + delta as i64;
                    next >= 0 && is_legal_variable_duration(next as u32)
                })
        })
        .collect()
}

/// Size of the state space for `variable_phase_count` variable phases.
pub fn enumerate_states(variable_phase_count: usize, variant: Variant) -> Result<usize> {
    if !(2..=3).contains(&variable_phase_count) {
        return Err(Error::Config(format!(
            "unsupported variable phase count {variable_phase_count} (expected 2 or 3)"
        )));
    }
    let durations = LEVELS.pow(variable_phase_count as u32);
    Ok(match variant {
        Variant::A => durations,
        Variant::B => durations * DayPeriod::ALL.len(),
    })
}

/// Number of (state, action) pairs of the table.
pub fn state_action_pairs(
    variable_phase_count: usize,
    variant: Variant,
    mode: ActionMode,
) -> Result<usize> {
    Ok(enumerate_states(variable_phase_count, variant)?
        * mode.all_actions(variable_phase_count).len())
}

/// Action values; unseen pairs read as 0.0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    values: HashMap<QState, HashMap<QAction, f64>>,
}

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, state: &QState, action: &QAction) -> f64 {
        self.values
            .get(state)
            .and_then(|row| row.get(action))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set(&mut self, state: QState, action: QAction, value: f64) {
        self.values.entry(state).or_default().insert(action, value);
    }

    /// Number of stored (state, action) pairs.
    pub fn len(&self) -> usize {
        self.values.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn states(&self) -> usize {
        self.values.len()
    }

    pub fn max_over(&self, state: &QState, actions: &[QAction]) -> Option<f64> {
        actions.iter().map(|a| self.get(state, a)).reduce(f64::max)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&QState, &QAction, f64)> {
        self.values
            .iter()
            .flat_map(|(s, row)| row.iter().map(move |(a, v)| (s, a, *v)))
    }
}

/// Epsilon-greedy choice. `legal` must be in canonical order; greedy ties go
/// to the earliest action.
pub fn select_action<R: Rng + ?Sized>(
    table: &QTable,
    state: &QState,
    legal: &[QAction],
    epsilon: f64,
    rng: &mut R,
) -> Result<QAction> {
    if legal.is_empty() {
        return Err(Error::Contract("no legal action to choose from".into()));
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(legal[rng.gen_range(0..legal.len())].clone());
    }
    let mut best = &legal[0];
    let mut best_q = table.get(state, best);
    for a in &legal[1..] {
        let q = table.get(state, a);
        if q > best_q {
            best = a;
            best_q = q;
        }
    }
    Ok(best.clone())
}

/// One-step Q-learning update; returns the new value of `Q(s, a)`.
#[allow(clippy::too_many_arguments)]
pub fn q_update(
    table: &mut QTable,
    state: &QState,
    action: &QAction,
    reward: f64,
    next_state: &QState,
    legal_next: &[QAction],
    alpha: f64,
    gamma: f64,
) -> f64 {
    let current = table.get(state, action);
    let future = table.max_over(next_state, legal_next).unwrap_or(0.0);
    let updated = current + alpha * (reward + gamma * future - current);
    table.set(state.clone(), action.clone(), updated);
    updated
}
