//! Deterministic step-based queue simulator.
//!
//! Each directed link is a free-flow pipe feeding a FIFO queue at the stop
//! line. A vehicle entering a link at step `t` joins the queue at step
//! `t + free_flow_time`; the queue discharges up to `capacity` vehicles per
//! step while the vehicle's signal group is green and the next link has
//! storage left. One signal second is one engine step.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::agents::DayPeriod;
use crate::error::{Error, Result};
use crate::metrics::VehicleRecord;
use crate::network::{JunctionId, LinkId, RoadNetwork, Route};
use crate::signal::{DayPeriodPlanSet, ManeuverColor, SemaphorePlan};

pub type VehicleId = u64;

/// Steps per theoretical hour used by default.
pub const DEFAULT_STEPS_PER_HOUR: u64 = 20_000;
/// Storage length of one stopped vehicle, meters.
pub const DEFAULT_JAM_SPACING: f64 = 7.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimClock {
    pub step: u64,
    pub steps_per_hour: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Position {
    /// Scheduled, or waiting for room on the origin link.
    Pending,
    Traversing,
    Queued,
    Arrived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: VehicleId,
    pub route: Route,
    pub route_index: usize,
    pub link_entry_step: u64,
    pub position: Position,
    /// Scheduled departure; replaced by the actual entry step on insertion.
    pub depart_step: u64,
    pub arrive_step: Option<u64>,
    pub waiting_steps: u64,
    pub stop_count: u64,
    stopped_on_link: bool,
}

impl VehicleState {
    pub fn current_link(&self) -> LinkId {
        self.route.links()[self.route_index]
    }

    fn next_link(&self) -> Option<LinkId> {
        self.route.links().get(self.route_index + 1).copied()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkRuntime {
    /// (vehicle index, entry step) in entry order.
    traversing: VecDeque<(usize, u64)>,
    queue: VecDeque<usize>,
}

impl LinkRuntime {
    fn occupancy(&self) -> usize {
        self.traversing.len() + self.queue.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRuntime {
    pub junction: JunctionId,
    pub active: SemaphorePlan,
    pub cycle_start_step: u64,
    pub pending: Option<SemaphorePlan>,
    pub completed_cycles: u64,
}

impl SignalRuntime {
    /// Offset of `step` inside the active cycle.
    pub fn time_in_cycle(&self, step: u64) -> u32 {
        ((step - self.cycle_start_step) % self.active.cycle_length() as u64) as u32
    }

    pub fn color(&self, step: u64, group: usize) -> Result<ManeuverColor> {
        self.active.color_at(self.time_in_cycle(step), group)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub steps_per_hour: u64,
    pub jam_spacing: f64,
    /// Distance from the stop line counted as "near" a junction; `None` is the whole link.
    pub vicinity: Option<f64>,
    /// Stepping at or past this step is a lifecycle error.
    pub max_steps: Option<u64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            steps_per_hour: DEFAULT_STEPS_PER_HOUR,
            jam_spacing: DEFAULT_JAM_SPACING,
            vicinity: None,
            max_steps: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_hour == 0 {
            return Err(Error::Config("steps_per_hour must be positive".into()));
        }
        if !self.jam_spacing.is_finite() || self.jam_spacing <= 0.0 {
            return Err(Error::Config("jam spacing must be positive".into()));
        }
        if self.vicinity.is_some_and(|v| v.is_nan() || v < 0.0) {
            return Err(Error::Config("vicinity must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// The step that was executed.
    pub step: u64,
    pub inserted: Vec<VehicleId>,
    pub arrivals: Vec<VehicleId>,
    /// Queue length of every link, in link id order.
    pub queue_lengths: Vec<usize>,
    /// Signals whose cycle ended with this step, ascending.
    pub cycle_ends: Vec<JunctionId>,
}

/// Vehicle population broken down by state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub inserted: usize,
    pub arrived: usize,
    pub traversing: usize,
    pub queued: usize,
    pub pending: usize,
}

impl Census {
    pub fn in_network(&self) -> usize {
        self.traversing + self.queued + self.pending
    }

    pub fn is_conserved(&self) -> bool {
        self.inserted == self.arrived + self.in_network()
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    network: Arc<RoadNetwork>,
    config: EngineConfig,
    clock: SimClock,
    vehicles: Vec<VehicleState>,
    index: HashMap<VehicleId, usize>,
    links: Vec<LinkRuntime>,
    storage: Vec<usize>,
    scheduled: BTreeMap<u64, Vec<usize>>,
    /// Vehicles whose departure time has come, per origin link.
    blocked: Vec<VecDeque<usize>>,
    signals: BTreeMap<JunctionId, SignalRuntime>,
    period_plans: BTreeMap<JunctionId, DayPeriodPlanSet>,
    completed: Vec<VehicleRecord>,
    arrived: usize,
    finished: bool,
}

impl Engine {
    /// Creates an engine with `plan` installed at every signalized junction.
    pub fn new(
        network: Arc<RoadNetwork>,
        plan: &SemaphorePlan,
        config: EngineConfig,
    ) -> Result<Self> {
        let plans = network.signalized().map(|j| (j.id, plan.clone())).collect();
        Self::with_plans(network, plans, config)
    }

    pub fn with_plans(
        network: Arc<RoadNetwork>,
        plans: BTreeMap<JunctionId, SemaphorePlan>,
        config: EngineConfig,
    ) -> Result<Self> {
        config.validate()?;
        let mut signals = BTreeMap::new();
        for j in network.signalized() {
            let plan = plans
                .get(&j.id)
                .ok_or_else(|| Error::Config(format!("no plan for traffic light {}", j.name)))?;
            check_maneuvers(plan, j.maneuvers, &j.name)?;
            signals.insert(
                j.id,
                SignalRuntime {
                    junction: j.id,
                    active: plan.clone(),
                    cycle_start_step: 0,
                    pending: None,
                    completed_cycles: 0,
                },
            );
        }
        let storage = network
            .links()
            .iter()
            .map(|l| ((l.length / config.jam_spacing).floor() as usize).max(1))
            .collect();
        let n_links = network.links().len();
        Ok(Engine {
            network,
            config,
            clock: SimClock {
                step: 0,
                steps_per_hour: config.steps_per_hour,
            },
            vehicles: Vec::new(),
            index: HashMap::new(),
            links: vec![LinkRuntime::default(); n_links],
            storage,
            scheduled: BTreeMap::new(),
            blocked: vec![VecDeque::new(); n_links],
            signals,
            period_plans: BTreeMap::new(),
            completed: Vec::new(),
            arrived: 0,
            finished: false,
        })
    }

    pub fn network(&self) -> &Arc<RoadNetwork> {
        &self.network
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn now(&self) -> u64 {
        self.clock.step
    }

    pub fn is_finished(&self) -> bool {
        self.finished || self.config.max_steps.is_some_and(|m| self.clock.step >= m)
    }

    /// Closes the simulation; further steps are lifecycle errors.
    pub fn finish(&mut self) {
        self.finished = true;
    }

    pub fn set_max_steps(&mut self, max_steps: Option<u64>) {
        self.config.max_steps = max_steps;
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&VehicleState> {
        self.index.get(&id).map(|&i| &self.vehicles[i])
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    /// Ordinal of a queued vehicle at its stop line.
    pub fn queue_ordinal(&self, id: VehicleId) -> Option<usize> {
        let &i = self.index.get(&id)?;
        let v = &self.vehicles[i];
        if v.position != Position::Queued {
            return None;
        }
        self.links[v.current_link().0]
            .queue
            .iter()
            .position(|&q| q == i)
    }

    /// Vehicle ids queued on `link`, head first.
    pub fn queue(&self, link: LinkId) -> Vec<VehicleId> {
        self.links
            .get(link.0)
            .map(|l| l.queue.iter().map(|&i| self.vehicles[i].id).collect())
            .unwrap_or_default()
    }

    pub fn signal(&self, j: JunctionId) -> Result<&SignalRuntime> {
        self.signals.get(&j).ok_or_else(|| self.not_a_signal(j))
    }

    pub fn signals(&self) -> impl Iterator<Item = &SignalRuntime> {
        self.signals.values()
    }

    fn not_a_signal(&self, j: JunctionId) -> Error {
        match self.network.junction(j) {
            Ok(junction) => Error::Lookup(format!("{} is not a traffic light", junction.name)),
            Err(e) => e,
        }
    }

    /// Schedules a vehicle to enter the first link of `route` at `depart_step`.
    pub fn insert_vehicle(&mut self, id: VehicleId, route: Route, depart_step: u64) -> Result<()> {
        if self.index.contains_key(&id) {
            return Err(Error::Contract(format!("vehicle {id} already exists")));
        }
        if depart_step < self.clock.step {
            return Err(Error::Lifecycle(format!(
                "vehicle {id} departs at {depart_step}, before the current step {}",
                self.clock.step
            )));
        }
        // Re-validate against this engine's network.
        let route = Route::new(&self.network, route.links().to_vec())?;
        let idx = self.vehicles.len();
        self.vehicles.push(VehicleState {
            id,
            route,
            route_index: 0,
            link_entry_step: depart_step,
            position: Position::Pending,
            depart_step,
            arrive_step: None,
            waiting_steps: 0,
            stop_count: 0,
            stopped_on_link: false,
        });
        self.index.insert(id, idx);
        self.scheduled.entry(depart_step).or_default().push(idx);
        Ok(())
    }

    /// Completed trips not yet drained. Each record is returned exactly once.
    pub fn arrived_vehicles(&mut self) -> Vec<VehicleRecord> {
        std::mem::take(&mut self.completed)
    }

    pub fn census(&self) -> Census {
        let traversing = self.links.iter().map(|l| l.traversing.len()).sum();
        let queued = self.links.iter().map(|l| l.queue.len()).sum();
        let pending = self.scheduled.values().map(Vec::len).sum::<usize>()
            + self.blocked.iter().map(VecDeque::len).sum::<usize>();
        Census {
            inserted: self.vehicles.len(),
            arrived: self.arrived,
            traversing,
            queued,
            pending,
        }
    }

    /// Vehicles on the incoming links of `j` within the configured vicinity
    /// of its stop line.
    pub fn vehicle_count_near(&self, j: JunctionId) -> Result<f64> {
        if !self.signals.contains_key(&j) {
            return Err(self.not_a_signal(j));
        }
        let mut count = 0usize;
        for &l in self.network.incoming(j) {
            let rt = &self.links[l.0];
            match self.config.vicinity {
                None => count += rt.occupancy(),
                Some(radius) => {
                    let link = &self.network.links()[l.0];
                    count += (0..rt.queue.len())
                        .filter(|&k| k as f64 * self.config.jam_spacing <= radius)
                        .count();
                    count += rt
                        .traversing
                        .iter()
                        .filter(|(_, entry)| {
                            let elapsed = (self.clock.step - entry) as f64;
                            let frac = (elapsed / link.free_flow_time as f64).min(1.0);
                            link.length * (1.0 - frac) <= radius
                        })
                        .count();
                }
            }
        }
        Ok(count as f64)
    }

    /// Requests `plan` for the next cycle boundary. While a signal sits exactly
    /// on a boundary (no step of the new cycle executed yet) the plan is
    /// installed immediately. Returns the step from which it governs.
    pub fn set_pending_plan(&mut self, j: JunctionId, plan: SemaphorePlan) -> Result<u64> {
        let maneuvers = self.network.junction(j)?.maneuvers;
        let name = self.network.junction(j)?.name.clone();
        check_maneuvers(&plan, maneuvers, &name)?;
        let now = self.clock.step;
        let signal = self
            .signals
            .get_mut(&j)
            .ok_or_else(|| Error::Lookup(format!("{name} is not a traffic light")))?;
        if signal.cycle_start_step == now {
            signal.active = plan;
            signal.pending = None;
            Ok(now)
        } else {
            signal.pending = Some(plan);
            Ok(signal.cycle_start_step + signal.active.cycle_length() as u64)
        }
    }

    pub fn set_period_plans(&mut self, j: JunctionId, plans: DayPeriodPlanSet) -> Result<()> {
        let junction = self.network.junction(j)?;
        if !junction.signalized {
            return Err(self.not_a_signal(j));
        }
        for period in plans.periods() {
            check_maneuvers(
                plans.plan_for_period(period)?,
                junction.maneuvers,
                &junction.name,
            )?;
        }
        self.period_plans.insert(j, plans);
        Ok(())
    }

    /// Schedules the configured plan of `period` for the next cycle boundary.
    pub fn set_period_plan(&mut self, j: JunctionId, period: DayPeriod) -> Result<u64> {
        let set = self
            .period_plans
            .get(&j)
            .ok_or_else(|| Error::Config(format!("no day-period plans for junction {j}")))?;
        let plan = set.plan_for_period(period)?.clone();
        self.set_pending_plan(j, plan)
    }

    pub fn step(&mut self) -> Result<StepReport> {
        if self.is_finished() {
            return Err(Error::Lifecycle(format!(
                "simulation finished at step {}",
                self.clock.step
            )));
        }
        let now = self.clock.step;
        let mut report = StepReport {
            step: now,
            ..StepReport::default()
        };
        self.insert_due(now, &mut report);
        self.reach_stop_lines(now);
        self.discharge(now, &mut report)?;
        self.accumulate_waiting();
        self.clock.step += 1;
        self.roll_cycles(&mut report);
        report.queue_lengths = self.links.iter().map(|l| l.queue.len()).collect();
        Ok(report)
    }

    fn insert_due(&mut self, now: u64, report: &mut StepReport) {
        if let Some(due) = self.scheduled.remove(&now) {
            for idx in due {
                let origin = self.vehicles[idx].current_link();
                self.blocked[origin.0].push_back(idx);
            }
        }
        for l in 0..self.links.len() {
            while !self.blocked[l].is_empty() && self.links[l].occupancy() < self.storage[l] {
                let idx = self.blocked[l].pop_front().expect("non-empty");
                let v = &mut self.vehicles[idx];
                if v.depart_step != now {
                    debug!(
                        "vehicle {} inserted {} steps late",
                        v.id,
                        now - v.depart_step
                    );
                }
                v.depart_step = now;
                v.link_entry_step = now;
                v.position = Position::Traversing;
                self.links[l].traversing.push_back((idx, now));
                report.inserted.push(v.id);
            }
        }
    }

    fn reach_stop_lines(&mut self, now: u64) {
        for (l, link) in self.network.links().iter().enumerate() {
            let rt = &mut self.links[l];
            while let Some(&(idx, entry)) = rt.traversing.front() {
                if now - entry < link.free_flow_time as u64 {
                    break;
                }
                rt.traversing.pop_front();
                rt.queue.push_back(idx);
                self.vehicles[idx].position = Position::Queued;
            }
        }
    }

    fn discharge(&mut self, now: u64, report: &mut StepReport) -> Result<()> {
        let network = Arc::clone(&self.network);
        for junction in network.junctions() {
            for &l in network.incoming(junction.id) {
                let link = &network.links()[l.0];
                if let Some(signal) = self.signals.get(&junction.id) {
                    let group = link.signal_group.unwrap_or(0);
                    if signal.color(now, group)? != ManeuverColor::Green {
                        continue;
                    }
                }
                for _ in 0..link.capacity {
                    let Some(&idx) = self.links[l.0].queue.front() else {
                        break;
                    };
                    match self.vehicles[idx].next_link() {
                        Some(next) => {
                            if self.links[next.0].occupancy() >= self.storage[next.0] {
                                break;
                            }
                            self.links[l.0].queue.pop_front();
                            let v = &mut self.vehicles[idx];
                            v.route_index += 1;
                            v.link_entry_step = now;
                            v.position = Position::Traversing;
                            v.stopped_on_link = false;
                            self.links[next.0].traversing.push_back((idx, now));
                        }
                        None => {
                            self.links[l.0].queue.pop_front();
                            let v = &mut self.vehicles[idx];
                            v.position = Position::Arrived;
                            v.arrive_step = Some(now);
                            self.arrived += 1;
                            report.arrivals.push(v.id);
                            self.completed.push(VehicleRecord::new(
                                v.id,
                                v.depart_step,
                                now,
                                v.waiting_steps,
                                v.stop_count,
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn accumulate_waiting(&mut self) {
        for rt in &self.links {
            for &idx in &rt.queue {
                let v = &mut self.vehicles[idx];
                v.waiting_steps += 1;
                if !v.stopped_on_link {
                    v.stopped_on_link = true;
                    v.stop_count += 1;
                }
            }
        }
    }

    fn roll_cycles(&mut self, report: &mut StepReport) {
        let next = self.clock.step;
        for (j, signal) in self.signals.iter_mut() {
            if next - signal.cycle_start_step == signal.active.cycle_length() as u64 {
                signal.cycle_start_step = next;
                signal.completed_cycles += 1;
                if let Some(plan) = signal.pending.take() {
                    signal.active = plan;
                }
                report.cycle_ends.push(*j);
            }
        }
    }
}

fn check_maneuvers(plan: &SemaphorePlan, maneuvers: usize, name: &str) -> Result<()> {
    if plan.maneuvers() != maneuvers {
        return Err(Error::PlanInvalid(format!(
            "plan has {} maneuvers but {name} has {maneuvers}",
            plan.maneuvers()
        )));
    }
    Ok(())
}
