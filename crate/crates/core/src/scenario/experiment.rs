use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, PoisonError};
use std::thread;

use log::info;

use super::config::{ExperimentConfig, PlanVariant};
use super::demand::{generate_demand, write_demand, DemandEntry};
use crate::agents::{
    AgentConfig, AgentRuntime, BusStats, InProcessBus, MessageTransport, TickRecord,
};
use crate::control_api::{ControlClient, ControlCore, InProcessClient};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, aggregates_csv, export_csv, RunAggregate, RunLabels, VehicleRecord,
};
use crate::sim::Engine;

/// Result of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<VehicleRecord>,
    pub aggregate: RunAggregate,
    pub final_step: u64,
    pub agent_ticks: u64,
    pub bus: Option<BusStats>,
}

/// Builds the engine for `plan` with `demand` scheduled.
pub fn build_engine(
    cfg: &ExperimentConfig,
    plan: PlanVariant,
    demand: &[DemandEntry],
) -> Result<Engine> {
    let net = Arc::new(cfg.build_network()?);
    let mut engine = if plan == PlanVariant::SemiFixed {
        let set = cfg.period_plans()?;
        let first = cfg.schedule.level_at(0, cfg.steps_per_hour);
        let mut engine = Engine::new(
            Arc::clone(&net),
            set.plan_for_period(first)?,
            cfg.engine_config(),
        )?;
        for j in net.signalized() {
            engine.set_period_plans(j.id, set.clone())?;
        }
        engine
    } else {
        Engine::new(Arc::clone(&net), &cfg.fixed_plan()?, cfg.engine_config())?
    };
    for e in demand {
        engine.insert_vehicle(e.vehicle_id, e.resolve(&net)?, e.depart_step)?;
    }
    Ok(engine)
}

/// Drives one run through a [`ControlClient`]: the semi-fixed scheduler or
/// the learning agents react to cycle ends after every step.
pub struct Experiment {
    cfg: ExperimentConfig,
    plan: PlanVariant,
    labels: RunLabels,
    client: Box<dyn ControlClient>,
    agents: Option<AgentRuntime>,
    total_vehicles: usize,
    arrived: usize,
    step: u64,
    ticks: u64,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment")
            .field("plan", &self.plan)
            .field("labels", &self.labels)
            .field("step", &self.step)
            .field("arrived", &self.arrived)
            .finish()
    }
}

impl Experiment {
    /// `client` must control a fresh engine built for this run (see
    /// [`build_engine`]) holding `total_vehicles` trips.
    pub fn new(
        cfg: &ExperimentConfig,
        plan: PlanVariant,
        labels: RunLabels,
        total_vehicles: usize,
        mut client: Box<dyn ControlClient>,
        bus: Box<dyn MessageTransport>,
    ) -> Result<Self> {
        let step = client.time()?;
        let agents = match plan.learning_variant() {
            Some(variant) => {
                let agent_cfg = AgentConfig {
                    variant,
                    ..cfg.agents
                };
                Some(AgentRuntime::connect(
                    client.as_mut(),
                    agent_cfg,
                    labels.seed,
                    bus,
                )?)
            }
            None => None,
        };
        Ok(Experiment {
            cfg: cfg.clone(),
            plan,
            labels,
            client,
            agents,
            total_vehicles,
            arrived: 0,
            step,
            ticks: 0,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn arrived(&self) -> usize {
        self.arrived
    }

    pub fn agents(&self) -> Option<&AgentRuntime> {
        self.agents.as_ref()
    }

    pub fn client_mut(&mut self) -> &mut dyn ControlClient {
        self.client.as_mut()
    }

    /// True once the scheduled horizon has passed and either every vehicle
    /// has arrived or the drain allowance is used up.
    pub fn is_done(&self) -> bool {
        let horizon = self.cfg.horizon();
        self.step >= horizon
            && (self.arrived >= self.total_vehicles
                || self.step >= horizon + self.cfg.drain_steps())
    }

    /// Executes one engine step plus the controller reaction to it.
    pub fn advance(&mut self) -> Result<Vec<TickRecord>> {
        let outcome = self.client.sim_step(1)?;
        self.arrived += outcome.arrived;
        self.step = outcome.step;
        let sph = self.cfg.steps_per_hour;
        match self.plan {
            PlanVariant::Fixed => Ok(Vec::new()),
            PlanVariant::SemiFixed => {
                for end in &outcome.cycle_ends {
                    let period = self.cfg.schedule.level_at(end.step, sph);
                    self.client.set_period_plan(&end.tl, period)?;
                }
                Ok(Vec::new())
            }
            PlanVariant::QLearningA | PlanVariant::QLearningB => {
                let period = self.cfg.schedule.level_at(self.step, sph);
                let agents = self.agents.as_mut().expect("learning plans have agents");
                let ticks = agents.after_step(self.client.as_mut(), &outcome, Some(period))?;
                self.ticks += ticks.len() as u64;
                Ok(ticks)
            }
        }
    }

    pub fn run(mut self) -> Result<RunOutput> {
        while !self.is_done() {
            self.advance()?;
        }
        self.finish()
    }

    /// Drains the completed trips and aggregates them.
    pub fn finish(mut self) -> Result<RunOutput> {
        let records = self.client.drain_arrived()?;
        let unfinished = self.total_vehicles.saturating_sub(records.len());
        if unfinished > 0 {
            info!(
                "{} interval {} seed {}: {unfinished} vehicles unfinished at step {}",
                self.labels.plan, self.labels.interval, self.labels.seed, self.step
            );
        }
        let aggregate = aggregate(
            &records,
            self.cfg.wait_measure,
            self.labels.clone(),
            unfinished,
        )?;
        Ok(RunOutput {
            records,
            aggregate,
            final_step: self.step,
            agent_ticks: self.ticks,
            bus: self.agents.as_ref().map(|a| a.bus().stats()),
        })
    }
}

pub fn run_labels(plan: PlanVariant, nominal_interval: u64, seed: u64) -> RunLabels {
    RunLabels {
        plan: plan.as_str().to_string(),
        interval: nominal_interval,
        seed,
    }
}

/// Runs one experiment in-process over `demand`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    plan: PlanVariant,
    nominal_interval: u64,
    seed: u64,
    demand: &[DemandEntry],
) -> Result<RunOutput> {
    let core = ControlCore::shared(build_engine(cfg, plan, demand)?);
    let client = Box::new(InProcessClient::new(core));
    let labels = run_labels(plan, nominal_interval, seed);
    Experiment::new(
        cfg,
        plan,
        labels,
        demand.len(),
        client,
        Box::new(InProcessBus::new()),
    )?
    .run()
}

/// Generates demand for (`nominal_interval`, `seed`).
pub fn demand_for(
    cfg: &ExperimentConfig,
    nominal_interval: u64,
    seed: u64,
) -> Result<Vec<DemandEntry>> {
    let net = cfg.build_network()?;
    generate_demand(&cfg.demand_spec(nominal_interval, seed)?, &net)
}

pub fn demand_file_name(nominal_interval: u64) -> String {
    format!("demand_{nominal_interval}.csv")
}

pub fn run_dir_name(plan: PlanVariant, nominal_interval: u64) -> String {
    format!("{plan}_{nominal_interval}")
}

/// Runs every configured plan × interval with seed `cfg.seed`, using up to
/// `jobs` threads. Writes the demand files, one directory per run and
/// `matrix.csv`; returns the aggregates in interval-major, plan order.
pub fn run_matrix(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<Vec<RunAggregate>> {
    fs::create_dir_all(out)?;
    let seed = cfg.seed;
    let mut demands = Vec::new();
    for &interval in &cfg.intervals {
        let demand = demand_for(cfg, interval, seed)?;
        write_demand(&demand, &out.join(demand_file_name(interval)))?;
        demands.push(demand);
    }
    let jobs_list: Vec<(usize, PlanVariant)> = (0..cfg.intervals.len())
        .flat_map(|i| cfg.plans.iter().map(move |&p| (i, p)))
        .collect();
    let results: Mutex<Vec<Option<Result<RunAggregate>>>> =
        Mutex::new(jobs_list.iter().map(|_| None).collect());
    let next = AtomicUsize::new(0);
    thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, jobs_list.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(i, plan)) = jobs_list.get(k) else {
                    break;
                };
                let interval = cfg.intervals[i];
                let dir: PathBuf = out.join(run_dir_name(plan, interval));
                let result = run_experiment(cfg, plan, interval, seed, &demands[i]).and_then(|o| {
                    fs::create_dir_all(&dir)?;
                    export_csv(&o.records, &o.aggregate, &dir)?;
                    info!("finished {plan} at interval {interval}");
                    Ok(o.aggregate)
                });
                results.lock().unwrap_or_else(PoisonError::into_inner)[k] = Some(result);
            });
        }
    });
    let aggregates = results
        .into_inner()
        .unwrap_or_else(PoisonError::into_inner)
        .into_iter()
        .map(|r| r.unwrap_or_else(|| Err(Error::Lifecycle("run did not complete".into()))))
        .collect::<Result<Vec<_>>>()?;
    fs::write(out.join("matrix.csv"), aggregates_csv(&aggregates))?;
    Ok(aggregates)
}
