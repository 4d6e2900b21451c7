use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::demand::{DemandSpec, LevelCounts};
use super::schedule::TrafficSchedule;
use crate::agents::{AgentConfig, DayPeriod, Variant};
use crate::error::{Error, Result};
use crate::metrics::WaitMeasure;
use crate::network::{build_grid, GridParams, RoadNetwork};
use crate::signal::{DayPeriodPlanSet, PlanTemplate, SemaphorePlan};
use crate::sim::{EngineConfig, DEFAULT_JAM_SPACING, DEFAULT_STEPS_PER_HOUR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlanVariant {
    #[serde(rename = "fixed")]
    Fixed,
    #[serde(rename = "semifixed")]
    SemiFixed,
    #[serde(rename = "qa")]
    QLearningA,
    #[serde(rename = "qb")]
    QLearningB,
}

impl PlanVariant {
    pub const ALL: [PlanVariant; 4] = [
        PlanVariant::Fixed,
        PlanVariant::SemiFixed,
        PlanVariant::QLearningA,
        PlanVariant::QLearningB,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlanVariant::Fixed => "fixed",
            PlanVariant::SemiFixed => "semifixed",
            PlanVariant::QLearningA => "qa",
            PlanVariant::QLearningB => "qb",
        }
    }

    pub fn learning_variant(self) -> Option<Variant> {
        match self {
            PlanVariant::QLearningA => Some(Variant::A),
            PlanVariant::QLearningB => Some(Variant::B),
            _ => None,
        }
    }
}

impl fmt::Display for PlanVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlanVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlanVariant::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown plan {s:?} (expected fixed, semifixed, qa or qb)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub jam_spacing: f64,
    /// Meters from the stop line; absent means the whole link.
    pub vicinity: Option<f64>,
}

impl Default for EngineSection {
    fn default() -> Self {
        EngineSection {
            jam_spacing: DEFAULT_JAM_SPACING,
            vicinity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandSection {
    pub low: u32,
    pub medium: u32,
    pub high: u32,
    pub medium_bias: f64,
}

impl Default for DemandSection {
    fn default() -> Self {
        let c = LevelCounts::default();
        DemandSection {
            low: c.low,
            medium: c.medium,
            high: c.high,
            medium_bias: 0.7,
        }
    }
}

/// Green splits of the manual plans. Durations list the variable phases in
/// template order (north/south first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    pub template: PlanTemplate,
    pub yellow: u32,
    pub fixed: Vec<u32>,
    pub semifixed_low: Vec<u32>,
    pub semifixed_medium: Vec<u32>,
    pub semifixed_high: Vec<u32>,
}

impl Default for SignalSection {
    fn default() -> Self {
        SignalSection {
            template: PlanTemplate::Four,
            yellow: 5,
            fixed: vec![40, 40],
            semifixed_low: vec![20, 20],
            semifixed_medium: vec![30, 45],
            semifixed_high: vec![40, 40],
        }
    }
}

/// Everything needed to build and run one experiment, as read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub days: u64,
    pub steps_per_hour: u64,
    pub seed: u64,
    /// Insertion intervals, in steps at `interval_reference` steps per hour.
    pub intervals: Vec<u64>,
    pub interval_reference: u64,
    /// Extra theoretical hours allowed for the network to empty.
    pub drain_hours: u64,
    pub wait_measure: WaitMeasure,
    pub plans: Vec<PlanVariant>,
    pub network: GridParams,
    pub engine: EngineSection,
    pub demand: DemandSection,
    pub schedule: TrafficSchedule,
    pub signals: SignalSection,
    pub agents: AgentConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            days: 4,
            steps_per_hour: DEFAULT_STEPS_PER_HOUR,
            seed: 1,
            intervals: vec![7000, 10000],
            interval_reference: DEFAULT_STEPS_PER_HOUR,
            drain_hours: 2,
            wait_measure: WaitMeasure::Total,
            plans: PlanVariant::ALL.to_vec(),
            network: GridParams::default(),
            engine: EngineSection::default(),
            demand: DemandSection::default(),
            schedule: TrafficSchedule::default(),
            signals: SignalSection::default(),
            agents: AgentConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.days == 0 || self.steps_per_hour == 0 || self.interval_reference == 0 {
            return Err(Error::Config(
                "days, steps_per_hour and interval_reference must be positive".into(),
            ));
        }
        if self.intervals.is_empty() || self.plans.is_empty() {
            return Err(Error::Config(
                "at least one interval and one plan are required".into(),
            ));
        }
        for &i in &self.intervals {
            self.scaled_interval(i)?;
        }
        self.agents.validate()?;
        self.fixed_plan()?;
        self.period_plans()?;
        self.engine_config().validate()?;
        let count = self.signals.template.variable_count();
        crate::agents::enumerate_states(count, Variant::A)?;
        Ok(())
    }

    /// Insertion interval in engine steps for a nominal interval.
    pub fn scaled_interval(&self, nominal: u64) -> Result<u64> {
        let scaled = (nominal as u128 * self.steps_per_hour as u128
            + self.interval_reference as u128 / 2)
            / self.interval_reference as u128;
        if scaled == 0 {
            return Err(Error::Config(format!(
                "interval {nominal} vanishes at {} steps per hour",
                self.steps_per_hour
            )));
        }
        Ok(scaled as u64)
    }

    pub fn horizon(&self) -> u64 {
        self.days * 24 * self.steps_per_hour
    }

    pub fn drain_steps(&self) -> u64 {
        self.drain_hours * self.steps_per_hour
    }

    pub fn build_network(&self) -> Result<RoadNetwork> {
        let g = self.network;
        build_grid(g.rows, g.cols, g.link_length, g.free_flow_time, g.capacity)
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            steps_per_hour: self.steps_per_hour,
            jam_spacing: self.engine.jam_spacing,
            vicinity: self.engine.vicinity,
            max_steps: None,
        }
    }

    pub fn fixed_plan(&self) -> Result<SemaphorePlan> {
        self.signals
            .template
            .build(&self.signals.fixed, self.signals.yellow)
    }

    pub fn period_plans(&self) -> Result<DayPeriodPlanSet> {
        let s = &self.signals;
        let mut plans = BTreeMap::new();
        for (period, greens) in [
            (DayPeriod::Low, &s.semifixed_low),
            (DayPeriod::Medium, &s.semifixed_medium),
            (DayPeriod::High, &s.semifixed_high),
        ] {
            plans.insert(period, s.template.build(greens, s.yellow)?);
        }
        DayPeriodPlanSet::new(plans)
    }

    pub fn demand_spec(&self, nominal_interval: u64, seed: u64) -> Result<DemandSpec> {
        Ok(DemandSpec {
            insertion_interval: self.scaled_interval(nominal_interval)?,
            counts: LevelCounts {
                low: self.demand.low,
                medium: self.demand.medium,
                high: self.demand.high,
            },
            medium_bias: self.demand.medium_bias,
            schedule: self.schedule.clone(),
            steps_per_hour: self.steps_per_hour,
            days: self.days,
            seed,
        })
    }
}
