//! Semaphore plans: ordered phases with per-maneuver colors.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agents::DayPeriod;
use crate::error::{Error, Result};

/// Lower bound of a variable phase duration, seconds.
pub const MIN_VARIABLE: u32 = 20;
/// Upper bound of a variable phase duration, seconds.
pub const MAX_VARIABLE: u32 = 60;
/// Granularity of variable durations and of every action delta.
pub const DURATION_STEP: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ManeuverColor {
    Green,
    Yellow,
    FlashingYellow,
    Red,
}

impl ManeuverColor {
    pub fn symbol(self) -> char {
        match self {
            ManeuverColor::Green => 'G',
            ManeuverColor::Yellow => 'y',
            ManeuverColor::FlashingYellow => 'g',
            ManeuverColor::Red => 'r',
        }
    }

    pub fn from_symbol(c: char) -> Result<Self> {
        match c {
            'G' => Ok(ManeuverColor::Green),
            'y' => Ok(ManeuverColor::Yellow),
            'g' => Ok(ManeuverColor::FlashingYellow),
            'r' => Ok(ManeuverColor::Red),
            other => Err(Error::PlanInvalid(format!(
                "unknown color symbol {other:?} (expected one of G, y, g, r)"
            ))),
        }
    }
}

/// Renders a color vector using the `G`/`y`/`g`/`r` alphabet.
pub fn render_colors(colors: &[ManeuverColor]) -> String {
    colors.iter().map(|c| c.symbol()).collect()
}

pub fn parse_colors(s: &str) -> Result<Vec<ManeuverColor>> {
    s.chars().map(ManeuverColor::from_symbol).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PhaseLiteral", into = "PhaseLiteral")]
pub struct Phase {
    pub duration: u32,
    pub colors: Vec<ManeuverColor>,
    pub variable: bool,
}

/// Plan literal form of a phase: `{duration, colors = "GrGr", variable}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseLiteral {
    duration: u32,
    colors: String,
    #[serde(default)]
    variable: bool,
}

impl TryFrom<PhaseLiteral> for Phase {
    type Error = Error;

    fn try_from(lit: PhaseLiteral) -> Result<Self> {
        Ok(Phase {
            duration: lit.duration,
            colors: parse_colors(&lit.colors)?,
            variable: lit.variable,
        })
    }
}

impl From<Phase> for PhaseLiteral {
    fn from(p: Phase) -> Self {
        PhaseLiteral {
            duration: p.duration,
            colors: render_colors(&p.colors),
            variable: p.variable,
        }
    }
}

impl Phase {
    pub fn new(duration: u32, colors: &str, variable: bool) -> Result<Self> {
        Ok(Phase {
            duration,
            colors: parse_colors(colors)?,
            variable,
        })
    }
}

pub fn is_legal_variable_duration(d: u32) -> bool {
    (MIN_VARIABLE..=MAX_VARIABLE).contains(&d) && d.is_multiple_of(DURATION_STEP)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PlanLiteral", into = "PlanLiteral")]
pub struct SemaphorePlan {
    phases: Vec<Phase>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanLiteral {
    phases: Vec<Phase>,
}

impl TryFrom<PlanLiteral> for SemaphorePlan {
    type Error = Error;

    fn try_from(lit: PlanLiteral) -> Result<Self> {
        SemaphorePlan::new(lit.phases)
    }
}

impl From<SemaphorePlan> for PlanLiteral {
    fn from(p: SemaphorePlan) -> Self {
        PlanLiteral { phases: p.phases }
    }
}

impl fmt::Display for SemaphorePlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.phases.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}:{}", render_colors(&p.colors), p.duration)?;
            if p.variable {
                f.write_str("*")?;
            }
        }
        Ok(())
    }
}

impl SemaphorePlan {
    pub fn new(phases: Vec<Phase>) -> Result<Self> {
        let plan = SemaphorePlan { phases };
        plan.validate()?;
        Ok(plan)
    }

    fn validate(&self) -> Result<()> {
        if self.phases.len() < 2 {
            return Err(Error::PlanInvalid(
                "a plan needs at least two phases".into(),
            ));
        }
        let maneuvers = self.phases[0].colors.len();
        if maneuvers == 0 {
            return Err(Error::PlanInvalid(
                "phases need at least one maneuver".into(),
            ));
        }
        for (i, p) in self.phases.iter().enumerate() {
            if p.colors.len() != maneuvers {
                return Err(Error::PlanInvalid(format!(
                    "phase {i} has {} colors, expected {maneuvers}",
                    p.colors.len()
                )));
            }
            if p.duration < 1 {
                return Err(Error::PlanInvalid(format!("phase {i} has zero duration")));
            }
            if p.variable && !is_legal_variable_duration(p.duration) {
                return Err(Error::PlanInvalid(format!(
                    "variable phase {i} duration {} outside {MIN_VARIABLE}..={MAX_VARIABLE} step {DURATION_STEP}",
                    p.duration
                )));
            }
        }
        let green = |m: usize, p: &Phase| p.colors[m] == ManeuverColor::Green;
        if !(0..maneuvers).any(|m| self.phases.iter().any(|p| green(m, p))) {
            return Err(Error::PlanInvalid("no maneuver is ever green".into()));
        }
        if let Some(m) = (0..maneuvers).find(|&m| self.phases.iter().all(|p| green(m, p))) {
            return Err(Error::PlanInvalid(format!(
                "maneuver {m} is green in every phase"
            )));
        }
        Ok(())
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn maneuvers(&self) -> usize {
        self.phases[0].colors.len()
    }

    pub fn cycle_length(&self) -> u32 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    /// Index of the phase active at `time_in_cycle` seconds into the cycle.
    pub fn current_phase(&self, time_in_cycle: u32) -> Result<usize> {
        let mut start = 0;
        for (i, p) in self.phases.iter().enumerate() {
            if time_in_cycle < start + p.duration {
                return Ok(i);
            }
            start += p.duration;
        }
        Err(Error::Contract(format!(
            "time {time_in_cycle} outside cycle of length {start}"
        )))
    }

    /// Start offset of every phase within the cycle.
    pub fn phase_starts(&self) -> Vec<u32> {
        self.phases
            .iter()
            .scan(0, |acc, p| {
                let s = *acc;
                *acc += p.duration;
                Some(s)
            })
            .collect()
    }

    pub fn color_at(&self, time_in_cycle: u32, maneuver: usize) -> Result<ManeuverColor> {
        let phase = self.current_phase(time_in_cycle)?;
        self.phases[phase]
            .colors
            .get(maneuver)
            .copied()
            .ok_or_else(|| Error::Contract(format!("maneuver {maneuver} out of range")))
    }

    pub fn variable_count(&self) -> usize {
        self.phases.iter().filter(|p| p.variable).count()
    }

    pub fn variable_durations(&self) -> Vec<u32> {
        self.phases
            .iter()
            .filter(|p| p.variable)
            .map(|p| p.duration)
            .collect()
    }

    /// Adds one delta to each variable phase, in phase order.
    pub fn apply_deltas(&self, deltas: &[i32]) -> Result<Self> {
        if deltas.len() != self.variable_count() {
            return Err(Error::Contract(format!(
                "{} deltas for {} variable phases",
                deltas.len(),
                self.variable_count()
            )));
        }
        let step = DURATION_STEP as i32;
        if let Some(d) = deltas.iter().find(|d| ![-step, 0, step].contains(d)) {
            return Err(Error::IllegalAction(format!(
                "delta {d} is not one of -5, 0, +5"
            )));
        }
        let durations = self
            .variable_durations()
            .iter()
            .zip(deltas)
            .map(|(&d, &delta)| {
                let next = d as i32 + delta;
                if next < 0 || !is_legal_variable_duration(next as u32) {
                    Err(Error::IllegalAction(format!(
                        "duration {d}{delta:+} leaves {MIN_VARIABLE}..={MAX_VARIABLE}"
                    )))
                } else {
                    Ok(next as u32)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_variable_durations(&durations)
    }

    /// Replaces the variable durations, keeping every other field.
    pub fn with_variable_durations(&self, durations: &[u32]) -> Result<Self> {
        if durations.len() != self.variable_count() {
            return Err(Error::PlanInvalid(format!(
                "{} durations for {} variable phases",
                durations.len(),
                self.variable_count()
            )));
        }
        let mut phases = self.phases.clone();
        for (p, &d) in phases.iter_mut().filter(|p| p.variable).zip(durations) {
            p.duration = d;
        }
        SemaphorePlan::new(phases)
    }

    /// Same phase count and color schemes; durations may differ.
    pub fn same_structure(&self, other: &SemaphorePlan) -> bool {
        self.phases.len() == other.phases.len()
            && self
                .phases
                .iter()
                .zip(&other.phases)
                .all(|(a, b)| a.colors == b.colors && a.variable == b.variable)
    }
}

/// Phase layout shared by every plan of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanTemplate {
    /// North/south green, yellow, east/west green, yellow. Two variable phases.
    Four,
    /// North/south green, east green, west green, each followed by a yellow.
    /// Three variable phases.
    Six,
}

impl PlanTemplate {
    pub fn variable_count(self) -> usize {
        match self {
            PlanTemplate::Four => 2,
            PlanTemplate::Six => 3,
        }
    }

    /// Instantiates the template for a four-approach grid junction.
    pub fn build(self, greens: &[u32], yellow: u32) -> Result<SemaphorePlan> {
        if greens.len() != self.variable_count() {
            return Err(Error::Config(format!(
                "template {self:?} takes {} green durations, got {}",
                self.variable_count(),
                greens.len()
            )));
        }
        let phases = match self {
            PlanTemplate::Four => vec![
                Phase::new(greens[0], "GrGr", true)?,
                Phase::new(yellow, "yryr", false)?,
                Phase::new(greens[1], "rGrG", true)?,
                Phase::new(yellow, "ryry", false)?,
            ],
            PlanTemplate::Six => vec![
                Phase::new(greens[0], "GrGr", true)?,
                Phase::new(yellow, "yryr", false)?,
                Phase::new(greens[1], "rGrr", true)?,
                Phase::new(yellow, "ryrr", false)?,
                Phase::new(greens[2], "rrrG", true)?,
                Phase::new(yellow, "rrry", false)?,
            ],
        };
        SemaphorePlan::new(phases)
    }
}

/// One plan per day period; all plans share their phase structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPeriodPlanSet {
    plans: BTreeMap<DayPeriod, SemaphorePlan>,
}

impl DayPeriodPlanSet {
    pub fn new(plans: BTreeMap<DayPeriod, SemaphorePlan>) -> Result<Self> {
        let mut iter = plans.values();
        if let Some(first) = iter.next() {
            if let Some(bad) = iter.find(|p| !first.same_structure(p)) {
                return Err(Error::Config(format!(
                    "day-period plans differ in structure: {first} vs {bad}"
                )));
            }
        }
        Ok(DayPeriodPlanSet { plans })
    }

    pub fn plan_for_period(&self, period: DayPeriod) -> Result<&SemaphorePlan> {
        self.plans
            .get(&period)
            .ok_or_else(|| Error::Config(format!("no plan defined for period {period}")))
    }

    pub fn periods(&self) -> impl Iterator<Item = DayPeriod> + '_ {
        self.plans.keys().copied()
    }
}
