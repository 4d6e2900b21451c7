use serde::{Deserialize, Serialize};

use crate::agents::DayPeriod;
use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: u32 = 24 * 60;

/// One row of the daily schedule: the level holds from `start_minute` until
/// the next row starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub start_minute: u32,
    pub level: DayPeriod,
}

/// Daily traffic levels, wrapping at midnight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Band>", into = "Vec<Band>")]
pub struct TrafficSchedule {
    bands: Vec<Band>,
}

impl TrafficSchedule {
    pub fn new(bands: Vec<Band>) -> Result<Self> {
        match bands.first() {
            Some(b) if b.start_minute == 0 => {}
            _ => return Err(Error::Config("schedule must start at minute 0".into())),
        }
        if bands
            .windows(2)
            .any(|w| w[0].start_minute >= w[1].start_minute)
        {
            return Err(Error::Config(
                "schedule start times must strictly increase".into(),
            ));
        }
        if bands.iter().any(|b| b.start_minute >= MINUTES_PER_DAY) {
            return Err(Error::Config(
                "schedule start times must lie within one day".into(),
            ));
        }
        Ok(TrafficSchedule { bands })
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    /// Level in force at `step`. Band starts are converted to steps exactly
    /// (`minute · steps_per_hour / 60` may be fractional), so a step belongs
    /// to a band once `step · 60 ≥ minute · steps_per_hour`.
    pub fn level_at(&self, step: u64, steps_per_hour: u64) -> DayPeriod {
        let pos = (step % day_steps(steps_per_hour)) as u128 * 60;
        self.bands
            .iter()
            .rev()
            .find(|b| b.start_minute as u128 * steps_per_hour as u128 <= pos)
            .map(|b| b.level)
            .expect("first band starts at minute 0")
    }

    /// Number of steps of `[0, day_steps)` in each band, as `(level, steps)` per row.
    pub fn band_steps(&self, steps_per_hour: u64) -> Vec<(DayPeriod, u64)> {
        let start = |m: u32| (m as u64 * steps_per_hour).div_ceil(60);
        let day = day_steps(steps_per_hour);
        self.bands
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let end = self.bands.get(i + 1).map_or(day, |n| start(n.start_minute));
                (b.level, end - start(b.start_minute))
            })
            .collect()
    }
}

impl Default for TrafficSchedule {
    /// 00:00 Low, 07:30 High, 09:00 Medium, 18:00 High, 20:00 Low.
    fn default() -> Self {
        let rows = [
            (0, DayPeriod::Low),
            (450, DayPeriod::High),
            (540, DayPeriod::Medium),
            (1080, DayPeriod::High),
            (1200, DayPeriod::Low),
        ];
        TrafficSchedule {
            bands: rows
                .iter()
                .map(|&(start_minute, level)| Band {
                    start_minute,
                    level,
                })
                .collect(),
        }
    }
}

impl TryFrom<Vec<Band>> for TrafficSchedule {
    type Error = Error;

    fn try_from(bands: Vec<Band>) -> Result<Self> {
        Self::new(bands)
    }
}

impl From<TrafficSchedule> for Vec<Band> {
    fn from(s: TrafficSchedule) -> Self {
        s.bands
    }
}

pub fn day_steps(steps_per_hour: u64) -> u64 {
    24 * steps_per_hour
}
