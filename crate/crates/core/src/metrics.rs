//! Travel-time and queue-waiting metrics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VEHICLE_CSV_HEADER: &str =
    "vehicle_id,depart_step,arrive_step,travel_time,waiting_steps,stop_count,avg_wait_per_stop";
pub const AGGREGATE_CSV_HEADER: &str =
    "plan,interval,seed,vehicles,unfinished,mean_travel,std_travel,mean_wait,std_wait";

/// Outcome of one completed trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub vehicle_id: u64,
    pub depart_step: u64,
    pub arrive_step: u64,
    pub travel_time: u64,
    pub waiting_steps: u64,
    pub stop_count: u64,
    pub avg_wait_per_stop: f64,
}

impl VehicleRecord {
    pub fn new(
        vehicle_id: u64,
        depart_step: u64,
        arrive_step: u64,
        waiting_steps: u64,
        stop_count: u64,
    ) -> Self {
        VehicleRecord {
            vehicle_id,
            depart_step,
            arrive_step,
            travel_time: arrive_step - depart_step,
            waiting_steps,
            stop_count,
            avg_wait_per_stop: waiting_steps as f64 / stop_count.max(1) as f64,
        }
    }

    fn wait(&self, measure: WaitMeasure) -> f64 {
        match measure {
            WaitMeasure::Total => self.waiting_steps as f64,
            WaitMeasure::PerStop => self.avg_wait_per_stop,
        }
    }
}

/// Per-vehicle waiting quantity fed into the aggregate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaitMeasure {
    /// Total steps spent queued.
    #[default]
    Total,
    /// Queued steps divided by the number of stops.
    PerStop,
}

/// Run labels carried into the aggregate row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLabels {
    pub plan: String,
    pub interval: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub labels: RunLabels,
    pub vehicle_count: usize,
    pub unfinished: usize,
    pub mean_travel: f64,
    pub std_travel: f64,
    pub mean_wait: f64,
    pub std_wait: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates completed trips. Records are ordered by vehicle id first, so
/// the result does not depend on the input order.
pub fn aggregate(
    records: &[VehicleRecord],
    measure: WaitMeasure,
    labels: RunLabels,
    unfinished: usize,
) -> Result<RunAggregate> {
    if records.is_empty() {
        return Err(Error::Aggregation(
            "no completed vehicles to aggregate".into(),
        ));
    }
    let mut sorted: Vec<&VehicleRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.vehicle_id);
    let travel: Vec<f64> = sorted.iter().map(|r| r.travel_time as f64).collect();
    let wait: Vec<f64> = sorted.iter().map(|r| r.wait(measure)).collect();
    let (mean_travel, std_travel) = mean_std(&travel);
    let (mean_wait, std_wait) = mean_std(&wait);
    Ok(RunAggregate {
        labels,
        vehicle_count: records.len(),
        unfinished,
        mean_travel,
        std_travel,
        mean_wait,
        std_wait,
    })
}

/// Per-vehicle CSV, ordered by departure (then vehicle id).
pub fn vehicles_csv(records: &[VehicleRecord]) -> String {
    let mut sorted: Vec<&VehicleRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.depart_step, r.vehicle_id));
    let mut out = String::from(VEHICLE_CSV_HEADER);
    out.push('\n');
    for r in sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.vehicle_id,
            r.depart_step,
            r.arrive_step,
            r.travel_time,
            r.waiting_steps,
            r.stop_count,
            r.avg_wait_per_stop
        );
    }
    out
}

pub fn aggregate_row(a: &RunAggregate) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        a.labels.plan,
        a.labels.interval,
        a.labels.seed,
        a.vehicle_count,
        a.unfinished,
        a.mean_travel,
        a.std_travel,
        a.mean_wait,
        a.std_wait
    )
}

pub fn aggregates_csv<'a>(rows: impl IntoIterator<Item = &'a RunAggregate>) -> String {
    let mut out = String::from(AGGREGATE_CSV_HEADER);
    out.push('\n');
    for a in rows {
        out.push_str(&aggregate_row(a));
        out.push('\n');
    }
    out
}

/// Writes `vehicles.csv` and `aggregate.csv` into `dir`.
pub fn export_csv(records: &[VehicleRecord], aggregate: &RunAggregate, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("vehicles.csv"), vehicles_csv(records))?;
    fs::write(dir.join("aggregate.csv"), aggregates_csv([aggregate]))?;
    Ok(())
}

/// Parses an aggregate CSV written by [`aggregates_csv`].
pub fn read_aggregates(text: &str) -> Result<Vec<RunAggregate>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == AGGREGATE_CSV_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "unexpected aggregate header {:?}",
                other.unwrap_or("")
            )))
        }
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(Error::Format(format!("bad aggregate row {line:?}")));
            }
            let int = |s: &str| {
                s.parse::<u64>()
                    .map_err(|e| Error::Format(format!("{s:?}: {e}")))
            };
            let real = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Format(format!("{s:?}: {e}")))
            };
            Ok(RunAggregate {
                labels: RunLabels {
                    plan: f[0].to_string(),
                    interval: int(f[1])?,
                    seed: int(f[2])?,
                },
                vehicle_count: int(f[3])? as usize,
                unfinished: int(f[4])? as usize,
                mean_travel: real(f[5])?,
                std_travel: real(f[6])?,
                mean_wait: real(f[7])?,
                std_wait: real(f[8])?,
            })
        })
        .collect()
}
