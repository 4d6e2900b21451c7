use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schedule::{day_steps, TrafficSchedule};
use crate::agents::DayPeriod;
use crate::error::{Error, Result};
use crate::network::{JunctionId, RoadNetwork, Route, Side};
use crate::sim::VehicleId;

pub const DEMAND_CSV_HEADER: &str = "vehicle_id,depart_step,origin,dest,route";

/// Vehicles inserted per insertion event, by traffic level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelCounts {
    pub low: u32,
    pub medium: u32,
    pub high: u32,
}

impl LevelCounts {
    pub fn get(&self, level: DayPeriod) -> u32 {
        match level {
            DayPeriod::Low => self.low,
            DayPeriod::Medium => self.medium,
            DayPeriod::High => self.high,
        }
    }
}

impl Default for LevelCounts {
    fn default() -> Self {
        LevelCounts {
            low: 5,
            medium: 15,
            high: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSpec {
    /// Steps between insertion events.
    pub insertion_interval: u64,
    pub counts: LevelCounts,
    /// Share of Medium-level vehicles sent across the grid west↔east.
    pub medium_bias: f64,
    pub schedule: TrafficSchedule,
    pub steps_per_hour: u64,
    pub days: u64,
    pub seed: u64,
}

impl DemandSpec {
    pub fn validate(&self) -> Result<()> {
        if self.insertion_interval == 0 {
            return Err(Error::Config("insertion interval must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.medium_bias) {
            return Err(Error::Config(format!(
                "medium_bias must lie in [0, 1], got {}",
                self.medium_bias
            )));
        }
        if self.steps_per_hour == 0 || self.days == 0 {
            return Err(Error::Config(
                "steps_per_hour and days must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn horizon(&self) -> u64 {
        self.days * day_steps(self.steps_per_hour)
    }

    /// Insertion steps within the horizon, with their level.
    pub fn insertion_events(&self) -> impl Iterator<Item = (u64, DayPeriod)> + '_ {
        (0..self.horizon())
            .step_by(self.insertion_interval as usize)
            .map(|t| (t, self.schedule.level_at(t, self.steps_per_hour)))
    }
}

/// One scheduled trip. `route` holds link names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandEntry {
    pub vehicle_id: VehicleId,
    pub depart_step: u64,
    pub origin: String,
    pub dest: String,
    pub route: Vec<String>,
}

impl DemandEntry {
    pub fn resolve(&self, net: &RoadNetwork) -> Result<Route> {
        let links = self
            .route
            .iter()
            .map(|name| net.link_by_name(name))
            .collect::<Result<Vec<_>>>()?;
        Route::new(net, links)
    }
}

/// Seeded trips for the whole horizon. Random draws use stream 0 of the seed.
pub fn generate_demand(spec: &DemandSpec, net: &RoadNetwork) -> Result<Vec<DemandEntry>> {
    spec.validate()?;
    let boundary: Vec<JunctionId> = net.boundary().map(|j| j.id).collect();
    if boundary.len() < 2 || net.links().iter().any(|l| l.capacity == 0) {
        return Err(Error::Generation(
            "network cannot carry traffic between boundary points".into(),
        ));
    }
    let side = |s: Side| -> Vec<JunctionId> {
        net.boundary()
            .filter(|j| j.boundary == Some(s))
            .map(|j| j.id)
            .collect()
    };
    let (west, east) = (side(Side::West), side(Side::East));

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(0);
    let mut routes: HashMap<(JunctionId, JunctionId), Vec<String>> = HashMap::new();
    let mut out = Vec::new();
    for (step, level) in spec.insertion_events() {
        for _ in 0..spec.counts.get(level) {
            let horizontal = level == DayPeriod::Medium && rng.gen_bool(spec.medium_bias);
            let (origin, dest) = if horizontal {
                if west.is_empty() || east.is_empty() {
                    return Err(Error::Generation(
                        "no west/east boundary for horizontal flows".into(),
                    ));
                }
                let (from, to) = if rng.gen_bool(0.5) {
                    (&west, &east)
                } else {
                    (&east, &west)
                };
                (
                    *from.choose(&mut rng).expect("non-empty"),
                    *to.choose(&mut rng).expect("non-empty"),
                )
            } else {
                let o = boundary[rng.gen_range(0..boundary.len())];
                let mut d = boundary[rng.gen_range(0..boundary.len() - 1)];
                if d == o {
                    d = boundary[boundary.len() - 1];
                }
                (o, d)
            };
            let route = match routes.get(&(origin, dest)) {
                Some(r) => r.clone(),
                None => {
                    let r: Vec<String> = net
                        .shortest_route(origin, dest)?
                        .links()
                        .iter()
                        .map(|&l| net.links()[l.0].name.clone())
                        .collect();
                    routes.insert((origin, dest), r.clone());
                    r
                }
            };
            out.push(DemandEntry {
                vehicle_id: out.len() as VehicleId,
                depart_step: step,
                origin: net.junctions()[origin.0].name.clone(),
                dest: net.junctions()[dest.0].name.clone(),
                route,
            });
        }
    }
    Ok(out)
}

pub fn demand_csv(entries: &[DemandEntry]) -> String {
    let mut s = String::from(DEMAND_CSV_HEADER);
    s.push('\n');
    for e in entries {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            e.vehicle_id,
            e.depart_step,
            e.origin,
            e.dest,
            e.route.join(";")
        );
    }
    s
}

pub fn parse_demand(text: &str) -> Result<Vec<DemandEntry>> {
    let mut lines = text.lines();
    if lines.next() != Some(DEMAND_CSV_HEADER) {
        return Err(Error::Format(format!(
            "demand file must start with {DEMAND_CSV_HEADER:?}"
        )));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = || Error::Format(format!("demand line {}: {line:?}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 || f[4].is_empty() {
                return Err(bad());
            }
            Ok(DemandEntry {
                vehicle_id: f[0].parse().map_err(|_| bad())?,
                depart_step: f[1].parse().map_err(|_| bad())?,
                origin: f[2].to_string(),
                dest: f[3].to_string(),
                route: f[4].split(';').map(str::to_string).collect(),
            })
        })
        .collect()
}

pub fn write_demand(entries: &[DemandEntry], path: &Path) -> Result<()> {
    fs::write(path, demand_csv(entries))?;
    Ok(())
}

pub fn read_demand(path: &Path) -> Result<Vec<DemandEntry>> {
    parse_demand(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_grid;

    fn spec(interval: u64, counts: LevelCounts) -> DemandSpec {
        DemandSpec {
            insertion_interval: interval,
            counts,
            medium_bias: 0.7,
            schedule: TrafficSchedule::default(),
            steps_per_hour: 200,
            days: 1,
            seed: 11,
        }
    }

    #[test]
    fn closed_form_count() {
        let net = build_grid(3, 3, 200.0, 20, 1).unwrap();
        let counts = LevelCounts {
            low: 1,
            medium: 2,
            high: 3,
        };
        let entries = generate_demand(&spec(100, counts), &net).unwrap();
        // Band starts at 200 steps/hour: 0, 1500, 1800, 3600, 4000; events at multiples of 100.
        let events = |a: u64, b: u64| (a..b).filter(|t| t % 100 == 0).count();
        let expected = events(0, 1500)
            + 3 * events(1500, 1800)
            + 2 * events(1800, 3600)
            + 3 * events(3600, 4000)
            + events(4000, 4800);
        assert_eq!(entries.len(), expected);
        assert_eq!(expected, 15 + 3 * 3 + 2 * 18 + 3 * 4 + 8);
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let net = build_grid(3, 3, 200.0, 20, 1).unwrap();
        let s = spec(70, LevelCounts::default());
        let a = demand_csv(&generate_demand(&s, &net).unwrap());
        let b = demand_csv(&generate_demand(&s, &net).unwrap());
        assert_eq!(a, b);
        let parsed = parse_demand(&a).unwrap();
        assert_eq!(demand_csv(&parsed), a);
        for e in &parsed {
            let route = e.resolve(&net).unwrap();
            assert_eq!(
                net.links()[route.links()[0].0].from,
                net.junction_by_name(&e.origin).unwrap()
            );
            assert_ne!(e.origin, e.dest);
        }
    }

    #[test]
    fn zero_counts_give_an_empty_body() {
        let net = build_grid(2, 2, 200.0, 20, 1).unwrap();
        let entries = generate_demand(
            &spec(
                50,
                LevelCounts {
                    low: 0,
                    medium: 0,
                    high: 0,
                },
            ),
            &net,
        )
        .unwrap();
        assert_eq!(demand_csv(&entries), format!("{DEMAND_CSV_HEADER}\n"));
    }

    #[test]
    fn medium_bias_one_is_all_horizontal() {
        let net = build_grid(3, 3, 200.0, 20, 1).unwrap();
        let mut s = spec(
            100,
            LevelCounts {
                low: 0,
                medium: 4,
                high: 0,
            },
        );
        s.medium_bias = 1.0;
        let entries = generate_demand(&s, &net).unwrap();
        assert!(!entries.is_empty());
        for e in entries {
            let horizontal = |n: &str| n.starts_with("W_") || n.starts_with("E_");
            assert!(horizontal(&e.origin) && horizontal(&e.dest));
            assert_ne!(e.origin[..1], e.dest[..1]);
        }
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(parse_demand("nope\n").is_err());
        assert!(parse_demand(&format!("{DEMAND_CSV_HEADER}\n1,2,3\n")).is_err());
        assert!(parse_demand(&format!("{DEMAND_CSV_HEADER}\nx,0,a,b,c\n")).is_err());
    }
}
