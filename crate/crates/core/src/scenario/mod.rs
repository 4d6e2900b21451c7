//! Experiment definition: daily schedule, seeded demand, configuration and
//! run orchestration.

mod config;
mod demand;
mod experiment;
mod schedule;

pub use config::{DemandSection, EngineSection, ExperimentConfig, PlanVariant, SignalSection};
pub use demand::{
    demand_csv, generate_demand, parse_demand, read_demand, write_demand, DemandEntry, DemandSpec,
    LevelCounts, DEMAND_CSV_HEADER,
};
pub use experiment::{
    build_engine, demand_file_name, demand_for, run_dir_name, run_experiment, run_labels,
    run_matrix, Experiment, RunOutput,
};
pub use schedule::{day_steps, Band, TrafficSchedule, MINUTES_PER_DAY};
