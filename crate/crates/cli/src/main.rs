use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use tlc_core::control_api::{ControlCore, Server};
use tlc_core::metrics::{export_csv, read_aggregates, RunAggregate};
use tlc_core::scenario::{
    build_engine, demand_file_name, demand_for, run_experiment, run_matrix, write_demand,
    ExperimentConfig, PlanVariant,
};
use tlc_core::{Error, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "tlc",
    version,
    about = "Traffic-light control simulator and experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the network and write one demand file per configured interval.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment and write vehicles.csv and aggregate.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        plan: PlanVariant,
        /// Insertion interval in nominal steps (e.g. 7000).
        #[arg(long)]
        interval: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every plan × interval combination.
    Matrix {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Serve the control protocol until the controlling session closes.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        listen: String,
    },
    /// Print the aggregate table of a run or matrix directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            })
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gen { config, out } => gen(&ExperimentConfig::load(&config)?, &out),
        Command::Run {
            config,
            plan,
            interval,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.scaled_interval(interval)?;
            let demand = demand_for(&cfg, interval, seed)?;
            let output = run_experiment(&cfg, plan, interval, seed, &demand)?;
            fs::create_dir_all(&out)?;
            write_demand(&demand, &out.join("demand.csv"))?;
            export_csv(&output.records, &output.aggregate, &out)?;
            print_table(std::slice::from_ref(&output.aggregate));
            Ok(())
        }
        Command::Matrix { config, out, jobs } => {
            if jobs == 0 {
                return Err(Error::Config("--jobs must be at least 1".into()));
            }
            let rows = run_matrix(&ExperimentConfig::load(&config)?, &out, jobs)?;
            print_table(&rows);
            Ok(())
        }
        Command::Serve { config, listen } => serve(&ExperimentConfig::load(&config)?, &listen),
        Command::Report { input } => {
            let path = [
                input.join("matrix.csv"),
                input.join("aggregate.csv"),
                input.clone(),
            ]
            .into_iter()
            .find(|p| p.is_file())
            .ok_or_else(|| Error::Config(format!("no aggregate CSV in {}", input.display())))?;
            let rows = read_aggregates(&fs::read_to_string(&path)?)?;
            print_table(&rows);
            Ok(())
        }
    }
}

fn gen(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let net = cfg.build_network()?;
    fs::create_dir_all(out)?;
    println!(
        "network: {} junctions ({} signalized), {} links",
        net.junctions().len(),
        net.signalized().count(),
        net.links().len()
    );
    for &interval in &cfg.intervals {
        let demand = demand_for(cfg, interval, cfg.seed)?;
        let path = out.join(demand_file_name(interval));
        write_demand(&demand, &path)?;
        println!(
            "interval {interval} ({} steps): {} vehicles -> {}",
            cfg.scaled_interval(interval)?,
            demand.len(),
            path.display()
        );
    }
    Ok(())
}

/// Serves a fixed-plan engine loaded with the first configured interval's demand.
fn serve(cfg: &ExperimentConfig, listen: &str) -> Result<()> {
    let interval = cfg.intervals[0];
    let demand = demand_for(cfg, interval, cfg.seed)?;
    let engine = build_engine(cfg, PlanVariant::Fixed, &demand)?;
    let server = Server::bind(listen, ControlCore::shared(engine))
        .map_err(|e| Error::Config(format!("cannot listen on {listen}: {e}")))?;
    println!("listening on {}", server.local_addr()?);
    info!("{} vehicles scheduled", demand.len());
    server.run()
}

fn print_table(rows: &[RunAggregate]) {
    println!(
        "{:<10} {:>8} {:>6} {:>9} {:>10} {:>11} {:>10} {:>10} {:>10}",
        "plan",
        "interval",
        "seed",
        "vehicles",
        "unfinished",
        "mean_travel",
        "std_travel",
        "mean_wait",
        "std_wait"
    );
    for r in rows {
        println!(
            "{:<10} {:>8} {:>6} {:>9} {:>10} {:>11.2} {:>10.2} {:>10.2} {:>10.2}",
            r.labels.plan,
            r.labels.interval,
            r.labels.seed,
            r.vehicle_count,
            r.unfinished,
            r.mean_travel,
            r.std_travel,
            r.mean_wait,
            r.std_wait
        );
    }
}
