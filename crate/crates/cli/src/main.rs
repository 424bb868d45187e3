use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;

use manet_core::config::ExperimentConfig;
use manet_core::engine::topology_for;
use manet_core::experiment::{resolve_workers, run_experiment_with, WORKERS_ENV};
use manet_core::protocols::Protocol;
use manet_core::report::{write_manifest, CsvWriter};

/// Monte-Carlo simulator of routing in finite mobile ad hoc networks.
///
/// Flags override values read from the config file.
#[derive(Debug, Parser)]
#[command(name = "manet-sim", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Protocols to run, e.g. `aodv,gf:0.4,mp`.
    #[arg(long, value_delimiter = ',')]
    protocol: Option<Vec<Protocol>>,

    /// Sweep a variable over a list, e.g. `dest_distance=0.1,0.2,0.3`. Repeatable.
    #[arg(long, value_name = "VAR=LIST")]
    sweep: Vec<String>,

    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Number of topologies per sweep point.
    #[arg(long)]
    topologies: Option<u32>,

    /// Role markings, slot-set draws and trials per inner layer.
    #[arg(long)]
    trials_per_layer: Option<u32>,

    /// Worker threads.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,

    /// Write the first generated topology to this file and exit.
    #[arg(long, value_name = "FILE")]
    export_topology: Option<PathBuf>,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &cli.protocol {
        config.protocols = p.clone();
    }
    for spec in &cli.sweep {
        config.add_sweep_spec(spec)?;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if let Some(n) = cli.topologies {
        config.topologies = n;
    }
    if let Some(k) = cli.trials_per_layer {
        config.role_markings = k;
        config.slot_set_draws = k;
        config.trials = k;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = resolve(&cli)?;

    if let Some(path) = &cli.export_topology {
        let t = topology_for(&config.scenario()?, config.seed, 0)?;
        std::fs::write(path, t.to_table()).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
        return Ok(());
    }

    let workers = resolve_workers(cli.workers)?;
    write_manifest(&config, &config.out)?;
    let mut writer = CsvWriter::create(&config.out, &config.sweep_variables())?;
    let points = config.sweep_points().len();
    let per_point = config.protocols.len();
    eprintln!(
        "{points} sweep point(s), {} protocol(s), {} topologies x {} trials, {workers} worker(s)",
        per_point,
        config.topologies,
        u64::from(config.role_markings) * u64::from(config.slot_set_draws) * u64::from(config.trials),
    );

    let start = Instant::now();
    let mut rows = 0usize;
    run_experiment_with(&config, Some(workers), |row| {
        writer.write_row(row)?;
        rows += 1;
        if rows % per_point == 0 {
            eprintln!("point {}/{points} done ({:.1}s)", rows / per_point, start.elapsed().as_secs_f64());
        }
        Ok(())
    })?;
    eprintln!("results in {}", writer.path().display());
    Ok(())
}
