//! Sweep orchestration: one simulation per sweep point, topologies spread
//! over a worker pool, results merged in topology order.

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::engine::{simulate_topology, Observer, Scenario};
use crate::error::{Error, Result};
use crate::metrics::{densities, topological_averages, transmitter_density, AveragedReport, TopologyMetrics, TrialTally};
use crate::protocols::Protocol;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "MANET_WORKERS";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// Values of the sweep variables, in [`ResultTable::sweep_variables`] order.
    pub sweep: Vec<f64>,
    pub protocol: Protocol,
    pub report: AveragedReport,
    pub lambda: f64,
    pub relay_density: f64,
    pub contention_density: f64,
    pub trials_per_topology: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub sweep_variables: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn row(&self, protocol: Protocol, sweep: &[f64]) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.protocol == protocol && r.sweep == sweep)
    }
}

/// Worker count: explicit request, then `MANET_WORKERS`, then rayon's default.
pub fn resolve_workers(requested: Option<usize>) -> Result<usize> {
    if let Some(n) = requested {
        return if n == 0 {
            Err(Error::config("workers", "must be at least 1"))
        } else {
            Ok(n)
        };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::config(WORKERS_ENV, format!("expected a positive integer, got `{v}`"))),
        Err(_) => Ok(rayon::current_num_threads().max(1)),
    }
}

/// Per-topology metrics of every protocol for one scenario, in topology order.
pub fn simulate_scenario(
    scenario: &Scenario,
    topologies: u32,
    seed: u64,
    pool: &rayon::ThreadPool,
) -> Result<Vec<Vec<TrialTally>>> {
    pool.install(|| {
        (0..topologies as u64)
            .into_par_iter()
            .map(|t| simulate_topology(scenario, seed, t, None))
            .collect()
    })
}

/// Sequential variant that lets `observer` inspect every trial.
pub fn simulate_scenario_observed(
    scenario: &Scenario,
    topologies: u32,
    seed: u64,
    observer: &mut Observer<'_>,
) -> Result<Vec<Vec<TrialTally>>> {
    (0..topologies as u64)
        .map(|t| simulate_topology(scenario, seed, t, Some(&mut *observer)))
        .collect()
}

fn summarize(
    point: &ExperimentConfig,
    scenario: &Scenario,
    sweep: Vec<f64>,
    per_topology: &[Vec<TrialTally>],
) -> Result<Vec<ResultRow>> {
    let lambda = transmitter_density(point.mobiles, point.r_net);
    let (relay_density, contention_density) = densities(lambda, point.mu, point.p)?;
    scenario
        .protocols
        .iter()
        .enumerate()
        .map(|(q, proto)| {
            let metrics = per_topology
                .iter()
                .map(|tallies| tallies[q].finish(lambda))
                .collect::<Result<Vec<TopologyMetrics>>>()?;
            Ok(ResultRow {
                sweep: sweep.clone(),
                protocol: proto.protocol,
                report: topological_averages(&metrics)?,
                lambda,
                relay_density,
                contention_density,
                trials_per_topology: scenario.trials_per_topology(),
            })
        })
        .collect()
}

/// Runs every sweep point. `on_row` sees each row as soon as its point
/// finishes, so callers can flush partial results.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    workers: Option<usize>,
    mut on_row: impl FnMut(&ResultRow) -> Result<()>,
) -> Result<ResultTable> {
    config.validate()?;
    let workers = resolve_workers(workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;

    let mut rows = Vec::new();
    for point_vars in config.sweep_points() {
        let mut point = config.clone();
        for (name, v) in &point_vars {
            point.set_variable(name, *v)?;
        }
        let scenario = point.scenario()?;
        let per_topology = simulate_scenario(&scenario, point.topologies, point.seed, &pool)?;
        let sweep: Vec<f64> = point_vars.iter().map(|(_, v)| *v).collect();
        for row in summarize(&point, &scenario, sweep, &per_topology)? {
            on_row(&row)?;
            rows.push(row);
        }
    }
    Ok(ResultTable {
        sweep_variables: config.sweep_variables(),
        rows,
    })
}

pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ResultTable> {
    run_experiment_with(config, workers, |_| Ok(()))
}
