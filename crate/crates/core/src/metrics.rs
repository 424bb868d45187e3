//! Per-topology and topology-averaged performance measures.

use crate::error::{Error, Result};
use crate::protocols::{ProtocolConfig, TrialOutcome};

/// Delay of a link that needed `attempts` transmissions.
pub fn link_delay(attempts: u32, t: f64, t_e: f64) -> Result<f64> {
    if attempts < 1 {
        return Err(Error::Domain("a delivered link needs at least one attempt".into()));
    }
    let n = attempts as f64;
    Ok(n * t + (n - 1.0) * t_e)
}

/// Sum of the link delays along a path.
pub fn path_delay(attempts: &[u32], t: f64, t_e: f64) -> Result<f64> {
    if attempts.is_empty() {
        return Err(Error::Domain("path delay of an empty path".into()));
    }
    attempts.iter().try_fold(0.0, |acc, &n| Ok(acc + link_delay(n, t, t_e)?))
}

/// Relay density and contention density.
pub fn densities(lambda: f64, mu: f64, p: f64) -> Result<(f64, f64)> {
    for (name, v) in [("mu", mu), ("p", p)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Argument(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    Ok((lambda * mu, lambda * p * (1.0 - mu)))
}

/// Density of potential transmitters, `(M + 1) / (pi r_net^2)`.
pub fn transmitter_density(mobiles: usize, r_net: f64) -> f64 {
    (mobiles + 1) as f64 / (std::f64::consts::PI * r_net * r_net)
}

/// Routing phase a failure is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Request,
    Acknowledgement,
    Delivery,
}

/// Streaming accumulator over the trials of one topology.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialTally {
    pub trials: u64,
    pub failures: u64,
    pub request_failures: u64,
    pub ack_failures: u64,
    pub delivery_failures: u64,
    pub hops_sum: u64,
    /// Sum over successes of `T_s + 2 c h T_d`.
    pub total_delay_sum: f64,
    pub inverse_delay_sum: f64,
    pub min_total_delay: Option<f64>,
}

impl TrialTally {
    pub fn record(&mut self, outcome: &TrialOutcome, protocol: &ProtocolConfig) {
        self.trials += 1;
        if outcome.success {
            let total = protocol.total_delay(outcome.path_delay, outcome.hops);
            self.hops_sum += outcome.hops as u64;
            self.total_delay_sum += total;
            self.inverse_delay_sum += 1.0 / total;
            self.min_total_delay = Some(self.min_total_delay.map_or(total, |m| m.min(total)));
        } else {
            self.failures += 1;
            match outcome.failure.map(|s| protocol.phase_of(s)) {
                Some(Phase::Request) => self.request_failures += 1,
                Some(Phase::Acknowledgement) => self.ack_failures += 1,
                Some(Phase::Delivery) | None => self.delivery_failures += 1,
            }
        }
    }

    pub fn successes(&self) -> u64 {
        self.trials - self.failures
    }

    pub fn finish(&self, lambda: f64) -> Result<TopologyMetrics> {
        if self.trials == 0 {
            return Err(Error::Argument("metrics need at least one trial".into()));
        }
        let k = self.trials as f64;
        let ok = self.successes();
        let conditional = |v: f64| (ok > 0).then(|| v / ok as f64);
        let stage = |failed: u64, reached: u64| (reached > 0).then(|| 1.0 - failed as f64 / reached as f64);
        let after_request = self.trials - self.request_failures;
        let after_ack = after_request - self.ack_failures;
        Ok(TopologyMetrics {
            reliability: 1.0 - self.failures as f64 / k,
            hops: conditional(self.hops_sum as f64),
            delay: conditional(self.total_delay_sum),
            ase: lambda / k * self.inverse_delay_sum,
            failures: self.failures,
            trials: self.trials,
            request_reliability: stage(self.request_failures, self.trials),
            ack_reliability: stage(self.ack_failures, after_request),
            delivery_reliability: stage(self.delivery_failures, after_ack),
            min_total_delay: self.min_total_delay,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyMetrics {
    pub reliability: f64,
    /// Average hop count over successful trials; `None` when none succeeded.
    pub hops: Option<f64>,
    /// Average conditional delay including discovery; `None` when none succeeded.
    pub delay: Option<f64>,
    /// Normalized area spectral efficiency.
    pub ase: f64,
    pub failures: u64,
    pub trials: u64,
    pub request_reliability: Option<f64>,
    /// Conditioned on the request phase succeeding.
    pub ack_reliability: Option<f64>,
    /// Conditioned on both discovery phases succeeding.
    pub delivery_reliability: Option<f64>,
    pub min_total_delay: Option<f64>,
}

pub fn topology_metrics(trials: &[TrialOutcome], protocol: &ProtocolConfig, lambda: f64) -> Result<TopologyMetrics> {
    let mut tally = TrialTally::default();
    for t in trials {
        tally.record(t, protocol);
    }
    tally.finish(lambda)
}

/// Mean and standard error of one averaged quantity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Average {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

impl Average {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.collect();
        let count = v.len();
        if count == 0 {
            return Average { mean: f64::NAN, std_error: f64::NAN, count };
        }
        let mean = v.iter().sum::<f64>() / count as f64;
        let std_error = if count > 1 {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            0.0
        };
        Average { mean, std_error, count }
    }
}

/// Unweighted averages over topologies. Topologies where every trial failed
/// are left out of the conditional quantities only.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedReport {
    pub topologies: usize,
    pub reliability: Average,
    pub delay: Average,
    pub hops: Average,
    pub ase: Average,
    pub request_reliability: Average,
    pub ack_reliability: Average,
    pub delivery_reliability: Average,
}

pub fn topological_averages(per_topology: &[TopologyMetrics]) -> Result<AveragedReport> {
    if per_topology.is_empty() {
        return Err(Error::Argument("no topologies to average".into()));
    }
    let pt = per_topology;
    Ok(AveragedReport {
        topologies: pt.len(),
        reliability: Average::of(pt.iter().map(|m| m.reliability)),
        delay: Average::of(pt.iter().filter_map(|m| m.delay)),
        hops: Average::of(pt.iter().filter_map(|m| m.hops)),
        ase: Average::of(pt.iter().map(|m| m.ase)),
        request_reliability: Average::of(pt.iter().filter_map(|m| m.request_reliability)),
        ack_reliability: Average::of(pt.iter().filter_map(|m| m.ack_reliability)),
        delivery_reliability: Average::of(pt.iter().filter_map(|m| m.delivery_reliability)),
    })
}
