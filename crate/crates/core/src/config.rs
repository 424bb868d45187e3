//! Experiment configuration: key-value (TOML) text with every field
//! optional, plus sweep lists.
//!
//! ```toml
//! dest_distance = 0.5
//! protocols = ["aodv", "gf:0.4", "mp"]
//! seed = 7
//!
//! [sweep]
//! g_over_h = [1, 8, 32, 96]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{db_to_linear, ChannelParams};
use crate::engine::Scenario;
use crate::error::{Error, Result};
use crate::protocols::{Protocol, ProtocolConfig};
use crate::topology::Topology;

/// Variables that may appear in `[sweep]` or `--sweep`.
pub const SWEEPABLE: &[&str] = &[
    "mobiles",
    "r_net",
    "r_ex",
    "dest_distance",
    "alpha",
    "sigma_s_db",
    "r_f",
    "g_over_h",
    "gamma_db",
    "beta_db",
    "mu",
    "p",
    "max_attempts",
    "r_g",
    "t",
    "t_e",
    "t_d",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Mobiles besides source and destination.
    pub mobiles: usize,
    pub r_net: f64,
    pub r_ex: f64,
    pub dest_distance: f64,

    pub alpha: f64,
    pub sigma_s_db: f64,
    pub r_f: f64,
    pub g_over_h: f64,
    pub gamma_db: f64,
    pub beta_db: f64,

    pub mu: f64,
    pub p: f64,

    /// Transmission attempts per link during message delivery (B).
    pub max_attempts: u32,
    pub r_g: f64,
    pub t: f64,
    pub t_e: f64,
    pub t_d: f64,
    pub max_hops: u32,

    pub topologies: u32,
    pub role_markings: u32,
    pub slot_set_draws: u32,
    pub trials: u32,

    pub protocols: Vec<Protocol>,
    #[serde(serialize_with = "ser_seed", deserialize_with = "de_seed")]
    pub seed: u64,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology_file: Option<PathBuf>,

    pub sweep: BTreeMap<String, Vec<f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mobiles: 200,
            r_net: 1.0,
            r_ex: 0.05,
            dest_distance: 0.5,
            alpha: 3.5,
            sigma_s_db: 8.0,
            r_f: 0.2,
            g_over_h: 96.0,
            gamma_db: 0.0,
            beta_db: 0.0,
            mu: 0.4,
            p: 0.3,
            max_attempts: 4,
            r_g: 0.15,
            t: 1.0,
            t_e: 1.2,
            t_d: 0.1,
            max_hops: 30,
            topologies: 200,
            role_markings: 10,
            slot_set_draws: 10,
            trials: 10,
            protocols: vec![
                Protocol::Aodv,
                Protocol::Greedy { r_t: 0.3 },
                Protocol::Greedy { r_t: 0.4 },
                Protocol::MaxProgress,
            ],
            seed: 1,
            out: PathBuf::from("results"),
            topology_file: None,
            sweep: BTreeMap::new(),
        }
    }
}

impl Serialize for Protocol {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Protocol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// TOML integers are signed 64-bit; larger seeds travel as strings.
fn ser_seed<S: Serializer>(seed: &u64, s: S) -> std::result::Result<S::Ok, S::Error> {
    match i64::try_from(*seed) {
        Ok(v) => s.serialize_i64(v),
        Err(_) => s.collect_str(seed),
    }
}

fn de_seed<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Int(v) => u64::try_from(v).map_err(|_| serde::de::Error::custom("seed must be non-negative")),
        Raw::Text(s) => s.trim().parse().map_err(serde::de::Error::custom),
    }
}

fn in_unit(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(field, format!("must lie in [0, 1], got {v}")))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be >= 0, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Checks the base values and every sweep value.
    pub fn validate(&self) -> Result<()> {
        self.validate_point()?;
        if self.protocols.is_empty() {
            return Err(Error::config("protocols", "at least one protocol is required"));
        }
        for n in [
            ("topologies", self.topologies),
            ("role_markings", self.role_markings),
            ("slot_set_draws", self.slot_set_draws),
            ("trials", self.trials),
            ("max_hops", self.max_hops),
        ] {
            if n.1 == 0 {
                return Err(Error::config(n.0, "must be at least 1"));
            }
        }
        for (name, values) in &self.sweep {
            if values.is_empty() {
                return Err(Error::config(format!("sweep.{name}"), "sweep list is empty"));
            }
            for &v in values {
                let mut point = self.clone();
                point.set_variable(name, v)?;
                point
                    .validate_point()
                    .map_err(|e| Error::config(format!("sweep.{name}"), format!("value {v}: {e}")))?;
            }
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<()> {
        positive("r_net", self.r_net)?;
        non_negative("r_ex", self.r_ex)?;
        if self.r_ex >= self.r_net {
            return Err(Error::config("r_ex", "must be smaller than r_net"));
        }
        positive("dest_distance", self.dest_distance)?;
        if self.dest_distance > self.r_net {
            return Err(Error::config("dest_distance", "must not exceed r_net"));
        }
        if !(self.alpha >= 2.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", format!("must be >= 2, got {}", self.alpha)));
        }
        non_negative("sigma_s_db", self.sigma_s_db)?;
        non_negative("r_f", self.r_f)?;
        if !(self.g_over_h >= 1.0 && self.g_over_h.is_finite()) {
            return Err(Error::config("g_over_h", format!("must be >= 1, got {}", self.g_over_h)));
        }
        if !self.gamma_db.is_finite() {
            return Err(Error::config("gamma_db", "must be finite"));
        }
        if !self.beta_db.is_finite() {
            return Err(Error::config("beta_db", "must be finite"));
        }
        in_unit("mu", self.mu)?;
        in_unit("p", self.p)?;
        if self.max_attempts == 0 {
            return Err(Error::config("max_attempts", "must be at least 1"));
        }
        non_negative("r_g", self.r_g)?;
        positive("t", self.t)?;
        non_negative("t_e", self.t_e)?;
        non_negative("t_d", self.t_d)?;
        Ok(())
    }

    /// Sets one sweepable variable by name.
    pub fn set_variable(&mut self, name: &str, v: f64) -> Result<()> {
        let integer = |field: &str| -> Result<u64> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(Error::config(field, format!("expected a non-negative integer, got {v}")))
            }
        };
        match name {
            "mobiles" => self.mobiles = integer(name)? as usize,
            "r_net" => self.r_net = v,
            "r_ex" => self.r_ex = v,
            "dest_distance" => self.dest_distance = v,
            "alpha" => self.alpha = v,
            "sigma_s_db" => self.sigma_s_db = v,
            "r_f" => self.r_f = v,
            "g_over_h" => self.g_over_h = v,
            "gamma_db" => self.gamma_db = v,
            "beta_db" => self.beta_db = v,
            "mu" => self.mu = v,
            "p" => self.p = v,
            "max_attempts" => self.max_attempts = integer(name)? as u32,
            "r_g" => self.r_g = v,
            "t" => self.t = v,
            "t_e" => self.t_e = v,
            "t_d" => self.t_d = v,
            _ => {
                return Err(Error::config(
                    format!("sweep.{name}"),
                    format!("not a sweepable variable (one of {})", SWEEPABLE.join(", ")),
                ))
            }
        }
        Ok(())
    }

    /// Parses `var=v1,v2,...` and adds it to the sweep.
    pub fn add_sweep_spec(&mut self, spec: &str) -> Result<()> {
        let (name, list) = spec
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("sweep `{spec}` is not of the form var=v1,v2,...")))?;
        let name = name.trim();
        let values = list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("sweep.{name}"), format!("bad value `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        self.sweep.insert(name.to_string(), values);
        Ok(())
    }

    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            alpha: self.alpha,
            sigma_s_db: self.sigma_s_db,
            r_f: self.r_f,
            g_over_h: self.g_over_h,
            gamma: db_to_linear(self.gamma_db),
            beta: db_to_linear(self.beta_db),
        }
    }

    pub fn protocol_configs(&self) -> Vec<ProtocolConfig> {
        self.protocols
            .iter()
            .map(|&protocol| ProtocolConfig {
                protocol,
                max_attempts: self.max_attempts,
                r_g: self.r_g,
                t: self.t,
                t_e: self.t_e,
                t_d: self.t_d,
            })
            .collect()
    }

    /// Simulation inputs for this (already swept) point.
    pub fn scenario(&self) -> Result<Scenario> {
        let fixed_topology = match &self.topology_file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Some(Topology::from_table(&text)?)
            }
            None => None,
        };
        let scenario = Scenario {
            mobiles: self.mobiles,
            r_net: self.r_net,
            r_ex: self.r_ex,
            dest_distance: self.dest_distance,
            channel: self.channel_params(),
            mu: self.mu,
            p: self.p,
            max_hops: self.max_hops,
            role_markings: self.role_markings,
            slot_set_draws: self.slot_set_draws,
            trials: self.trials,
            protocols: self.protocol_configs(),
            fixed_topology,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Cartesian product of the sweep lists, first variable outermost. A
    /// config without sweeps yields one empty point.
    pub fn sweep_points(&self) -> Vec<Vec<(String, f64)>> {
        let mut points: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for (name, values) in &self.sweep {
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((name.clone(), v));
                        p
                    })
                })
                .collect();
        }
        points
    }

    pub fn sweep_variables(&self) -> Vec<String> {
        self.sweep.keys().cloned().collect()
    }
}
