//! Comma-separated result tables and the run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment::{ResultRow, ResultTable};
use crate::metrics::Average;

pub const MANIFEST_FILE: &str = "manifest.toml";

const METRIC_COLUMNS: &[&str] = &[
    "reliability",
    "reliability_se",
    "delay",
    "delay_se",
    "hops",
    "hops_se",
    "ase",
    "ase_se",
    "request_reliability",
    "ack_reliability",
    "delivery_reliability",
    "topologies",
    "conditional_topologies",
    "trials_per_topology",
    "lambda",
    "relay_density",
    "contention_density",
];

/// `results.csv`, or `sweep_<vars>.csv` when variables are swept.
pub fn table_file_name(sweep_variables: &[String]) -> String {
    if sweep_variables.is_empty() {
        "results.csv".to_string()
    } else {
        format!("sweep_{}.csv", sweep_variables.join("_"))
    }
}

pub fn header(sweep_variables: &[String]) -> String {
    let mut cols: Vec<&str> = sweep_variables.iter().map(String::as_str).collect();
    cols.push("protocol");
    cols.extend_from_slice(METRIC_COLUMNS);
    cols.join(",")
}

// Rust's float Display is the shortest text that parses back to the same value.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn mean_se(a: &Average) -> [String; 2] {
    [num(a.mean), num(a.std_error)]
}

pub fn format_row(row: &ResultRow) -> String {
    let r = &row.report;
    let mut fields: Vec<String> = row.sweep.iter().map(|&v| num(v)).collect();
    fields.push(row.protocol.to_string());
    fields.extend(mean_se(&r.reliability));
    fields.extend(mean_se(&r.delay));
    fields.extend(mean_se(&r.hops));
    fields.extend(mean_se(&r.ase));
    fields.push(num(r.request_reliability.mean));
    fields.push(num(r.ack_reliability.mean));
    fields.push(num(r.delivery_reliability.mean));
    fields.push(r.topologies.to_string());
    fields.push(r.delay.count.to_string());
    fields.push(row.trials_per_topology.to_string());
    fields.push(num(row.lambda));
    fields.push(num(row.relay_density));
    fields.push(num(row.contention_density));
    fields.join(",")
}

/// Writes the table incrementally, flushing after each row.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(dir: &Path, sweep_variables: &[String]) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(table_file_name(sweep_variables));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = CsvWriter {
            path,
            out: BufWriter::new(file),
        };
        w.line(&header(sweep_variables))?;
        Ok(w)
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.out, "{text}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn write_row(&mut self, row: &ResultRow) -> Result<()> {
        self.line(&format_row(row))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Resolved config as TOML, preceded by a timestamp comment. Parsing the
/// file back yields the same config.
pub fn manifest_text(config: &ExperimentConfig) -> Result<String> {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(format!("# generated at unix time {stamp}\n{}", config.to_toml_string()?))
}

pub fn write_manifest(config: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest_text(config)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the table and the manifest into `dir`; returns the table path.
pub fn emit_results(table: &ResultTable, config: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    write_manifest(config, dir)?;
    let mut w = CsvWriter::create(dir, &table.sweep_variables)?;
    for row in &table.rows {
        w.write_row(row)?;
    }
    Ok(w.path().to_path_buf())
}
