//! Files written for a run: JSON records, JSON-lines traces and CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symvqe::optimizer::records_to_jsonl;

use crate::error::Result;
use crate::experiment::{RunOutcome, RunRecord, SeriesRow};

pub const RECORD_FILE: &str = "record.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SERIES_FILE: &str = "series.csv";
pub const TRACE_DIR: &str = "traces";
pub const TABLE_FILE: &str = "table.csv";

pub fn run_dir_name(layers: usize) -> String {
    format!("layers_{layers:03}")
}

pub fn trace_file_name(restart: usize) -> String {
    format!("restart_{restart:03}.jsonl")
}

/// Shortest round-trip formatting; empty for NaN or missing values.
pub fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-restart final metrics. Deterministic for a fixed config: no timings.
pub fn summary_csv(record: &RunRecord) -> (Vec<String>, Vec<Vec<String>>) {
    let k = record.targets.len().max(record.restarts.iter().map(|r| r.final_energies.len()).max().unwrap_or(0));
    let mut header: Vec<String> =
        ["restart", "seed", "status", "reason", "iterations", "n_evaluations", "n_fallbacks", "final_cost"]
            .map(String::from)
            .to_vec();
    for prefix in ["energy", "fidelity", "energy_error", "energy_std"] {
        header.extend((1..=k).map(|i| format!("{prefix}_{i}")));
    }
    header.extend(["n_I", "C_R", "n_I_fidelity", "C_R_fidelity"].map(String::from));
    let rows = record
        .restarts
        .iter()
        .map(|r| {
            let status = match r.failure {
                Some(f) => serde_json::to_value(f).expect("serializable").as_str().unwrap_or("FAILED").to_string(),
                None => "OK".to_string(),
            };
            let reason = r
                .reason
                .map(|x| serde_json::to_value(x).expect("serializable").as_str().unwrap_or_default().to_string())
                .unwrap_or_default();
            let mut row = vec![
                r.restart.to_string(),
                r.seed.to_string(),
                status,
                reason,
                r.iterations.to_string(),
                r.n_evaluations.to_string(),
                r.n_fallbacks.to_string(),
                fmt_f(r.final_cost),
            ];
            let fid = r.fidelity.as_ref();
            row.extend((0..k).map(|i| r.final_energies.get(i).map_or(String::new(), |&e| fmt_f(e))));
            row.extend((0..k).map(|i| fid.and_then(|f| f.targets.get(i)).map_or(String::new(), |t| fmt_f(t.fidelity))));
            row.extend(
                (0..k).map(|i| fid.and_then(|f| f.targets.get(i)).map_or(String::new(), |t| fmt_f(t.energy_error))),
            );
            row.extend((0..k).map(|i| r.energy_std.get(i).map_or(String::new(), |&e| fmt_f(e))));
            row.extend([fmt_opt(r.n_i), fmt_opt(r.c_r), fmt_opt(r.n_i_fidelity), fmt_opt(r.c_r_fidelity)]);
            row
        })
        .collect();
    (header, rows)
}

pub fn series_csv(rows: &[SeriesRow]) -> (Vec<String>, Vec<Vec<String>>) {
    let k = rows.first().map_or(0, |r| r.energies.len());
    let has_fid = rows.first().is_some_and(|r| !r.fidelities.is_empty());
    let mut header: Vec<String> = ["n_I", "alive", "cost_mean", "cost_std"].map(String::from).to_vec();
    for i in 1..=k {
        header.push(format!("energy_{i}_mean"));
        header.push(format!("energy_{i}_std"));
    }
    if has_fid {
        for i in 1..=k {
            header.push(format!("fidelity_{i}_mean"));
            header.push(format!("fidelity_{i}_std"));
        }
    }
    let body = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.n_i.to_string(), r.alive.to_string(), fmt_f(r.cost.0), fmt_f(r.cost.1)];
            for (m, s) in r.energies.iter().chain(&r.fidelities) {
                row.push(fmt_f(*m));
                row.push(fmt_f(*s));
            }
            row
        })
        .collect();
    (header, body)
}

/// One row of the layer table: quantum and classical resources per layer count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub k: usize,
    pub layer: usize,
    pub cnot: usize,
    pub cnot_init: usize,
    #[serde(rename = "L")]
    pub n_params: usize,
    #[serde(rename = "n_I")]
    pub n_i: Option<usize>,
    #[serde(rename = "C_R")]
    pub c_r: Option<u64>,
    #[serde(rename = "n_I_fidelity")]
    pub n_i_fidelity: Option<usize>,
    #[serde(rename = "C_R_fidelity")]
    pub c_r_fidelity: Option<u64>,
    pub restarts: usize,
    pub failed: usize,
    pub reached_fidelity: usize,
    pub median_max_energy_error: Option<f64>,
    pub median_fidelity: Vec<f64>,
    pub mean_energy: Vec<f64>,
    pub meets_energy_threshold: bool,
}

impl TableRow {
    pub fn from_record(r: &RunRecord) -> Self {
        let s = &r.summary;
        let tol = r.thresholds.energy_error * r.model.energy_unit();
        TableRow {
            k: r.targets.len().max(s.mean_energy.len()),
            layer: r.layers,
            cnot: r.resources.cnot_body,
            cnot_init: r.resources.cnot_init,
            n_params: r.resources.n_params,
            n_i: s.median_n_i,
            c_r: s.median_c_r,
            n_i_fidelity: s.median_n_i_fidelity,
            c_r_fidelity: s.median_c_r_fidelity,
            restarts: s.restarts,
            failed: s.failed,
            reached_fidelity: s.reached_fidelity,
            median_max_energy_error: s.median_max_energy_error,
            median_fidelity: s.median_fidelity.clone(),
            mean_energy: s.mean_energy.clone(),
            meets_energy_threshold: s.median_max_energy_error.is_some_and(|e| e <= tol),
        }
    }
}

pub fn table_csv(rows: &[TableRow]) -> (Vec<String>, Vec<Vec<String>>) {
    let k = rows.iter().map(|r| r.median_fidelity.len().max(r.mean_energy.len())).max().unwrap_or(0);
    let mut header: Vec<String> = [
        "k",
        "Layer",
        "CNOT",
        "CNOT_init",
        "L",
        "n_I",
        "C_R",
        "n_I_fidelity",
        "C_R_fidelity",
        "restarts",
        "failed",
        "reached_fidelity",
        "median_max_energy_error",
        "meets_energy_threshold",
    ]
    .map(String::from)
    .to_vec();
    header.extend((1..=k).map(|i| format!("mean_energy_{i}")));
    header.extend((1..=k).map(|i| format!("median_fidelity_{i}")));
    let body = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.k.to_string(),
                r.layer.to_string(),
                r.cnot.to_string(),
                r.cnot_init.to_string(),
                r.n_params.to_string(),
                fmt_opt(r.n_i),
                fmt_opt(r.c_r),
                fmt_opt(r.n_i_fidelity),
                fmt_opt(r.c_r_fidelity),
                r.restarts.to_string(),
                r.failed.to_string(),
                r.reached_fidelity.to_string(),
                r.median_max_energy_error.map(fmt_f).unwrap_or_default(),
                r.meets_energy_threshold.to_string(),
            ];
            row.extend((0..k).map(|i| r.mean_energy.get(i).map_or(String::new(), |&x| fmt_f(x))));
            row.extend((0..k).map(|i| r.median_fidelity.get(i).map_or(String::new(), |&x| fmt_f(x))));
            row
        })
        .collect();
    (header, body)
}

/// Write one run directory. Called from a single thread after all restarts finish.
pub fn write_run(dir: &Path, outcome: &RunOutcome) -> Result<PathBuf> {
    let run_dir = dir.join(run_dir_name(outcome.record.layers));
    let traces = run_dir.join(TRACE_DIR);
    fs::create_dir_all(&traces)?;
    fs::write(run_dir.join(RECORD_FILE), serde_json::to_string_pretty(&outcome.record)?)?;
    for (r, t) in outcome.record.restarts.iter().zip(&outcome.traces) {
        fs::write(traces.join(trace_file_name(r.restart)), records_to_jsonl(t))?;
    }
    let (h, rows) = summary_csv(&outcome.record);
    write_csv(&run_dir.join(SUMMARY_FILE), &h, &rows)?;
    let (h, rows) = series_csv(&crate::experiment::series(&outcome.live_traces()));
    write_csv(&run_dir.join(SERIES_FILE), &h, &rows)?;
    Ok(run_dir)
}

pub fn write_table(path: &Path, rows: &[TableRow]) -> Result<()> {
    let (h, body) = table_csv(rows);
    write_csv(path, &h, &body)
}

pub fn write_series(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let (h, body) = series_csv(rows);
    write_csv(path, &h, &body)
}

pub fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    write_csv(path, header, rows)
}
