//! The operations behind each command-line subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symvqe::metrics::{entangling_power, ENTROPY_LOG_BASE};
use symvqe::optimizer::OptimizationTrace;
use symvqe::Spectrum;

use crate::config::{build_circuit, ExperimentConfig, ModelSpec, Purpose, MAX_ED_QUBITS};
use crate::error::{HarnessError, Result};
use crate::experiment::{execute, series, Prepared, RunOutcome, RunRecord};
use crate::output::{self, TableRow, RECORD_FILE, TABLE_FILE, TRACE_DIR};

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub outcomes: Vec<RunOutcome>,
    pub table: Vec<TableRow>,
    /// Smallest layer count whose median final energy error meets the threshold.
    pub min_layer_meeting_threshold: Option<usize>,
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    config_hash: String,
    table: &'a [TableRow],
    min_layer_meeting_threshold: Option<usize>,
}

/// Compute every layer count of the config without touching the filesystem.
pub fn compute_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let prepared = Prepared::new(cfg)?;
    let mut outcomes = Vec::new();
    for l in cfg.ansatz.layers.values() {
        outcomes.push(execute(cfg, &prepared, l)?);
    }
    let table: Vec<TableRow> = outcomes.iter().map(|o| TableRow::from_record(&o.record)).collect();
    let min_layer_meeting_threshold = table.iter().filter(|r| r.meets_energy_threshold).map(|r| r.layer).min();
    Ok(SweepResult { outcomes, table, min_layer_meeting_threshold })
}

fn write_sweep(cfg: &ExperimentConfig, result: &SweepResult) -> Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    for o in &result.outcomes {
        output::write_run(dir, o)?;
    }
    output::write_table(&dir.join(TABLE_FILE), &result.table)?;
    let manifest = SweepManifest {
        config_hash: cfg.hash(),
        table: &result.table,
        min_layer_meeting_threshold: result.min_layer_meeting_threshold,
    };
    fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Run a single-layer experiment and write its outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    if cfg.ansatz.layers.values().len() != 1 {
        return Err(HarnessError::config("`run` takes a single layer count; use `sweep` for a list"));
    }
    let result = compute_sweep(cfg)?;
    write_sweep(cfg, &result)?;
    Ok(result.outcomes.into_iter().next().expect("one layer").record)
}

/// Run every layer count of the sweep list and write the layer table.
pub fn layer_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let result = compute_sweep(cfg)?;
    write_sweep(cfg, &result)?;
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub index: usize,
    pub energy: f64,
    pub s: Option<f64>,
    pub s_z: Option<f64>,
    pub flip_parity: Option<i8>,
    pub label: String,
}

pub fn spectrum_entries(spectrum: &Spectrum) -> Vec<SpectrumEntry> {
    spectrum
        .states
        .iter()
        .map(|s| SpectrumEntry {
            index: s.index,
            energy: s.energy,
            s: s.s,
            s_z: s.s_z,
            flip_parity: s.flip_parity,
            label: s.label.clone(),
        })
        .collect()
}

/// Lowest `k` labelled eigenstates of the model.
pub fn diagonalize(model: &ModelSpec, n: usize, k: usize) -> Result<Vec<SpectrumEntry>> {
    if n > MAX_ED_QUBITS {
        return Err(HarnessError::config(format!(
            "refusing to diagonalize {n} qubits: exact diagonalization is limited to {MAX_ED_QUBITS}"
        )));
    }
    let h = model.hamiltonian(n)?;
    let spectrum = symvqe::diagonalize_labeled(&h, k, &model.symmetries(n))?;
    Ok(spectrum_entries(&spectrum))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntpowerRow {
    pub family: symvqe::Family,
    pub n_qubits: usize,
    pub layers: usize,
    pub cnot_body: usize,
    pub cnot_init: usize,
    #[serde(rename = "L")]
    pub n_params: usize,
    pub samples: usize,
    pub seed: u64,
    pub mean: f64,
    pub std_err: f64,
    pub log_base: String,
}

/// Entangling power for each layer count of the config.
pub fn compute_entpower(cfg: &ExperimentConfig) -> Result<Vec<EntpowerRow>> {
    cfg.validate(Purpose::Entpower)?;
    let seed = cfg.entpower.seed.unwrap_or(cfg.master_seed);
    let init = cfg.input_of(0).expect("first input always resolves");
    let mut rows = Vec::new();
    for l in cfg.ansatz.layers.values() {
        let c = build_circuit(cfg.ansatz.family, cfg.n_qubits, l, init.clone())?;
        let ep = entangling_power(&c, cfg.entpower.samples, seed)?;
        let res = c.count_resources();
        rows.push(EntpowerRow {
            family: cfg.ansatz.family,
            n_qubits: cfg.n_qubits,
            layers: l,
            cnot_body: res.cnot_body,
            cnot_init: res.cnot_init,
            n_params: res.n_params,
            samples: ep.n_samples,
            seed,
            mean: ep.mean,
            std_err: ep.std_err,
            log_base: ENTROPY_LOG_BASE.into(),
        });
    }
    Ok(rows)
}

pub const ENTPOWER_FILE: &str = "entpower.csv";

fn entpower_csv(rows: &[EntpowerRow]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["family", "n_qubits", "layers", "CNOT", "CNOT_init", "L", "samples", "seed", "mean", "std_err", "log_base"]
        .map(String::from)
        .to_vec();
    let body = rows
        .iter()
        .map(|r| {
            vec![
                serde_json::to_value(r.family).expect("serializable").as_str().unwrap_or_default().to_string(),
                r.n_qubits.to_string(),
                r.layers.to_string(),
                r.cnot_body.to_string(),
                r.cnot_init.to_string(),
                r.n_params.to_string(),
                r.samples.to_string(),
                r.seed.to_string(),
                output::fmt_f(r.mean),
                output::fmt_f(r.std_err),
                r.log_base.clone(),
            ]
        })
        .collect();
    (header, body)
}

pub fn entpower(cfg: &ExperimentConfig) -> Result<Vec<EntpowerRow>> {
    let rows = compute_entpower(cfg)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let (h, body) = entpower_csv(&rows);
    output::write_rows(&cfg.output_dir.join(ENTPOWER_FILE), &h, &body)?;
    fs::write(cfg.output_dir.join("entpower.json"), serde_json::to_string_pretty(&rows)?)?;
    Ok(rows)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub runs: Vec<PathBuf>,
    pub table: Vec<TableRow>,
    pub entpower: Vec<EntpowerRow>,
    /// Per-file problems; the report covers everything else.
    pub diagnostics: Vec<String>,
    pub warnings: Vec<String>,
    pub output_dir: PathBuf,
}

pub const REPORT_DIR: &str = "report";

/// Rebuild tables and per-iteration series from the files of a run directory.
pub fn report(dir: &Path) -> Result<Report> {
    if !dir.is_dir() {
        return Err(HarnessError::config(format!("{} is not a directory", dir.display())));
    }
    let out_dir = dir.join(REPORT_DIR);
    fs::create_dir_all(&out_dir)?;
    let mut rep = Report { output_dir: out_dir.clone(), ..Default::default() };
    let mut records: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name() == RECORD_FILE && !e.path().starts_with(&out_dir))
        .map(|e| e.into_path())
        .collect();
    records.sort();
    for path in records {
        let run_dir = path.parent().expect("file has a parent").to_path_buf();
        let record: RunRecord = match fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
        {
            Ok(r) => r,
            Err(e) => {
                rep.diagnostics.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let mut traces = Vec::new();
        for r in record.restarts.iter().filter(|r| !r.failed()) {
            let tpath = run_dir.join(TRACE_DIR).join(output::trace_file_name(r.restart));
            match fs::read_to_string(&tpath)
                .map_err(|e| e.to_string())
                .and_then(|t| OptimizationTrace::from_jsonl(&t).map_err(|e| e.to_string()))
            {
                Ok(t) => traces.push(t),
                Err(e) => rep.diagnostics.push(format!("{}: {e}", tpath.display())),
            }
        }
        let slices: Vec<&[_]> = traces.iter().map(|t| t.as_slice()).collect();
        let rel = run_dir.strip_prefix(dir).unwrap_or(&run_dir);
        let stem: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
        let stem = if stem.is_empty() { "run".to_string() } else { stem.join("_") };
        output::write_series(&out_dir.join(format!("series_{stem}.csv")), &series(&slices))?;
        rep.table.push(TableRow::from_record(&record));
        rep.runs.push(run_dir);
    }
    let ep_path = dir.join("entpower.json");
    if ep_path.exists() {
        match fs::read_to_string(&ep_path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str::<Vec<EntpowerRow>>(&t).map_err(|e| e.to_string()))
        {
            Ok(rows) => rep.entpower = rows,
            Err(e) => rep.diagnostics.push(format!("{}: {e}", ep_path.display())),
        }
    }
    if rep.runs.is_empty() && rep.entpower.is_empty() {
        rep.warnings.push(format!("no run records found under {}", dir.display()));
    }
    output::write_table(&out_dir.join(TABLE_FILE), &rep.table)?;
    if !rep.entpower.is_empty() {
        let (h, body) = entpower_csv(&rep.entpower);
        output::write_rows(&out_dir.join(ENTPOWER_FILE), &h, &body)?;
    }
    let mut notes = String::new();
    for w in &rep.warnings {
        notes.push_str(&format!("warning: {w}\n"));
    }
    for d in &rep.diagnostics {
        notes.push_str(&format!("error: {d}\n"));
    }
    fs::write(out_dir.join("diagnostics.txt"), notes)?;
    fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&rep)?)?;
    Ok(rep)
}
