//! Restart execution, per-run metrics and aggregation.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use symvqe::circuits::{Family, ResourceCount};
use symvqe::metrics::{self, FidelityMode, FidelityReport};
use symvqe::objectives::{PenaltyTerm, SsvqeObjective, TargetSpec};
use symvqe::optimizer::{
    derive_seed, minimize, sample_initial_params, ConvergedReason, Evaluation, IterationRecord, Objective,
};
use symvqe::operators::Operator;
use symvqe::{diagonalize_labeled, Circuit, InitSpec, Observable, Spectrum};

use crate::config::{build_circuit, ExperimentConfig, ModelSpec, Purpose};
use crate::error::{HarnessError, Result};

/// Spectrum entry a target is compared against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetInfo {
    pub label: String,
    pub index: usize,
    pub energy: f64,
    pub mode: FidelityMode,
    pub input: InitSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureKind {
    /// No acceptable step even after the steepest-descent fallback.
    LineSearchCollapse,
    NonFiniteCost,
    /// The objective itself returned an error.
    EvaluationError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub restart: usize,
    pub seed: u64,
    pub failure: Option<FailureKind>,
    pub reason: Option<ConvergedReason>,
    pub diagnostic: Option<String>,
    pub iterations: usize,
    pub n_evaluations: usize,
    pub n_fallbacks: usize,
    pub final_cost: f64,
    pub final_energies: Vec<f64>,
    pub fidelity: Option<FidelityReport>,
    /// Energy standard deviation of each output.
    pub energy_std: Vec<f64>,
    /// First iteration with every energy error within threshold.
    #[serde(rename = "n_I")]
    pub n_i: Option<usize>,
    pub c_r: Option<u64>,
    /// First iteration with every fidelity at or above threshold.
    #[serde(rename = "n_I_fidelity")]
    pub n_i_fidelity: Option<usize>,
    pub c_r_fidelity: Option<u64>,
    pub wall_seconds: f64,
    pub theta: Vec<f64>,
}

impl RestartRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub rotation_convention: String,
    pub qubit_order: String,
    pub entropy_log_base: String,
    pub weight_scheme: String,
    pub threshold_rule: String,
}

/// Statistics over non-failed restarts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub restarts: usize,
    pub failed: usize,
    pub failures: BTreeMap<String, usize>,
    /// Restarts whose final fidelities all reach the threshold.
    pub reached_fidelity: usize,
    /// Lower median of `n_I` with never-crossing restarts counted as infinite.
    #[serde(rename = "median_n_I")]
    pub median_n_i: Option<usize>,
    pub median_c_r: Option<u64>,
    #[serde(rename = "median_n_I_fidelity")]
    pub median_n_i_fidelity: Option<usize>,
    pub median_c_r_fidelity: Option<u64>,
    pub mean_energy: Vec<f64>,
    pub std_energy: Vec<f64>,
    pub mean_fidelity: Vec<f64>,
    pub std_fidelity: Vec<f64>,
    pub median_fidelity: Vec<f64>,
    pub median_max_energy_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub name: Option<String>,
    pub model: ModelSpec,
    pub n_qubits: usize,
    pub family: Family,
    pub layers: usize,
    pub resources: ResourceCount,
    pub targets: Vec<TargetInfo>,
    /// `E_2 - E_1` of the spectrum, when known.
    pub gap: Option<f64>,
    pub thresholds: crate::config::Thresholds,
    pub restarts: Vec<RestartRecord>,
    pub summary: RunSummary,
    pub metadata: Metadata,
    pub wall_seconds: f64,
}

/// A run with its per-restart traces.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub traces: Vec<Vec<IterationRecord>>,
}

/// Hamiltonian, exact spectrum and resolved targets shared by every layer count.
pub struct Prepared {
    pub hamiltonian: Observable,
    pub spectrum: Option<Spectrum>,
    pub targets: Vec<Option<TargetInfo>>,
    reference_states: Vec<Vec<Vec<usize>>>,
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate(Purpose::Optimize)?;
        let n = cfg.n_qubits;
        let hamiltonian = cfg.model.hamiltonian(n)?;
        if !cfg.ed_oracle {
            return Ok(Prepared {
                hamiltonian,
                spectrum: None,
                targets: vec![None; cfg.targets.len()],
                reference_states: vec![Vec::new(); cfg.targets.len()],
            });
        }
        let labels: Vec<String> =
            cfg.targets.iter().enumerate().map(|(i, t)| t.label.clone().unwrap_or(format!("E_{}", i + 1))).collect();
        let deflated: Vec<Vec<String>> = cfg
            .targets
            .iter()
            .map(|t| t.penalties.iter().flat_map(|p| p.states.iter().cloned()).collect())
            .collect();
        let wanted: Vec<&String> = labels.iter().chain(deflated.iter().flatten()).collect();
        let spectrum = spectrum_covering(&cfg.model, n, &wanted)?;
        let sector_fixed = matches!(cfg.ansatz.family, Family::SzConserving | Family::StotConserving)
            && matches!(cfg.model, ModelSpec::Heisenberg { .. });
        let mut targets = Vec::new();
        for (i, (t, label)) in cfg.targets.iter().zip(&labels).enumerate() {
            let state = spectrum.find(label).expect("spectrum covers every label");
            let mode = t.fidelity_mode.unwrap_or_else(|| FidelityMode::default_for(&spectrum, state.index, sector_fixed));
            targets.push(Some(TargetInfo {
                label: state.label.clone(),
                index: state.index,
                energy: state.energy,
                mode,
                input: cfg.input_of(i).expect("validated"),
            }));
        }
        let reference_states = cfg
            .targets
            .iter()
            .map(|t| {
                t.penalties
                    .iter()
                    .map(|p| p.states.iter().map(|l| spectrum.find(l).expect("covered").index).collect())
                    .collect()
            })
            .collect();
        Ok(Prepared { hamiltonian, spectrum: Some(spectrum), targets, reference_states })
    }

    fn target_specs(&self, cfg: &ExperimentConfig) -> Result<Vec<TargetSpec>> {
        let weights = cfg.weights()?;
        let mut out = Vec::new();
        for (i, t) in cfg.targets.iter().enumerate() {
            let mut spec = TargetSpec::new(cfg.input_of(i).expect("validated"), weights[i]);
            for (j, p) in t.penalties.iter().enumerate() {
                let beta = p.beta.unwrap_or(p.kind.default_beta());
                let term = if p.states.is_empty() {
                    PenaltyTerm::new(p.kind, beta)
                } else {
                    let spectrum = self.spectrum.as_ref().expect("deflation requires the oracle");
                    let refs = self.reference_states[i][j]
                        .iter()
                        .map(|&idx| spectrum.get(idx).expect("resolved").state().clone())
                        .collect();
                    PenaltyTerm::deflation(beta, refs)
                };
                spec = spec.with_penalty(term);
            }
            out.push(spec);
        }
        Ok(out)
    }

    fn gap(&self) -> Option<f64> {
        let s = self.spectrum.as_ref()?;
        let e1 = s.get(1)?.energy;
        s.states.iter().map(|x| x.energy).find(|e| e - e1 > 1e-9 * e1.abs().max(1.0)).map(|e| e - e1)
    }
}

/// Diagonalize enough of the spectrum to resolve every label and close the last multiplet.
pub fn spectrum_covering(model: &ModelSpec, n: usize, labels: &[&String]) -> Result<Spectrum> {
    let h = model.hamiltonian(n)?;
    let sym = model.symmetries(n);
    let dim = 1usize << n;
    let numeric_max = labels
        .iter()
        .filter_map(|l| l.strip_prefix("E_").and_then(|r| r.trim_matches(|c| c == '{' || c == '}').parse::<usize>().ok()))
        .max()
        .unwrap_or(1);
    let mut k = (numeric_max + 4).max(8).min(dim);
    loop {
        let spectrum = diagonalize_labeled(&h, k, &sym)?;
        let found: Option<Vec<usize>> = labels.iter().map(|l| spectrum.find(l).map(|s| s.index)).collect();
        if let Some(indices) = found {
            let last_group = spectrum.states.last().map(|s| s.group);
            let needed = indices.iter().map(|&i| spectrum.get(i).expect("found").group).max();
            if k == dim || needed < last_group {
                return Ok(spectrum);
            }
        } else if k == dim {
            let missing: Vec<&String> = labels.iter().copied().filter(|l| spectrum.find(l).is_none()).collect();
            return Err(HarnessError::config(format!("labels not present in the spectrum: {missing:?}")));
        }
        k = (2 * k).min(dim);
    }
}

/// Adds per-target fidelities to every evaluation as `fidelity_{i}`.
struct Tracked<'a> {
    inner: SsvqeObjective<'a>,
    spectrum: Option<&'a Spectrum>,
    targets: Vec<(usize, FidelityMode)>,
}

impl Objective for Tracked<'_> {
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }

    fn evaluate(&self, theta: &[f64]) -> symvqe::Result<Evaluation> {
        let mut e = self.inner.evaluate(theta)?;
        if let Some(spec) = self.spectrum {
            for (i, &(index, mode)) in self.targets.iter().enumerate() {
                let out = self.inner.output(theta, i)?;
                e.aux.insert(format!("fidelity_{i}"), metrics::fidelity(&out, spec, index, mode)?);
            }
        }
        Ok(e)
    }
}

pub fn restart_seed(master: u64, layers: usize, restart: usize) -> u64 {
    derive_seed(derive_seed(master, layers as u64), restart as u64)
}

pub fn metadata(cfg: &ExperimentConfig) -> Metadata {
    Metadata {
        rotation_convention: "R_a(theta) = exp(+i theta sigma_a); PHASE = diag(1, e^{i theta})".into(),
        qubit_order: "qubit 0 is the most significant bit of the basis index".into(),
        entropy_log_base: metrics::ENTROPY_LOG_BASE.into(),
        weight_scheme: cfg.weight_scheme().into(),
        threshold_rule: "n_I is the first trace iteration with max_i |<H>_i - E_i| <= energy_error".into(),
    }
}

/// First record index where every energy is within `tol` of its target.
pub fn first_energy_crossing(trace: &[IterationRecord], targets: &[f64], tol: f64) -> Option<usize> {
    trace
        .iter()
        .find(|r| r.energies.len() == targets.len() && r.energies.iter().zip(targets).all(|(e, t)| (e - t).abs() <= tol))
        .map(|r| r.n_i)
}

/// First record index where every tracked fidelity reaches `threshold`.
pub fn first_fidelity_crossing(trace: &[IterationRecord], k: usize, threshold: f64) -> Option<usize> {
    trace
        .iter()
        .find(|r| (0..k).all(|i| r.aux.get(&format!("fidelity_{i}")).is_some_and(|&f| f >= threshold)))
        .map(|r| r.n_i)
}

/// Run every restart for one layer count. Restarts run in the global pool.
pub fn execute(cfg: &ExperimentConfig, prepared: &Prepared, layers: usize) -> Result<RunOutcome> {
    let started = Instant::now();
    let circuit = build_circuit(cfg.ansatz.family, cfg.n_qubits, layers, cfg.input_of(0).expect("validated"))?;
    let specs = prepared.target_specs(cfg)?;
    // construct once up front so configuration problems surface before any restart
    SsvqeObjective::new(&circuit, &prepared.hamiltonian, specs.clone())?;
    let targets: Option<Vec<TargetInfo>> = prepared.targets.iter().cloned().collect();
    let results: Vec<(RestartRecord, Vec<IterationRecord>)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(cfg, prepared, &circuit, &specs, targets.as_deref(), layers, r))
        .collect::<Result<_>>()?;
    let (restarts, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = summarize(&restarts, circuit.n_params, cfg.thresholds.fidelity);
    let record = RunRecord {
        config_hash: cfg.hash(),
        name: cfg.name.clone(),
        model: cfg.model.clone(),
        n_qubits: cfg.n_qubits,
        family: cfg.ansatz.family,
        layers,
        resources: circuit.count_resources(),
        targets: targets.unwrap_or_default(),
        gap: prepared.gap(),
        thresholds: cfg.thresholds,
        restarts,
        summary,
        metadata: metadata(cfg),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome { record, traces })
}

fn run_restart(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    circuit: &Circuit,
    specs: &[TargetSpec],
    targets: Option<&[TargetInfo]>,
    layers: usize,
    r: usize,
) -> Result<(RestartRecord, Vec<IterationRecord>)> {
    let started = Instant::now();
    let seed = restart_seed(cfg.master_seed, layers, r);
    let theta0 = sample_initial_params(circuit.n_params, seed);
    let objective = Tracked {
        inner: SsvqeObjective::new(circuit, &prepared.hamiltonian, specs.to_vec())?,
        spectrum: prepared.spectrum.as_ref(),
        targets: targets.map(|t| t.iter().map(|x| (x.index, x.mode)).collect()).unwrap_or_default(),
    };
    let k = specs.len();
    let mut rec = RestartRecord {
        restart: r,
        seed,
        failure: None,
        reason: None,
        diagnostic: None,
        iterations: 0,
        n_evaluations: 0,
        n_fallbacks: 0,
        final_cost: f64::NAN,
        final_energies: Vec::new(),
        fidelity: None,
        energy_std: Vec::new(),
        n_i: None,
        c_r: None,
        n_i_fidelity: None,
        c_r_fidelity: None,
        wall_seconds: 0.0,
        theta: Vec::new(),
    };
    let trace = match minimize(&objective, &theta0, &cfg.optimizer) {
        Ok(t) => t,
        Err(e) => {
            rec.failure = Some(FailureKind::EvaluationError);
            rec.diagnostic = Some(e.to_string());
            rec.wall_seconds = started.elapsed().as_secs_f64();
            return Ok((rec, Vec::new()));
        }
    };
    rec.reason = Some(trace.reason);
    rec.failure = match trace.reason {
        ConvergedReason::LineSearchFailed => Some(FailureKind::LineSearchCollapse),
        ConvergedReason::NonFinite => Some(FailureKind::NonFiniteCost),
        _ => None,
    };
    rec.diagnostic = trace.diagnostic.clone();
    rec.iterations = trace.iterations();
    rec.n_evaluations = trace.n_evaluations;
    rec.n_fallbacks = trace.n_fallbacks;
    rec.theta = trace.theta.clone();
    if let Some(last) = trace.final_record() {
        rec.final_cost = last.cost;
    }
    if rec.failure.is_none() {
        let outputs: Vec<_> =
            objective.inner.inputs().iter().map(|input| circuit.evaluate(&trace.theta, input)).collect::<symvqe::Result<_>>()?;
        rec.final_energies =
            outputs.iter().map(|o| prepared.hamiltonian.expectation(o)).collect::<symvqe::Result<_>>()?;
        if let Some(gap) = prepared.gap() {
            for o in &outputs {
                rec.energy_std.push(metrics::convergence_margin(o, &prepared.hamiltonian, gap)?.0);
            }
        }
        if let (Some(spec), Some(t)) = (prepared.spectrum.as_ref(), targets) {
            let pairs: Vec<(usize, FidelityMode)> = t.iter().map(|x| (x.index, x.mode)).collect();
            rec.fidelity = Some(metrics::fidelity_report(&outputs, &rec.final_energies, spec, &pairs)?);
            let energies: Vec<f64> = t.iter().map(|x| x.energy).collect();
            let tol = cfg.thresholds.energy_error * cfg.model.energy_unit();
            rec.n_i = first_energy_crossing(&trace.records, &energies, tol);
            rec.n_i_fidelity = first_fidelity_crossing(&trace.records, k, cfg.thresholds.fidelity);
            rec.c_r = rec.n_i.map(|n| metrics::classical_resources(circuit.n_params, n));
            rec.c_r_fidelity = rec.n_i_fidelity.map(|n| metrics::classical_resources(circuit.n_params, n));
        }
    }
    rec.wall_seconds = started.elapsed().as_secs_f64();
    Ok((rec, trace.records))
}

/// Lower median, with `None` ordered after every value.
pub fn lower_median(values: &[Option<usize>]) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<usize> = values.iter().map(|x| x.unwrap_or(usize::MAX)).collect();
    v.sort_unstable();
    let m = v[(v.len() - 1) / 2];
    (m != usize::MAX).then_some(m)
}

fn median_f64(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(restarts: &[RestartRecord], n_params: usize, fidelity_threshold: f64) -> RunSummary {
    let ok: Vec<&RestartRecord> = restarts.iter().filter(|r| !r.failed()).collect();
    let mut failures = BTreeMap::new();
    for r in restarts {
        if let Some(f) = r.failure {
            let key = serde_json::to_value(f).expect("serializable").as_str().unwrap_or("UNKNOWN").to_string();
            *failures.entry(key).or_insert(0) += 1;
        }
    }
    let k = ok.first().map_or(0, |r| r.final_energies.len());
    let column = |f: &dyn Fn(&RestartRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
    let mut s = RunSummary { restarts: restarts.len(), failed: restarts.len() - ok.len(), failures, ..Default::default() };
    for i in 0..k {
        let (m, sd) = mean_std(&column(&|r| r.final_energies.get(i).copied()));
        s.mean_energy.push(m);
        s.std_energy.push(sd);
        let fids = column(&|r| r.fidelity.as_ref().and_then(|f| f.targets.get(i)).map(|t| t.fidelity));
        if !fids.is_empty() {
            let (m, sd) = mean_std(&fids);
            s.mean_fidelity.push(m);
            s.std_fidelity.push(sd);
            s.median_fidelity.push(median_f64(&fids).expect("nonempty"));
        }
    }
    s.reached_fidelity =
        ok.iter().filter(|r| r.fidelity.as_ref().is_some_and(|f| f.min_fidelity() >= fidelity_threshold)).count();
    s.median_max_energy_error = median_f64(&column(&|r| r.fidelity.as_ref().map(|f| f.max_energy_error())));
    let has_oracle = ok.iter().any(|r| r.fidelity.is_some());
    if has_oracle {
        s.median_n_i = lower_median(&ok.iter().map(|r| r.n_i).collect::<Vec<_>>());
        s.median_n_i_fidelity = lower_median(&ok.iter().map(|r| r.n_i_fidelity).collect::<Vec<_>>());
        s.median_c_r = s.median_n_i.map(|n| metrics::classical_resources(n_params, n));
        s.median_c_r_fidelity = s.median_n_i_fidelity.map(|n| metrics::classical_resources(n_params, n));
    }
    s
}

/// One row per iteration index: restarts alive at that index and mean/std of each series.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub n_i: usize,
    pub alive: usize,
    pub cost: (f64, f64),
    pub energies: Vec<(f64, f64)>,
    pub fidelities: Vec<(f64, f64)>,
}

/// Per-iteration mean and standard deviation over the given traces.
pub fn series(traces: &[&[IterationRecord]]) -> Vec<SeriesRow> {
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let k = traces.iter().find_map(|t| t.first()).map_or(0, |r| r.energies.len());
    let has_fid = traces.iter().find_map(|t| t.first()).is_some_and(|r| r.aux.contains_key("fidelity_0"));
    (0..len)
        .map(|t| {
            let alive: Vec<&IterationRecord> = traces.iter().filter_map(|tr| tr.get(t)).collect();
            let col = |f: &dyn Fn(&IterationRecord) -> Option<f64>| mean_std(&alive.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            SeriesRow {
                n_i: t,
                alive: alive.len(),
                cost: col(&|r| Some(r.cost)),
                energies: (0..k).map(|i| col(&|r| r.energies.get(i).copied())).collect(),
                fidelities: if has_fid {
                    (0..k).map(|i| col(&|r| r.aux.get(&format!("fidelity_{i}")).copied())).collect()
                } else {
                    Vec::new()
                },
            }
        })
        .collect()
}

impl RunOutcome {
    /// Traces of the restarts that did not fail.
    pub fn live_traces(&self) -> Vec<&[IterationRecord]> {
        self.record
            .restarts
            .iter()
            .zip(&self.traces)
            .filter(|(r, _)| !r.failed())
            .map(|(_, t)| t.as_slice())
            .collect()
    }
}
