//! Experiment configuration: a versioned TOML document validated before any computation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use symvqe::circuits::Family;
use symvqe::metrics::FidelityMode;
use symvqe::objectives::PenaltyKind;
use symvqe::optimizer::OptimizerConfig;
use symvqe::{Circuit, InitSpec, Observable};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;
/// Restart counts above this need the long-run flag.
pub const MAX_DESK_RESTARTS: usize = 20;
/// Largest register the exact-diagonalization oracle accepts.
pub const MAX_ED_QUBITS: usize = 16;
pub const LONG_RUN_ENV: &str = "SYMVQE_LONG_RUN";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum ModelSpec {
    /// `J sum sigma^i . sigma^{i+1}`
    Heisenberg {
        #[serde(default = "one")]
        j: f64,
    },
    /// `J_z sum Z_i Z_{i+1} + h_x sum X_i`
    Ising {
        #[serde(default = "one")]
        jz: f64,
        #[serde(default = "one")]
        hx: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn hamiltonian(&self, n: usize) -> Result<Observable> {
        Ok(match *self {
            ModelSpec::Heisenberg { j } => Observable::heisenberg_chain(n, j)?,
            ModelSpec::Ising { jz, hx } => Observable::ising_transverse(n, jz, hx)?,
        })
    }

    /// Conserved quantities used to block and label the exact spectrum.
    pub fn symmetries(&self, n: usize) -> Vec<Observable> {
        match self {
            ModelSpec::Heisenberg { .. } => vec![Observable::s_tot_sq(n), Observable::s_z(n)],
            ModelSpec::Ising { .. } => vec![Observable::spin_flip_x(n)],
        }
    }

    /// Energy unit used for thresholds.
    pub fn energy_unit(&self) -> f64 {
        match *self {
            ModelSpec::Heisenberg { j } => j.abs(),
            ModelSpec::Ising { jz, .. } => jz.abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ModelSpec::Heisenberg { j } => j.is_finite() && j != 0.0,
            ModelSpec::Ising { jz, hx } => jz.is_finite() && hx.is_finite() && jz != 0.0,
        };
        if !ok {
            return Err(HarnessError::config(format!("invalid model couplings {self:?}")));
        }
        Ok(())
    }
}

/// A single layer count or a sweep list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Layers {
    One(usize),
    Sweep(Vec<usize>),
}

impl Layers {
    pub fn values(&self) -> Vec<usize> {
        match self {
            Layers::One(l) => vec![*l],
            Layers::Sweep(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    pub family: Family,
    pub layers: Layers,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    /// Defaults per kind: 1000, 2, 1, 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Spectrum labels of the states to deflate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// Spectrum label (`E_{S1}`, `E_{T1}^{(0)}`, `E_3`); defaults to `E_{i}` for target `i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Input state; required for every target after the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub penalties: Vec<PenaltyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity_mode: Option<FidelityMode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_fidelity")]
    pub fidelity: f64,
    /// In units of the model's coupling.
    #[serde(default = "default_energy_error")]
    pub energy_error: f64,
}

fn default_fidelity() -> f64 {
    0.95
}

fn default_energy_error() -> f64 {
    0.5
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { fidelity: default_fidelity(), energy_error: default_energy_error() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntpowerConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Defaults to the master seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_samples() -> usize {
    500
}

impl Default for EntpowerConfig {
    fn default() -> Self {
        EntpowerConfig { samples: default_samples(), seed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelSpec,
    pub n_qubits: usize,
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub targets: Vec<TargetConfig>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_true")]
    pub ed_oracle: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Allows restart counts above the desk limit.
    #[serde(default)]
    pub long_run: bool,
    #[serde(default)]
    pub entpower: EntpowerConfig,
}

fn default_restarts() -> usize {
    10
}

fn default_true() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

/// What the configuration is going to be used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Optimize,
    Entpower,
}

/// The input the family uses when no target overrides it.
pub fn family_default_init(family: Family) -> InitSpec {
    match family {
        Family::StotConserving => InitSpec::SingletProduct,
        Family::IsingHva => InitSpec::PlusProduct,
        _ => InitSpec::Neel,
    }
}

/// Build the family's circuit; zero layers gives the bare input preparation.
pub fn build_circuit(family: Family, n: usize, layers: usize, init: InitSpec) -> Result<Circuit> {
    if layers == 0 {
        return Ok(Circuit::empty(n, family, init)?);
    }
    let c = match family {
        Family::HardwareEfficient => Circuit::hardware_efficient(n, layers)?.with_init(init)?,
        Family::SzConserving => Circuit::sz_conserving(n, layers)?.with_init(init)?,
        Family::StotConserving => Circuit::stot_conserving(n, layers, init)?,
        Family::IsingHva => Circuit::ising_hva(n, layers)?.with_init(init)?,
        Family::Custom => return Err(HarnessError::config("CUSTOM circuits cannot be built from a config")),
    };
    Ok(c)
}

pub fn long_run_enabled_by_env() -> bool {
    std::env::var(LONG_RUN_ENV).is_ok_and(|v| !v.is_empty() && v != "0")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    /// SHA-256 of the canonical serialized form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialization cannot fail");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }

    pub fn input_of(&self, i: usize) -> Option<InitSpec> {
        match self.targets.get(i).and_then(|t| t.input.clone()) {
            Some(s) => Some(s),
            None if i == 0 => Some(family_default_init(self.ansatz.family)),
            None => None,
        }
    }

    /// Weights as configured, or `k, k-1, ..., 1`.
    pub fn weights(&self) -> Result<Vec<f64>> {
        let given: Vec<Option<f64>> = self.targets.iter().map(|t| t.weight).collect();
        if given.iter().all(Option::is_none) {
            return Ok(symvqe::objectives::default_weights(self.targets.len()));
        }
        given
            .into_iter()
            .enumerate()
            .map(|(i, w)| w.ok_or_else(|| HarnessError::config(format!("target {i} has no weight while others do"))))
            .collect()
    }

    pub fn weight_scheme(&self) -> &'static str {
        if self.targets.iter().all(|t| t.weight.is_none()) {
            "k, k-1, ..., 1"
        } else {
            "custom"
        }
    }

    pub fn long_run_allowed(&self) -> bool {
        self.long_run || long_run_enabled_by_env()
    }

    /// Schema and consistency checks; builds each circuit once but runs nothing.
    pub fn validate(&self, purpose: Purpose) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.model.validate()?;
        let n = self.n_qubits;
        if !(2..=symvqe::statevector::MAX_QUBITS).contains(&n) {
            return bad(format!("n_qubits {n} outside 2..={}", symvqe::statevector::MAX_QUBITS));
        }
        if self.ed_oracle && purpose == Purpose::Optimize && n > MAX_ED_QUBITS {
            return bad(format!("the exact-diagonalization oracle refuses n_qubits > {MAX_ED_QUBITS}"));
        }
        let layers = self.ansatz.layers.values();
        if layers.is_empty() {
            return bad("layer sweep list is empty".into());
        }
        match purpose {
            Purpose::Optimize => self.validate_optimize(&layers)?,
            Purpose::Entpower => {
                if !n.is_multiple_of(2) {
                    return bad(format!("entangling power needs an even qubit count, got {n}"));
                }
                if self.entpower.samples == 0 {
                    return bad("entpower.samples must be at least 1".into());
                }
            }
        }
        let init = self.input_of(0).expect("first input always resolves");
        for &l in &layers {
            build_circuit(self.ansatz.family, n, l, init.clone())?;
        }
        Ok(())
    }

    fn validate_optimize(&self, layers: &[usize]) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if layers.contains(&0) {
            return bad("optimization needs at least one layer".into());
        }
        if self.targets.is_empty() {
            return bad("target list is empty".into());
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        if self.restarts > MAX_DESK_RESTARTS && !self.long_run_allowed() {
            return bad(format!(
                "{} restarts exceed the desk limit of {MAX_DESK_RESTARTS}; set long_run = true or {LONG_RUN_ENV}=1",
                self.restarts
            ));
        }
        self.optimizer.validate()?;
        let t = self.thresholds;
        if !(t.fidelity > 0.0 && t.fidelity <= 1.0) || !(t.energy_error > 0.0) {
            return bad(format!("invalid thresholds {t:?}"));
        }
        let weights = self.weights()?;
        for w in weights.windows(2) {
            if w[1] >= w[0] {
                return bad(format!("target weights must be strictly decreasing, got {} then {}", w[0], w[1]));
            }
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return bad("target weights must be positive".into());
        }
        for (i, target) in self.targets.iter().enumerate() {
            let input = self
                .input_of(i)
                .ok_or_else(|| HarnessError::config(format!("target {i} needs an explicit input")))?;
            input.preparation(self.n_qubits)?;
            if !self.ed_oracle && (target.label.is_some() || target.fidelity_mode.is_some()) {
                return bad(format!("target {i} refers to the spectrum but ed_oracle is off"));
            }
            for p in &target.penalties {
                if let Some(b) = p.beta {
                    if !(b > 0.0 && b.is_finite()) {
                        return bad(format!("target {i}: penalty weight must be positive, got {b}"));
                    }
                }
                match (p.kind, p.states.is_empty()) {
                    (PenaltyKind::Deflation, true) => {
                        return bad(format!("target {i}: DEFLATION needs a list of state labels"));
                    }
                    (PenaltyKind::Deflation, false) if !self.ed_oracle => {
                        return bad(format!("target {i}: DEFLATION states come from the spectrum; enable ed_oracle"));
                    }
                    (k, false) if k != PenaltyKind::Deflation => {
                        return bad(format!("target {i}: only DEFLATION takes states"));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}
