//! Fidelities, resource accounting, the energy-variance criterion and entangling power.

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::Circuit;
use crate::error::{Error, Result};
use crate::operators::{LabeledEigenstate, Operator, Spectrum};
use crate::optimizer::{derive_seed, sample_initial_params};
use crate::statevector::{dot, StateVector};

/// Eigenvalues of the reduced density below this contribute nothing to the entropy.
pub const ENTROPY_EIGENVALUE_FLOOR: f64 = 1e-14;
pub const ENTROPY_LOG_BASE: &str = "e";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FidelityMode {
    PureState,
    SubspaceProjector,
}

impl FidelityMode {
    /// Subspace mode for degenerate multiplets unless the run is confined to a
    /// single `S_z` sector in which the target eigenvector is unique.
    pub fn default_for(spectrum: &Spectrum, index: usize, sector_fixed: bool) -> FidelityMode {
        let members = same_spin_multiplet(spectrum, index);
        if members.len() <= 1 {
            return FidelityMode::PureState;
        }
        if sector_fixed {
            let Some(target) = spectrum.get(index) else { return FidelityMode::PureState };
            let same_sz = members.iter().filter(|m| m.s_z == target.s_z).count();
            if target.s_z.is_some() && same_sz == 1 {
                return FidelityMode::PureState;
            }
        }
        FidelityMode::SubspaceProjector
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetFidelity {
    pub label: String,
    pub fidelity: f64,
    /// `|<H> - E|`.
    pub energy_error: f64,
    pub mode: FidelityMode,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub targets: Vec<TargetFidelity>,
}

impl FidelityReport {
    pub fn min_fidelity(&self) -> f64 {
        self.targets.iter().map(|t| t.fidelity).fold(f64::INFINITY, f64::min)
    }

    pub fn max_energy_error(&self) -> f64 {
        self.targets.iter().map(|t| t.energy_error).fold(0.0, f64::max)
    }
}

/// `|<E|psi>|^2`.
pub fn fidelity_pure(state: &StateVector, target: &LabeledEigenstate) -> Result<f64> {
    Ok(state.inner(eigenvector(target)?)?.norm_sqr().min(1.0))
}

/// `<psi|P|psi>` with `P` the projector onto the given orthonormal eigenvectors.
pub fn fidelity_subspace(state: &StateVector, members: &[&LabeledEigenstate]) -> Result<f64> {
    let mut total = 0.0;
    for m in members {
        total += state.inner(eigenvector(m)?)?.norm_sqr();
    }
    Ok(total.min(1.0))
}

/// Fidelity of `state` to the spectrum entry `index` (1-based) in the given mode.
pub fn fidelity(state: &StateVector, spectrum: &Spectrum, index: usize, mode: FidelityMode) -> Result<f64> {
    let target = spectrum
        .get(index)
        .ok_or_else(|| Error::config(format!("spectrum has no state {index}")))?;
    match mode {
        FidelityMode::PureState => fidelity_pure(state, target),
        FidelityMode::SubspaceProjector => fidelity_subspace(state, &same_spin_multiplet(spectrum, index)),
    }
}

/// Fidelity and energy error of each output against its target.
pub fn fidelity_report(
    outputs: &[StateVector],
    energies: &[f64],
    spectrum: &Spectrum,
    targets: &[(usize, FidelityMode)],
) -> Result<FidelityReport> {
    if outputs.len() != targets.len() || energies.len() != targets.len() {
        return Err(Error::config(format!(
            "{} outputs and {} energies for {} targets",
            outputs.len(),
            energies.len(),
            targets.len()
        )));
    }
    let mut report = FidelityReport::default();
    for ((psi, &e), &(index, mode)) in outputs.iter().zip(energies).zip(targets) {
        let target = spectrum
            .get(index)
            .ok_or_else(|| Error::config(format!("spectrum has no state {index}")))?;
        report.targets.push(TargetFidelity {
            label: target.label.clone(),
            fidelity: fidelity(psi, spectrum, index, mode)?,
            energy_error: (e - target.energy).abs(),
            mode,
        });
    }
    Ok(report)
}

/// Members of the degenerate group of `index` that share its total spin.
pub fn same_spin_multiplet(spectrum: &Spectrum, index: usize) -> Vec<&LabeledEigenstate> {
    let Some(target) = spectrum.get(index) else { return Vec::new() };
    spectrum
        .multiplet(index)
        .into_iter()
        .filter(|m| match (m.s, target.s) {
            (Some(a), Some(b)) => (a - b).abs() < 1e-6,
            _ => true,
        })
        .collect()
}

fn eigenvector(target: &LabeledEigenstate) -> Result<&StateVector> {
    target
        .vector
        .as_ref()
        .ok_or_else(|| Error::config(format!("eigenvector of {} was not retained", target.label)))
}

/// `C_R = L * n_I`.
pub fn classical_resources(n_params: usize, n_iterations: usize) -> u64 {
    n_params as u64 * n_iterations as u64
}

/// Energy standard deviation and whether it is within `gap`.
pub fn convergence_margin(state: &StateVector, hamiltonian: &dyn Operator, gap: f64) -> Result<(f64, bool)> {
    if !(gap > 0.0) {
        return Err(Error::config(format!("energy gap must be positive, got {gap}")));
    }
    let h_psi = hamiltonian.apply(state)?;
    let norm = state.norm_sqr();
    let mean = dot(state.amplitudes(), h_psi.amplitudes()).re / norm;
    // ||(H - <H>) psi|| avoids the cancellation in <H^2> - <H>^2
    let residual: f64 =
        h_psi.amplitudes().iter().zip(state.amplitudes()).map(|(h, p)| (h - p * mean).norm_sqr()).sum();
    let std_dev = (residual / norm).sqrt();
    Ok((std_dev, std_dev <= gap))
}

/// Half-chain von Neumann entropy in natural-log units.
pub fn entanglement_entropy(state: &StateVector) -> Result<f64> {
    let rho = state.reduced_density_left()? / num_complex::Complex64::new(state.norm_sqr(), 0.0);
    let eig = SymmetricEigen::new(rho);
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|&&p| p > ENTROPY_EIGENVALUE_FLOOR)
        .map(|&p| -p * p.ln())
        .sum::<f64>()
        .max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglingPower {
    pub mean: f64,
    pub std_err: f64,
    pub n_samples: usize,
}

/// Monte-Carlo average of the half-chain entropy over uniformly random parameters.
///
/// Sample `i` draws its parameters from `derive_seed(seed, i)`, so the result does
/// not depend on the thread pool.
pub fn entangling_power(circuit: &Circuit, n_samples: usize, seed: u64) -> Result<EntanglingPower> {
    if !circuit.n_qubits.is_multiple_of(2) {
        return Err(Error::config(format!(
            "entangling power needs an even qubit count, got {}",
            circuit.n_qubits
        )));
    }
    if n_samples == 0 {
        return Err(Error::config("entangling power needs at least one sample"));
    }
    let input = circuit.input_state()?;
    let samples = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let theta = sample_initial_params(circuit.n_params, derive_seed(seed, i as u64));
            entanglement_entropy(&circuit.evaluate(&theta, &input)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std_err = if samples.len() > 1 {
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(EntanglingPower { mean, std_err, n_samples })
}

#[cfg(test)]
mod tests;
