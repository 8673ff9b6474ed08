//! Cost functions: plain energy, weighted subspace search, symmetry penalties and deflation.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuits::{Circuit, InitSpec};
use crate::error::{Error, Result};
use crate::operators::{commutator_norm, Observable, Operator, ShiftedSquare};
use crate::optimizer::{Evaluation, Objective};
use crate::statevector::{dot, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PenaltyKind {
    /// `beta <S^2>^2`
    StotSqSquared,
    /// `beta <(S^2 - 2)^2>`
    StotShifted,
    /// `beta (<prod X> + 1)^2`
    FlipParity,
    /// `sum_j beta |<E_j|psi>|^2`
    Deflation,
}

impl PenaltyKind {
    pub fn default_beta(self) -> f64 {
        match self {
            PenaltyKind::StotSqSquared => 1000.0,
            PenaltyKind::StotShifted => 2.0,
            PenaltyKind::FlipParity => 1.0,
            PenaltyKind::Deflation => 1.0,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            PenaltyKind::StotSqSquared => "stot_sq_squared",
            PenaltyKind::StotShifted => "stot_shifted",
            PenaltyKind::FlipParity => "flip_parity",
            PenaltyKind::Deflation => "deflation",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyTerm {
    pub kind: PenaltyKind,
    pub beta: f64,
    /// Reference eigenstates, for deflation only.
    pub reference_states: Vec<StateVector>,
}

impl PenaltyTerm {
    pub fn new(kind: PenaltyKind, beta: f64) -> Self {
        PenaltyTerm { kind, beta, reference_states: Vec::new() }
    }

    pub fn deflation(beta: f64, reference_states: Vec<StateVector>) -> Self {
        PenaltyTerm { kind: PenaltyKind::Deflation, beta, reference_states }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config(format!("penalty beta must be positive, got {}", self.beta)));
        }
        match self.kind {
            PenaltyKind::Deflation => {
                for s in &self.reference_states {
                    if s.n_qubits() != n {
                        return Err(Error::config("deflation reference has the wrong register size"));
                    }
                    if (s.norm_sqr() - 1.0).abs() > 1e-8 {
                        return Err(Error::validation(format!(
                            "deflation reference has squared norm {}",
                            s.norm_sqr()
                        )));
                    }
                }
            }
            _ if !self.reference_states.is_empty() => {
                return Err(Error::config("reference states are only meaningful for deflation"));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Symmetry operators shared by the penalty terms of one objective.
struct PenaltyOps {
    s2: Observable,
    shifted: ShiftedSquare,
    flip: Observable,
}

impl PenaltyOps {
    fn new(n: usize) -> Self {
        let s2 = Observable::s_tot_sq(n);
        PenaltyOps { shifted: ShiftedSquare { base: s2.clone(), shift: 2.0 }, s2, flip: Observable::spin_flip_x(n) }
    }

    /// Penalty value and its derivative with respect to `conj(psi)`, added into `lambda`.
    fn accumulate(&self, term: &PenaltyTerm, psi: &StateVector, lambda: &mut [C64]) -> f64 {
        let amps = psi.amplitudes();
        let mut buf = vec![C64::new(0.0, 0.0); amps.len()];
        let beta = term.beta;
        match term.kind {
            PenaltyKind::StotSqSquared => {
                self.s2.apply_into(amps, &mut buf);
                let s = dot(amps, &buf).re;
                axpy(lambda, 2.0 * beta * s, &buf);
                beta * s * s
            }
            PenaltyKind::StotShifted => {
                self.shifted.apply_into(amps, &mut buf);
                axpy(lambda, beta, &buf);
                beta * dot(amps, &buf).re
            }
            PenaltyKind::FlipParity => {
                self.flip.apply_into(amps, &mut buf);
                let x = dot(amps, &buf).re;
                axpy(lambda, 2.0 * beta * (x + 1.0), &buf);
                beta * (x + 1.0).powi(2)
            }
            PenaltyKind::Deflation => {
                let mut value = 0.0;
                for e in &term.reference_states {
                    let overlap = dot(e.amplitudes(), amps);
                    value += beta * overlap.norm_sqr();
                    let c = overlap * beta;
                    lambda.iter_mut().zip(e.amplitudes()).for_each(|(l, a)| *l += c * a);
                }
                value
            }
        }
    }
}

fn axpy(y: &mut [C64], a: f64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// One output of a subspace search: its input, weight and penalties.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetSpec {
    pub init: InitSpec,
    pub weight: f64,
    pub penalties: Vec<PenaltyTerm>,
}

impl TargetSpec {
    pub fn new(init: InitSpec, weight: f64) -> Self {
        TargetSpec { init, weight, penalties: Vec::new() }
    }

    pub fn with_penalty(mut self, p: PenaltyTerm) -> Self {
        self.penalties.push(p);
        self
    }
}

/// Default weights `w_i = k + 1 - i` for `i = 1..=k`.
pub fn default_weights(k: usize) -> Vec<f64> {
    (1..=k).map(|i| (k + 1 - i) as f64).collect()
}

/// Per-target breakdown of one cost evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostBreakdown {
    pub cost: f64,
    pub grad: Vec<f64>,
    pub energies: Vec<f64>,
    /// `penalties[i]` lists `(kind, value)` for target `i`.
    pub penalties: Vec<Vec<(PenaltyKind, f64)>>,
}

/// Weighted subspace-search cost over one circuit and a set of orthogonal inputs.
pub struct SsvqeObjective<'a> {
    circuit: &'a Circuit,
    hamiltonian: &'a Observable,
    targets: Vec<TargetSpec>,
    inputs: Vec<StateVector>,
    ops: PenaltyOps,
}

impl<'a> SsvqeObjective<'a> {
    pub fn new(circuit: &'a Circuit, hamiltonian: &'a Observable, targets: Vec<TargetSpec>) -> Result<Self> {
        let n = circuit.n_qubits;
        if targets.is_empty() {
            return Err(Error::config("at least one target is required"));
        }
        if hamiltonian.n_qubits() != n {
            return Err(Error::config("Hamiltonian and circuit sizes differ"));
        }
        for w in targets.windows(2) {
            if w[1].weight >= w[0].weight {
                return Err(Error::config(format!(
                    "target weights must be strictly decreasing, got {} then {}",
                    w[0].weight, w[1].weight
                )));
            }
        }
        if let Some(t) = targets.iter().find(|t| !(t.weight > 0.0)) {
            return Err(Error::config(format!("target weight must be positive, got {}", t.weight)));
        }
        let ops = PenaltyOps::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for t in &targets {
            for p in &t.penalties {
                p.validate(n)?;
                if p.kind == PenaltyKind::FlipParity {
                    let probe = StateVector::random(n, &mut rng)?;
                    if commutator_norm(hamiltonian, &ops.flip, &probe)? > 1e-8 * hamiltonian.coefficient_norm() {
                        return Err(Error::validation("spin-flip penalty needs a Hamiltonian that commutes with prod X"));
                    }
                }
            }
        }
        let inputs = targets.iter().map(|t| t.init.state(n)).collect::<Result<Vec<_>>>()?;
        for i in 0..inputs.len() {
            for j in i + 1..inputs.len() {
                let ov = inputs[i].inner(&inputs[j])?.norm();
                if ov >= 1e-10 {
                    return Err(Error::validation(format!(
                        "inputs {i} and {j} are not orthogonal (|overlap| = {ov:.3e})"
                    )));
                }
            }
        }
        Ok(SsvqeObjective { circuit, hamiltonian, targets, inputs, ops })
    }

    pub fn targets(&self) -> &[TargetSpec] {
        &self.targets
    }

    pub fn inputs(&self) -> &[StateVector] {
        &self.inputs
    }

    /// Output state of target `i`.
    pub fn output(&self, theta: &[f64], i: usize) -> Result<StateVector> {
        self.circuit.evaluate(theta, &self.inputs[i])
    }

    pub fn breakdown(&self, theta: &[f64]) -> Result<CostBreakdown> {
        let mut out = CostBreakdown { grad: vec![0.0; self.circuit.n_params], ..Default::default() };
        for (t, input) in self.targets.iter().zip(&self.inputs) {
            let mut energy = 0.0;
            let mut pens = Vec::with_capacity(t.penalties.len());
            let (value, grad) = self.circuit.gradient_with(theta, input, |psi| {
                let mut lambda = vec![C64::new(0.0, 0.0); psi.dim()];
                self.hamiltonian.apply_into(psi.amplitudes(), &mut lambda);
                energy = dot(psi.amplitudes(), &lambda).re;
                let mut total = energy;
                for p in &t.penalties {
                    let v = self.ops.accumulate(p, psi, &mut lambda);
                    pens.push((p.kind, v));
                    total += v;
                }
                Ok((total, lambda))
            })?;
            out.cost += t.weight * value;
            out.grad.iter_mut().zip(&grad).for_each(|(a, g)| *a += t.weight * g);
            out.energies.push(energy);
            out.penalties.push(pens);
        }
        Ok(out)
    }
}

impl Objective for SsvqeObjective<'_> {
    fn n_params(&self) -> usize {
        self.circuit.n_params
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        let b = self.breakdown(theta)?;
        let mut aux = BTreeMap::new();
        for (i, pens) in b.penalties.iter().enumerate() {
            for (kind, v) in pens {
                *aux.entry(format!("{}_{i}", kind.key())).or_insert(0.0) += v;
            }
        }
        Ok(Evaluation { cost: b.cost, grad: b.grad, energies: b.energies, aux })
    }
}

/// `sum_i w_i (<H>_i + penalties_i)` with its gradient.
pub fn ssvqe_cost(
    circuit: &Circuit,
    theta: &[f64],
    hamiltonian: &Observable,
    targets: Vec<TargetSpec>,
) -> Result<CostBreakdown> {
    SsvqeObjective::new(circuit, hamiltonian, targets)?.breakdown(theta)
}

/// Value and gradient of a single penalty term on `U(theta)|input>`.
pub fn penalty_value_and_grad(
    circuit: &Circuit,
    theta: &[f64],
    input: &StateVector,
    term: &PenaltyTerm,
) -> Result<(f64, Vec<f64>)> {
    term.validate(circuit.n_qubits)?;
    let ops = PenaltyOps::new(circuit.n_qubits);
    circuit.gradient_with(theta, input, |psi| {
        let mut lambda = vec![C64::new(0.0, 0.0); psi.dim()];
        let v = ops.accumulate(term, psi, &mut lambda);
        Ok((v, lambda))
    })
}

/// `<H> + sum_i beta_i |<psi|E_i>|^2` with its gradient.
pub fn deflation_cost(
    circuit: &Circuit,
    theta: &[f64],
    input: &StateVector,
    hamiltonian: &Observable,
    known_states: &[StateVector],
    betas: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if known_states.len() != betas.len() {
        return Err(Error::config("one beta per known state is required"));
    }
    let terms = known_states
        .iter()
        .zip(betas)
        .map(|(s, &b)| {
            let t = PenaltyTerm::deflation(b, vec![s.clone()]);
            t.validate(circuit.n_qubits).map(|_| t)
        })
        .collect::<Result<Vec<_>>>()?;
    let ops = PenaltyOps::new(circuit.n_qubits);
    circuit.gradient_with(theta, input, |psi| {
        let mut lambda = vec![C64::new(0.0, 0.0); psi.dim()];
        hamiltonian.apply_into(psi.amplitudes(), &mut lambda);
        let mut value = dot(psi.amplitudes(), &lambda).re;
        for t in &terms {
            value += ops.accumulate(t, psi, &mut lambda);
        }
        Ok((value, lambda))
    })
}

#[cfg(test)]
mod tests;
