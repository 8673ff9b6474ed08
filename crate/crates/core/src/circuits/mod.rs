//! Parameterized circuits, the ansatz families, resource counting and adjoint gradients.

mod init;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::Operator;
use crate::statevector::{apply_unchecked, dot, generator_overlap, Gate, StateVector};

pub use init::InitSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Family {
    HardwareEfficient,
    SzConserving,
    StotConserving,
    IsingHva,
    Custom,
}

/// Angle slot `angle` of the gate takes the value of trainable parameter `param`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub angle: usize,
    pub param: usize,
}

/// A gate template whose unbound angles are fixed constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamGate {
    pub gate: Gate,
    pub bindings: Vec<Binding>,
}

impl ParamGate {
    pub fn fixed(gate: Gate) -> Self {
        ParamGate { gate, bindings: Vec::new() }
    }

    /// Every angle of `gate` bound to the same parameter.
    pub fn tied(gate: Gate, param: usize) -> Self {
        let bindings = (0..gate.angles().len()).map(|angle| Binding { angle, param }).collect();
        ParamGate { gate, bindings }
    }

    fn bind(&self, theta: &[f64]) -> Gate {
        let mut g = self.gate.clone();
        let angles = g.angles_mut();
        for b in &self.bindings {
            angles[b.angle] = theta[b.param];
        }
        g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCount {
    pub cnot_body: usize,
    pub cnot_init: usize,
    pub n_params: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub family: Family,
    pub n_qubits: usize,
    pub layers: usize,
    pub n_params: usize,
    pub init: InitSpec,
    /// Fixed gates preparing `init` from `|0...0>`.
    pub prep: Vec<Gate>,
    pub gates: Vec<ParamGate>,
}

fn check_layers(layers: usize) -> Result<()> {
    if layers < 1 {
        return Err(Error::config("ansatz needs at least one layer"));
    }
    Ok(())
}

fn check_qubits(n: usize, min: usize) -> Result<()> {
    if n < min || n > crate::statevector::MAX_QUBITS {
        return Err(Error::config(format!("unsupported qubit count {n} for this ansatz")));
    }
    Ok(())
}

/// Brickwork of equal-angle exchange gates: pairs (0,1),(2,3),... then (1,2),(3,4),...
fn exchange_brickwork(n: usize, next: &mut usize, out: &mut Vec<ParamGate>) {
    for start in [0, 1] {
        for a in (start..n.saturating_sub(1)).step_by(2) {
            out.push(ParamGate::tied(Gate::NGate { a, b: a + 1, theta: [0.0; 3] }, *next));
            *next += 1;
        }
    }
}

impl Circuit {
    /// Checked constructor for arbitrary gate lists.
    pub fn custom(n_qubits: usize, init: InitSpec, gates: Vec<ParamGate>, n_params: usize) -> Result<Self> {
        check_qubits(n_qubits, 1)?;
        let prep = init.preparation(n_qubits)?;
        let mut used = vec![false; n_params];
        for pg in &gates {
            pg.gate.validate(n_qubits)?;
            let n_angles = pg.gate.angles().len();
            for b in &pg.bindings {
                if b.angle >= n_angles {
                    return Err(Error::config(format!(
                        "binding to angle slot {} of {:?}, which has {n_angles}",
                        b.angle,
                        pg.gate.kind()
                    )));
                }
                if b.param >= n_params {
                    return Err(Error::config(format!("parameter index {} >= {n_params}", b.param)));
                }
                used[b.param] = true;
            }
        }
        if let Some(p) = used.iter().position(|u| !u) {
            return Err(Error::config(format!("parameter {p} is not referenced by any gate")));
        }
        Ok(Circuit { family: Family::Custom, n_qubits, layers: 0, n_params, init, prep, gates })
    }

    /// A circuit with no parameterized body, i.e. zero layers of `family`.
    pub fn empty(n_qubits: usize, family: Family, init: InitSpec) -> Result<Self> {
        check_qubits(n_qubits, 1)?;
        let prep = init.preparation(n_qubits)?;
        Ok(Circuit { family, n_qubits, layers: 0, n_params: 0, init, prep, gates: Vec::new() })
    }

    /// RY, RZ on every qubit, then per layer a CNOT chain followed by RY, RZ on every qubit.
    pub fn hardware_efficient(n_qubits: usize, layers: usize) -> Result<Self> {
        check_layers(layers)?;
        check_qubits(n_qubits, 2)?;
        let mut gates = Vec::new();
        let mut next = 0;
        let rotations = |gates: &mut Vec<ParamGate>, next: &mut usize| {
            for q in 0..n_qubits {
                gates.push(ParamGate::tied(Gate::Ry { q, theta: 0.0 }, *next));
                gates.push(ParamGate::tied(Gate::Rz { q, theta: 0.0 }, *next + 1));
                *next += 2;
            }
        };
        rotations(&mut gates, &mut next);
        for _ in 0..layers {
            for q in 0..n_qubits - 1 {
                gates.push(ParamGate::fixed(Gate::Cnot { control: q, target: q + 1 }));
            }
            rotations(&mut gates, &mut next);
        }
        Self::family_circuit(Family::HardwareEfficient, n_qubits, layers, next, InitSpec::Neel, gates)
    }

    /// Exchange brickwork plus one PHASE per qubit in every layer.
    pub fn sz_conserving(n_qubits: usize, layers: usize) -> Result<Self> {
        check_layers(layers)?;
        check_qubits(n_qubits, 2)?;
        let mut gates = Vec::new();
        let mut next = 0;
        for _ in 0..layers {
            exchange_brickwork(n_qubits, &mut next, &mut gates);
            for q in 0..n_qubits {
                gates.push(ParamGate::tied(Gate::Phase { q, theta: 0.0 }, next));
                next += 1;
            }
        }
        Self::family_circuit(Family::SzConserving, n_qubits, layers, next, InitSpec::Neel, gates)
    }

    /// Exchange brickwork only; the input fixes the total spin.
    pub fn stot_conserving(n_qubits: usize, layers: usize, init: InitSpec) -> Result<Self> {
        check_layers(layers)?;
        check_qubits(n_qubits, 2)?;
        if !n_qubits.is_multiple_of(2) {
            return Err(Error::config(format!("total-spin ansatz needs an even qubit count, got {n_qubits}")));
        }
        if !matches!(
            init,
            InitSpec::SingletProduct | InitSpec::TripletFlip { .. } | InitSpec::OrthoSinglet { .. }
        ) {
            return Err(Error::config(format!("total-spin ansatz cannot start from {init:?}")));
        }
        let mut gates = Vec::new();
        let mut next = 0;
        for _ in 0..layers {
            exchange_brickwork(n_qubits, &mut next, &mut gates);
        }
        Self::family_circuit(Family::StotConserving, n_qubits, layers, next, init, gates)
    }

    /// ZZ rotations on neighbouring pairs followed by RX on every qubit, from `|+>^n`.
    pub fn ising_hva(n_qubits: usize, layers: usize) -> Result<Self> {
        check_layers(layers)?;
        check_qubits(n_qubits, 2)?;
        let mut gates = Vec::new();
        let mut next = 0;
        for _ in 0..layers {
            for a in 0..n_qubits - 1 {
                gates.push(ParamGate::tied(Gate::Rzz { a, b: a + 1, theta: 0.0 }, next));
                next += 1;
            }
            for q in 0..n_qubits {
                gates.push(ParamGate::tied(Gate::Rx { q, theta: 0.0 }, next));
                next += 1;
            }
        }
        Self::family_circuit(Family::IsingHva, n_qubits, layers, next, InitSpec::PlusProduct, gates)
    }

    fn family_circuit(
        family: Family,
        n_qubits: usize,
        layers: usize,
        n_params: usize,
        init: InitSpec,
        gates: Vec<ParamGate>,
    ) -> Result<Self> {
        let prep = init.preparation(n_qubits)?;
        Ok(Circuit { family, n_qubits, layers, n_params, init, prep, gates })
    }

    /// Same body, different input preparation.
    pub fn with_init(&self, init: InitSpec) -> Result<Self> {
        let prep = init.preparation(self.n_qubits)?;
        Ok(Circuit { init, prep, ..self.clone() })
    }

    /// The state produced by `prep`.
    pub fn input_state(&self) -> Result<StateVector> {
        let mut s = StateVector::zero(self.n_qubits)?;
        s.apply_all(&self.prep)?;
        Ok(s)
    }

    pub fn bound_gates(&self, theta: &[f64]) -> Result<Vec<Gate>> {
        self.check_theta(theta)?;
        Ok(self.gates.iter().map(|g| g.bind(theta)).collect())
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::config(format!(
                "circuit has {} parameters but {} were supplied",
                self.n_params,
                theta.len()
            )));
        }
        Ok(())
    }

    fn check_input(&self, input: &StateVector) -> Result<()> {
        if input.n_qubits() != self.n_qubits {
            return Err(Error::config(format!(
                "circuit acts on {} qubits but the input has {}",
                self.n_qubits,
                input.n_qubits()
            )));
        }
        Ok(())
    }

    /// `U(theta) |input>`; `prep` is not applied.
    pub fn evaluate(&self, theta: &[f64], input: &StateVector) -> Result<StateVector> {
        self.check_theta(theta)?;
        self.check_input(input)?;
        let mut out = input.clone();
        let amps = out.amplitudes_mut();
        for g in &self.gates {
            apply_unchecked(self.n_qubits, amps, &g.bind(theta));
        }
        Ok(out)
    }

    /// `<psi(theta)|obs|psi(theta)>` and its gradient.
    pub fn gradient(&self, theta: &[f64], input: &StateVector, obs: &dyn Operator) -> Result<(f64, Vec<f64>)> {
        if !obs.is_hermitian() {
            return Err(Error::validation("gradient requires a Hermitian observable"));
        }
        if obs.n_qubits() != self.n_qubits {
            return Err(Error::config("observable and circuit sizes differ"));
        }
        self.gradient_with(theta, input, |psi| {
            let mut lambda = vec![C64::new(0.0, 0.0); psi.dim()];
            obs.apply_into(psi.amplitudes(), &mut lambda);
            Ok((dot(psi.amplitudes(), &lambda).re, lambda))
        })
    }

    /// Adjoint sweep for a general real cost `f(psi)`.
    ///
    /// `cost` returns `f` together with `lambda = df/d(conj psi)`; for
    /// `f = <psi|A|psi>` that is `A psi`.
    pub fn gradient_with<F>(&self, theta: &[f64], input: &StateVector, cost: F) -> Result<(f64, Vec<f64>)>
    where
        F: FnOnce(&StateVector) -> Result<(f64, Vec<C64>)>,
    {
        let bound = self.bound_gates(theta)?;
        self.check_input(input)?;
        let n = self.n_qubits;
        let mut phi = input.clone();
        for g in &bound {
            apply_unchecked(n, phi.amplitudes_mut(), g);
        }
        let (value, mut lambda) = cost(&phi)?;
        if lambda.len() != phi.dim() {
            return Err(Error::config("cost gradient has the wrong dimension"));
        }
        let mut phi = phi.into_amplitudes();
        let mut grad = vec![0.0; self.n_params];
        for (pg, g) in self.gates.iter().zip(&bound).rev() {
            for b in &pg.bindings {
                // d/dtheta <psi|A|psi> = 2 Re <lambda| i G |phi> = -2 Im <lambda|G|phi>
                grad[b.param] -= 2.0 * generator_overlap(n, g, b.angle, &lambda, &phi).im;
            }
            let inv = g.inverse();
            apply_unchecked(n, &mut phi, &inv);
            apply_unchecked(n, &mut lambda, &inv);
        }
        Ok((value, grad))
    }

    pub fn count_resources(&self) -> ResourceCount {
        ResourceCount {
            cnot_body: self.gates.iter().map(|g| g.gate.cnot_cost()).sum(),
            cnot_init: self.prep.iter().map(Gate::cnot_cost).sum(),
            n_params: self.n_params,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serialization cannot fail")
    }
}
