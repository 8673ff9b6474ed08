use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix2 = [[C64; 2]; 2];
pub type Matrix4 = [[C64; 4]; 4];

/// Discriminant of [`Gate`], used for accounting and serialization summaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Phase,
    Cnot,
    #[serde(rename = "NGATE")]
    NGate,
    Rzz,
    Swap,
    X,
    H,
    #[serde(rename = "CUSTOM_2Q")]
    Custom2q,
}

/// A concrete gate with all angles bound.
///
/// Rotations follow `R_a(theta) = exp(+i theta sigma_a)`. The exchange gate
/// `NGate` is `exp(i(tx XX + ty YY + tz ZZ))` and `Rzz` is `exp(i theta ZZ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
#[allow(clippy::large_enum_variant)]
pub enum Gate {
    Rx { q: usize, theta: f64 },
    Ry { q: usize, theta: f64 },
    Rz { q: usize, theta: f64 },
    Phase { q: usize, theta: f64 },
    Cnot { control: usize, target: usize },
    #[serde(rename = "NGATE")]
    NGate { a: usize, b: usize, theta: [f64; 3] },
    Rzz { a: usize, b: usize, theta: f64 },
    Swap { a: usize, b: usize },
    X { q: usize },
    H { q: usize },
    #[serde(rename = "CUSTOM_2Q")]
    Custom2q { a: usize, b: usize, matrix: Matrix4 },
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::Rx { .. } => GateKind::Rx,
            Gate::Ry { .. } => GateKind::Ry,
            Gate::Rz { .. } => GateKind::Rz,
            Gate::Phase { .. } => GateKind::Phase,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::NGate { .. } => GateKind::NGate,
            Gate::Rzz { .. } => GateKind::Rzz,
            Gate::Swap { .. } => GateKind::Swap,
            Gate::X { .. } => GateKind::X,
            Gate::H { .. } => GateKind::H,
            Gate::Custom2q { .. } => GateKind::Custom2q,
        }
    }

    /// Target qubits; for CNOT the control comes first.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rx { q, .. }
            | Gate::Ry { q, .. }
            | Gate::Rz { q, .. }
            | Gate::Phase { q, .. }
            | Gate::X { q }
            | Gate::H { q } => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
            Gate::NGate { a, b, .. }
            | Gate::Rzz { a, b, .. }
            | Gate::Swap { a, b }
            | Gate::Custom2q { a, b, .. } => vec![a, b],
        }
    }

    /// Mutable view of the gate's angle slots (empty for fixed gates).
    pub fn angles_mut(&mut self) -> &mut [f64] {
        match self {
            Gate::Rx { theta, .. }
            | Gate::Ry { theta, .. }
            | Gate::Rz { theta, .. }
            | Gate::Phase { theta, .. }
            | Gate::Rzz { theta, .. } => std::slice::from_mut(theta),
            Gate::NGate { theta, .. } => &mut theta[..],
            _ => &mut [],
        }
    }

    pub fn angles(&self) -> &[f64] {
        match self {
            Gate::Rx { theta, .. }
            | Gate::Ry { theta, .. }
            | Gate::Rz { theta, .. }
            | Gate::Phase { theta, .. }
            | Gate::Rzz { theta, .. } => std::slice::from_ref(theta),
            Gate::NGate { theta, .. } => &theta[..],
            _ => &[],
        }
    }

    /// CNOT cost of realizing this gate with CNOTs and single-qubit rotations.
    pub fn cnot_cost(&self) -> usize {
        match self.kind() {
            GateKind::Cnot => 1,
            GateKind::Rzz => 2,
            GateKind::NGate | GateKind::Swap | GateKind::Custom2q => 3,
            _ => 0,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        if let Some(&q) = qs.iter().find(|&&q| q >= n_qubits) {
            return Err(Error::config(format!(
                "{:?} targets qubit {q} but the register has {n_qubits} qubits",
                self.kind()
            )));
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::config(format!(
                "{:?} has duplicate targets ({}, {})",
                self.kind(),
                qs[0],
                qs[1]
            )));
        }
        Ok(())
    }

    /// The inverse gate.
    pub fn inverse(&self) -> Gate {
        let mut g = self.clone();
        match &mut g {
            Gate::Custom2q { matrix, .. } => {
                let m = *matrix;
                for (i, row) in matrix.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = m[j][i].conj();
                    }
                }
            }
            other => other.angles_mut().iter_mut().for_each(|t| *t = -*t),
        }
        g
    }

    /// Local unitary for single-qubit gates.
    pub fn matrix_1q(&self) -> Option<Matrix2> {
        let i = C64::i();
        Some(match *self {
            Gate::Rx { theta, .. } => {
                let (s, c) = theta.sin_cos();
                [[c.into(), i * s], [i * s, c.into()]]
            }
            Gate::Ry { theta, .. } => {
                let (s, c) = theta.sin_cos();
                [[c.into(), s.into()], [(-s).into(), c.into()]]
            }
            Gate::Rz { theta, .. } => [[C64::cis(theta), ZERO], [ZERO, C64::cis(-theta)]],
            Gate::Phase { theta, .. } => [[ONE, ZERO], [ZERO, C64::cis(theta)]],
            Gate::X { .. } => [[ZERO, ONE], [ONE, ZERO]],
            Gate::H { .. } => {
                let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                [[h, h], [h, -h]]
            }
            _ => return None,
        })
    }

    /// Local unitary for two-qubit gates in the basis |q_a q_b> (first listed qubit is the high bit).
    pub fn matrix_2q(&self) -> Option<Matrix4> {
        let mut m = [[ZERO; 4]; 4];
        match *self {
            Gate::Cnot { .. } => {
                m[0][0] = ONE;
                m[1][1] = ONE;
                m[2][3] = ONE;
                m[3][2] = ONE;
            }
            Gate::Swap { .. } => {
                m[0][0] = ONE;
                m[1][2] = ONE;
                m[2][1] = ONE;
                m[3][3] = ONE;
            }
            Gate::Rzz { theta, .. } => {
                m[0][0] = C64::cis(theta);
                m[1][1] = C64::cis(-theta);
                m[2][2] = C64::cis(-theta);
                m[3][3] = C64::cis(theta);
            }
            Gate::NGate { theta, .. } => {
                let [(e, f), (g, h)] = ngate_blocks(theta);
                // {|00>, |11>} block and {|01>, |10>} block
                m[0][0] = e;
                m[0][3] = f;
                m[3][0] = f;
                m[3][3] = e;
                m[1][1] = g;
                m[1][2] = h;
                m[2][1] = h;
                m[2][2] = g;
            }
            Gate::Custom2q { matrix, .. } => m = matrix,
            _ => return None,
        }
        Some(m)
    }
}

/// The exchange gate decomposes into two 2x2 blocks of the form `[[d, o], [o, d]]`:
/// one on {|00>, |11>} (ZZ = +1) and one on {|01>, |10>} (ZZ = -1).
pub(crate) fn ngate_blocks([tx, ty, tz]: [f64; 3]) -> [(C64, C64); 2] {
    let i = C64::i();
    let even = C64::cis(tz);
    let odd = C64::cis(-tz);
    let (s1, c1) = (tx - ty).sin_cos();
    let (s2, c2) = (tx + ty).sin_cos();
    [(even * c1, even * i * s1), (odd * c2, odd * i * s2)]
}
