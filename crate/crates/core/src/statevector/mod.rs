//! Dense statevector simulation.
//!
//! Qubit 0 is the most significant bit of the basis index, so the ket label
//! `|q0 q1 ... q_{n-1}>` reads like the binary expansion of the index.

mod gate;
mod kernels;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gate::{Gate, GateKind, Matrix2, Matrix4};
#[cfg(test)]
pub(crate) use kernels::apply_generator;
pub(crate) use kernels::{apply_unchecked, generator_overlap, i_pow, pauli_accumulate};

/// Largest register this simulator will allocate.
pub const MAX_QUBITS: usize = 24;

/// Bit mask of qubit `q` in an `n`-qubit basis index.
#[inline]
pub fn qubit_mask(n_qubits: usize, q: usize) -> usize {
    1 << (n_qubits - 1 - q)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis_index(n_qubits, 0)
    }

    pub fn basis_index(n_qubits: usize, index: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::config(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// Computational basis state from a bit per qubit, qubit 0 first.
    pub fn basis(n_qubits: usize, bits: &[u8]) -> Result<Self> {
        if bits.len() != n_qubits {
            return Err(Error::config(format!(
                "bitstring has length {} but the register has {n_qubits} qubits",
                bits.len()
            )));
        }
        let mut index = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(Error::config(format!("bit value {b} is not 0 or 1")));
            }
            index = (index << 1) | b as usize;
        }
        Self::basis_index(n_qubits, index)
    }

    /// Product of two-qubit singlets `(|01> - |10>)/sqrt 2` on pairs (0,1), (2,3), ...
    pub fn singlet_product(n_qubits: usize) -> Result<Self> {
        if !n_qubits.is_multiple_of(2) || n_qubits == 0 {
            return Err(Error::config(format!(
                "singlet product needs an even, nonzero qubit count, got {n_qubits}"
            )));
        }
        check_register(n_qubits)?;
        let pairs = n_qubits / 2;
        let dim = 1usize << n_qubits;
        let amp = (0.5f64).powf(pairs as f64 / 2.0);
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        // each pair contributes |01> (+) or |10> (-)
        for choice in 0..(1usize << pairs) {
            let mut index = 0usize;
            let mut sign = 1.0;
            for p in 0..pairs {
                let flipped = (choice >> (pairs - 1 - p)) & 1 == 1;
                index <<= 2;
                if flipped {
                    index |= 0b10;
                    sign = -sign;
                } else {
                    index |= 0b01;
                }
            }
            amplitudes[index] = C64::new(sign * amp, 0.0);
        }
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// `|+>^n`.
    pub fn plus_product(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        let amp = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(StateVector { n_qubits, amplitudes: vec![amp; dim] })
    }

    /// Random normalized state with amplitudes drawn uniformly from the unit box.
    pub fn random<R: rand::Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        check_register(n_qubits)?;
        let amplitudes = (0..1usize << n_qubits)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut s = StateVector { n_qubits, amplitudes };
        s.normalize();
        Ok(s)
    }

    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::config(format!(
                "amplitude vector length {dim} is not a power of two >= 2"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_register(n_qubits)?;
        Ok(StateVector { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm; returns the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            let inv = 1.0 / norm;
            self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        }
        norm
    }

    /// `<self|other>`, conjugating `self`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_same_size(other)?;
        Ok(dot(&self.amplitudes, &other.amplitudes))
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        apply_unchecked(self.n_qubits, &mut self.amplitudes, gate);
        Ok(())
    }

    /// Consuming form of [`apply`](Self::apply).
    pub fn apply_gate(mut self, gate: &Gate) -> Result<Self> {
        self.apply(gate)?;
        Ok(self)
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    /// `rho_L = Tr_R |psi><psi|` for the left half (qubits `0..n/2`).
    pub fn reduced_density_left(&self) -> Result<DMatrix<C64>> {
        if !self.n_qubits.is_multiple_of(2) {
            return Err(Error::config(format!(
                "half-chain reduced density needs an even qubit count, got {}",
                self.n_qubits
            )));
        }
        let right = 1usize << (self.n_qubits / 2);
        let left = self.dim() / right;
        // psi reshaped as a (left x right) matrix M; rho_L = M M^dagger
        let m = DMatrix::from_fn(left, right, |a, r| self.amplitudes[a * right + r]);
        Ok(&m * m.adjoint())
    }

    pub(crate) fn check_same_size(&self, other: &StateVector) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::config(format!(
                "register size mismatch: {} vs {} qubits",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(())
    }
}

/// `sum conj(a_i) b_i`.
#[inline]
pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::config(format!(
            "register size {n_qubits} outside supported range 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}
