use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::qubit_mask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Tensor product of single-qubit Paulis, stored as X/Z bit masks over basis indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct PauliString {
    n_qubits: usize,
    xmask: usize,
    zmask: usize,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        PauliString { n_qubits, xmask: 0, zmask: 0 }
    }

    pub fn from_paulis(paulis: &[Pauli]) -> Self {
        let n = paulis.len();
        let mut s = PauliString::identity(n);
        for (q, &p) in paulis.iter().enumerate() {
            s = s.with(q, p);
        }
        s
    }

    /// Sets the factor on qubit `q`, replacing what was there.
    pub fn with(mut self, q: usize, p: Pauli) -> Self {
        let m = qubit_mask(self.n_qubits, q);
        self.xmask &= !m;
        self.zmask &= !m;
        match p {
            Pauli::I => {}
            Pauli::X => self.xmask |= m,
            Pauli::Z => self.zmask |= m,
            Pauli::Y => {
                self.xmask |= m;
                self.zmask |= m;
            }
        }
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn get(&self, q: usize) -> Pauli {
        let m = qubit_mask(self.n_qubits, q);
        match (self.xmask & m != 0, self.zmask & m != 0) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (false, true) => Pauli::Z,
            (true, true) => Pauli::Y,
        }
    }

    pub(crate) fn masks(&self) -> (usize, usize, u32) {
        (self.xmask, self.zmask, (self.xmask & self.zmask).count_ones())
    }

    /// Whether this string maps every basis state to one with the same number of 1 bits.
    pub fn is_diagonal(&self) -> bool {
        self.xmask == 0
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits {
            let c = match self.get(q) {
                Pauli::I => 'I',
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let paulis = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::config(format!("invalid Pauli label '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if paulis.is_empty() {
            return Err(Error::config("empty Pauli string"));
        }
        Ok(PauliString::from_paulis(&paulis))
    }
}

impl From<PauliString> for String {
    fn from(p: PauliString) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for PauliString {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub string: PauliString,
}
