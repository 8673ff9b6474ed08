//! Hamiltonians, symmetry operators and exact diagonalization.
//!
//! Every [`Observable`] is a real-weighted Pauli sum. The standard spin-chain
//! operators also carry a [`FastPath`] tag which `apply` uses instead of the
//! term-by-term Pauli action; the two routes agree to rounding.

mod pauli;
mod spectrum;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::{dot, pauli_accumulate, qubit_mask, StateVector};

pub use pauli::{Pauli, PauliString, PauliTerm};
pub use spectrum::{diagonalize_labeled, LabeledEigenstate, Spectrum, DENSE_BLOCK_LIMIT};

/// Anything that acts linearly on a register's amplitudes.
pub trait Operator: Send + Sync {
    fn n_qubits(&self) -> usize;

    /// Overwrites `dst` with `O src`.
    fn apply_into(&self, src: &[C64], dst: &mut [C64]);

    fn is_hermitian(&self) -> bool {
        true
    }

    fn apply(&self, state: &StateVector) -> Result<StateVector> {
        check_size(self.n_qubits(), state)?;
        let mut out = vec![C64::new(0.0, 0.0); state.dim()];
        self.apply_into(state.amplitudes(), &mut out);
        StateVector::from_amplitudes(out)
    }

    /// `<psi|O|psi>`; the imaginary part is dropped.
    fn expectation(&self, state: &StateVector) -> Result<f64> {
        let out = self.apply(state)?;
        Ok(dot(state.amplitudes(), out.amplitudes()).re)
    }
}

fn check_size(n_qubits: usize, state: &StateVector) -> Result<()> {
    if state.n_qubits() != n_qubits {
        return Err(Error::config(format!(
            "operator acts on {n_qubits} qubits but the state has {}",
            state.n_qubits()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FastPath {
    HeisenbergChain { j: f64 },
    IsingTf { jz: f64, hx: f64 },
    SZ,
    STotSq,
    SpinFlipX,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
    fast_path: Option<FastPath>,
}

impl Observable {
    pub fn new(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::config("observable needs at least one qubit"));
        }
        if let Some(t) = terms.iter().find(|t| t.string.n_qubits() != n_qubits) {
            return Err(Error::config(format!(
                "Pauli string {} does not act on {n_qubits} qubits",
                t.string
            )));
        }
        if let Some(t) = terms.iter().find(|t| !t.coeff.is_finite()) {
            return Err(Error::validation(format!("non-finite coefficient on {}", t.string)));
        }
        Ok(Observable { n_qubits, terms, fast_path: None })
    }

    /// `J sum_i sigma^i . sigma^{i+1}` on an open chain.
    pub fn heisenberg_chain(n_qubits: usize, j: f64) -> Result<Self> {
        if n_qubits < 2 {
            return Err(Error::config(format!("Heisenberg chain needs >= 2 sites, got {n_qubits}")));
        }
        let mut terms = Vec::with_capacity(3 * (n_qubits - 1));
        for i in 0..n_qubits - 1 {
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                let string = PauliString::identity(n_qubits).with(i, p).with(i + 1, p);
                terms.push(PauliTerm { coeff: j, string });
            }
        }
        Ok(Observable { n_qubits, terms, fast_path: Some(FastPath::HeisenbergChain { j }) })
    }

    /// `J_z sum_i Z_i Z_{i+1} + h_x sum_i X_i` on an open chain.
    pub fn ising_transverse(n_qubits: usize, jz: f64, hx: f64) -> Result<Self> {
        if n_qubits < 2 {
            return Err(Error::config(format!("Ising chain needs >= 2 sites, got {n_qubits}")));
        }
        let id = PauliString::identity(n_qubits);
        let mut terms: Vec<PauliTerm> = (0..n_qubits - 1)
            .map(|i| PauliTerm {
                coeff: jz,
                string: id.clone().with(i, Pauli::Z).with(i + 1, Pauli::Z),
            })
            .collect();
        terms.extend((0..n_qubits).map(|i| PauliTerm { coeff: hx, string: id.clone().with(i, Pauli::X) }));
        Ok(Observable { n_qubits, terms, fast_path: Some(FastPath::IsingTf { jz, hx }) })
    }

    /// Total magnetization `S_z = 1/2 sum_i Z_i`.
    pub fn s_z(n_qubits: usize) -> Self {
        let terms = (0..n_qubits)
            .map(|i| PauliTerm { coeff: 0.5, string: PauliString::identity(n_qubits).with(i, Pauli::Z) })
            .collect();
        Observable { n_qubits, terms, fast_path: Some(FastPath::SZ) }
    }

    /// `S_tot^2 = S_x^2 + S_y^2 + S_z^2`.
    pub fn s_tot_sq(n_qubits: usize) -> Self {
        let mut terms = vec![PauliTerm { coeff: 0.75 * n_qubits as f64, string: PauliString::identity(n_qubits) }];
        for i in 0..n_qubits {
            for j in i + 1..n_qubits {
                for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                    let string = PauliString::identity(n_qubits).with(i, p).with(j, p);
                    terms.push(PauliTerm { coeff: 0.5, string });
                }
            }
        }
        Observable { n_qubits, terms, fast_path: Some(FastPath::STotSq) }
    }

    /// Global spin flip `prod_i X_i`.
    pub fn spin_flip_x(n_qubits: usize) -> Self {
        let string = PauliString::from_paulis(&vec![Pauli::X; n_qubits]);
        Observable { n_qubits, terms: vec![PauliTerm { coeff: 1.0, string }], fast_path: Some(FastPath::SpinFlipX) }
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn fast_path(&self) -> Option<FastPath> {
        self.fast_path
    }

    /// Drops the fast path so `apply` goes term by term.
    pub fn without_fast_path(&self) -> Self {
        Observable { fast_path: None, ..self.clone() }
    }

    /// `sum |c_k|`, an upper bound on the spectral norm.
    pub fn coefficient_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    /// Term-by-term Pauli action, ignoring any fast path.
    pub fn apply_generic_into(&self, src: &[C64], dst: &mut [C64]) {
        dst.fill(C64::new(0.0, 0.0));
        for t in &self.terms {
            let (x, z, ny) = t.string.masks();
            pauli_accumulate(src, dst, x, z, ny, t.coeff);
        }
    }

    pub fn apply_generic(&self, state: &StateVector) -> Result<StateVector> {
        check_size(self.n_qubits, state)?;
        let mut out = vec![C64::new(0.0, 0.0); state.dim()];
        self.apply_generic_into(state.amplitudes(), &mut out);
        StateVector::from_amplitudes(out)
    }

    pub fn expectation_generic(&self, state: &StateVector) -> Result<f64> {
        let out = self.apply_generic(state)?;
        Ok(dot(state.amplitudes(), out.amplitudes()).re)
    }

    /// Dense matrix in the computational basis.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        let mut col = vec![C64::new(0.0, 0.0); dim];
        let mut e = vec![C64::new(0.0, 0.0); dim];
        for j in 0..dim {
            e[j] = C64::new(1.0, 0.0);
            self.apply_generic_into(&e, &mut col);
            e[j] = C64::new(0.0, 0.0);
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }
}

impl Operator for Observable {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn apply_into(&self, src: &[C64], dst: &mut [C64]) {
        let n = self.n_qubits;
        match self.fast_path {
            None => self.apply_generic_into(src, dst),
            Some(FastPath::HeisenbergChain { j }) => {
                // sigma.sigma = 2 SWAP - I on each bond
                let bonds = (n - 1) as f64;
                for (i, d) in dst.iter_mut().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..n - 1 {
                        acc += src[swap_bits(i, qubit_mask(n, b), qubit_mask(n, b + 1))];
                    }
                    *d = j * (2.0 * acc - bonds * src[i]);
                }
            }
            Some(FastPath::IsingTf { jz, hx }) => {
                for (i, d) in dst.iter_mut().enumerate() {
                    let zz: i32 = (0..n - 1)
                        .map(|b| {
                            let same = ((i >> (n - 1 - b)) ^ (i >> (n - 2 - b))) & 1 == 0;
                            if same { 1 } else { -1 }
                        })
                        .sum();
                    let flips: C64 = (0..n).map(|q| src[i ^ qubit_mask(n, q)]).sum();
                    *d = jz * zz as f64 * src[i] + hx * flips;
                }
            }
            Some(FastPath::SZ) => {
                for (i, (d, s)) in dst.iter_mut().zip(src).enumerate() {
                    *d = s * (0.5 * (n as f64 - 2.0 * i.count_ones() as f64));
                }
            }
            Some(FastPath::STotSq) => {
                // S^2 = (3N/4 - M/2) I + sum_{i<j} SWAP_ij with M = N(N-1)/2 pairs
                let pairs = (n * (n - 1) / 2) as f64;
                let diag = 0.75 * n as f64 - 0.5 * pairs;
                for (k, d) in dst.iter_mut().enumerate() {
                    let mut acc = diag * src[k];
                    for a in 0..n {
                        for b in a + 1..n {
                            acc += src[swap_bits(k, qubit_mask(n, a), qubit_mask(n, b))];
                        }
                    }
                    *d = acc;
                }
            }
            Some(FastPath::SpinFlipX) => {
                let all = (1usize << n) - 1;
                for (i, d) in dst.iter_mut().enumerate() {
                    *d = src[i ^ all];
                }
            }
        }
    }
}

#[inline]
fn swap_bits(i: usize, ma: usize, mb: usize) -> usize {
    if (i & ma == 0) == (i & mb == 0) {
        i
    } else {
        i ^ (ma | mb)
    }
}

/// `(O - shift)^2`, applied as two successive applications of `O - shift`.
#[derive(Clone, Debug)]
pub struct ShiftedSquare {
    pub base: Observable,
    pub shift: f64,
}

impl Operator for ShiftedSquare {
    fn n_qubits(&self) -> usize {
        self.base.n_qubits
    }

    fn apply_into(&self, src: &[C64], dst: &mut [C64]) {
        let mut tmp = vec![C64::new(0.0, 0.0); src.len()];
        self.base.apply_into(src, &mut tmp);
        tmp.iter_mut().zip(src).for_each(|(t, s)| *t -= self.shift * s);
        self.base.apply_into(&tmp, dst);
        dst.iter_mut().zip(&tmp).for_each(|(d, t)| *d -= self.shift * t);
    }
}

/// `sum_i beta_i |E_i><E_i|`.
#[derive(Clone, Debug)]
pub struct ProjectorSum {
    n_qubits: usize,
    terms: Vec<(f64, StateVector)>,
}

impl ProjectorSum {
    pub fn new(n_qubits: usize, terms: Vec<(f64, StateVector)>) -> Result<Self> {
        for (beta, s) in &terms {
            check_size(n_qubits, s)?;
            let norm = s.norm_sqr();
            if (norm - 1.0).abs() > 1e-8 {
                return Err(Error::validation(format!(
                    "projector reference state has squared norm {norm}, expected 1"
                )));
            }
            if !beta.is_finite() {
                return Err(Error::validation("non-finite projector weight"));
            }
        }
        Ok(ProjectorSum { n_qubits, terms })
    }
}

impl Operator for ProjectorSum {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn apply_into(&self, src: &[C64], dst: &mut [C64]) {
        dst.fill(C64::new(0.0, 0.0));
        for (beta, e) in &self.terms {
            let overlap = dot(e.amplitudes(), src) * *beta;
            dst.iter_mut().zip(e.amplitudes()).for_each(|(d, a)| *d += overlap * a);
        }
    }
}

/// Real linear combination of borrowed operators.
pub struct LinearCombination<'a> {
    n_qubits: usize,
    parts: Vec<(f64, &'a dyn Operator)>,
}

impl<'a> LinearCombination<'a> {
    pub fn new(n_qubits: usize) -> Self {
        LinearCombination { n_qubits, parts: Vec::new() }
    }

    pub fn push(&mut self, coeff: f64, op: &'a dyn Operator) -> Result<()> {
        if op.n_qubits() != self.n_qubits {
            return Err(Error::config(format!(
                "cannot combine a {}-qubit operator into a {}-qubit sum",
                op.n_qubits(),
                self.n_qubits
            )));
        }
        self.parts.push((coeff, op));
        Ok(())
    }

    pub fn with(mut self, coeff: f64, op: &'a dyn Operator) -> Result<Self> {
        self.push(coeff, op)?;
        Ok(self)
    }
}

impl Operator for LinearCombination<'_> {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn apply_into(&self, src: &[C64], dst: &mut [C64]) {
        dst.fill(C64::new(0.0, 0.0));
        let mut tmp = vec![C64::new(0.0, 0.0); src.len()];
        for &(c, op) in &self.parts {
            if c == 0.0 {
                continue;
            }
            op.apply_into(src, &mut tmp);
            dst.iter_mut().zip(&tmp).for_each(|(d, t)| *d += c * t);
        }
    }

    fn is_hermitian(&self) -> bool {
        self.parts.iter().all(|(_, op)| op.is_hermitian())
    }
}

/// An explicit matrix, mostly for tests and small custom operators.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    n_qubits: usize,
    matrix: DMatrix<C64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() || dim < 2 || !dim.is_power_of_two() {
            return Err(Error::config(format!(
                "dense operator must be square with power-of-two size, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DenseOperator { n_qubits: dim.trailing_zeros() as usize, matrix })
    }
}

impl Operator for DenseOperator {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn apply_into(&self, src: &[C64], dst: &mut [C64]) {
        for (i, d) in dst.iter_mut().enumerate() {
            *d = (0..src.len()).map(|j| self.matrix[(i, j)] * src[j]).sum();
        }
    }

    fn is_hermitian(&self) -> bool {
        (&self.matrix - self.matrix.adjoint()).norm() <= 1e-12 * self.matrix.norm().max(1.0)
    }
}

/// `||(AB - BA) psi||`.
pub fn commutator_norm(a: &dyn Operator, b: &dyn Operator, state: &StateVector) -> Result<f64> {
    let ab = a.apply(&b.apply(state)?)?;
    let ba = b.apply(&a.apply(state)?)?;
    Ok(ab
        .amplitudes()
        .iter()
        .zip(ba.amplitudes())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt())
}
