use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::{Gate, StateVector};

/// How a circuit's input register is prepared from `|0...0>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InitSpec {
    Zero,
    /// Computational basis state, qubit 0 first.
    Basis { bits: Vec<u8> },
    /// `|0101...>`.
    Neel,
    /// `|1010...>`.
    AntiNeel,
    /// Singlets `(|01> - |10>)/sqrt 2` on pairs (0,1), (2,3), ...
    SingletProduct,
    /// Singlet product with pair `pair` replaced by the triplet member of magnetization `s_z`.
    TripletFlip { pair: usize, s_z: i8 },
    /// Variant 0 is the singlet product; variant 1 is an orthogonal s=0 state on qubits 0..4.
    OrthoSinglet { variant: u8 },
    /// `|+>^n`.
    PlusProduct,
    /// `|->|+>^{n-1}`, the odd-parity partner of `PlusProduct` under the global spin flip.
    PlusProductOdd,
}

/// Equal-angle exchange rotations taking two adjacent singlets to the other 4-qubit singlet.
fn ortho_singlet_angles() -> [f64; 3] {
    [
        std::f64::consts::FRAC_PI_4,
        (-1.0f64 / 3.0).acos() / 4.0,
        (1.0f64 / 3.0).acos() / 4.0,
    ]
}

fn singlet_pair(a: usize, out: &mut Vec<Gate>) {
    let b = a + 1;
    out.push(Gate::X { q: a });
    out.push(Gate::X { q: b });
    out.push(Gate::H { q: a });
    out.push(Gate::Cnot { control: a, target: b });
}

fn require_even(n: usize, what: &str) -> Result<()> {
    if !n.is_multiple_of(2) || n == 0 {
        return Err(Error::config(format!("{what} needs an even qubit count, got {n}")));
    }
    Ok(())
}

impl InitSpec {
    /// Gates preparing this state from `|0...0>`.
    pub fn preparation(&self, n: usize) -> Result<Vec<Gate>> {
        let mut g = Vec::new();
        match self {
            InitSpec::Zero => {}
            InitSpec::Basis { bits } => {
                if bits.len() != n {
                    return Err(Error::config(format!(
                        "basis bitstring has length {} for {n} qubits",
                        bits.len()
                    )));
                }
                for (q, &b) in bits.iter().enumerate() {
                    match b {
                        0 => {}
                        1 => g.push(Gate::X { q }),
                        _ => return Err(Error::config(format!("bit value {b} is not 0 or 1"))),
                    }
                }
            }
            InitSpec::Neel => g.extend((1..n).step_by(2).map(|q| Gate::X { q })),
            InitSpec::AntiNeel => g.extend((0..n).step_by(2).map(|q| Gate::X { q })),
            InitSpec::SingletProduct => {
                require_even(n, "singlet product")?;
                (0..n).step_by(2).for_each(|a| singlet_pair(a, &mut g));
            }
            &InitSpec::TripletFlip { pair, s_z } => {
                require_even(n, "triplet flip")?;
                if pair >= n / 2 {
                    return Err(Error::config(format!("pair {pair} out of range for {n} qubits")));
                }
                for a in (0..n).step_by(2) {
                    if a / 2 != pair {
                        singlet_pair(a, &mut g);
                        continue;
                    }
                    let b = a + 1;
                    match s_z {
                        0 => {
                            g.push(Gate::X { q: b });
                            g.push(Gate::H { q: a });
                            g.push(Gate::Cnot { control: a, target: b });
                        }
                        1 => {}
                        -1 => {
                            g.push(Gate::X { q: a });
                            g.push(Gate::X { q: b });
                        }
                        other => {
                            return Err(Error::config(format!("triplet s_z must be -1, 0 or 1, got {other}")))
                        }
                    }
                }
            }
            &InitSpec::OrthoSinglet { variant } => {
                require_even(n, "orthogonal singlet")?;
                (0..n).step_by(2).for_each(|a| singlet_pair(a, &mut g));
                match variant {
                    0 => {}
                    1 => {
                        if n < 4 {
                            return Err(Error::config("orthogonal singlet variant 1 needs at least 4 qubits"));
                        }
                        let [p1, p2, p3] = ortho_singlet_angles();
                        g.push(Gate::NGate { a: 1, b: 2, theta: [p1; 3] });
                        g.push(Gate::NGate { a: 0, b: 1, theta: [p2; 3] });
                        g.push(Gate::NGate { a: 1, b: 2, theta: [p3; 3] });
                    }
                    v => return Err(Error::config(format!("unknown orthogonal singlet variant {v}"))),
                }
            }
            InitSpec::PlusProduct => g.extend((0..n).map(|q| Gate::H { q })),
            InitSpec::PlusProductOdd => {
                g.push(Gate::X { q: 0 });
                g.extend((0..n).map(|q| Gate::H { q }));
            }
        }
        Ok(g)
    }

    pub fn state(&self, n: usize) -> Result<StateVector> {
        let mut s = StateVector::zero(n)?;
        s.apply_all(&self.preparation(n)?)?;
        Ok(s)
    }
}
