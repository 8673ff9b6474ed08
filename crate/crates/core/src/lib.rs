//! Statevector simulation, symmetry-preserving ansatz circuits, variational objectives and metrics for spin chains.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuits;
pub mod error;
pub mod metrics;
pub mod objectives;
pub mod operators;
pub mod optimizer;
pub mod statevector;

pub use circuits::{Circuit, Family, InitSpec};
pub use error::{Error, Result};
pub use operators::{diagonalize_labeled, Observable, Operator, Spectrum};
pub use statevector::{Gate, GateKind, StateVector};
