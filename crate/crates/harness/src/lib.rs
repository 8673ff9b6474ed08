//! Experiment harness: configs, restarts, sweeps, spectra, entangling power and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use commands::{compute_entpower, compute_sweep, diagonalize, entpower, layer_sweep, report, run_experiment};
pub use config::{ExperimentConfig, ModelSpec, Purpose};
pub use error::{HarnessError, Result};
pub use experiment::{execute, Prepared, RunOutcome, RunRecord};

/// Environment variable that sets the worker-thread count.
pub const THREADS_ENV: &str = "SYMVQE_THREADS";

/// Size the global pool from the environment. Ignored if the pool already exists.
pub fn init_thread_pool() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| HarnessError::config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(HarnessError::config(format!("{THREADS_ENV} must be positive")));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
