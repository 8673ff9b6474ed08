//! L-BFGS with a strong-Wolfe line search.

mod line_search;

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use line_search::{strong_wolfe, LineSearchOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once `max |g_i|` falls below this.
    pub grad_tol: f64,
    /// Stop once the relative cost decrease of an iteration falls below this.
    pub f_tol: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            memory: 10,
            max_iterations: 1000,
            grad_tol: 1e-6,
            f_tol: 1e-12,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_search: 40,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::config(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1, got c1={} c2={}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if self.memory < 1 {
            return Err(Error::config("L-BFGS memory must be at least 1"));
        }
        if self.max_line_search < 2 {
            return Err(Error::config("line search needs at least 2 evaluations"));
        }
        if !(self.grad_tol >= 0.0 && self.f_tol >= 0.0) {
            return Err(Error::config("tolerances must be nonnegative"));
        }
        Ok(())
    }
}

/// One objective evaluation: cost, gradient and per-target diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    pub grad: Vec<f64>,
    pub energies: Vec<f64>,
    pub aux: BTreeMap<String, f64>,
}

impl Evaluation {
    pub fn new(cost: f64, grad: Vec<f64>) -> Self {
        Evaluation { cost, grad, ..Default::default() }
    }

    fn is_finite(&self) -> bool {
        self.cost.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }
}

pub trait Objective {
    fn n_params(&self) -> usize;
    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation>;
}

/// Adapts a closure returning `(cost, grad)`.
pub struct FnObjective<F> {
    n_params: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> (f64, Vec<f64>)> FnObjective<F> {
    pub fn new(n_params: usize, f: F) -> Self {
        FnObjective { n_params, f }
    }
}

impl<F: Fn(&[f64]) -> (f64, Vec<f64>)> Objective for FnObjective<F> {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        let (cost, grad) = (self.f)(theta);
        Ok(Evaluation::new(cost, grad))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    #[serde(rename = "n_I")]
    pub n_i: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub energies: Vec<f64>,
    pub aux: BTreeMap<String, f64>,
    /// Accepted step length along the search direction (0 for the initial point).
    pub step: f64,
    /// Whether this step fell back to steepest descent.
    pub fallback: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConvergedReason {
    GradTol,
    FTol,
    MaxIterations,
    /// The line search found no decrease above the rounding level of the cost.
    Stalled,
    LineSearchFailed,
    NonFinite,
}

impl ConvergedReason {
    /// Whether the run is counted as a failed restart.
    pub fn is_failure(self) -> bool {
        matches!(self, ConvergedReason::LineSearchFailed | ConvergedReason::NonFinite)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<IterationRecord>,
    pub theta: Vec<f64>,
    pub reason: ConvergedReason,
    pub n_evaluations: usize,
    pub n_fallbacks: usize,
    pub diagnostic: Option<String>,
}

impl OptimizationTrace {
    /// Number of accepted iterations.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.n_i)
    }

    pub fn final_record(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// One JSON object per iteration record.
    pub fn to_jsonl(&self) -> String {
        records_to_jsonl(&self.records)
    }

    pub fn from_jsonl(text: &str) -> Result<Vec<IterationRecord>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::config(format!("bad trace line: {e}"))))
            .collect()
    }
}

/// One JSON object per line; floats round-trip bit-exactly through [`OptimizationTrace::from_jsonl`].
pub fn records_to_jsonl(records: &[IterationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serialization cannot fail"));
        out.push('\n');
    }
    out
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dotf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn record(n_i: usize, e: &Evaluation, step: f64, fallback: bool) -> IterationRecord {
    IterationRecord {
        n_i,
        cost: e.cost,
        grad_norm: inf_norm(&e.grad),
        energies: e.energies.clone(),
        aux: e.aux.clone(),
        step,
        fallback,
    }
}

/// Minimizes `objective` from `theta0`.
pub fn minimize(objective: &dyn Objective, theta0: &[f64], config: &OptimizerConfig) -> Result<OptimizationTrace> {
    config.validate()?;
    let n = objective.n_params();
    if theta0.len() != n {
        return Err(Error::config(format!("initial point has length {}, objective expects {n}", theta0.len())));
    }
    let eval = |theta: &[f64]| -> Result<Evaluation> {
        let e = objective.evaluate(theta)?;
        if e.grad.len() != n {
            return Err(Error::config(format!("objective returned a gradient of length {}", e.grad.len())));
        }
        Ok(e)
    };

    let mut theta = theta0.to_vec();
    let mut current = eval(&theta)?;
    let mut trace = OptimizationTrace {
        records: vec![record(0, &current, 0.0, false)],
        theta: theta.clone(),
        reason: ConvergedReason::MaxIterations,
        n_evaluations: 1,
        n_fallbacks: 0,
        diagnostic: None,
    };
    if !current.is_finite() {
        trace.reason = ConvergedReason::NonFinite;
        trace.diagnostic = Some("non-finite cost or gradient at the initial point".into());
        return Ok(trace);
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    for iter in 1..=config.max_iterations {
        if inf_norm(&current.grad) < config.grad_tol {
            trace.reason = ConvergedReason::GradTol;
            break;
        }
        let mut direction = lbfgs_direction(&current.grad, &history);
        if dotf(&direction, &current.grad) >= 0.0 {
            history.clear();
            direction = current.grad.iter().map(|g| -g).collect();
        }
        let initial_step = if history.is_empty() {
            (1.0 / direction.iter().map(|d| d * d).sum::<f64>().sqrt()).min(1.0)
        } else {
            1.0
        };

        let mut fallback = false;
        let mut outcome = strong_wolfe(&eval, &theta, &current, &direction, initial_step, config)?;
        if let LineSearchOutcome::Failed { evaluations, .. } = outcome {
            trace.n_evaluations += evaluations;
            fallback = true;
            trace.n_fallbacks += 1;
            history.clear();
            direction = current.grad.iter().map(|g| -g).collect();
            let step = (1.0 / inf_norm(&direction).max(1e-300)).min(1.0);
            outcome = strong_wolfe(&eval, &theta, &current, &direction, step, config)?;
        }
        let (alpha, next, evaluations) = match outcome {
            LineSearchOutcome::Accepted { alpha, eval, evaluations } => (alpha, eval, evaluations),
            LineSearchOutcome::NonFinite { evaluations } => {
                trace.n_evaluations += evaluations;
                trace.reason = ConvergedReason::NonFinite;
                trace.diagnostic = Some(format!("non-finite cost or gradient during iteration {iter}"));
                break;
            }
            LineSearchOutcome::Failed { evaluations, stalled } => {
                trace.n_evaluations += evaluations;
                if stalled {
                    trace.reason = ConvergedReason::Stalled;
                    break;
                }
                trace.reason = ConvergedReason::LineSearchFailed;
                trace.diagnostic =
                    Some(format!("no strong-Wolfe step along the steepest-descent direction at iteration {iter}"));
                break;
            }
        };
        trace.n_evaluations += evaluations;

        let s: Vec<f64> = direction.iter().map(|d| alpha * d).collect();
        let y: Vec<f64> = next.grad.iter().zip(&current.grad).map(|(a, b)| a - b).collect();
        let sy = dotf(&s, &y);
        if sy > 1e-12 * dotf(&s, &s).sqrt() * dotf(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s.clone(), y, 1.0 / sy));
        }
        theta.iter_mut().zip(&s).for_each(|(t, d)| *t += d);
        let f_prev = current.cost;
        current = next;
        trace.records.push(record(iter, &current, alpha, fallback));
        trace.theta.clone_from(&theta);

        let scale = f_prev.abs().max(current.cost.abs()).max(1.0);
        if (f_prev - current.cost) <= config.f_tol * scale {
            trace.reason = ConvergedReason::FTol;
            break;
        }
        if inf_norm(&current.grad) < config.grad_tol {
            trace.reason = ConvergedReason::GradTol;
            break;
        }
    }
    Ok(trace)
}

/// Two-loop recursion: `-H g` with the implicit inverse-Hessian approximation.
fn lbfgs_direction(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dotf(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dotf(s, y) / dotf(y, y);
        q.iter_mut().for_each(|x| *x *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dotf(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|x| *x = -*x);
    q
}

/// I.i.d. uniform angles on `[0, 2 pi)`.
pub fn sample_initial_params(n_params: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_params).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
}

/// Independent stream seed for run `index` under `master` (splitmix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests;
