use std::cell::Cell;

use super::line_search::{strong_wolfe, LineSearchOutcome};
use super::*;

fn quadratic(c: Vec<f64>) -> impl Fn(&[f64]) -> (f64, Vec<f64>) {
    move |x: &[f64]| {
        let g: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        (0.5 * dotf(&g, &g), g)
    }
}

fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
    let (a, b) = (x[0], x[1]);
    let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
    let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
    (f, g)
}

#[test]
fn quadratic_converges_quickly() {
    let c = vec![1.0, -2.0, 0.5, 3.0, -0.25, 7.0];
    let obj = FnObjective::new(6, quadratic(c.clone()));
    let cfg = OptimizerConfig { grad_tol: 1e-10, f_tol: 0.0, ..Default::default() };
    let trace = minimize(&obj, &[0.0; 6], &cfg).unwrap();
    assert_eq!(trace.reason, ConvergedReason::GradTol);
    assert!(trace.iterations() <= 6 + 5, "{}", trace.iterations());
    for (t, ci) in trace.theta.iter().zip(&c) {
        assert!((t - ci).abs() < 1e-9);
    }
    assert!(trace.final_record().unwrap().grad_norm < 1e-10);
}

#[test]
fn rosenbrock_minimum() {
    let obj = FnObjective::new(2, rosenbrock);
    let cfg = OptimizerConfig { grad_tol: 1e-9, f_tol: 0.0, ..Default::default() };
    let trace = minimize(&obj, &[-1.2, 1.0], &cfg).unwrap();
    assert!((trace.theta[0] - 1.0).abs() < 1e-6 && (trace.theta[1] - 1.0).abs() < 1e-6, "{:?}", trace.theta);
    assert!(!trace.reason.is_failure());
}

#[test]
fn trace_is_monotone_and_indexed() {
    let obj = FnObjective::new(2, rosenbrock);
    let trace = minimize(&obj, &[-1.2, 1.0], &OptimizerConfig::default()).unwrap();
    assert_eq!(trace.records[0].n_i, 0);
    assert_eq!(trace.records[0].step, 0.0);
    for (i, w) in trace.records.windows(2).enumerate() {
        assert_eq!(w[1].n_i, i + 1);
        assert!(w[1].cost <= w[0].cost);
    }
}

#[test]
fn deterministic_trace() {
    let obj = FnObjective::new(2, rosenbrock);
    let cfg = OptimizerConfig::default();
    let a = minimize(&obj, &[-1.2, 1.0], &cfg).unwrap();
    let b = minimize(&obj, &[-1.2, 1.0], &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_jsonl(), b.to_jsonl());
}

#[test]
fn accepted_steps_satisfy_strong_wolfe() {
    let cfg = OptimizerConfig::default();
    let eval = |x: &[f64]| -> Result<Evaluation> {
        let (f, g) = rosenbrock(x);
        Ok(Evaluation::new(f, g))
    };
    for x in [[-1.2, 1.0], [0.3, -0.4], [2.0, 2.0], [-0.5, 0.9]] {
        let start = eval(&x).unwrap();
        let p: Vec<f64> = start.grad.iter().map(|g| -g).collect();
        let d0 = dotf(&start.grad, &p);
        let step = (1.0 / dotf(&p, &p).sqrt()).min(1.0);
        let LineSearchOutcome::Accepted { alpha, eval: e, .. } = strong_wolfe(&eval, &x, &start, &p, step, &cfg).unwrap()
        else {
            panic!("line search failed from {x:?}");
        };
        assert!(e.cost <= start.cost + cfg.wolfe_c1 * alpha * d0);
        assert!(dotf(&e.grad, &p).abs() <= cfg.wolfe_c2 * d0.abs());
    }
}

#[test]
fn non_finite_aborts_with_record() {
    let calls = Cell::new(0);
    let obj = FnObjective::new(1, |x: &[f64]| {
        calls.set(calls.get() + 1);
        if x[0] > 0.5 {
            (f64::NAN, vec![f64::NAN])
        } else {
            (-x[0], vec![-1.0])
        }
    });
    let trace = minimize(&obj, &[0.0], &OptimizerConfig::default()).unwrap();
    assert_eq!(trace.reason, ConvergedReason::NonFinite);
    assert!(trace.reason.is_failure());
    assert!(trace.diagnostic.is_some());
    assert!(!trace.records.is_empty());
}

#[test]
fn unbounded_objective_reports_line_search_failure() {
    // linear cost: the bracketing phase never finds an upper end
    let obj = FnObjective::new(1, |x: &[f64]| (-x[0], vec![-1.0]));
    let cfg = OptimizerConfig { max_line_search: 10, ..Default::default() };
    let trace = minimize(&obj, &[0.0], &cfg).unwrap();
    assert_eq!(trace.reason, ConvergedReason::LineSearchFailed);
    assert_eq!(trace.n_fallbacks, 1);
}

#[test]
fn config_validation() {
    let obj = FnObjective::new(1, |x: &[f64]| (x[0] * x[0], vec![2.0 * x[0]]));
    for cfg in [
        OptimizerConfig { wolfe_c1: 0.95, ..Default::default() },
        OptimizerConfig { wolfe_c2: 1.0, ..Default::default() },
        OptimizerConfig { memory: 0, ..Default::default() },
    ] {
        assert!(matches!(minimize(&obj, &[1.0], &cfg), Err(Error::Config(_))));
    }
    assert!(matches!(minimize(&obj, &[1.0, 2.0], &OptimizerConfig::default()), Err(Error::Config(_))));
}

#[test]
fn jsonl_round_trip_uses_n_i_key() {
    let obj = FnObjective::new(2, rosenbrock);
    let trace = minimize(&obj, &[-1.2, 1.0], &OptimizerConfig { max_iterations: 5, ..Default::default() }).unwrap();
    let text = trace.to_jsonl();
    assert!(text.lines().next().unwrap().contains("\"n_I\":0"));
    assert_eq!(text.lines().count(), trace.records.len());
    assert_eq!(OptimizationTrace::from_jsonl(&text).unwrap(), trace.records);
}

#[test]
fn initial_params_sampling() {
    assert_eq!(sample_initial_params(5, 42), sample_initial_params(5, 42));
    assert_ne!(sample_initial_params(3, 1), sample_initial_params(3, 2));
    let v = sample_initial_params(1000, 7);
    assert!(v.iter().all(|&x| (0.0..std::f64::consts::TAU).contains(&x)));
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean - std::f64::consts::PI).abs() < 0.15, "{mean}");
}

#[test]
fn derived_seeds_differ() {
    let seeds: Vec<u64> = (0..100).map(|i| derive_seed(12345, i)).collect();
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), seeds.len());
    assert_eq!(derive_seed(1, 2), derive_seed(1, 2));
}

#[test]
fn jsonl_round_trip_is_bit_exact() {
    let values = sample_initial_params(2000, 9);
    let records: Vec<IterationRecord> = values
        .chunks(4)
        .enumerate()
        .map(|(i, v)| IterationRecord {
            n_i: i,
            cost: v[0] / 7.0,
            grad_norm: v[1] * 1e-9,
            energies: vec![-v[2] * 3.1, 0.7591110370855682],
            aux: BTreeMap::from([("fidelity_0".to_string(), v[3] / 6.3)]),
            step: v[1] / 3.0,
            fallback: false,
        })
        .collect();
    let text = records_to_jsonl(&records);
    let back = OptimizationTrace::from_jsonl(&text).unwrap();
    for (a, b) in records.iter().zip(&back) {
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
        assert_eq!(a.energies[0].to_bits(), b.energies[0].to_bits());
        assert_eq!(a.energies[1].to_bits(), b.energies[1].to_bits());
        assert_eq!(a.aux["fidelity_0"].to_bits(), b.aux["fidelity_0"].to_bits());
    }
}
