use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::operators::{PauliString, PauliTerm};

fn random_theta(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
}

fn assert_fd(obj: &SsvqeObjective, seed: u64) {
    let theta = random_theta(obj.n_params(), seed);
    let e = obj.evaluate(&theta).unwrap();
    let h = 1e-5;
    let fd: Vec<f64> = (0..theta.len())
        .map(|i| {
            let mut p = theta.clone();
            p[i] += h;
            let fp = obj.evaluate(&p).unwrap().cost;
            p[i] -= 2.0 * h;
            let fm = obj.evaluate(&p).unwrap().cost;
            (fp - fm) / (2.0 * h)
        })
        .collect();
    let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-3);
    for (i, (a, b)) in e.grad.iter().zip(&fd).enumerate() {
        assert!((a - b).abs() / scale < 1e-5, "param {i}: adjoint {a} vs fd {b}");
    }
}

fn singlet_targets(beta: f64) -> Vec<TargetSpec> {
    let w = default_weights(2);
    vec![
        TargetSpec::new(InitSpec::Neel, w[0]).with_penalty(PenaltyTerm::new(PenaltyKind::StotSqSquared, beta)),
        TargetSpec::new(InitSpec::AntiNeel, w[1]).with_penalty(PenaltyTerm::new(PenaltyKind::StotSqSquared, beta)),
    ]
}

#[test]
fn default_weight_scheme() {
    assert_eq!(default_weights(3), vec![3.0, 2.0, 1.0]);
}

#[test]
fn gradients_match_for_every_penalty_kind() {
    let n = 6;
    let h = Observable::heisenberg_chain(n, 1.0).unwrap();
    let hi = Observable::ising_transverse(n, 1.0, 1.0).unwrap();
    let sz = Circuit::sz_conserving(n, 2).unwrap();

    let obj = SsvqeObjective::new(&sz, &h, singlet_targets(1000.0)).unwrap();
    assert_fd(&obj, 1);

    let triplets = vec![
        TargetSpec::new(InitSpec::Neel, 2.0).with_penalty(PenaltyTerm::new(PenaltyKind::StotShifted, 2.0)),
        TargetSpec::new(InitSpec::AntiNeel, 1.0).with_penalty(PenaltyTerm::new(PenaltyKind::StotShifted, 2.0)),
    ];
    assert_fd(&SsvqeObjective::new(&sz, &h, triplets).unwrap(), 2);

    let ising = Circuit::ising_hva(n, 2).unwrap();
    let flip = vec![TargetSpec::new(InitSpec::PlusProductOdd, 1.0)
        .with_penalty(PenaltyTerm::new(PenaltyKind::FlipParity, 1.0))];
    assert_fd(&SsvqeObjective::new(&ising, &hi, flip).unwrap(), 3);

    let he = Circuit::hardware_efficient(n, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let refs = vec![StateVector::random(n, &mut rng).unwrap(), StateVector::random(n, &mut rng).unwrap()];
    let defl = vec![
        TargetSpec::new(InitSpec::Neel, 1.0)
            .with_penalty(PenaltyTerm::deflation(3.0, refs))
            .with_penalty(PenaltyTerm::new(PenaltyKind::FlipParity, 0.5))
            .with_penalty(PenaltyTerm::new(PenaltyKind::StotSqSquared, 10.0)),
    ];
    assert_fd(&SsvqeObjective::new(&he, &h, defl).unwrap(), 4);

    let stot = Circuit::stot_conserving(n, 2, InitSpec::SingletProduct).unwrap();
    let two = vec![
        TargetSpec::new(InitSpec::SingletProduct, 2.0),
        TargetSpec::new(InitSpec::OrthoSinglet { variant: 1 }, 1.0),
    ];
    assert_fd(&SsvqeObjective::new(&stot, &h, two).unwrap(), 6);
}

#[test]
fn penalty_values_on_symmetric_states() {
    let n = 4;
    let c = Circuit::empty(n, crate::circuits::Family::Custom, InitSpec::Zero).unwrap();
    let singlets = InitSpec::SingletProduct.state(n).unwrap();
    let (v, _) =
        penalty_value_and_grad(&c, &[], &singlets, &PenaltyTerm::new(PenaltyKind::StotSqSquared, 1000.0)).unwrap();
    assert!(v.abs() < 1e-20);

    let triplet = InitSpec::TripletFlip { pair: 0, s_z: 0 }.state(n).unwrap();
    let (v, _) = penalty_value_and_grad(&c, &[], &triplet, &PenaltyTerm::new(PenaltyKind::StotShifted, 2.0)).unwrap();
    assert!(v.abs() < 1e-20);

    let plus = InitSpec::PlusProduct.state(n).unwrap();
    let (v, _) = penalty_value_and_grad(&c, &[], &plus, &PenaltyTerm::new(PenaltyKind::FlipParity, 1.5)).unwrap();
    assert!((v - 4.0 * 1.5).abs() < 1e-12);
    let odd = InitSpec::PlusProductOdd.state(n).unwrap();
    let (v, _) = penalty_value_and_grad(&c, &[], &odd, &PenaltyTerm::new(PenaltyKind::FlipParity, 1.5)).unwrap();
    assert!(v.abs() < 1e-20);

    // all kinds are nonnegative on random states
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let e = StateVector::random(n, &mut rng).unwrap();
    for term in [
        PenaltyTerm::new(PenaltyKind::StotSqSquared, 1.0),
        PenaltyTerm::new(PenaltyKind::StotShifted, 1.0),
        PenaltyTerm::new(PenaltyKind::FlipParity, 1.0),
        PenaltyTerm::deflation(1.0, vec![e.clone()]),
    ] {
        for _ in 0..10 {
            let psi = StateVector::random(n, &mut rng).unwrap();
            assert!(penalty_value_and_grad(&c, &[], &psi, &term).unwrap().0 >= 0.0);
        }
    }
}

#[test]
fn cost_equals_energy_at_ground_state() {
    // the two-site singlet is the Heisenberg ground state
    let h = Observable::heisenberg_chain(2, 1.0).unwrap();
    let c = Circuit::empty(2, crate::circuits::Family::Custom, InitSpec::SingletProduct).unwrap();
    let b = ssvqe_cost(&c, &[], &h, vec![TargetSpec::new(InitSpec::SingletProduct, 1.0)]).unwrap();
    assert!((b.cost + 3.0).abs() < 1e-12);
    assert_eq!(b.energies.len(), 1);
}

#[test]
fn penalties_vanish_on_singlet_outputs() {
    let n = 4;
    let h = Observable::heisenberg_chain(n, 1.0).unwrap();
    let c = Circuit::stot_conserving(n, 2, InitSpec::SingletProduct).unwrap();
    let targets = vec![
        TargetSpec::new(InitSpec::SingletProduct, 2.0).with_penalty(PenaltyTerm::new(PenaltyKind::StotSqSquared, 1000.0)),
        TargetSpec::new(InitSpec::OrthoSinglet { variant: 1 }, 1.0)
            .with_penalty(PenaltyTerm::new(PenaltyKind::StotSqSquared, 1000.0)),
    ];
    let theta = random_theta(c.n_params, 3);
    let b = ssvqe_cost(&c, &theta, &h, targets).unwrap();
    for p in &b.penalties {
        assert!(p[0].1 < 1e-20);
    }
    let want = 2.0 * b.energies[0] + b.energies[1];
    assert!((b.cost - want).abs() < 1e-12);
}

#[test]
fn outputs_stay_orthogonal() {
    let n = 6;
    let h = Observable::heisenberg_chain(n, 1.0).unwrap();
    let c = Circuit::sz_conserving(n, 3).unwrap();
    let obj = SsvqeObjective::new(&c, &h, singlet_targets(1000.0)).unwrap();
    let theta = random_theta(c.n_params, 8);
    let a = obj.output(&theta, 0).unwrap();
    let b = obj.output(&theta, 1).unwrap();
    assert!(a.inner(&b).unwrap().norm() < 1e-12);
}

#[test]
fn objective_validation() {
    let n = 4;
    let h = Observable::heisenberg_chain(n, 1.0).unwrap();
    let c = Circuit::sz_conserving(n, 1).unwrap();
    let same = vec![TargetSpec::new(InitSpec::Neel, 2.0), TargetSpec::new(InitSpec::Neel, 1.0)];
    assert!(matches!(SsvqeObjective::new(&c, &h, same), Err(Error::Validation(_))));
    let flat = vec![TargetSpec::new(InitSpec::Neel, 1.0), TargetSpec::new(InitSpec::AntiNeel, 1.0)];
    assert!(matches!(SsvqeObjective::new(&c, &h, flat), Err(Error::Config(_))));
    assert!(matches!(SsvqeObjective::new(&c, &h, vec![]), Err(Error::Config(_))));
    let bad_beta = vec![TargetSpec::new(InitSpec::Neel, 1.0).with_penalty(PenaltyTerm::new(PenaltyKind::FlipParity, 0.0))];
    assert!(matches!(SsvqeObjective::new(&c, &h, bad_beta), Err(Error::Config(_))));

    // a longitudinal field breaks the spin-flip symmetry
    let mut terms = h.terms().to_vec();
    terms.push(PauliTerm { coeff: 0.3, string: "ZIII".parse::<PauliString>().unwrap() });
    let hz = Observable::new(n, terms).unwrap();
    let flip = vec![TargetSpec::new(InitSpec::Neel, 1.0).with_penalty(PenaltyTerm::new(PenaltyKind::FlipParity, 1.0))];
    assert!(matches!(SsvqeObjective::new(&c, &hz, flip), Err(Error::Validation(_))));
}

#[test]
fn deflation_cost_cases() {
    let n = 4;
    let h = Observable::heisenberg_chain(n, 1.0).unwrap();
    let c = Circuit::hardware_efficient(n, 1).unwrap();
    let input = c.input_state().unwrap();
    let theta = random_theta(c.n_params, 2);
    let psi = c.evaluate(&theta, &input).unwrap();
    let plain = h.expectation(&psi).unwrap();
    let (v, _) = deflation_cost(&c, &theta, &input, &h, &[], &[]).unwrap();
    assert!((v - plain).abs() < 1e-12);

    // reference orthogonal to psi contributes nothing
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut r = StateVector::random(n, &mut rng).unwrap();
    let ov = psi.inner(&r).unwrap();
    let amps: Vec<_> = r.amplitudes().iter().zip(psi.amplitudes()).map(|(a, p)| a - ov * p).collect();
    r = StateVector::from_amplitudes(amps).unwrap();
    r.normalize();
    let (v, _) = deflation_cost(&c, &theta, &input, &h, &[r.clone()], &[50.0]).unwrap();
    assert!((v - plain).abs() < 1e-10);

    let mut loose = r.clone();
    loose.amplitudes_mut()[0] += C64::new(0.5, 0.0);
    assert!(matches!(deflation_cost(&c, &theta, &input, &h, &[loose], &[1.0]), Err(Error::Validation(_))));
}
