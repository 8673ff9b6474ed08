use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::circuits::{Family, InitSpec};
use crate::operators::{diagonalize_labeled, Observable};

fn heisenberg_spectrum(n: usize, k: usize) -> (Observable, Spectrum) {
    let h = Observable::heisenberg_chain(n, 1.0).unwrap();
    let sym = [Observable::s_tot_sq(n), Observable::s_z(n)];
    let spec = diagonalize_labeled(&h, k, &sym).unwrap();
    (h, spec)
}

fn random_state(n: usize, seed: u64) -> StateVector {
    StateVector::random(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Half-chain entropy from the full density matrix, traced element by element.
fn brute_force_entropy(psi: &StateVector) -> f64 {
    let n = psi.n_qubits();
    let dim = psi.dim();
    let full = DMatrix::from_fn(dim, dim, |i, j| psi.amplitudes()[i] * psi.amplitudes()[j].conj());
    let half = 1usize << (n / 2);
    let mut rho = DMatrix::<C64>::zeros(half, half);
    for a in 0..half {
        for b in 0..half {
            for r in 0..half {
                rho[(a, b)] += full[(a * half + r, b * half + r)];
            }
        }
    }
    let eig = rho.symmetric_eigenvalues();
    eig.iter().filter(|&&p| p > 1e-14).map(|&p| -p * p.ln()).sum()
}

#[test]
fn fidelity_examples() {
    let (_, spec) = heisenberg_spectrum(4, 4);
    let ground = spec.get(1).unwrap();
    assert!((fidelity_pure(ground.state(), ground).unwrap() - 1.0).abs() < 1e-12);

    let t0 = spec.find("E_{T1}^{(0)}").unwrap();
    let f = fidelity(t0.state(), &spec, t0.index, FidelityMode::SubspaceProjector).unwrap();
    assert!((f - 1.0).abs() < 1e-10);
    assert_eq!(same_spin_multiplet(&spec, t0.index).len(), 3);

    // overlap oracle from an independent dense diagonalization
    let h = Observable::heisenberg_chain(4, 1.0).unwrap().to_dense();
    let eig = h.symmetric_eigen();
    let lowest = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
    let g: DVector<C64> = eig.eigenvectors.column(lowest).into_owned();
    for seed in 0..5 {
        let psi = random_state(4, seed);
        let want = g.dotc(&DVector::from_column_slice(psi.amplitudes())).norm_sqr();
        assert!((fidelity_pure(&psi, ground).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn subspace_dominates_pure_and_bounds_hold() {
    let (_, spec) = heisenberg_spectrum(4, 4);
    for seed in 0..20 {
        let psi = random_state(4, 100 + seed);
        for idx in 1..=4 {
            let p = fidelity(&psi, &spec, idx, FidelityMode::PureState).unwrap();
            let s = fidelity(&psi, &spec, idx, FidelityMode::SubspaceProjector).unwrap();
            assert!((0.0..=1.0 + 1e-10).contains(&p));
            assert!((0.0..=1.0 + 1e-10).contains(&s));
            assert!(s >= p - 1e-12);
        }
    }
    assert!(matches!(fidelity(&random_state(6, 1), &spec, 1, FidelityMode::PureState), Err(Error::Config(_))));
}

#[test]
fn default_mode_follows_sector_constraint() {
    let (_, spec) = heisenberg_spectrum(4, 4);
    assert_eq!(FidelityMode::default_for(&spec, 1, false), FidelityMode::PureState);
    assert_eq!(FidelityMode::default_for(&spec, 2, false), FidelityMode::SubspaceProjector);
    assert_eq!(FidelityMode::default_for(&spec, 3, true), FidelityMode::PureState);
}

#[test]
fn report_collects_errors() {
    let (h, spec) = heisenberg_spectrum(4, 2);
    let outs = vec![spec.get(1).unwrap().state().clone(), random_state(4, 3)];
    let energies: Vec<f64> = outs.iter().map(|o| h.expectation(o).unwrap()).collect();
    let r = fidelity_report(&outs, &energies, &spec, &[(1, FidelityMode::PureState), (2, FidelityMode::SubspaceProjector)])
        .unwrap();
    assert!(r.targets[0].energy_error < 1e-10);
    assert!((r.max_energy_error() - (energies[1] - spec.get(2).unwrap().energy).abs()).abs() < 1e-12);
    assert!(r.min_fidelity() < 1.0);
    assert_eq!(r.targets[1].mode, FidelityMode::SubspaceProjector);
}

#[test]
fn classical_resource_products() {
    assert_eq!(classical_resources(155, 500), 77500);
    assert_eq!(classical_resources(512, 1700), 870400);
    assert_eq!(classical_resources(160, 1304), 208640);
}

#[test]
fn convergence_margin_cases() {
    let (h, spec) = heisenberg_spectrum(2, 4);
    let (sd, ok) = convergence_margin(spec.get(1).unwrap().state(), &h, 4.0).unwrap();
    assert!(sd < 1e-9 && ok);

    // equal superposition of the singlet and the s_z = 0 triplet
    let s = 0.5f64.sqrt();
    let e1 = spec.get(1).unwrap().state().amplitudes().to_vec();
    let t0 = spec.find("E_{T1}^{(0)}").unwrap().state().amplitudes().to_vec();
    let mix: Vec<C64> = e1.iter().zip(&t0).map(|(a, b)| (a + b) * s).collect();
    let (sd, ok) = convergence_margin(&StateVector::from_amplitudes(mix).unwrap(), &h, 4.0).unwrap();
    assert!((sd - 2.0).abs() < 1e-12 && ok);

    // variance oracle from the dense matrix
    let h8 = Observable::heisenberg_chain(8, 1.0).unwrap();
    let m = h8.to_dense();
    let psi = random_state(8, 17);
    let v = DVector::from_column_slice(psi.amplitudes());
    let hv = &m * &v;
    let mean = v.dotc(&hv).re;
    let want = (hv.norm_squared() - mean * mean).sqrt();
    let (sd, _) = convergence_margin(&psi, &h8, 1.0).unwrap();
    assert!((sd - want).abs() < 1e-9);

    assert!(matches!(convergence_margin(&psi, &h8, 0.0), Err(Error::Config(_))));
}

#[test]
fn eigenstates_have_zero_margin() {
    let (h, spec) = heisenberg_spectrum(6, 6);
    for s in &spec.states {
        let m = convergence_margin(s.state(), &h, 1.0).unwrap().0;
        assert!(m < 1e-9, "{} {m}", s.label);
    }
}

#[test]
fn entropy_examples() {
    let prod = StateVector::basis(4, &[0, 1, 0, 1]).unwrap();
    assert!(entanglement_entropy(&prod).unwrap().abs() < 1e-10);
    let rho = prod.reduced_density_left().unwrap();
    assert!((rho[(1, 1)].re - 1.0).abs() < 1e-12);

    let singlet = StateVector::singlet_product(2).unwrap();
    assert!((entanglement_entropy(&singlet).unwrap() - 2f64.ln()).abs() < 1e-12);

    for seed in 0..3 {
        let psi = random_state(8, 40 + seed);
        let s = entanglement_entropy(&psi).unwrap();
        assert!((s - brute_force_entropy(&psi)).abs() < 1e-10);
        assert!(s >= 0.0 && s <= 4.0 * 2f64.ln() + 1e-12);
    }
    assert!(matches!(entanglement_entropy(&random_state(5, 1)), Err(Error::Config(_))));
}

#[test]
fn entangling_power_trivial_circuits() {
    let zero = Circuit::empty(8, Family::HardwareEfficient, InitSpec::Neel).unwrap();
    let ep = entangling_power(&zero, 10, 1).unwrap();
    assert_eq!(ep.mean, 0.0);

    // a singlet pair straddles the cut only when n/2 is odd
    for (n, want) in [(2, 2f64.ln()), (4, 0.0), (6, 2f64.ln())] {
        let c = Circuit::empty(n, Family::StotConserving, InitSpec::SingletProduct).unwrap();
        let ep = entangling_power(&c, 3, 2).unwrap();
        assert!((ep.mean - want).abs() < 1e-12, "n={n}: {}", ep.mean);
        assert!(ep.std_err < 1e-12);
    }

    let odd = Circuit::hardware_efficient(5, 1).unwrap();
    assert!(matches!(entangling_power(&odd, 10, 1), Err(Error::Config(_))));
    assert!(matches!(entangling_power(&zero, 0, 1), Err(Error::Config(_))));
}

#[test]
fn entangling_power_is_reproducible_across_pools() {
    let c = Circuit::hardware_efficient(6, 2).unwrap();
    let a = entangling_power(&c, 64, 9).unwrap();
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = serial.install(|| entangling_power(&c, 64, 9)).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    assert!(a.mean > 0.0);
    assert_ne!(entangling_power(&c, 64, 10).unwrap().mean, a.mean);
}
