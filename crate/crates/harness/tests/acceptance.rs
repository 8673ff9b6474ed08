//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use symvqe::circuits::{Circuit, Family, InitSpec};
use symvqe::metrics::{classical_resources, entangling_power};
use symvqe::objectives::{penalty_value_and_grad, PenaltyKind, PenaltyTerm};
use symvqe::operators::Observable;
use symvqe::optimizer::sample_initial_params;
use symvqe::statevector::{Gate, StateVector};
use symvqe_harness::commands::SweepResult;
use symvqe_harness::config::{long_run_enabled_by_env, LONG_RUN_ENV};
use symvqe_harness::{compute_entpower, compute_sweep, diagonalize, ExperimentConfig, ModelSpec, RunRecord};

type Check = Result<String, String>;
type ValueAndGrad<'a> = dyn Fn(&[f64]) -> Result<(f64, Vec<f64>), String> + 'a;
type Criterion = (&'static str, fn() -> Check);

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"));
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn sweep(name: &str) -> Result<SweepResult, String> {
    compute_sweep(&config(name)).map_err(|e| format!("{name}: {e}"))
}

fn single(name: &str) -> Result<RunRecord, String> {
    Ok(sweep(name)?.outcomes.remove(0).record)
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn gate_algebra() -> Check {
    let i = C64::new(0.0, 1.0);
    let mut worst = 0.0f64;
    for t in sample_initial_params(100, 1) {
        let m = Gate::NGate { a: 0, b: 1, theta: [t, t, t] }.matrix_2q().ok_or("NGATE has no 4x4 matrix")?;
        let phase = (-i * t).exp();
        for (r, row) in m.iter().enumerate() {
            for (c, &entry) in row.iter().enumerate() {
                let id = if r == c { 1.0 } else { 0.0 };
                let swap = if c == ((r & 1) << 1 | r >> 1) { 1.0 } else { 0.0 };
                let expect = phase * (C64::new(id * (2.0 * t).cos(), 0.0) + i * (2.0 * t).sin() * swap);
                worst = worst.max((entry - expect).norm());
            }
        }
    }
    ensure(worst < 1e-12, format!("max deviation {worst:.2e} over 100 angles"))
}

/// `S_tot^2 psi` from bit transpositions: `3N/4 + sum_{i<j} (P_ij - 1/2)`.
fn s_tot_sq_by_swaps(psi: &StateVector) -> Vec<C64> {
    let n = psi.n_qubits();
    let a = psi.amplitudes();
    let mut out: Vec<C64> = a.iter().map(|x| x * (0.75 * n as f64 - 0.25 * (n * (n - 1)) as f64)).collect();
    for i in 0..n {
        for j in i + 1..n {
            let (bi, bj) = (1usize << (n - 1 - i), 1usize << (n - 1 - j));
            for (idx, o) in out.iter_mut().enumerate() {
                let swapped = if ((idx & bi) != 0) != ((idx & bj) != 0) { idx ^ bi ^ bj } else { idx };
                *o += a[swapped];
            }
        }
    }
    out
}

fn symmetry_conservation() -> Check {
    let (mut sz_leak, mut stot_dev) = (0.0f64, 0.0f64);
    for n in [4, 6, 8] {
        let sz = Circuit::sz_conserving(n, 3).map_err(err)?;
        let stot = Circuit::stot_conserving(n, 3, InitSpec::SingletProduct).map_err(err)?;
        let stot_t = stot.with_init(InitSpec::TripletFlip { pair: 0, s_z: 0 }).map_err(err)?;
        for s in 0..20u64 {
            let th = sample_initial_params(sz.n_params, 100 + s);
            let out = sz.evaluate(&th, &sz.input_state().map_err(err)?).map_err(err)?;
            let leak: f64 = out
                .amplitudes()
                .iter()
                .enumerate()
                .filter(|(k, _)| k.count_ones() as usize != n / 2)
                .map(|(_, a)| a.norm_sqr())
                .sum();
            sz_leak = sz_leak.max(leak);
            let th = sample_initial_params(stot.n_params, 200 + s);
            for (c, s_val) in [(&stot, 0.0), (&stot_t, 2.0)] {
                let out = c.evaluate(&th, &c.input_state().map_err(err)?).map_err(err)?;
                let applied = s_tot_sq_by_swaps(&out);
                let resid: f64 =
                    applied.iter().zip(out.amplitudes()).map(|(x, y)| (x - y * s_val).norm_sqr()).sum::<f64>().sqrt();
                stot_dev = stot_dev.max(resid);
            }
        }
    }
    ensure(
        sz_leak < 1e-9 && stot_dev < 1e-9,
        format!("S_z sector leakage {sz_leak:.2e}, S_tot^2 residual {stot_dev:.2e} (N=4,6,8, 20 angles each)"),
    )
}

/// `|g - g_fd| / max(|g_fd|, 1)`; the floor covers terms that vanish identically by symmetry.
fn fd_relative_error(
    f: &ValueAndGrad,
    theta: &[f64],
) -> Result<f64, String> {
    let h = 1e-5;
    let (_, g) = f(theta)?;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut t = theta.to_vec();
    for k in 0..theta.len() {
        t[k] = theta[k] + h;
        let up = f(&t)?.0;
        t[k] = theta[k] - h;
        let dn = f(&t)?.0;
        t[k] = theta[k];
        let fd = (up - dn) / (2.0 * h);
        num += (g[k] - fd).powi(2);
        den += fd * fd;
    }
    Ok(num.sqrt() / den.sqrt().max(1.0))
}

fn gradients() -> Check {
    let n = 6;
    let heis = Observable::heisenberg_chain(n, 1.0).map_err(err)?;
    let ising = Observable::ising_transverse(n, 1.0, 1.0).map_err(err)?;
    let reference = {
        let c = Circuit::hardware_efficient(n, 1).map_err(err)?;
        c.evaluate(&sample_initial_params(c.n_params, 5), &c.input_state().map_err(err)?).map_err(err)?
    };
    let circuits = [
        (Circuit::hardware_efficient(n, 2).map_err(err)?, &heis),
        (Circuit::sz_conserving(n, 2).map_err(err)?, &heis),
        (Circuit::stot_conserving(n, 2, InitSpec::SingletProduct).map_err(err)?, &heis),
        (Circuit::ising_hva(n, 2).map_err(err)?, &ising),
    ];
    let terms = [
        PenaltyTerm::new(PenaltyKind::StotSqSquared, 1000.0),
        PenaltyTerm::new(PenaltyKind::StotShifted, 2.0),
        PenaltyTerm::new(PenaltyKind::FlipParity, 1.0),
        PenaltyTerm::deflation(50.0, vec![reference]),
    ];
    let mut worst = 0.0f64;
    let mut checks = 0;
    for (i, (c, h)) in circuits.iter().enumerate() {
        let input = c.input_state().map_err(err)?;
        let theta = sample_initial_params(c.n_params, 40 + i as u64);
        let energy = |t: &[f64]| c.gradient(t, &input, *h).map_err(err);
        worst = worst.max(fd_relative_error(&energy, &theta)?);
        checks += 1;
        for term in &terms {
            let pen = |t: &[f64]| penalty_value_and_grad(c, t, &input, term).map_err(err);
            worst = worst.max(fd_relative_error(&pen, &theta)?);
            checks += 1;
        }
    }
    ensure(worst < 1e-5, format!("max relative error {worst:.2e} over {checks} family/term pairs at N=6"))
}

fn ed_oracle() -> Check {
    let model = ModelSpec::Heisenberg { j: 1.0 };
    let two = diagonalize(&model, 2, 4).map_err(err)?;
    let energies: Vec<f64> = two.iter().map(|e| e.energy).collect();
    let spins: Vec<Option<f64>> = two.iter().map(|e| e.s).collect();
    let want = [-3.0, 1.0, 1.0, 1.0];
    let e_ok = energies.len() == 4 && energies.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12);
    let s_ok = spins.iter().zip([0.0, 1.0, 1.0, 1.0]).all(|(a, b)| a.is_some_and(|x| (x - b).abs() < 1e-9));
    let ten = diagonalize(&model, 10, 8).map_err(err)?;
    let labels: Vec<&str> = ten.iter().map(|e| e.label.as_str()).collect();
    let prefixes = ["E_{S1}", "E_{T1}", "E_{T1}", "E_{T1}", "E_{T2}", "E_{T2}", "E_{T2}", "E_{S2}"];
    let l_ok = labels.len() == 8 && labels.iter().zip(prefixes).all(|(l, p)| l.starts_with(p));
    ensure(e_ok && s_ok && l_ok, format!("N=2 energies {energies:?} spins {spins:?}; N=10 labels {labels:?}"))
}

fn resources() -> Check {
    let mut bad = Vec::new();
    for (layers, cnot, l) in [(7, 63, 160), (18, 162, 380), (24, 216, 500)] {
        let r = Circuit::hardware_efficient(10, layers).map_err(err)?.count_resources();
        if r.cnot_body != cnot || r.n_params != l {
            bad.push(format!("HE N=10 x{layers}: CNOT {} L {}", r.cnot_body, r.n_params));
        }
    }
    let r = Circuit::sz_conserving(16, 5).map_err(err)?.count_resources();
    if r.n_params != 155 || r.cnot_body != 225 {
        bad.push(format!("SZ N=16 x5: CNOT {} L {}", r.cnot_body, r.n_params));
    }
    let r = Circuit::sz_conserving(14, 4).map_err(err)?.count_resources();
    if r.cnot_body != 156 {
        bad.push(format!("SZ N=14 x4: CNOT {}", r.cnot_body));
    }
    let r = Circuit::stot_conserving(14, 3, InitSpec::SingletProduct).map_err(err)?.count_resources();
    if r.cnot_body != 117 {
        bad.push(format!("STOT N=14 x3: CNOT {}", r.cnot_body));
    }
    let he16 = Circuit::hardware_efficient(16, 15).map_err(err)?.count_resources().n_params;
    if classical_resources(155, 500) != 77_500 || classical_resources(he16, 1700) != 870_400 {
        bad.push(format!("C_R identities ({he16} parameters for HE N=16 x15)"));
    }
    if bad.is_empty() {
        Ok("HE N=10 table, SZ/STOT counts and C_R identities exact".into())
    } else {
        Err(bad.join("; "))
    }
}

fn ground_state() -> Check {
    let rec = single("ground_sz_n8")?;
    let hit = rec.restarts.iter().filter(|r| r.n_i_fidelity.is_some_and(|n| n <= 500)).count();
    let total = rec.restarts.len();
    ensure(
        total >= 10 && 5 * hit >= 4 * total,
        format!("{hit}/{total} restarts reached fidelity 0.95 within 500 iterations (median n_I {:?})", rec.summary.median_n_i_fidelity),
    )
}

fn symmetry_advantage() -> Check {
    let mut c = Vec::new();
    let mut budgets = Vec::new();
    for name in ["cmp_sz_n8", "cmp_stot_n8", "cmp_hardware_n8"] {
        let rec = single(name)?;
        budgets.push(rec.resources.cnot_body);
        c.push((rec.summary.median_c_r_fidelity.unwrap_or(u64::MAX), rec.summary.reached_fidelity));
    }
    let show = |x: (u64, usize)| if x.0 == u64::MAX { format!("inf ({} reached)", x.1) } else { format!("{} ({} reached)", x.0, x.1) };
    let matched = budgets.iter().all(|&b| b == budgets[0]);
    ensure(
        matched && c[0].0 < c[2].0 && c[1].0 <= c[0].0,
        format!(
            "{} CNOTs each; median C_R to fidelity 0.95: SZ {}, STOT {}, HE {}",
            budgets[0],
            show(c[0]),
            show(c[1]),
            show(c[2])
        ),
    )
}

fn two_target(name: &str, bar: f64) -> Result<(bool, String), String> {
    let rec = single(name)?;
    let m = &rec.summary.median_fidelity;
    let labels: Vec<&str> = rec.targets.iter().map(|t| t.label.as_str()).collect();
    let ok = m.len() == rec.targets.len() && m.iter().all(|&f| f > bar);
    Ok((ok, format!("{name}: {labels:?} median fidelity {m:.4?}")))
}

fn ssvqe_pairs() -> Check {
    let (a, da) = two_target("singlets_sz_n6", 0.9)?;
    let (b, db) = two_target("triplets_sz_n6", 0.9)?;
    ensure(a && b, format!("{da}; {db}"))
}

fn ising() -> Check {
    let (a, da) = two_target("ising_e1_n8", 0.99)?;
    let (b, db) = two_target("ising_e2_n8", 0.99)?;
    ensure(a && b, format!("{da}; {db}"))
}

fn dense_levels(h: &Observable) -> Vec<f64> {
    let m: DMatrix<C64> = h.to_dense();
    let mut e: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.total_cmp(b));
    e
}

fn deflation() -> Check {
    let rec = single("deflation_he_n4")?;
    let e2 = dense_levels(&Observable::heisenberg_chain(4, 1.0).map_err(err)?)[1];
    let finals: Vec<f64> = rec.restarts.iter().filter(|r| !r.failed()).map(|r| r.final_energies[0]).collect();
    if finals.is_empty() {
        return Err("every restart failed".into());
    }
    let m = median(finals);
    ensure((m - e2).abs() < 0.05, format!("median energy {m:.6} vs dense E_2 {e2:.6}"))
}

fn entangling() -> Check {
    let zero = [
        entangling_power(&Circuit::empty(8, Family::HardwareEfficient, InitSpec::Neel).map_err(err)?, 50, 1),
        entangling_power(&Circuit::empty(8, Family::SzConserving, InitSpec::Neel).map_err(err)?, 50, 1),
    ];
    let mut zmax = 0.0f64;
    for z in zero {
        zmax = zmax.max(z.map_err(err)?.mean.abs());
    }
    let rows = compute_entpower(&config("entpower_he_n8")).map_err(err)?;
    let mut violations = Vec::new();
    for w in rows.windows(2) {
        let tol = 2.0 * (w[0].std_err.powi(2) + w[1].std_err.powi(2)).sqrt();
        if w[1].mean < w[0].mean - tol {
            violations.push(format!("{}->{}", w[0].layers, w[1].layers));
        }
    }
    let samples = rows.iter().map(|r| r.samples).min().unwrap_or(0);
    let curve: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.mean)).collect();
    ensure(
        zmax < 1e-12 && violations.is_empty() && samples >= 500 && rows.len() >= 12,
        format!(
            "zero-layer S_V {zmax:.1e}; HE N=8 layers {}..{} S_V [{}] ({samples} samples), decreases {violations:?}",
            rows.first().map_or(0, |r| r.layers),
            rows.last().map_or(0, |r| r.layers),
            curve.join(", ")
        ),
    )
}

fn long_run() -> Option<Check> {
    if !long_run_enabled_by_env() {
        return None;
    }
    let run = || -> Check {
        let mut parts = Vec::new();
        let mut ok = true;
        for (name, reference) in
            [("long_ground_sz_n16", Some(300usize)), ("long_singlets_sz_n14", Some(500)), ("long_triplets_sz_n14", None)]
        {
            let rec = single(name)?;
            let s = &rec.summary;
            let fid_ok = !s.median_fidelity.is_empty() && s.median_fidelity.iter().all(|&f| f > 0.95);
            let iter_ok = match (reference, s.median_n_i_fidelity) {
                (Some(r), Some(n)) => 3 * n >= r && n <= 3 * r,
                (Some(_), None) => false,
                (None, _) => true,
            };
            ok &= fid_ok && iter_ok && s.restarts >= 50;
            parts.push(format!(
                "{name}: {} restarts, median fidelity {:.4?}, median n_I {:?}",
                s.restarts, s.median_fidelity, s.median_n_i_fidelity
            ));
        }
        ensure(ok, parts.join("; "))
    };
    Some(run())
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("gate algebra", gate_algebra),
        ("symmetry conservation", symmetry_conservation),
        ("gradient correctness", gradients),
        ("exact diagonalization labels", ed_oracle),
        ("resource accounting", resources),
        ("ground-state VQE N=8", ground_state),
        ("symmetry advantage at matched CNOT budget", symmetry_advantage),
        ("SSVQE singlets and triplets", ssvqe_pairs),
        ("Ising criticality E_1 and E_2", ising),
        ("deflation", deflation),
        ("entangling power", entangling),
    ];
    let mut failed = 0;
    let mut report = |i: usize, name: &str, res: Option<Check>, secs: f64| match res {
        None => println!("criterion {i:>2} {name}: SKIP (set {LONG_RUN_ENV}=1 to enable)"),
        Some(Ok(d)) => println!("criterion {i:>2} {name}: PASS [{secs:.1}s] {d}"),
        Some(Err(d)) => {
            failed += 1;
            println!("criterion {i:>2} {name}: FAIL [{secs:.1}s] {d}");
        }
    };
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let res = f();
        report(i + 1, name, Some(res), t.elapsed().as_secs_f64());
    }
    let t = Instant::now();
    let res = long_run();
    report(12, "long-run protocols", res, t.elapsed().as_secs_f64());
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
