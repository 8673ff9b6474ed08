use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{commutator_norm, FastPath, Observable, Operator};
use crate::error::{Error, Result};
use crate::statevector::{dot, i_pow, StateVector};

/// Symmetry blocks larger than this are solved by Lanczos instead of a dense eigensolve.
pub const DENSE_BLOCK_LIMIT: usize = 1000;

const COMMUTATION_TOL: f64 = 1e-8;
const COMMUTATION_PROBES: usize = 4;
const LANCZOS_MAX_KRYLOV: usize = 200;
const LANCZOS_MAX_RESTARTS: usize = 60;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledEigenstate {
    /// 1-based position in ascending-energy order.
    pub index: usize,
    pub energy: f64,
    pub s: Option<f64>,
    pub s_z: Option<f64>,
    pub flip_parity: Option<i8>,
    pub label: String,
    /// Index of the degenerate energy group this state belongs to.
    pub group: usize,
    #[serde(skip)]
    pub vector: Option<StateVector>,
}

impl LabeledEigenstate {
    pub fn state(&self) -> &StateVector {
        self.vector.as_ref().expect("eigenvector was not retained")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    pub n_qubits: usize,
    pub states: Vec<LabeledEigenstate>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Looks a state up by symbolic label (`E_{T1}^{(0)}`) or position (`E_3`, `E3`).
    pub fn find(&self, label: &str) -> Option<&LabeledEigenstate> {
        let key = normalize_label(label);
        if let Some(s) = self.states.iter().find(|s| normalize_label(&s.label) == key) {
            return Some(s);
        }
        let idx: usize = key.strip_prefix('E')?.trim_matches(|c| c == '{' || c == '}').parse().ok()?;
        self.get(idx)
    }

    /// 1-based access.
    pub fn get(&self, index: usize) -> Option<&LabeledEigenstate> {
        index.checked_sub(1).and_then(|i| self.states.get(i))
    }

    /// All computed states degenerate with `index` (1-based).
    pub fn multiplet(&self, index: usize) -> Vec<&LabeledEigenstate> {
        match self.get(index) {
            Some(s) => self.states.iter().filter(|o| o.group == s.group).collect(),
            None => Vec::new(),
        }
    }

    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.energy).collect()
    }
}

fn normalize_label(label: &str) -> String {
    label.chars().filter(|c| !c.is_whitespace() && *c != '_').collect::<String>().replace("(+0)", "(0)")
}

/// Lowest `k` eigenstates of `obs`, simultaneously diagonalized with `symmetries`.
///
/// Supported symmetries are `S_z`, `S_tot^2` and the global spin flip. `S_z` and
/// the spin flip are also used to block the Hamiltonian before solving.
pub fn diagonalize_labeled(obs: &Observable, k: usize, symmetries: &[Observable]) -> Result<Spectrum> {
    let n = obs.n_qubits();
    let dim = 1usize << n;
    if k == 0 || k > dim {
        return Err(Error::config(format!("k must lie in 1..={dim}, got {k}")));
    }
    let mut has = (false, false, false);
    for sym in symmetries {
        if sym.n_qubits() != n {
            return Err(Error::config("symmetry operator size differs from the Hamiltonian"));
        }
        match sym.fast_path() {
            Some(FastPath::SZ) => has.0 = true,
            Some(FastPath::STotSq) => has.1 = true,
            Some(FastPath::SpinFlipX) => has.2 = true,
            _ => {
                return Err(Error::config(
                    "only S_z, S_tot^2 and spin-flip symmetries can label eigenstates",
                ))
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for sym in symmetries {
        for _ in 0..COMMUTATION_PROBES {
            let psi = StateVector::random(n, &mut rng)?;
            let c = commutator_norm(obs, sym, &psi)?;
            if c > COMMUTATION_TOL * obs.coefficient_norm().max(1.0) {
                return Err(Error::validation(format!(
                    "symmetry {:?} does not commute with the Hamiltonian (||[H,S]psi|| = {c:.3e})",
                    sym.fast_path()
                )));
            }
        }
    }

    let (use_sz, s_tot, use_flip) = has;
    let sectors = if use_sz {
        sz_sectors(n)
    } else if use_flip {
        flip_sectors(n)
    } else {
        vec![(0..dim).map(|i| vec![(i, 1.0)]).collect()]
    };

    let degeneracy_tol = 1e-9 * obs.coefficient_norm().max(1.0);
    let mut pairs: Vec<(f64, Vec<C64>)> = Vec::new();
    for basis in &sectors {
        let block = SparseBlock::build(obs, basis);
        let found = if basis.len() <= DENSE_BLOCK_LIMIT {
            block.dense_lowest(k, degeneracy_tol)
        } else {
            block.lanczos_lowest(k, degeneracy_tol, &mut rng)?
        };
        for (e, local) in found {
            pairs.push((e, embed(dim, basis, &local)));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // group by energy; keep whole groups straddling the k-th state
    let mut groups: Vec<Vec<(f64, Vec<C64>)>> = Vec::new();
    for (taken, p) in pairs.into_iter().enumerate() {
        let start_new = groups.last().is_none_or(|g| (p.0 - g[0].0).abs() > degeneracy_tol);
        if start_new {
            if taken >= k {
                break;
            }
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(p);
    }

    let s2_op = s_tot.then(|| Observable::s_tot_sq(n));
    let sz_op = use_sz.then(|| Observable::s_z(n));
    let flip_op = use_flip.then(|| Observable::spin_flip_x(n));

    let mut states = Vec::new();
    let mut multiplet_counts: Vec<(i64, usize)> = Vec::new();
    for (g, group) in groups.into_iter().enumerate() {
        let energy = group.iter().map(|p| p.0).sum::<f64>() / group.len() as f64;
        let mut vecs: Vec<Vec<C64>> = group.into_iter().map(|p| p.1).collect();
        let mut keys: Vec<Vec<f64>> = vec![Vec::new(); vecs.len()];
        for op in [&s2_op, &sz_op, &flip_op].into_iter().flatten() {
            refine(op, &mut vecs, &mut keys);
        }
        let mut members: Vec<(Vec<f64>, Vec<C64>)> = keys.into_iter().zip(vecs).collect();
        members.sort_by(|a, b| {
            let ka = sort_key(&a.0, s_tot, use_sz, use_flip);
            let kb = sort_key(&b.0, s_tot, use_sz, use_flip);
            ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut seen_s: Vec<(i64, usize)> = Vec::new();
        for (key, v) in members {
            let mut it = key.iter();
            let s = s_tot.then(|| spin_from_s2(*it.next().unwrap()));
            let s_z = use_sz.then(|| (it.next().unwrap() * 2.0).round() / 2.0);
            let flip_parity = use_flip.then(|| if *it.next().unwrap() >= 0.0 { 1i8 } else { -1 });
            let index = states.len() + 1;
            let label = match s {
                Some(s) => {
                    let twice = (2.0 * s).round() as i64;
                    // count multiplets of this s across groups; members of one multiplet share a number
                    let local = seen_s.iter_mut().find(|(t, _)| *t == twice);
                    let slot = match local {
                        Some((_, c)) => {
                            *c += 1;
                            *c - 1
                        }
                        None => {
                            seen_s.push((twice, 1));
                            0
                        }
                    };
                    let mult = (twice + 1) as usize;
                    let before = multiplet_counts.iter().find(|(t, _)| *t == twice).map_or(0, |x| x.1);
                    let number = before + slot / mult + 1;
                    spin_label(twice, number, s_z)
                }
                None => format!("E_{{{index}}}"),
            };
            states.push(LabeledEigenstate {
                index,
                energy,
                s,
                s_z,
                flip_parity,
                label,
                group: g,
                vector: Some(StateVector::from_amplitudes(v)?),
            });
        }
        for (twice, count) in seen_s {
            let mult = (twice + 1) as usize;
            let add = count.div_ceil(mult);
            match multiplet_counts.iter_mut().find(|(t, _)| *t == twice) {
                Some((_, c)) => *c += add,
                None => multiplet_counts.push((twice, add)),
            }
        }
    }
    states.truncate(k);
    Ok(Spectrum { n_qubits: n, states })
}

fn sort_key(key: &[f64], s_tot: bool, sz: bool, flip: bool) -> (f64, f64, f64) {
    let mut it = key.iter().copied();
    let a = if s_tot { it.next().unwrap() } else { 0.0 };
    let b = if sz { it.next().unwrap() } else { 0.0 };
    // even parity first
    let c = if flip { -it.next().unwrap() } else { 0.0 };
    (round_key(a), round_key(b), round_key(c))
}

fn round_key(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn spin_from_s2(s2: f64) -> f64 {
    let s = 0.5 * (-1.0 + (1.0 + 4.0 * s2.max(0.0)).sqrt());
    (2.0 * s).round() / 2.0
}

fn spin_label(twice_s: i64, number: usize, s_z: Option<f64>) -> String {
    let letter = match twice_s {
        0 => "S".to_string(),
        1 => "D".to_string(),
        2 => "T".to_string(),
        t => format!("M{}", t + 1),
    };
    let base = format!("E_{{{letter}{number}}}");
    match s_z {
        Some(_) if twice_s == 0 => base,
        Some(m) => format!("{base}^{{({})}}", format_sz(m)),
        None => base,
    }
}

fn format_sz(m: f64) -> String {
    let twice = (2.0 * m).round() as i64;
    let body = if twice % 2 == 0 { format!("{}", (twice / 2).abs()) } else { format!("{}/2", twice.abs()) };
    match twice.signum() {
        0 => "0".to_string(),
        1 => format!("+{body}"),
        _ => format!("-{body}"),
    }
}

/// Diagonalizes `op` inside each cluster of equal keys and appends the eigenvalue to every key.
fn refine(op: &Observable, vecs: &mut [Vec<C64>], keys: &mut [Vec<f64>]) {
    let mut order: Vec<usize> = (0..vecs.len()).collect();
    order.sort_by(|&a, &b| keys[a].partial_cmp(&keys[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && same_key(&keys[order[start]], &keys[order[end]]) {
            end += 1;
        }
        let cluster: Vec<usize> = order[start..end].to_vec();
        let applied: Vec<Vec<C64>> = cluster
            .iter()
            .map(|&i| {
                let mut out = vec![C64::new(0.0, 0.0); vecs[i].len()];
                op.apply_into(&vecs[i], &mut out);
                out
            })
            .collect();
        let m = cluster.len();
        let gram = DMatrix::from_fn(m, m, |r, c| dot(&vecs[cluster[r]], &applied[c]));
        let gram = (&gram + gram.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(gram);
        let old: Vec<Vec<C64>> = cluster.iter().map(|&i| vecs[i].clone()).collect();
        for (j, &target) in cluster.iter().enumerate() {
            let mut v = vec![C64::new(0.0, 0.0); old[0].len()];
            for (r, o) in old.iter().enumerate() {
                let w = eig.eigenvectors[(r, j)];
                v.iter_mut().zip(o).for_each(|(a, b)| *a += w * b);
            }
            vecs[target] = v;
            keys[target].push(eig.eigenvalues[j]);
        }
        start = end;
    }
}

fn same_key(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-6)
}

/// Block basis vectors as sparse (global index, coefficient) lists.
type Basis = Vec<Vec<(usize, f64)>>;

fn sz_sectors(n: usize) -> Vec<Basis> {
    let mut sectors: Vec<Basis> = vec![Vec::new(); n + 1];
    for i in 0..1usize << n {
        sectors[i.count_ones() as usize].push(vec![(i, 1.0)]);
    }
    sectors
}

fn flip_sectors(n: usize) -> Vec<Basis> {
    let all = (1usize << n) - 1;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for i in 0..1usize << (n - 1) {
        even.push(vec![(i, h), (i ^ all, h)]);
        odd.push(vec![(i, h), (i ^ all, -h)]);
    }
    vec![even, odd]
}

fn embed(dim: usize, basis: &Basis, local: &[C64]) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    for (b, c) in basis.iter().zip(local) {
        for &(g, w) in b {
            v[g] += c * w;
        }
    }
    v
}

/// Hamiltonian restricted to one symmetry block, stored by column.
struct SparseBlock {
    dim: usize,
    cols: Vec<Vec<(usize, C64)>>,
}

impl SparseBlock {
    fn build(obs: &Observable, basis: &Basis) -> Self {
        let mut lookup = std::collections::HashMap::with_capacity(basis.len() * 2);
        for (local, b) in basis.iter().enumerate() {
            for &(g, w) in b {
                lookup.insert(g, (local, w));
            }
        }
        let masks: Vec<(usize, usize, C64)> = obs
            .terms()
            .iter()
            .map(|t| {
                let (x, z, ny) = t.string.masks();
                (x, z, i_pow(ny) * t.coeff)
            })
            .collect();
        let cols = basis
            .iter()
            .map(|b| {
                let mut entries: Vec<(usize, C64)> = Vec::new();
                for &(g, w) in b {
                    for &(x, z, c) in &masks {
                        let sign = if (g & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        if let Some(&(row, rw)) = lookup.get(&(g ^ x)) {
                            entries.push((row, c * (sign * w * rw)));
                        }
                    }
                }
                entries.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, C64)> = Vec::with_capacity(entries.len());
                for (r, v) in entries {
                    match merged.last_mut() {
                        Some(last) if last.0 == r => last.1 += v,
                        _ => merged.push((r, v)),
                    }
                }
                merged.retain(|e| e.1.norm() > 1e-15);
                merged
            })
            .collect();
        SparseBlock { dim: basis.len(), cols }
    }

    fn matvec(&self, x: &[C64], y: &mut [C64]) {
        y.fill(C64::new(0.0, 0.0));
        for (j, col) in self.cols.iter().enumerate() {
            let xj = x[j];
            for &(r, v) in col {
                y[r] += v * xj;
            }
        }
    }

    fn dense_lowest(&self, k: usize, tol: f64) -> Vec<(f64, Vec<C64>)> {
        let real = self.cols.iter().flatten().all(|e| e.1.im == 0.0);
        let (values, vectors): (Vec<f64>, Vec<Vec<C64>>) = if real {
            let mut m = DMatrix::<f64>::zeros(self.dim, self.dim);
            for (j, col) in self.cols.iter().enumerate() {
                for &(r, v) in col {
                    m[(r, j)] = v.re;
                }
            }
            let eig = SymmetricEigen::new(m);
            let vecs = eig.eigenvectors.column_iter().map(|c| c.iter().map(|&x| C64::new(x, 0.0)).collect());
            (eig.eigenvalues.iter().copied().collect(), vecs.collect())
        } else {
            let mut m = DMatrix::<C64>::zeros(self.dim, self.dim);
            for (j, col) in self.cols.iter().enumerate() {
                for &(r, v) in col {
                    m[(r, j)] = v;
                }
            }
            let eig = SymmetricEigen::new(m);
            let vecs = eig.eigenvectors.column_iter().map(|c| c.iter().copied().collect());
            (eig.eigenvalues.iter().copied().collect(), vecs.collect())
        };
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut take = k.min(self.dim);
        while take < self.dim && (values[order[take]] - values[order[take - 1]]).abs() <= tol {
            take += 1;
        }
        order[..take].iter().map(|&i| (values[i], vectors[i].clone())).collect()
    }

    /// Lowest eigenpairs one at a time, each run deflated against the pairs already locked.
    fn lanczos_lowest(&self, k: usize, tol: f64, rng: &mut ChaCha8Rng) -> Result<Vec<(f64, Vec<C64>)>> {
        let mut locked: Vec<(f64, Vec<C64>)> = Vec::new();
        while locked.len() < self.dim {
            let (e, v) = self.lanczos_one(&locked, tol, rng)?;
            let done = locked.len() >= k && (e - locked.last().unwrap().0).abs() > tol;
            if done {
                break;
            }
            locked.push((e, v));
            if locked.len() >= k && locked.len() == self.dim {
                break;
            }
        }
        locked.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(locked)
    }

    fn lanczos_one(&self, locked: &[(f64, Vec<C64>)], tol: f64, rng: &mut ChaCha8Rng) -> Result<(f64, Vec<C64>)> {
        use rand::Rng;
        let dim = self.dim;
        let mut start: Vec<C64> = (0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let krylov_cap = LANCZOS_MAX_KRYLOV.min(dim - locked.len());
        for _ in 0..LANCZOS_MAX_RESTARTS {
            orthogonalize(&mut start, locked.iter().map(|l| l.1.as_slice()));
            if normalize(&mut start) < 1e-14 {
                return Err(Error::numerical("Lanczos start vector vanished after deflation"));
            }
            let mut q: Vec<Vec<C64>> = vec![start.clone()];
            let mut alpha: Vec<f64> = Vec::new();
            let mut beta: Vec<f64> = Vec::new();
            let mut w = vec![C64::new(0.0, 0.0); dim];
            let (theta, y, residual) = loop {
                let j = q.len() - 1;
                self.matvec(&q[j], &mut w);
                let a = dot(&q[j], &w).re;
                alpha.push(a);
                // full reorthogonalization, twice for stability
                for _ in 0..2 {
                    orthogonalize(&mut w, q.iter().map(|v| v.as_slice()));
                    orthogonalize(&mut w, locked.iter().map(|l| l.1.as_slice()));
                }
                let b = normalize(&mut w);
                let m = alpha.len();
                let exhausted = b < 1e-12 || m >= krylov_cap;
                if m.is_multiple_of(10) || exhausted {
                    let (theta, y) = tridiagonal_lowest(&alpha, &beta);
                    let residual = if b < 1e-12 { 0.0 } else { b * y[m - 1].abs() };
                    if residual < tol || exhausted {
                        break (theta, y, residual);
                    }
                }
                beta.push(b);
                q.push(w.clone());
            };
            let mut x = vec![C64::new(0.0, 0.0); dim];
            for (c, v) in y.iter().zip(&q) {
                x.iter_mut().zip(v).for_each(|(a, b)| *a += *c * b);
            }
            normalize(&mut x);
            if residual < tol || krylov_cap < LANCZOS_MAX_KRYLOV {
                return Ok((theta, x));
            }
            start = x;
        }
        Err(Error::numerical("Lanczos did not converge"))
    }
}

fn orthogonalize<'a>(v: &mut [C64], against: impl Iterator<Item = &'a [C64]>) {
    for u in against {
        let c = dot(u, v);
        v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
    }
}

fn normalize(v: &mut [C64]) -> f64 {
    let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
    n
}

fn tridiagonal_lowest(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let i = eig.eigenvalues.imin();
    (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect())
}
