use num_complex::Complex64 as C64;

use super::gate::{ngate_blocks, Gate, Matrix2, Matrix4};
use super::qubit_mask;

/// Applies `gate` in place. Targets must already be validated.
pub(crate) fn apply_unchecked(n: usize, amps: &mut [C64], gate: &Gate) {
    match *gate {
        Gate::Rz { q, theta } => {
            let (lo, hi) = (C64::cis(theta), C64::cis(-theta));
            diag_1q(amps, qubit_mask(n, q), lo, hi);
        }
        Gate::Phase { q, theta } => {
            let m = qubit_mask(n, q);
            let ph = C64::cis(theta);
            for (i, a) in amps.iter_mut().enumerate() {
                if i & m != 0 {
                    *a *= ph;
                }
            }
        }
        Gate::X { q } => {
            for_pairs(amps, qubit_mask(n, q), |amps, i, j| amps.swap(i, j));
        }
        Gate::Cnot { control, target } => {
            let (mc, mt) = (qubit_mask(n, control), qubit_mask(n, target));
            for i in 0..amps.len() {
                if i & mc != 0 && i & mt == 0 {
                    amps.swap(i, i | mt);
                }
            }
        }
        Gate::Swap { a, b } => {
            let (ma, mb) = (qubit_mask(n, a), qubit_mask(n, b));
            for i in 0..amps.len() {
                if i & ma != 0 && i & mb == 0 {
                    amps.swap(i, (i & !ma) | mb);
                }
            }
        }
        Gate::Rzz { a, b, theta } => {
            let both = qubit_mask(n, a) | qubit_mask(n, b);
            let (even, odd) = (C64::cis(theta), C64::cis(-theta));
            for (i, v) in amps.iter_mut().enumerate() {
                *v *= if (i & both).count_ones().is_multiple_of(2) { even } else { odd };
            }
        }
        Gate::NGate { a, b, theta } => {
            let (ma, mb) = (qubit_mask(n, a), qubit_mask(n, b));
            let [(de, oe), (dodd, oodd)] = ngate_blocks(theta);
            for i in 0..amps.len() {
                if i & (ma | mb) != 0 {
                    continue;
                }
                let (i00, i01, i10, i11) = (i, i | mb, i | ma, i | ma | mb);
                let (x0, x3) = (amps[i00], amps[i11]);
                amps[i00] = de * x0 + oe * x3;
                amps[i11] = oe * x0 + de * x3;
                let (x1, x2) = (amps[i01], amps[i10]);
                amps[i01] = dodd * x1 + oodd * x2;
                amps[i10] = oodd * x1 + dodd * x2;
            }
        }
        Gate::Custom2q { a, b, ref matrix } => {
            dense_2q(amps, qubit_mask(n, a), qubit_mask(n, b), matrix);
        }
        Gate::Rx { q, .. } | Gate::Ry { q, .. } | Gate::H { q } => {
            let m = gate.matrix_1q().expect("single-qubit gate");
            dense_1q(amps, qubit_mask(n, q), &m);
        }
    }
}

/// Calls `f(amps, i, j)` for every index pair differing only in `mask`, `i` having the bit clear.
#[inline]
fn for_pairs(amps: &mut [C64], mask: usize, mut f: impl FnMut(&mut [C64], usize, usize)) {
    let dim = amps.len();
    let mut block = 0;
    while block < dim {
        for i in block..block + mask {
            f(amps, i, i | mask);
        }
        block += 2 * mask;
    }
}

#[inline]
fn diag_1q(amps: &mut [C64], mask: usize, lo: C64, hi: C64) {
    for (i, a) in amps.iter_mut().enumerate() {
        *a *= if i & mask == 0 { lo } else { hi };
    }
}

fn dense_1q(amps: &mut [C64], mask: usize, m: &Matrix2) {
    for_pairs(amps, mask, |amps, i, j| {
        let (x0, x1) = (amps[i], amps[j]);
        amps[i] = m[0][0] * x0 + m[0][1] * x1;
        amps[j] = m[1][0] * x0 + m[1][1] * x1;
    });
}

fn dense_2q(amps: &mut [C64], ma: usize, mb: usize, m: &Matrix4) {
    for i in 0..amps.len() {
        if i & (ma | mb) != 0 {
            continue;
        }
        let idx = [i, i | mb, i | ma, i | ma | mb];
        let x = idx.map(|k| amps[k]);
        for (r, &k) in idx.iter().enumerate() {
            amps[k] = (0..4).map(|c| m[r][c] * x[c]).sum();
        }
    }
}

/// Pauli masks `(x, z, ny)` of the generator of angle slot `slot`, or `None` for
/// the projector generator of `Phase`. The generator `G` satisfies
/// `d gate / d angle = i G gate`.
fn generator_masks(n: usize, gate: &Gate, slot: usize) -> Option<(usize, usize, u32)> {
    Some(match *gate {
        Gate::Rx { q, .. } => (qubit_mask(n, q), 0, 0),
        Gate::Ry { q, .. } => (qubit_mask(n, q), qubit_mask(n, q), 1),
        Gate::Rz { q, .. } => (0, qubit_mask(n, q), 0),
        Gate::Rzz { a, b, .. } => (0, qubit_mask(n, a) | qubit_mask(n, b), 0),
        Gate::NGate { a, b, .. } => {
            let both = qubit_mask(n, a) | qubit_mask(n, b);
            match slot {
                0 => (both, 0, 0),
                1 => (both, both, 2),
                _ => (0, both, 0),
            }
        }
        Gate::Phase { .. } => return None,
        _ => unreachable!("gate {:?} has no angle slots", gate.kind()),
    })
}

#[cfg(test)]
/// Writes `G src` into `dst` for the generator of angle slot `slot` of `gate`.
pub(crate) fn apply_generator(n: usize, gate: &Gate, slot: usize, src: &[C64], dst: &mut [C64]) {
    match generator_masks(n, gate, slot) {
        Some((x, z, ny)) => pauli_into(src, dst, x, z, ny),
        None => {
            let Gate::Phase { q, .. } = *gate else { unreachable!() };
            let m = qubit_mask(n, q);
            for (i, (d, s)) in dst.iter_mut().zip(src).enumerate() {
                *d = if i & m != 0 { *s } else { C64::new(0.0, 0.0) };
            }
        }
    }
}

/// `<lambda| G |phi>` for the generator of angle slot `slot`, without a scratch buffer.
pub(crate) fn generator_overlap(n: usize, gate: &Gate, slot: usize, lambda: &[C64], phi: &[C64]) -> C64 {
    match generator_masks(n, gate, slot) {
        Some((x, z, ny)) => {
            let mut acc = C64::new(0.0, 0.0);
            for (i, p) in phi.iter().enumerate() {
                let t = lambda[i ^ x].conj() * p;
                if (i & z).count_ones() % 2 == 0 {
                    acc += t;
                } else {
                    acc -= t;
                }
            }
            acc * i_pow(ny)
        }
        None => {
            let Gate::Phase { q, .. } = *gate else { unreachable!() };
            let m = qubit_mask(n, q);
            lambda.iter().zip(phi).enumerate().filter(|(i, _)| i & m != 0).map(|(_, (l, p))| l.conj() * p).sum()
        }
    }
}

#[cfg(test)]
/// `dst = P src` for the Pauli product with the given X/Z masks and Y count.
pub(crate) fn pauli_into(src: &[C64], dst: &mut [C64], xmask: usize, zmask: usize, ny: u32) {
    let base = i_pow(ny);
    for (i, s) in src.iter().enumerate() {
        let sign = if (i & zmask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        dst[i ^ xmask] = base * sign * s;
    }
}

/// `dst += c P src`.
pub(crate) fn pauli_accumulate(
    src: &[C64],
    dst: &mut [C64],
    xmask: usize,
    zmask: usize,
    ny: u32,
    coeff: f64,
) {
    let base = i_pow(ny) * coeff;
    for (i, s) in src.iter().enumerate() {
        let sign = if (i & zmask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        dst[i ^ xmask] += base * sign * s;
    }
}

#[inline]
pub(crate) fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}
