//! Brute-force references shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_edge::corrections::{IndexPattern, Link, Side};
use sparse_edge::ensemble::MatrixSample;

/// Random symmetric matrix with entries of size about `N^{-1/2}` and a few
/// large entries, so powers of `h` do not all vanish.
pub fn random_symmetric(n: usize, seed: u64) -> MatrixSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (n as f64).sqrt();
    let mut dense = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = if rng.gen_bool(0.2) {
                rng.gen_range(-2.0..2.0)
            } else {
                rng.gen_range(-1.0..1.0) * scale
            };
            dense[i * n + j] = v;
            dense[j * n + i] = v;
        }
    }
    MatrixSample::from_dense(n, &dense).unwrap()
}

/// `A_l(s)` written out from its definition: the first factor and every odd
/// power above one are raw moments `h^{s+1}`; later `s = 1` factors are
/// centred, `h² - 1/N`.
fn block(l: usize, s: u32, h: f64, n: usize) -> f64 {
    if s == 1 && l >= 2 {
        h * h - 1.0 / n as f64
    } else {
        let mut p = 1.0;
        for _ in 0..=s {
            p *= h;
        }
        p
    }
}

/// Visits every assignment of the `2k` indices in `0..N` that satisfies the
/// pattern's identifications and exclusions. Returns the term and the sum of
/// absolute summands (the scale for relative comparisons).
pub fn brute_term(dense: &[f64], n: usize, pattern: &IndexPattern) -> (f64, f64) {
    let k = pattern.k();
    let mut idx = vec![0usize; 2 * k];
    let slot = |side: Side, l: usize| match side {
        Side::I => l - 1,
        Side::J => k + l - 1,
    };
    let ok = |idx: &[usize]| {
        pattern
            .merges()
            .iter()
            .all(|m: &Link| idx[slot(m.side, m.later)] == idx[slot(m.side, m.earlier)])
            && pattern
                .exclusions()
                .iter()
                .all(|e: &Link| idx[slot(e.side, e.later)] != idx[slot(e.side, e.earlier)])
    };
    let (mut sum, mut abs) = (0.0, 0.0);
    loop {
        if ok(&idx) {
            let mut prod = 1.0;
            for l in 1..=k {
                let h = dense[idx[l - 1] * n + idx[k + l - 1]];
                prod *= block(l, pattern.s()[l - 1], h, n);
            }
            sum += prod;
            abs += prod.abs();
        }
        let mut pos = 0;
        loop {
            if pos == 2 * k {
                let norm = (n as f64).powi(theta(pattern) as i32);
                return (sum / norm, abs / norm);
            }
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Pairs that share neither index with any earlier pair, recomputed from the
/// merges alone.
fn theta(pattern: &IndexPattern) -> usize {
    let k = pattern.k();
    let mut fresh = 0;
    for l in 1..=k {
        let merged = pattern.merges().iter().any(|m| m.later == l);
        if !merged {
            fresh += 1;
        }
    }
    fresh
}

/// `Z_1`, `Z_2` and their scales by direct nested loops over the definitions.
pub fn brute_z(dense: &[f64], n: usize) -> ([f64; 2], [f64; 2]) {
    let nf = n as f64;
    let h = |i: usize, j: usize| dense[i * n + j];
    let (mut z1, mut z1_abs) = (0.0, 0.0);
    let (mut quartic, mut product, mut row, mut col) = (0.0, 0.0, 0.0, 0.0);
    let mut abs2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = h(i, j) * h(i, j);
            z1 += a / nf;
            z1_abs += a / nf;
            quartic += a * a / nf;
            abs2 += a * a / nf;
            for i2 in 0..n {
                for j2 in 0..n {
                    let b = h(i2, j2) * h(i2, j2) - 1.0 / nf;
                    product += -2.0 * a * b / (nf * nf);
                    abs2 += (2.0 * a * b / (nf * nf)).abs();
                }
            }
            for j2 in 0..n {
                if j2 != j {
                    let b = h(i, j2) * h(i, j2) - 1.0 / nf;
                    row += a * b / nf;
                    abs2 += (a * b / nf).abs();
                }
            }
            for i2 in 0..n {
                if i2 != i {
                    let b = h(i2, j) * h(i2, j) - 1.0 / nf;
                    col += a * b / nf;
                    abs2 += (a * b / nf).abs();
                }
            }
        }
    }
    ([z1, quartic + product + row + col], [z1_abs, abs2])
}

/// Every valid pattern with `k ≤ max_k`, exponents in `{1, 3}` and at most
/// one constraint (identification or exclusion) per later index.
pub fn all_patterns(max_k: usize) -> Vec<IndexPattern> {
    let mut out = Vec::new();
    for k in 1..=max_k {
        // per later index and side: 0 free, 1..=l-1 merge, l..=2(l-1) exclude
        let mut slots = Vec::new();
        for l in 2..=k {
            for side in [Side::I, Side::J] {
                slots.push((l, side));
            }
        }
        let mut choice = vec![0usize; slots.len()];
        loop {
            let mut merges = Vec::new();
            let mut exclusions = Vec::new();
            for (c, &(l, side)) in choice.iter().zip(&slots) {
                let r = l - 1;
                if *c == 0 {
                    continue;
                }
                if *c <= r {
                    merges.push(Link { side, later: l, earlier: *c });
                } else {
                    exclusions.push(Link { side, later: l, earlier: c - r });
                }
            }
            for mask in 0..(1u32 << k) {
                let s: Vec<u32> = (0..k).map(|b| if mask >> b & 1 == 1 { 3 } else { 1 }).collect();
                if let Ok(p) = IndexPattern::new(k, merges.clone(), exclusions.clone(), s) {
                    out.push(p);
                }
            }
            if !advance(&mut choice, &slots) {
                break;
            }
        }
    }
    out
}

/// Odometer step; the slot for index `l` has `1 + 2(l - 1)` options.
fn advance(choice: &mut [usize], slots: &[(usize, Side)]) -> bool {
    for (c, &(l, _)) in choice.iter_mut().zip(slots) {
        *c += 1;
        if *c <= 2 * (l - 1) {
            return true;
        }
        *c = 0;
    }
    false
}
