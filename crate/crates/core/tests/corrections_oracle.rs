mod common;

use num_rational::BigRational;
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_edge::corrections::{compute_z, evaluate_term, z2_parts, CoefficientTable};
use sparse_edge::ensemble::{cumulants_from_moments, EnsembleSpec, Family};

use common::{all_patterns, brute_term, brute_z, random_symmetric};

const REL_TOL: f64 = 1e-12;

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= REL_TOL * scale.max(f64::MIN_POSITIVE)
}

#[test]
fn pattern_enumeration_covers_every_shape() {
    let patterns = all_patterns(3);
    assert!(patterns.iter().any(|p| p.k() == 3 && !p.merges().is_empty() && !p.exclusions().is_empty()));
    assert!(patterns.len() > 100, "{} patterns", patterns.len());
}

#[test]
fn evaluate_term_matches_nested_loops() {
    let patterns = all_patterns(3);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for round in 0..50u64 {
        let n = rng.gen_range(2..=6);
        let sample = random_symmetric(n, 1000 + round);
        let dense = sample.to_dense();
        for p in &patterns {
            if p.distinct_indices() > n {
                assert!(evaluate_term(&sample, p).is_err());
                continue;
            }
            let got = evaluate_term(&sample, p).unwrap();
            let (want, scale) = brute_term(&dense, n, p);
            assert!(close(got, want, scale), "N = {n}, `{p}`: {got} vs {want}");
        }
    }
}

#[test]
fn compute_z_matches_nested_loops() {
    for round in 0..50u64 {
        let n = 2 + (round as usize % 5);
        let sample = random_symmetric(n, round);
        let (want, scale) = brute_z(&sample.to_dense(), n);
        let got = compute_z(&sample, 2, None).unwrap();
        for o in 0..2 {
            assert!(close(got.z[o], want[o], scale[o]), "N = {n}, Z_{}: {} vs {}", o + 1, got.z[o], want[o]);
        }
        assert!(close(got.x, want[0] - 1.0, scale[0] + 1.0));
    }
}

#[test]
fn closed_form_table_agrees_with_power_sums() {
    let table = CoefficientTable::closed_form();
    for seed in 0..10u64 {
        let spec = EnsembleSpec::with_c4_floor(40, 0.3, Family::CenteredBernoulli, seed, f64::NEG_INFINITY).unwrap();
        let sample = spec.sample(seed);
        let direct = compute_z(&sample, 2, None).unwrap();
        let via_table = compute_z(&sample, 2, Some(&table)).unwrap();
        let parts = z2_parts(&sample);
        let scale = parts.quartic.abs() + parts.product.abs() + parts.row.abs() + parts.column.abs();
        assert!(close(direct.z[1], via_table.z[1], scale), "{} vs {}", direct.z[1], via_table.z[1]);
        assert!(close(direct.z[0], via_table.z[0], direct.z[0]));
    }
}

#[test]
fn ensemble_samples_match_brute_force_including_the_background() {
    // The centred Bernoulli law has a nonzero background value on every entry;
    // c4 plays no role in an algebraic identity, so its floor is lifted.
    for seed in 0..5u64 {
        let spec = EnsembleSpec::with_c4_floor(6, 0.3, Family::CenteredBernoulli, seed, f64::NEG_INFINITY).unwrap();
        let sample = spec.sample(0);
        assert!(sample.background() != 0.0);
        let (want, scale) = brute_z(&sample.to_dense(), 6);
        let got = compute_z(&sample, 2, None).unwrap();
        assert!(close(got.z[0], want[0], scale[0]));
        assert!(close(got.z[1], want[1], scale[1]), "{} vs {}", got.z[1], want[1]);
    }
}

fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact cumulants from the set-partition formula
/// `κ_n = Σ_π (-1)^{|π|-1} (|π|-1)! Π_{B ∈ π} m_{|B|}`.
fn exact_cumulants(m: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![rat(0, 1); m.len()];
    for (n, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = rat(0, 1);
        // restricted growth strings enumerate the set partitions of 0..n
        let mut rgs = vec![0usize; n];
        loop {
            let blocks = rgs.iter().max().unwrap() + 1;
            let mut sizes = vec![0usize; blocks];
            for &b in &rgs {
                sizes[b] += 1;
            }
            let mut term: BigRational = sizes.iter().map(|&s| m[s].clone()).product();
            let fact: i64 = (1..blocks as i64).product();
            term *= rat(fact, 1);
            if blocks % 2 == 0 {
                term = -term;
            }
            acc += term;
            if !next_rgs(&mut rgs) {
                break;
            }
        }
        *slot = acc;
    }
    out
}

fn next_rgs(rgs: &mut [usize]) -> bool {
    for i in (1..rgs.len()).rev() {
        let bound = rgs[..i].iter().max().unwrap() + 1;
        if rgs[i] < bound {
            rgs[i] += 1;
            for r in rgs[i + 1..].iter_mut() {
                *r = 0;
            }
            return true;
        }
    }
    false
}

#[test]
fn cumulants_match_the_exact_partition_formula() {
    // Two-point laws: value a with probability p, value c otherwise.
    for &(pn, pd, a, c) in &[(1i64, 4i64, 3i64, -1i64), (1, 10, 9, -1), (3, 8, 5, -3), (1, 2, 1, -1)] {
        let p = rat(pn, pd);
        let q = rat(1, 1) - &p;
        let mut exact = Vec::new();
        let mut float = Vec::new();
        for k in 0..=8u32 {
            let mk = &p * rat(a.pow(k), 1) + &q * rat(c.pow(k), 1);
            float.push(mk.numer().to_string().parse::<f64>().unwrap() / mk.denom().to_string().parse::<f64>().unwrap());
            exact.push(mk);
        }
        let want = exact_cumulants(&exact);
        let got = cumulants_from_moments(&float);
        for n in 1..=8 {
            let w = want[n].numer().to_string().parse::<f64>().unwrap()
                / want[n].denom().to_string().parse::<f64>().unwrap();
            assert!((got[n] - w).abs() <= 1e-10 * (1.0 + w.abs()), "κ_{n}: {} vs {w}", got[n]);
        }
    }
}
