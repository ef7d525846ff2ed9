//! Descriptive statistics, fits and Kolmogorov–Smirnov tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::numeric::KahanSum;

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().copied().collect::<KahanSum>().value() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss = values.iter().map(|v| (v - m) * (v - m)).collect::<KahanSum>().value();
    ss / (values.len() as f64 - 1.0)
}

pub fn std_dev(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

pub fn std_error(values: &[f64]) -> f64 {
    std_dev(values) / (values.len() as f64).sqrt()
}

/// Quantile with linear interpolation between order statistics (Hyndman–Fan type 7).
pub fn quantile(values: &[f64], p: f64) -> f64 {
    quantile_sorted(&sorted(values), p)
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Median absolute deviation from the median (unscaled).
pub fn mad(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    median(&dev)
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = KahanSum::new();
    let mut sxx = KahanSum::new();
    let mut syy = KahanSum::new();
    for (a, b) in x.iter().zip(y) {
        sxy.add((a - mx) * (b - my));
        sxx.add((a - mx) * (a - mx));
        syy.add((b - my) * (b - my));
    }
    sxy.value() / (sxx.value() * syy.value()).sqrt()
}

/// Ordinary least squares `y ≈ intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "a line needs two points");
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = KahanSum::new();
    let mut sxx = KahanSum::new();
    for (a, b) in x.iter().zip(y) {
        sxy.add((a - mx) * (b - my));
        sxx.add((a - mx) * (a - mx));
    }
    let slope = sxy.value() / sxx.value();
    LinearFit {
        slope,
        intercept: my - slope * mx,
    }
}

/// Exponent `a` of a power law `y ∝ x^a` fitted in log-log space.
pub fn power_law_exponent(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).slope
}

/// Asymptotic Kolmogorov distribution survival function `P(K > t)`.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        return 1.0;
    }
    let mut acc = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        acc += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

/// Two-sample KS distance and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (sa, sb) = (sorted(a), sorted(b));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let t = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_survival(t))
}

/// KS distance between a sample and the Gaussian with the sample's own mean
/// and standard deviation.
pub fn ks_normal_distance(values: &[f64]) -> f64 {
    let s = sorted(values);
    let (m, sd) = (mean(&s), std_dev(&s));
    ks_sorted_vs_normal(&s, m, sd)
}

fn ks_sorted_vs_normal(s: &[f64], m: f64, sd: f64) -> f64 {
    let normal = Normal::new(m, sd).expect("positive standard deviation");
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Composite normality test: KS distance to the fitted Gaussian with a
/// p-value from a parametric bootstrap (parameters re-estimated per resample).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityTest {
    pub distance: f64,
    pub p_value: f64,
    pub critical_95: f64,
}

pub fn ks_normality_bootstrap(values: &[f64], resamples: usize, seed: u64) -> NormalityTest {
    let distance = ks_normal_distance(values);
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = vec![0.0; n];
    let mut boot = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for d in draws.iter_mut() {
            *d = rng.sample(StandardNormal);
        }
        boot.push(ks_normal_distance(&draws));
    }
    let exceed = boot.iter().filter(|&&d| d >= distance).count();
    NormalityTest {
        distance,
        p_value: (exceed as f64 + 1.0) / (resamples as f64 + 1.0),
        critical_95: quantile(&boot, 0.95),
    }
}
