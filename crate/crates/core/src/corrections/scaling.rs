//! Decay of the correction-term fluctuations with the sparsity parameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleSpec, MatrixSample};
use crate::par::{map_indices, Workers};
use crate::stats;
use crate::{Error, Result};

use super::compute_z;

/// Fewest samples per dimension accepted by [`scaling_study`].
pub const MIN_SAMPLES: usize = 50;

const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_SEED: u64 = 0x5ca1_1ab1e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub q: f64,
    pub samples: usize,
    pub median: f64,
    /// Median absolute deviation of `Z_n` about its median.
    pub spread: f64,
    /// `spread · sqrt(N) · q`; flat in `N` when the spread follows `1/(sqrt(N) q)`.
    pub spread_x_sqrt_n_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub order: usize,
    pub points: Vec<ScalingPoint>,
    /// Log-log slope of the spread against `N`; `None` if a spread vanished.
    pub n_exponent: Option<f64>,
    pub n_exponent_ci: Option<(f64, f64)>,
    /// Log-log slope of the spread against `q`.
    pub q_exponent: Option<f64>,
    pub q_exponent_ci: Option<(f64, f64)>,
}

/// Samples `m` matrices at every `N` in `ns` and fits the spread of `Z_order`.
pub fn scaling_study(
    spec: &EnsembleSpec,
    order: usize,
    ns: &[usize],
    m: usize,
    workers: Workers,
) -> Result<ScalingStudy> {
    if !(1..=2).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    if m < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: m,
        });
    }
    let mut batches = Vec::with_capacity(ns.len());
    for &n in ns {
        let spec_n = spec.with_n(n)?;
        let values = map_indices(m, workers, |i| {
            let sample = spec_n.sample(i as u64);
            compute_z(&sample, order, None).map(|c| c.z[order - 1])
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        batches.push((n, spec_n.q(), values));
    }
    scaling_from_batches(order, &batches)
}

/// Same as [`scaling_study`] for a caller-provided sampler.
pub fn scaling_with_sampler<F>(order: usize, ns: &[(usize, f64)], m: usize, sampler: F) -> Result<ScalingStudy>
where
    F: Fn(usize, usize) -> MatrixSample,
{
    if m < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: m,
        });
    }
    let mut batches = Vec::new();
    for &(n, q) in ns {
        let values = (0..m)
            .map(|i| compute_z(&sampler(n, i), order, None).map(|c| c.z[order - 1]))
            .collect::<Result<Vec<f64>>>()?;
        batches.push((n, q, values));
    }
    scaling_from_batches(order, &batches)
}

/// Fits spreads of pre-computed `Z_order` batches `(N, q, values)`.
pub fn scaling_from_batches(order: usize, batches: &[(usize, f64, Vec<f64>)]) -> Result<ScalingStudy> {
    if batches.len() < 2 {
        return Err(Error::InvalidArgument(
            "a scaling fit needs at least two values of N".into(),
        ));
    }
    if let Some(small) = batches.iter().map(|b| b.2.len()).min() {
        if small < MIN_SAMPLES {
            return Err(Error::InsufficientSamples {
                needed: MIN_SAMPLES,
                got: small,
            });
        }
    }
    let points: Vec<ScalingPoint> = batches
        .iter()
        .map(|(n, q, values)| {
            let spread = stats::mad(values);
            ScalingPoint {
                n: *n,
                q: *q,
                samples: values.len(),
                median: stats::median(values),
                spread,
                spread_x_sqrt_n_q: spread * (*n as f64).sqrt() * q,
            }
        })
        .collect();

    let log_n: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let log_q: Vec<f64> = points.iter().map(|p| p.q.ln()).collect();
    let degenerate = points.iter().any(|p| p.spread.is_nan() || p.spread <= 0.0);
    let fit = |xs: &[f64], spreads: &[f64]| {
        let ly: Vec<f64> = spreads.iter().map(|s| s.ln()).collect();
        stats::linear_fit(xs, &ly).slope
    };
    let spreads: Vec<f64> = points.iter().map(|p| p.spread).collect();

    let (n_exponent, q_exponent, n_ci, q_ci) = if degenerate {
        (None, None, None, None)
    } else {
        let ne = fit(&log_n, &spreads);
        let qe = fit(&log_q, &spreads);
        // Bootstrap: resample every batch independently, refit.
        let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
        let mut boot_n = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        let mut boot_q = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        for _ in 0..BOOTSTRAP_RESAMPLES {
            let s: Vec<f64> = batches
                .iter()
                .map(|(_, _, v)| {
                    let resampled: Vec<f64> =
                        (0..v.len()).map(|_| v[rng.gen_range(0..v.len())]).collect();
                    stats::mad(&resampled)
                })
                .collect();
            if s.iter().all(|v| *v > 0.0) {
                boot_n.push(fit(&log_n, &s));
                boot_q.push(fit(&log_q, &s));
            }
        }
        let ci = |v: &[f64]| {
            (!v.is_empty()).then(|| (stats::quantile(v, 0.025), stats::quantile(v, 0.975)))
        };
        (Some(ne), Some(qe), ci(&boot_n), ci(&boot_q))
    };

    Ok(ScalingStudy {
        order,
        points,
        n_exponent,
        n_exponent_ci: n_ci,
        q_exponent,
        q_exponent_ci: q_ci,
    })
}
