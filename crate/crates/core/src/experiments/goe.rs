//! Descriptive comparison of the corrected top eigenvalue with GOE.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    collect_rows, edge_scale, prepare, require_samples, Contract, ExperimentKind, ExperimentReport, Outcome,
    RunOptions, MIN_DISTRIBUTION_SAMPLES,
};
use crate::ensemble::{sample_seed, EnsembleSpec, MatrixSample};
use crate::par::{map_indices, Workers};
use crate::spectral::{top_eigenvalues, EigenMethod};
use crate::stats;
use crate::Result;

const GOE_STREAM: u64 = 0x474f_455f_5354_524d;

/// GOE matrix with off-diagonal variance `1/N` and diagonal variance `2/N`.
pub fn goe_sample(n: usize, seed: u64) -> MatrixSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let off = Normal::new(0.0, (1.0 / n as f64).sqrt()).expect("finite variance");
    let diag = Normal::new(0.0, (2.0 / n as f64).sqrt()).expect("finite variance");
    let mut dense = vec![0.0; n * n];
    for i in 0..n {
        dense[i * n + i] = diag.sample(&mut rng);
        for j in i + 1..n {
            let v = off.sample(&mut rng);
            dense[i * n + j] = v;
            dense[j * n + i] = v;
        }
    }
    MatrixSample::from_dense(n, &dense).expect("symmetric by construction")
}

fn goe_top(n: usize, master: u64, index: u64, method: EigenMethod) -> Result<f64> {
    let sample = goe_sample(n, sample_seed(master ^ GOE_STREAM, index));
    Ok(top_eigenvalues(&sample, 1, method)?[0])
}

/// Per sample: `N^{2/3}(λ_1 - L̂)` of the ensemble and `N^{2/3}(μ_1 - 2)` of an
/// independent GOE matrix.
pub fn goe_compare_run(spec: &EnsembleSpec, m: usize, options: &RunOptions) -> Result<ExperimentReport> {
    require_samples(m, MIN_DISTRIBUTION_SAMPLES)?;
    let n = spec.n();
    let scale = edge_scale(n);
    let (rows, degenerate) = collect_rows(spec, m, options.workers, |index| {
        let prepared = match prepare(spec, index, options)? {
            Outcome::Row(p) => p,
            Outcome::Degenerate(reason) => return Ok(Outcome::Degenerate(reason)),
        };
        let l1 = top_eigenvalues(&prepared.sample, 1, options.method)?[0];
        let mu1 = goe_top(n, spec.master_seed(), index, options.method)?;
        let edge = prepared.model.edge_series();
        Ok(Outcome::Row(vec![l1, mu1, edge, scale * (l1 - edge), scale * (mu1 - 2.0)]))
    })?;
    let columns = ["lambda_1", "goe_1", "edge_series", "cor", "goe"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut config = BTreeMap::new();
    options.echo(&mut config);
    ExperimentReport::new(ExperimentKind::GoeCompare, spec, m, config, columns, rows, degenerate)
}

pub(super) fn aggregate(
    report: &ExperimentReport,
    agg: &mut BTreeMap<String, f64>,
    _contracts: &mut Vec<Contract>,
) -> Result<()> {
    let cor = report.column("cor")?;
    let goe = report.column("goe")?;
    let (d, p) = stats::ks_two_sample(&cor, &goe);
    agg.insert("ks_distance".into(), d);
    agg.insert("ks_p".into(), p);
    agg.insert("expected_fluctuation".into(), expected_fluctuation(cor.len()));
    agg.insert("mean_cor".into(), stats::mean(&cor));
    agg.insert("mean_goe".into(), stats::mean(&goe));
    Ok(())
}

/// `1.36 sqrt(2/M)`, the 95% two-sample KS critical distance for equal sizes.
fn expected_fluctuation(m: usize) -> f64 {
    1.36 * (2.0 / m as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoeSelfTest {
    pub distance: f64,
    pub p_value: f64,
    pub expected: f64,
}

/// Two independent GOE batches of size `m` compared by two-sample KS.
pub fn goe_self_test(n: usize, m: usize, seed: u64, workers: Workers) -> Result<GoeSelfTest> {
    require_samples(m, MIN_DISTRIBUTION_SAMPLES)?;
    let scale = edge_scale(n);
    let draw = |stream: u64| -> Result<Vec<f64>> {
        map_indices(m, workers, |i| goe_top(n, seed ^ stream, i as u64, EigenMethod::Lanczos))
            .into_iter()
            .map(|r| r.map(|l| scale * (l - 2.0)))
            .collect()
    };
    let a = draw(1)?;
    let b = draw(2)?;
    let (distance, p_value) = stats::ks_two_sample(&a, &b);
    Ok(GoeSelfTest {
        distance,
        p_value,
        expected: expected_fluctuation(m),
    })
}
