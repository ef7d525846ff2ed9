//! Distance of the top eigenvalues to the shifted edge and to 2.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    collect_rows, edge_scale, prepare, quantile_or_nan, require_samples, Contract, ExperimentKind,
    ExperimentReport, Outcome, RunOptions, MIN_RUN_SAMPLES,
};
use crate::ensemble::EnsembleSpec;
use crate::spectral::top_eigenvalues;
use crate::{Error, Result};

/// Accepted range for the ratio of median `S_1` between consecutive `N`.
pub const RIGIDITY_RATIO_RANGE: (f64, f64) = (0.5, 2.0);
/// Smallest accepted growth of median `U_1` per doubling of `N`.
pub const RIGIDITY_U_GROWTH: f64 = 1.05;
const MAX_K: usize = 5;

/// For every sample: `S_i = N^{2/3}|λ_i - L̂|`, `U_i = N^{2/3}|λ_i - 2|` and the
/// same distance to `L̃`, for `i ≤ k`.
pub fn rigidity_run(spec: &EnsembleSpec, m: usize, k: usize, options: &RunOptions) -> Result<ExperimentReport> {
    require_samples(m, MIN_RUN_SAMPLES)?;
    if k == 0 || k > MAX_K {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={MAX_K}")));
    }
    if k > spec.n() {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds N = {}", spec.n())));
    }
    let scale = edge_scale(spec.n());
    let (rows, degenerate) = collect_rows(spec, m, options.workers, |index| {
        let prepared = match prepare(spec, index, options)? {
            Outcome::Row(p) => p,
            Outcome::Degenerate(reason) => return Ok(Outcome::Degenerate(reason)),
        };
        let top = top_eigenvalues(&prepared.sample, k, options.method)?;
        let c = &prepared.corrections;
        let (l_root, l_series) = (prepared.model.edge_root(), prepared.model.edge_series());
        let mut values = vec![c.z[0], c.z.get(1).copied().unwrap_or(0.0), c.x, l_root, l_series];
        values.extend(&top);
        values.extend(top.iter().map(|l| scale * (l - l_series).abs()));
        values.extend(top.iter().map(|l| scale * (l - 2.0).abs()));
        values.extend(top.iter().map(|l| scale * (l - l_root).abs()));
        Ok(Outcome::Row(values))
    })?;
    let mut columns: Vec<String> = ["z1", "z2", "x", "edge_root", "edge_series"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for prefix in ["lambda", "s", "u", "s_root"] {
        columns.extend((1..=k).map(|i| format!("{prefix}_{i}")));
    }
    let mut config = BTreeMap::new();
    config.insert("k".into(), k.to_string());
    options.echo(&mut config);
    ExperimentReport::new(ExperimentKind::Rigidity, spec, m, config, columns, rows, degenerate)
}

pub(super) fn aggregate(
    report: &ExperimentReport,
    agg: &mut BTreeMap<String, f64>,
    _contracts: &mut Vec<Contract>,
) -> Result<()> {
    let k: usize = report.config_parse("k")?;
    for i in 1..=k {
        for prefix in ["s", "u", "s_root"] {
            let v = report.column(&format!("{prefix}_{i}"))?;
            agg.insert(format!("median_{prefix}_{i}"), quantile_or_nan(&v, 0.5));
            agg.insert(format!("q90_{prefix}_{i}"), quantile_or_nan(&v, 0.9));
        }
    }
    let series = report.column("edge_series")?;
    let root = report.column("edge_root")?;
    agg.insert("mean_edge_series".into(), mean_or_nan(&series));
    agg.insert("mean_edge_root".into(), mean_or_nan(&root));
    let gap = series
        .iter()
        .zip(&root)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    agg.insert("max_edge_discrepancy".into(), gap);
    agg.insert("median_z1".into(), quantile_or_nan(&report.column("z1")?, 0.5));
    agg.insert("median_z2".into(), quantile_or_nan(&report.column("z2")?, 0.5));
    agg.insert("mean_z2".into(), mean_or_nan(&report.column("z2")?));
    Ok(())
}

fn mean_or_nan(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        crate::stats::mean(v)
    }
}

/// Medians across increasing `N` with consecutive ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub ns: Vec<usize>,
    pub values: Vec<f64>,
    /// `values[j+1] / values[j]`.
    pub ratios: Vec<f64>,
    /// Ratios converted to growth per doubling of `N`.
    pub per_doubling: Vec<f64>,
}

impl Trend {
    pub fn new(ns: Vec<usize>, values: Vec<f64>) -> Self {
        let ratios: Vec<f64> = values.windows(2).map(|w| w[1] / w[0]).collect();
        let per_doubling = ratios
            .iter()
            .zip(ns.windows(2))
            .map(|(r, w)| r.powf(1.0 / (w[1] as f64 / w[0] as f64).log2()))
            .collect();
        Self {
            ns,
            values,
            ratios,
            per_doubling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityTrend {
    pub corrected: Trend,
    pub uncorrected: Trend,
    pub contracts: Vec<Contract>,
}

impl RigidityTrend {
    pub fn passed(&self) -> bool {
        self.contracts.iter().all(|c| c.passed)
    }
}

/// Trend of median `S_1` and `U_1` over reports at increasing `N`.
pub fn rigidity_trend(reports: &[ExperimentReport]) -> Result<RigidityTrend> {
    if reports.len() < 2 {
        return Err(Error::InvalidArgument("a trend needs reports at two or more N".into()));
    }
    if reports.iter().any(|r| r.kind != ExperimentKind::Rigidity) {
        return Err(Error::InvalidArgument("trend expects rigidity reports".into()));
    }
    let mut sorted: Vec<&ExperimentReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.n());
    let ns: Vec<usize> = sorted.iter().map(|r| r.n()).collect();
    if ns.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("trend needs distinct N".into()));
    }
    let pick = |name: &str| -> Vec<f64> {
        sorted
            .iter()
            .map(|r| r.aggregates.get(name).copied().unwrap_or(f64::NAN))
            .collect()
    };
    let corrected = Trend::new(ns.clone(), pick("median_s_1"));
    let uncorrected = Trend::new(ns, pick("median_u_1"));
    let mut contracts = Vec::new();
    for (j, r) in corrected.ratios.iter().enumerate() {
        contracts.push(Contract::within(
            format!("median_s_1 ratio N={}->{}", corrected.ns[j], corrected.ns[j + 1]),
            *r,
            Some(RIGIDITY_RATIO_RANGE.0),
            Some(RIGIDITY_RATIO_RANGE.1),
        ));
    }
    for (j, g) in uncorrected.per_doubling.iter().enumerate() {
        contracts.push(Contract::at_least(
            format!("median_u_1 growth per doubling N={}->{}", uncorrected.ns[j], uncorrected.ns[j + 1]),
            *g,
            RIGIDITY_U_GROWTH,
        ));
    }
    Ok(RigidityTrend {
        corrected,
        uncorrected,
        contracts,
    })
}
