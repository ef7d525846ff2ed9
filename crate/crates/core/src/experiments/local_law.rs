//! `Λ = |m(z̃) - m̃(z̃)|` at `z̃ = L̂ + E + iη` and the stability ratio
//! `Λ / sqrt|P(z̃, m(z̃))|`.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    collect_rows, prepare, quantile_or_nan, require_samples, Contract, ExperimentKind, ExperimentReport,
    Outcome, RunOptions, MIN_RUN_SAMPLES,
};
use super::rigidity::Trend;
use crate::ensemble::EnsembleSpec;
use crate::spectral::{eigen, empirical_stieltjes};
use crate::{Error, Result};

/// Bound on the 0.99-quantile of `N^{1/3} Λ` at `κ = η = N^{-2/3}`.
pub const LOCAL_LAW_EDGE_BOUND: f64 = 10.0;
/// Largest accepted ratio of median `Λ/rhs` at the edge between consecutive `N`.
pub const LOCAL_LAW_TREND_MAX: f64 = 1.5;
/// Bound on the 0.99-quantile of `Λ / sqrt|P|` over points with `η ≥ N^{-2/3}`.
pub const STABILITY_BOUND: f64 = 10.0;
/// Points with `Λ` below this are left out of the stability ratio.
const STABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    /// Offset from `L̂`.
    pub e: f64,
    pub eta: f64,
}

/// Spectral-parameter grid for local-law runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    /// `E = ±N^{-2/3}`, `η = N^{-2/3}`.
    Edge,
    /// `E ∈ {0, ±N^{-2/3}, ±0.04, ±0.5}` against `η` log-spaced over
    /// `[N^{-0.95}, 1]` plus `η = N^{-2/3}`.
    Default { eta_count: usize },
    Custom(Vec<GridPoint>),
}

impl Grid {
    pub fn points(&self, n: usize) -> Vec<GridPoint> {
        let nf = n as f64;
        let edge = nf.powf(-2.0 / 3.0);
        match self {
            Grid::Edge => vec![GridPoint { e: -edge, eta: edge }, GridPoint { e: edge, eta: edge }],
            Grid::Default { eta_count } => {
                let lo = nf.powf(-0.95);
                let count = (*eta_count).max(2);
                let mut etas: Vec<f64> = (0..count)
                    .map(|j| lo * (1.0 / lo).powf(j as f64 / (count - 1) as f64))
                    .collect();
                etas.push(edge);
                etas.sort_by(|a, b| a.total_cmp(b));
                let energies = [0.0, -edge, edge, -0.04, 0.04, -0.5, 0.5];
                let mut out = Vec::new();
                for &eta in &etas {
                    for &e in &energies {
                        out.push(GridPoint { e, eta });
                    }
                }
                out
            }
            Grid::Custom(points) => points.clone(),
        }
    }

    /// Text form used in configs and the report echo: `edge`, `default:6` or
    /// `e1:eta1;e2:eta2;…`.
    pub fn to_text(&self) -> String {
        match self {
            Grid::Edge => "edge".into(),
            Grid::Default { eta_count } => format!("default:{eta_count}"),
            Grid::Custom(points) => points
                .iter()
                .map(|p| format!("{}:{}", p.e, p.eta))
                .collect::<Vec<_>>()
                .join(";"),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t == "edge" {
            return Ok(Grid::Edge);
        }
        if t == "default" {
            return Ok(Grid::Default { eta_count: 6 });
        }
        if let Some(count) = t.strip_prefix("default:") {
            let eta_count = count
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad grid size `{count}`")))?;
            return Ok(Grid::Default { eta_count });
        }
        let points = t
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|pair| {
                let (e, eta) = pair
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidArgument(format!("grid point `{pair}` is not `E:eta`")))?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("grid value `{s}` is not a number")))
                };
                Ok(GridPoint {
                    e: parse(e)?,
                    eta: parse(eta)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty grid".into()));
        }
        Ok(Grid::Custom(points))
    }

    fn validate(&self, n: usize) -> Result<Vec<GridPoint>> {
        let nf = n as f64;
        let eta_min = nf.powf(-0.99);
        let points = self.points(n);
        for p in &points {
            if p.e.abs() > 1.0 || !(p.eta >= eta_min * (1.0 - 1e-12) && p.eta <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "grid point (E = {}, η = {}) outside |E| ≤ 1, N^-0.99 ≤ η ≤ 1",
                    p.e, p.eta
                )));
            }
        }
        Ok(points)
    }
}

const PER_POINT: [&str; 6] = ["lambda", "rhs", "ratio", "scaled", "p_abs", "stab"];

/// Local-law statistics on a grid, with stability columns alongside.
pub fn local_law_run(spec: &EnsembleSpec, m: usize, grid: &Grid, options: &RunOptions) -> Result<ExperimentReport> {
    grid_run(ExperimentKind::LocalLaw, spec, m, grid, options)
}

/// Stability ratio `Λ / sqrt|P(z̃, m)|` on a grid.
pub fn stability_check(spec: &EnsembleSpec, m: usize, grid: &Grid, options: &RunOptions) -> Result<ExperimentReport> {
    grid_run(ExperimentKind::Stability, spec, m, grid, options)
}

fn grid_run(
    kind: ExperimentKind,
    spec: &EnsembleSpec,
    m: usize,
    grid: &Grid,
    options: &RunOptions,
) -> Result<ExperimentReport> {
    require_samples(m, MIN_RUN_SAMPLES)?;
    let n = spec.n();
    let points = grid.validate(n)?;
    let nf = n as f64;
    let (rows, degenerate) = collect_rows(spec, m, options.workers, |index| {
        let prepared = match prepare(spec, index, options)? {
            Outcome::Row(p) => p,
            Outcome::Degenerate(reason) => return Ok(Outcome::Degenerate(reason)),
        };
        let spectrum = eigen(&prepared.sample, false)?;
        let model = &prepared.model;
        let c = &prepared.corrections;
        let mut values = vec![c.z[0], c.z.get(1).copied().unwrap_or(0.0), model.edge_root(), model.edge_series()];
        for p in &points {
            let z = Complex64::new(model.edge_series() + p.e, p.eta);
            let m_emp = empirical_stieltjes(&spectrum, z);
            let m_det = model.m_tilde(z)?;
            let lambda = (m_emp - m_det).norm();
            let rhs = model.local_law_rhs(z, n);
            let p_abs = model.p(z, m_emp).norm();
            let stab = if lambda < STABILITY_FLOOR || p_abs == 0.0 {
                f64::NAN
            } else {
                lambda / p_abs.sqrt()
            };
            values.extend([lambda, rhs, lambda / rhs, nf.cbrt() * lambda, p_abs, stab]);
        }
        Ok(Outcome::Row(values))
    })?;
    let mut columns: Vec<String> = ["z1", "z2", "edge_root", "edge_series"].iter().map(|s| s.to_string()).collect();
    for j in 0..points.len() {
        columns.extend(PER_POINT.iter().map(|c| format!("{c}_{j}")));
    }
    let mut config = BTreeMap::new();
    config.insert("grid".into(), grid.to_text());
    options.echo(&mut config);
    ExperimentReport::new(kind, spec, m, config, columns, rows, degenerate)
}

fn report_points(report: &ExperimentReport) -> Result<Vec<GridPoint>> {
    Ok(Grid::parse(report.config_value("grid")?)?.points(report.n()))
}

/// `κ = η = N^{-2/3}` on either side of the edge.
fn is_edge_point(p: &GridPoint, n: usize) -> bool {
    let edge = (n as f64).powf(-2.0 / 3.0);
    let at = |v: f64| (v - edge).abs() <= 1e-9 * edge;
    at(p.eta) && at(p.e.abs())
}

pub(super) fn aggregate(
    report: &ExperimentReport,
    agg: &mut BTreeMap<String, f64>,
    contracts: &mut Vec<Contract>,
) -> Result<()> {
    let n = report.n();
    let points = report_points(report)?;
    let edge_eta = (n as f64).powf(-2.0 / 3.0);
    let mut edge_scaled = Vec::new();
    let mut edge_ratio = Vec::new();
    let mut all_ratio = Vec::new();
    let mut stab = Vec::new();
    let mut skipped = 0usize;
    for (j, p) in points.iter().enumerate() {
        let ratio = report.column(&format!("ratio_{j}"))?;
        let scaled = report.column(&format!("scaled_{j}"))?;
        let st = report.column(&format!("stab_{j}"))?;
        agg.insert(format!("median_ratio_{j}"), quantile_or_nan(&ratio, 0.5));
        agg.insert(format!("q99_ratio_{j}"), quantile_or_nan(&ratio, 0.99));
        agg.insert(format!("q99_scaled_{j}"), quantile_or_nan(&scaled, 0.99));
        agg.insert(format!("q99_stab_{j}"), quantile_or_nan(&st, 0.99));
        agg.insert(
            format!("max_lambda_{j}"),
            report.column(&format!("lambda_{j}"))?.into_iter().fold(0.0, f64::max),
        );
        all_ratio.extend(&ratio);
        if is_edge_point(p, n) {
            edge_scaled.extend(&scaled);
            edge_ratio.extend(&ratio);
        }
        if p.eta >= edge_eta * (1.0 - 1e-9) {
            skipped += st.iter().filter(|v| !v.is_finite()).count();
            stab.extend(st.into_iter().filter(|v| v.is_finite()));
        }
    }
    agg.insert("q99_ratio_all".into(), quantile_or_nan(&all_ratio, 0.99));
    agg.insert("q99_stab".into(), quantile_or_nan(&stab, 0.99));
    agg.insert("stab_skipped".into(), skipped as f64);
    if !edge_scaled.is_empty() {
        agg.insert("q99_scaled_edge".into(), quantile_or_nan(&edge_scaled, 0.99));
        agg.insert("median_ratio_edge".into(), quantile_or_nan(&edge_ratio, 0.5));
    }
    if report.kind == ExperimentKind::LocalLaw && !edge_scaled.is_empty() {
        contracts.push(Contract::at_most(
            "q99 N^{1/3} Λ at κ = η = N^{-2/3}",
            agg["q99_scaled_edge"],
            LOCAL_LAW_EDGE_BOUND,
        ));
    }
    if !stab.is_empty() {
        contracts.push(Contract::at_most(
            "q99 Λ/sqrt|P| for η ≥ N^{-2/3}",
            agg["q99_stab"],
            STABILITY_BOUND,
        ));
    }
    Ok(())
}

pub(super) fn plot_rows<W: Write>(report: &ExperimentReport, w: &mut W) -> Result<()> {
    writeln!(w, "e,eta,median_ratio,q99_ratio,q99_scaled,q99_stab")?;
    for (j, p) in report_points(report)?.iter().enumerate() {
        let get = |name: &str| report.aggregates.get(&format!("{name}_{j}")).copied().unwrap_or(f64::NAN);
        writeln!(
            w,
            "{},{},{},{},{},{}",
            p.e,
            p.eta,
            get("median_ratio"),
            get("q99_ratio"),
            get("q99_scaled"),
            get("q99_stab")
        )?;
    }
    Ok(())
}

/// Median `Λ/rhs` at the edge points across reports at increasing `N`.
pub fn local_law_trend(reports: &[ExperimentReport]) -> Result<(Trend, Vec<Contract>)> {
    if reports.len() < 2 {
        return Err(Error::InvalidArgument("a trend needs reports at two or more N".into()));
    }
    let mut sorted: Vec<&ExperimentReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.n());
    let ns: Vec<usize> = sorted.iter().map(|r| r.n()).collect();
    let values = sorted
        .iter()
        .map(|r| {
            r.aggregates
                .get("median_ratio_edge")
                .copied()
                .ok_or_else(|| Error::InvalidArgument("trend needs reports with edge grid points".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let trend = Trend::new(ns, values);
    let contracts = trend
        .ratios
        .iter()
        .enumerate()
        .map(|(j, r)| {
            Contract::at_most(
                format!("median Λ/rhs ratio N={}->{}", trend.ns[j], trend.ns[j + 1]),
                *r,
                LOCAL_LAW_TREND_MAX,
            )
        })
        .collect();
    Ok((trend, contracts))
}
