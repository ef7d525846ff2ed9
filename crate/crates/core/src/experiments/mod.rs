//! Monte Carlo runs over an ensemble: edge rigidity, local law at the shifted
//! edge, fluctuation decomposition, the stability diagnostic and a descriptive
//! comparison with GOE.
//!
//! Every run maps sample indices `0..M` through a pure per-sample pipeline
//! (sample, corrections, model, spectrum, statistics) and collects rows in
//! index order, so reports do not depend on the worker count. Aggregates and
//! contract verdicts are functions of the rows and the echoed configuration
//! only; [`ExperimentReport::load`] recomputes and compares them.

mod fluctuation;
mod goe;
mod local_law;
mod rigidity;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corrections::{compute_z, CoefficientTable, CorrectionSet};
use crate::ensemble::{EnsembleSpec, MatrixSample};
use crate::par::{map_indices, Workers};
use crate::scm::{BuildOptions, SelfConsistentModel};
use crate::spectral::EigenMethod;
use crate::stats;
use crate::{Error, Result};

pub use fluctuation::{fluctuation_run, FLUCTUATION_CORR_FLOOR, FLUCTUATION_CORR_CEILING, FLUCTUATION_VAR_RATIO};
pub use goe::{goe_compare_run, goe_sample, goe_self_test, GoeSelfTest};
pub use local_law::{
    local_law_run, local_law_trend, stability_check, Grid, GridPoint, LOCAL_LAW_EDGE_BOUND,
    LOCAL_LAW_TREND_MAX, STABILITY_BOUND,
};
pub use rigidity::{rigidity_run, rigidity_trend, RigidityTrend, Trend, RIGIDITY_RATIO_RANGE, RIGIDITY_U_GROWTH};

pub const SCHEMA_VERSION: u32 = 1;

/// Smallest sample count accepted by any run.
pub const MIN_RUN_SAMPLES: usize = 50;
/// Smallest sample count for runs making distributional statements.
pub const MIN_DISTRIBUTION_SAMPLES: usize = 500;
/// Largest tolerated fraction of samples whose model is degenerate.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.01;
pub const DEFAULT_KS_RESAMPLES: usize = 10_000;
const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rigidity,
    LocalLaw,
    Fluctuation,
    Stability,
    GoeCompare,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Rigidity => "rigidity",
            Self::LocalLaw => "locallaw",
            Self::Fluctuation => "fluct",
            Self::Stability => "stability",
            Self::GoeCompare => "goe",
        }
    }
}

/// Settings shared by all runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub workers: Workers,
    /// Route to the top eigenvalues; local-law runs always use the full spectrum.
    pub method: EigenMethod,
    pub ell: usize,
    pub table: Option<CoefficientTable>,
    pub series_depth: usize,
    /// Replace every sample's corrections by `Z = (1, 0, …)`.
    pub force_semicircle: bool,
    pub ks_resamples: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: Workers::default(),
            method: EigenMethod::Lanczos,
            ell: 2,
            table: None,
            series_depth: BuildOptions::default().series_depth,
            force_semicircle: false,
            ks_resamples: DEFAULT_KS_RESAMPLES,
        }
    }
}

impl RunOptions {
    fn echo(&self, config: &mut BTreeMap<String, String>) {
        config.insert("method".into(), format!("{:?}", self.method).to_lowercase());
        config.insert("ell".into(), self.ell.to_string());
        config.insert("series_depth".into(), self.series_depth.to_string());
        config.insert("force_semicircle".into(), self.force_semicircle.to_string());
        let table = match &self.table {
            Some(t) => hex(&Sha256::digest(t.to_csv().as_bytes())),
            None => "none".into(),
        };
        config.insert("coefficient_table".into(), table);
    }
}

/// Verdict on one numerical contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub name: String,
    #[serde(with = "finite")]
    pub value: f64,
    #[serde(with = "finite_opt")]
    pub lower: Option<f64>,
    #[serde(with = "finite_opt")]
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Contract {
    pub fn within(name: impl Into<String>, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let passed = value.is_finite()
            && lower.is_none_or(|lo| value >= lo)
            && upper.is_none_or(|hi| value <= hi);
        Self {
            name: name.into(),
            value,
            lower,
            upper,
            passed,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::within(name, value, None, Some(bound))
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::within(name, value, Some(bound), None)
    }
}

impl std::fmt::Display for Contract {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let range = match (self.lower, self.upper) {
            (Some(lo), Some(hi)) => format!("in [{lo}, {hi}]"),
            (Some(lo), None) => format!(">= {lo}"),
            (None, Some(hi)) => format!("<= {hi}"),
            (None, None) => "unbounded".into(),
        };
        write!(f, "{verdict} {}: {:.6} {range}", self.name, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub index: u64,
    pub seed: u64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateSample {
    pub index: u64,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub spec: EnsembleSpec,
    pub m: usize,
    /// Every input that influences the payload, echoed as text.
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub columns: Vec<String>,
    /// Per-sample rows; stored in the CSV companion, not in the JSON.
    #[serde(skip)]
    pub rows: Vec<SampleRow>,
    pub degenerate: Vec<DegenerateSample>,
    #[serde(with = "finite_map")]
    pub aggregates: BTreeMap<String, f64>,
    pub contracts: Vec<Contract>,
}

impl ExperimentReport {
    fn new(
        kind: ExperimentKind,
        spec: &EnsembleSpec,
        m: usize,
        mut config: BTreeMap<String, String>,
        columns: Vec<String>,
        rows: Vec<SampleRow>,
        degenerate: Vec<DegenerateSample>,
    ) -> Result<Self> {
        config.insert("kind".into(), kind.name().into());
        config.insert("N".into(), spec.n().to_string());
        config.insert("b".into(), spec.b().to_string());
        config.insert("family".into(), spec.family().name().into());
        if let crate::ensemble::Family::SignedSparse { scale } = spec.family() {
            config.insert("scale".into(), scale.to_string());
        }
        config.insert("master_seed".into(), spec.master_seed().to_string());
        config.insert("c4_floor".into(), spec.c4_floor().to_string());
        config.insert("M".into(), m.to_string());
        let config_hash = config_hash(&config);
        let mut report = Self {
            schema_version: SCHEMA_VERSION,
            kind,
            spec: spec.clone(),
            m,
            config,
            config_hash,
            columns,
            rows,
            degenerate,
            aggregates: BTreeMap::new(),
            contracts: Vec::new(),
        };
        let (aggregates, contracts) = report.derive()?;
        report.aggregates = aggregates;
        report.contracts = contracts;
        Ok(report)
    }

    /// Aggregates and contracts as functions of rows and configuration.
    pub fn derive(&self) -> Result<(BTreeMap<String, f64>, Vec<Contract>)> {
        let mut agg = BTreeMap::new();
        agg.insert(
            "degenerate_fraction".to_string(),
            self.degenerate.len() as f64 / self.m as f64,
        );
        let mut contracts = Vec::new();
        match self.kind {
            ExperimentKind::Rigidity => rigidity::aggregate(self, &mut agg, &mut contracts)?,
            ExperimentKind::LocalLaw | ExperimentKind::Stability => {
                local_law::aggregate(self, &mut agg, &mut contracts)?
            }
            ExperimentKind::Fluctuation => fluctuation::aggregate(self, &mut agg, &mut contracts)?,
            ExperimentKind::GoeCompare => goe::aggregate(self, &mut agg, &mut contracts)?,
        }
        Ok((agg, contracts))
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Report(format!("report has no column `{name}`")))
    }

    /// Values of one column in row order.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r.values[k]).collect())
    }

    /// An aggregate, `None` when absent or not finite.
    pub fn aggregate(&self, name: &str) -> Option<f64> {
        self.aggregates.get(name).copied().filter(|v| v.is_finite())
    }

    pub fn contract(&self, name: &str) -> Option<&Contract> {
        self.contracts.iter().find(|c| c.name == name)
    }

    pub fn passed(&self) -> bool {
        self.contracts.iter().all(|c| c.passed)
    }

    pub fn config_value(&self, key: &str) -> Result<&str> {
        self.config
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Report(format!("config echo lacks `{key}`")))
    }

    fn config_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.config_value(key)?
            .parse()
            .map_err(|_| Error::Report(format!("config echo `{key}` is malformed")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-sample CSV with a `schema_version` line before the header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "schema_version,{SCHEMA_VERSION}")?;
        write!(w, "index,seed")?;
        for c in &self.columns {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
        for row in &self.rows {
            write!(w, "{},{}", row.index, row.seed)?;
            for v in &row.values {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Plot data: histograms of the headline statistics, or per-point
    /// quantiles for grid runs.
    pub fn write_plot_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "schema_version,{SCHEMA_VERSION}")?;
        match self.kind {
            ExperimentKind::LocalLaw | ExperimentKind::Stability => local_law::plot_rows(self, &mut w),
            _ => {
                let series: &[&str] = match self.kind {
                    ExperimentKind::Rigidity => &["s_1", "u_1"],
                    ExperimentKind::Fluctuation => &["unc", "cor", "x_scaled"],
                    _ => &["cor", "goe"],
                };
                writeln!(w, "series,bin_lo,bin_hi,count")?;
                for name in series {
                    for (lo, hi, count) in histogram(&self.column(name)?, HISTOGRAM_BINS) {
                        writeln!(w, "{name},{lo},{hi},{count}")?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Writes `<stem>.json`, `<stem>.csv` and `<stem>.plot.csv` into `dir`.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.csv"));
        let plot = dir.join(format!("{stem}.plot.csv"));
        std::fs::write(&json, self.to_json()? + "\n")?;
        let mut f = BufWriter::new(File::create(&csv)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        let mut f = BufWriter::new(File::create(&plot)?);
        self.write_plot_csv(&mut f)?;
        f.flush()?;
        Ok(vec![json, csv, plot])
    }

    /// Reads a report back and checks that its stored aggregates and
    /// contracts are exactly what its rows imply.
    pub fn load(json: &Path, csv: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(json)?;
        let mut report: Self = serde_json::from_str(&text)?;
        report.rows = read_rows(File::open(csv)?, &report.columns)?;
        report.verify()?;
        Ok(report)
    }

    pub fn verify(&self) -> Result<()> {
        if self.config_hash != config_hash(&self.config) {
            return Err(Error::Report("config hash does not match the config echo".into()));
        }
        if self.rows.len() + self.degenerate.len() != self.m {
            return Err(Error::Report(format!(
                "{} rows and {} degenerate samples do not add up to M = {}",
                self.rows.len(),
                self.degenerate.len(),
                self.m
            )));
        }
        let (aggregates, contracts) = self.derive()?;
        if !same_map(&aggregates, &self.aggregates) {
            let diff: Vec<&String> = aggregates
                .iter()
                .filter(|(k, v)| self.aggregates.get(*k).is_none_or(|w| !same(**v, *w)))
                .map(|(k, _)| k)
                .collect();
            return Err(Error::Report(format!("aggregates differ from recomputation: {diff:?}")));
        }
        if contracts.len() != self.contracts.len()
            || contracts.iter().zip(&self.contracts).any(|(a, b)| {
                a.name != b.name || a.passed != b.passed || !same(a.value, b.value)
            })
        {
            return Err(Error::Report("contracts differ from recomputation".into()));
        }
        Ok(())
    }
}

fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

fn same_map(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|((ka, va), (kb, vb))| ka == kb && same(*va, *vb))
}

fn read_rows<R: Read>(reader: R, columns: &[String]) -> Result<Vec<SampleRow>> {
    let mut lines = BufReader::new(reader).lines();
    let version = lines.next().transpose()?.unwrap_or_default();
    if version.trim() != format!("schema_version,{SCHEMA_VERSION}") {
        return Err(Error::Report(format!("unsupported CSV schema line `{version}`")));
    }
    let header = lines.next().transpose()?.unwrap_or_default();
    let expected = std::iter::once("index".to_string())
        .chain(std::iter::once("seed".to_string()))
        .chain(columns.iter().cloned())
        .collect::<Vec<_>>()
        .join(",");
    if header.trim() != expected {
        return Err(Error::Report("CSV header does not match the report columns".into()));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Report(format!("CSV row {} is malformed", k + 1));
        let mut fields = line.split(',');
        let index = fields.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let seed = fields.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let values = fields
            .map(|s| s.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != columns.len() {
            return Err(bad());
        }
        rows.push(SampleRow { index, seed, values });
    }
    Ok(rows)
}

/// Hex SHA-256 of the config echo, one `key=value` line per entry in key order.
pub fn config_hash(config: &BTreeMap<String, String>) -> String {
    let mut hasher = Sha256::new();
    for (k, v) in config {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b"\n");
    }
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Equal-width histogram over the finite values.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in finite {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (lo + k as f64 * width, lo + (k + 1) as f64 * width, c))
        .collect()
}

/// Everything derived from one sample before its spectrum.
pub(crate) struct Prepared {
    pub sample: MatrixSample,
    pub corrections: CorrectionSet,
    pub model: SelfConsistentModel,
}

pub(crate) enum Outcome<T> {
    Row(T),
    Degenerate(String),
}

pub(crate) fn prepare(spec: &EnsembleSpec, index: u64, options: &RunOptions) -> Result<Outcome<Prepared>> {
    let sample = spec.sample(index);
    let corrections = compute_z(&sample, options.ell, options.table.as_ref())?;
    let z = if options.force_semicircle {
        CorrectionSet::semicircle(sample.n(), options.ell).z
    } else {
        corrections.z.clone()
    };
    let build = BuildOptions {
        series_depth: options.series_depth,
    };
    match SelfConsistentModel::build(&z, build) {
        Ok(model) => Ok(Outcome::Row(Prepared {
            sample,
            corrections,
            model,
        })),
        Err(Error::DegenerateModel(reason)) => Ok(Outcome::Degenerate(reason)),
        Err(e) => Err(e),
    }
}

/// Runs `row_of` for every index and splits the outcomes; fails when too many
/// samples are degenerate.
pub(crate) fn collect_rows<F>(
    spec: &EnsembleSpec,
    m: usize,
    workers: Workers,
    row_of: F,
) -> Result<(Vec<SampleRow>, Vec<DegenerateSample>)>
where
    F: Fn(u64) -> Result<Outcome<Vec<f64>>> + Sync + Send,
{
    let outcomes = map_indices(m, workers, |i| row_of(i as u64));
    let mut rows = Vec::with_capacity(m);
    let mut degenerate = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let index = i as u64;
        let seed = spec.sample_seed(index);
        match outcome? {
            Outcome::Row(values) => rows.push(SampleRow { index, seed, values }),
            Outcome::Degenerate(reason) => degenerate.push(DegenerateSample { index, seed, reason }),
        }
    }
    if degenerate.len() as f64 > MAX_DEGENERATE_FRACTION * m as f64 {
        return Err(Error::TooManyDegenerate {
            failed: degenerate.len(),
            total: m,
        });
    }
    Ok((rows, degenerate))
}

pub(crate) fn require_samples(m: usize, needed: usize) -> Result<()> {
    if m < needed {
        return Err(Error::InsufficientSamples { needed, got: m });
    }
    Ok(())
}

/// `N^{2/3}`.
pub(crate) fn edge_scale(n: usize) -> f64 {
    (n as f64).powf(2.0 / 3.0)
}

/// Median and selected quantiles of a column, skipping non-finite values.
pub(crate) fn finite_values(values: &[f64]) -> Vec<f64> {
    values.iter().copied().filter(|v| v.is_finite()).collect()
}

pub(crate) fn quantile_or_nan(values: &[f64], p: f64) -> f64 {
    let v = finite_values(values);
    if v.is_empty() {
        f64::NAN
    } else {
        stats::quantile(&v, p)
    }
}

mod finite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

mod finite_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_finite() => s.serialize_some(x),
            _ => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<f64>::deserialize(d)
    }
}

mod finite_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let view: BTreeMap<&String, Option<f64>> =
            m.iter().map(|(k, v)| (k, v.is_finite().then_some(*v))).collect();
        view.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, Option<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contracts_judge_bounds() {
        assert!(Contract::at_most("a", 1.0, 1.0).passed);
        assert!(!Contract::at_most("a", 1.1, 1.0).passed);
        assert!(!Contract::at_least("a", f64::NAN, 0.0).passed);
        assert!(Contract::within("a", 0.7, Some(0.5), Some(2.0)).passed);
        assert!(Contract::at_most("a", 1.0, 2.0).to_string().starts_with("PASS a"));
    }

    #[test]
    fn config_hash_depends_on_every_entry() {
        let mut c = BTreeMap::new();
        c.insert("N".to_string(), "10".to_string());
        let h1 = config_hash(&c);
        c.insert("M".to_string(), "50".to_string());
        assert_ne!(h1, config_hash(&c));
        assert_eq!(h1.len(), 64);
    }

    #[test]
    fn histogram_counts_everything() {
        let v = [0.0, 0.5, 1.0, f64::NAN, 0.25];
        let h = histogram(&v, 4);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 4);
        assert_eq!(h[3].2, 1);
        assert!(histogram(&[], 3).is_empty());
    }

    #[test]
    fn finite_map_round_trips_nan() {
        #[derive(Serialize, Deserialize)]
        struct W {
            #[serde(with = "finite_map")]
            m: BTreeMap<String, f64>,
        }
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), 1.5);
        m.insert("b".to_string(), f64::NAN);
        let text = serde_json::to_string(&W { m }).unwrap();
        assert_eq!(text, r#"{"m":{"a":1.5,"b":null}}"#);
        let back: W = serde_json::from_str(&text).unwrap();
        assert!(back.m["b"].is_nan());
    }
}
