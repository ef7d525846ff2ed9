//! Plain-text `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sparse_edge::ensemble::{parse_family, EnsembleSpec, Family};
use sparse_edge::experiments::{Grid, DEFAULT_KS_RESAMPLES};
use sparse_edge::par::Workers;
use sparse_edge::scm::DEFAULT_ETA_FLOOR;
use sparse_edge::spectral::EigenMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sample,
    Spectrum,
    Corrections,
    Model,
    Density,
    Rigidity,
    LocalLaw,
    Fluct,
    Stability,
    Goe,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Sample,
        Command::Spectrum,
        Command::Corrections,
        Command::Model,
        Command::Density,
        Command::Rigidity,
        Command::LocalLaw,
        Command::Fluct,
        Command::Stability,
        Command::Goe,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Spectrum => "spectrum",
            Command::Corrections => "corrections",
            Command::Model => "model",
            Command::Density => "density",
            Command::Rigidity => "rigidity",
            Command::LocalLaw => "locallaw",
            Command::Fluct => "fluct",
            Command::Stability => "stability",
            Command::Goe => "goe",
        }
    }

    /// Commands that draw matrices and therefore need an ensemble.
    pub fn needs_ensemble(&self) -> bool {
        !matches!(self, Command::Model | Command::Density)
    }

    /// Batch experiments that need `M`.
    pub fn is_experiment(&self) -> bool {
        matches!(
            self,
            Command::Rigidity | Command::LocalLaw | Command::Fluct | Command::Stability | Command::Goe
        )
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
                format!("unknown command `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Where a value came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Line(usize),
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Line(n) => write!(f, "line {n}"),
            Source::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub source: Option<Source>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.source, &self.key) {
            (Some(s), Some(k)) => write!(f, "{s}: key `{k}`: {}", self.message),
            (Some(s), None) => write!(f, "{s}: {}", self.message),
            (None, Some(k)) => write!(f, "key `{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Every key the parser accepts.
pub const KEYS: [&str; 24] = [
    "command",
    "N",
    "b",
    "family",
    "scale",
    "master_seed",
    "c4_floor",
    "M",
    "k",
    "grid",
    "ell",
    "table",
    "output",
    "workers",
    "method",
    "series_depth",
    "force_semicircle",
    "ks_resamples",
    "index",
    "Z",
    "x_min",
    "x_max",
    "points",
    "eta_floor",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub ns: Vec<usize>,
    pub b: Option<f64>,
    pub family: Family,
    pub master_seed: u64,
    pub c4_floor: f64,
    pub m: Option<usize>,
    pub k: usize,
    pub grid: Grid,
    pub ell: usize,
    pub table: Option<PathBuf>,
    pub output: PathBuf,
    pub workers: Workers,
    pub method: EigenMethod,
    pub series_depth: usize,
    pub force_semicircle: bool,
    pub ks_resamples: usize,
    pub index: u64,
    pub z: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub eta_floor: f64,
}

impl RunConfig {
    /// Ensemble for one of the configured sizes.
    pub fn spec(&self, n: usize) -> sparse_edge::Result<EnsembleSpec> {
        let b = self.b.expect("validated: b is present whenever N is");
        EnsembleSpec::with_c4_floor(n, b, self.family, self.master_seed, self.c4_floor)
    }

    /// Resolved configuration with every default filled in, in a form
    /// [`parse_config`] reads back to the same value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        line("command", self.command.to_string());
        if !self.ns.is_empty() {
            line("N", join(&self.ns));
        }
        if let Some(b) = self.b {
            line("b", b.to_string());
        }
        line("family", self.family.name().to_string());
        if let Family::SignedSparse { scale } = self.family {
            line("scale", scale.to_string());
        }
        line("master_seed", self.master_seed.to_string());
        line("c4_floor", self.c4_floor.to_string());
        if let Some(m) = self.m {
            line("M", m.to_string());
        }
        line("k", self.k.to_string());
        line("grid", self.grid.to_text());
        line("ell", self.ell.to_string());
        if let Some(t) = &self.table {
            line("table", t.display().to_string());
        }
        line("output", self.output.display().to_string());
        line("workers", self.workers.0.to_string());
        line("method", format!("{:?}", self.method).to_lowercase());
        line("series_depth", self.series_depth.to_string());
        line("force_semicircle", self.force_semicircle.to_string());
        line("ks_resamples", self.ks_resamples.to_string());
        line("index", self.index.to_string());
        line("Z", join(&self.z));
        line("x_min", self.x_min.to_string());
        line("x_max", self.x_max.to_string());
        line("points", self.points.to_string());
        line("eta_floor", self.eta_floor.to_string());
        out
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Parses a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_with_overrides(text, &[])
}

/// Parses a document, then applies `(key, value)` overrides from the command line.
pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<String, (Source, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let source = Source::Line(i + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError {
                source: Some(source),
                key: None,
                message: "expected `key = value`".into(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        check_key(key, &source)?;
        if let Some((first, _)) = entries.get(key) {
            return Err(ConfigError {
                source: Some(source),
                key: Some(key.into()),
                message: format!("duplicate key (first set on {first})"),
            });
        }
        entries.insert(key.into(), (source, value.into()));
    }
    for (key, value) in overrides {
        check_key(key, &Source::Flag)?;
        entries.insert(key.clone(), (Source::Flag, value.trim().into()));
    }
    Parser { entries }.finish()
}

fn check_key(key: &str, source: &Source) -> Result<(), ConfigError> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(ConfigError {
            source: Some(source.clone()),
            key: Some(key.into()),
            message: "unknown key".into(),
        })
    }
}

struct Parser {
    entries: BTreeMap<String, (Source, String)>,
}

impl Parser {
    fn fail(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            source: self.entries.get(key).map(|(s, _)| s.clone()),
            key: Some(key.into()),
            message: message.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn get<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| self.fail(key, format!("`{v}` is not {what}"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let items: Result<Vec<T>, _> = v
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<T>().map_err(|_| self.fail(key, format!("`{s}` is not {what}")))
            })
            .collect();
        let items = items?;
        if items.is_empty() {
            return Err(self.fail(key, "empty list"));
        }
        Ok(Some(items))
    }

    fn positive(&self, key: &str, value: usize) -> Result<usize, ConfigError> {
        if value == 0 {
            Err(self.fail(key, format!("{key} must be at least 1")))
        } else {
            Ok(value)
        }
    }

    fn finish(self) -> Result<RunConfig, ConfigError> {
        let command: Command = match self.raw("command") {
            None => {
                return Err(ConfigError {
                    source: None,
                    key: Some("command".into()),
                    message: "missing required key".into(),
                })
            }
            Some(v) => v.parse().map_err(|e: String| self.fail("command", e))?,
        };

        let ns: Vec<i64> = self.list("N", "an integer")?.unwrap_or_default();
        let mut sizes = Vec::with_capacity(ns.len());
        for n in ns {
            if n < 1 {
                return Err(self.fail("N", format!("N = {n} must be at least 1")));
            }
            sizes.push(n as usize);
        }
        let b: Option<f64> = self.get("b", "a number")?;
        if let Some(b) = b {
            if !(b > 0.0 && b < 0.5) {
                return Err(self.fail(
                    "b",
                    format!("sparsity exponent b = {b} outside (0, 0.5); the ensemble requires 0 < b < 1/2"),
                ));
            }
        }
        if command.needs_ensemble() {
            if sizes.is_empty() {
                return Err(missing("N", command));
            }
            if b.is_none() {
                return Err(missing("b", command));
            }
        }

        let scale: Option<f64> = self.get("scale", "a number")?;
        let family_name = self.raw("family").unwrap_or("signed_sparse");
        let family = parse_family(family_name, scale).map_err(|e| self.fail("family", e.to_string()))?;
        if let Some(s) = scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(self.fail("scale", format!("scale = {s} must be positive")));
            }
        }
        let master_seed = self.get("master_seed", "an unsigned integer")?.unwrap_or(0);
        let c4_floor = self
            .get("c4_floor", "a number")?
            .unwrap_or_else(|| family.default_c4_floor());

        let m: Option<i64> = self.get("M", "an integer")?;
        let m = match m {
            Some(m) if m < 1 => return Err(self.fail("M", format!("M = {m} must be at least 1"))),
            Some(m) => Some(m as usize),
            None if command.is_experiment() => return Err(missing("M", command)),
            None => None,
        };
        let k = self.get::<usize>("k", "a positive integer")?.unwrap_or(1);
        let k = self.positive("k", k)?;
        let grid = match self.raw("grid") {
            None => Grid::Edge,
            Some(v) => Grid::parse(v).map_err(|e| self.fail("grid", e.to_string()))?,
        };
        let ell = self.get::<usize>("ell", "a positive integer")?.unwrap_or(2);
        let ell = self.positive("ell", ell)?;
        let table = self.raw("table").map(PathBuf::from);
        if ell > 2 && table.is_none() {
            return Err(self.fail("ell", format!("ell = {ell} needs a coefficient `table`")));
        }
        let output = PathBuf::from(self.raw("output").unwrap_or("."));
        // 0 leaves the choice to the thread pool.
        let workers = Workers(self.get::<usize>("workers", "a non-negative integer")?.unwrap_or(0));
        let method = match self.raw("method") {
            None => EigenMethod::Lanczos,
            Some(v) => v.parse().map_err(|e: sparse_edge::Error| self.fail("method", e.to_string()))?,
        };
        let series_depth = self.get::<usize>("series_depth", "a positive integer")?.unwrap_or(2);
        let series_depth = self.positive("series_depth", series_depth)?;
        let force_semicircle = self
            .get::<bool>("force_semicircle", "`true` or `false`")?
            .unwrap_or(false);
        let ks_resamples = self
            .get::<usize>("ks_resamples", "a positive integer")?
            .unwrap_or(DEFAULT_KS_RESAMPLES);
        let ks_resamples = self.positive("ks_resamples", ks_resamples)?;
        let index = self.get("index", "an unsigned integer")?.unwrap_or(0);
        let z = self.list::<f64>("Z", "a number")?.unwrap_or_else(|| vec![1.0, 0.0]);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(self.fail("Z", "entries must be finite"));
        }
        let x_min: f64 = self.get("x_min", "a number")?.unwrap_or(-3.0);
        let x_max: f64 = self.get("x_max", "a number")?.unwrap_or(3.0);
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(self.fail("x_max", format!("need x_min < x_max, got [{x_min}, {x_max}]")));
        }
        let points = self.get::<usize>("points", "an integer ≥ 2")?.unwrap_or(601);
        if points < 2 {
            return Err(self.fail("points", "need at least 2 points"));
        }
        let eta_floor: f64 = self.get("eta_floor", "a number")?.unwrap_or(DEFAULT_ETA_FLOOR);
        if !(1e-9..=1e-3).contains(&eta_floor) {
            return Err(self.fail("eta_floor", format!("eta_floor = {eta_floor} outside [1e-9, 1e-3]")));
        }

        Ok(RunConfig {
            command,
            ns: sizes,
            b,
            family,
            master_seed,
            c4_floor,
            m,
            k,
            grid,
            ell,
            table,
            output,
            workers,
            method,
            series_depth,
            force_semicircle,
            ks_resamples,
            index,
            z,
            x_min,
            x_max,
            points,
            eta_floor,
        })
    }
}

fn missing(key: &str, command: Command) -> ConfigError {
    ConfigError {
        source: None,
        key: Some(key.into()),
        message: format!("required by command `{command}`"),
    }
}
