//! Dispatch of a parsed configuration and artifact output.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::json;
use sparse_edge::corrections::{compute_z, CoefficientTable};
use sparse_edge::ensemble::sample_seed;
use sparse_edge::experiments::{
    fluctuation_run, goe_compare_run, local_law_run, local_law_trend, rigidity_run, rigidity_trend,
    stability_check, Contract, ExperimentReport, RunOptions, SCHEMA_VERSION,
};
use sparse_edge::par::map_indices;
use sparse_edge::scm::{BuildOptions, SelfConsistentModel};
use sparse_edge::spectral::{eigen, MAX_DENSE_N};

use crate::config::{Command, RunConfig};

/// Result of a run that did not hit an error.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub contracts: Vec<Contract>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.contracts.iter().all(|c| c.passed)
    }

    /// 0 when every contract holds, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }
}

#[derive(Debug)]
pub struct RunError {
    pub message: String,
    /// Files already written when the error occurred.
    pub partial: Vec<PathBuf>,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        if !self.partial.is_empty() {
            write!(f, "\npartial outputs (incomplete run):")?;
            for p in &self.partial {
                write!(f, "\n  {}", p.display())?;
            }
        }
        Ok(())
    }
}

impl std::error::Error for RunError {}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn fail(&self, context: &str, e: impl fmt::Display) -> RunError {
        RunError {
            message: format!("{context}: {e}"),
            partial: self.files.clone(),
        }
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| self.fail(&format!("writing {}", path.display()), e))?;
        self.files.push(path);
        Ok(())
    }

    fn with_file(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> sparse_edge::Result<()>,
    ) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let context = format!("writing {}", path.display());
        let file = File::create(&path).map_err(|e| self.fail(&context, e))?;
        self.files.push(path);
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(|e| self.fail(&context, e))?;
        w.flush().map_err(|e| self.fail(&context, e))
    }

    fn report(&mut self, report: &ExperimentReport, stem: &str) -> Result<(), RunError> {
        let written = report
            .write_files(&self.dir, stem)
            .map_err(|e| self.fail(&format!("writing report {stem}"), e))?;
        self.files.extend(written);
        Ok(())
    }
}

/// Executes `config`, writing artifacts into its output directory.
///
/// Payload files depend only on the configuration; wall-clock data goes to
/// `<command>.meta`.
pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let dir = &config.output;
    if !dir.is_dir() {
        return Err(RunError {
            message: format!("output directory {} does not exist", dir.display()),
            partial: Vec::new(),
        });
    }
    let table = match &config.table {
        Some(path) => Some(load_table(path)?),
        None => None,
    };
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut out = Writer {
        dir: dir.clone(),
        files: Vec::new(),
    };
    let contracts = dispatch(config, table, &mut out)?;
    let name = config.command.name();
    out.text(&format!("{name}.cfg"), &config.to_text())?;
    let meta = format!(
        "started_unix = {}\nelapsed_seconds = {:.3}\nversion = {}\nparallel = {}\n",
        started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        clock.elapsed().as_secs_f64(),
        env!("CARGO_PKG_VERSION"),
        sparse_edge::par::is_parallel(),
    );
    out.text(&format!("{name}.meta"), &meta)?;
    Ok(RunOutcome {
        files: out.files,
        contracts,
    })
}

fn load_table(path: &Path) -> Result<CoefficientTable, RunError> {
    let fail = |e: &dyn fmt::Display| RunError {
        message: format!("coefficient table {}: {e}", path.display()),
        partial: Vec::new(),
    };
    let file = File::open(path).map_err(|e| fail(&e))?;
    CoefficientTable::from_csv(file).map_err(|e| fail(&e))
}

fn options(config: &RunConfig, table: Option<CoefficientTable>) -> RunOptions {
    RunOptions {
        workers: config.workers,
        method: config.method,
        ell: config.ell,
        table,
        series_depth: config.series_depth,
        force_semicircle: config.force_semicircle,
        ks_resamples: config.ks_resamples,
    }
}

fn dispatch(
    config: &RunConfig,
    table: Option<CoefficientTable>,
    out: &mut Writer,
) -> Result<Vec<Contract>, RunError> {
    let opts = options(config, table);
    match config.command {
        Command::Model => {
            let model = build_model(config, out)?;
            let body = json!({
                "schema_version": SCHEMA_VERSION,
                "z": model.corrections(),
                "tau": model.tau(),
                "edge_root": model.edge_root(),
                "edge_series": model.edge_series(),
                "series_terms": model.series_terms_used(),
                "edge_discrepancy": model.edge_discrepancy(),
            });
            let text = serde_json::to_string_pretty(&body).map_err(|e| out.fail("model", e))?;
            out.text("model.json", &(text + "\n"))?;
            Ok(Vec::new())
        }
        Command::Density => {
            let model = build_model(config, out)?;
            let steps = config.points - 1;
            let mut rows = Vec::with_capacity(config.points);
            for i in 0..config.points {
                let x = config.x_min + (config.x_max - config.x_min) * i as f64 / steps as f64;
                let rho = model
                    .density(x, config.eta_floor)
                    .map_err(|e| out.fail(&format!("density at x = {x}"), e))?;
                rows.push((x, rho));
            }
            out.with_file("density.csv", |w| {
                writeln!(w, "schema_version,{SCHEMA_VERSION}")?;
                writeln!(w, "x,rho")?;
                for (x, rho) in &rows {
                    writeln!(w, "{x:e},{rho:e}")?;
                }
                Ok(())
            })?;
            Ok(Vec::new())
        }
        Command::Sample => {
            for &n in &config.ns {
                let spec = config.spec(n).map_err(|e| out.fail(&format!("N = {n}"), e))?;
                let sample = spec.sample(config.index);
                let stem = format!("sample_N{n}_i{}", config.index);
                out.with_file(&format!("{stem}.bin"), |w| sample.write_binary(w))?;
                out.text(&format!("{stem}.cfg"), &spec.to_config_text())?;
                eprintln!("sample N={n} index={} seed={}", config.index, sample.seed());
            }
            Ok(Vec::new())
        }
        Command::Spectrum => {
            for &n in &config.ns {
                if n > MAX_DENSE_N {
                    return Err(out.fail(&format!("N = {n}"), format!("dense spectra are limited to N ≤ {MAX_DENSE_N}")));
                }
                let spec = config.spec(n).map_err(|e| out.fail(&format!("N = {n}"), e))?;
                let spectrum = eigen(&spec.sample(config.index), false).map_err(|e| out.fail(&format!("N = {n}"), e))?;
                out.with_file(&format!("spectrum_N{n}_i{}.csv", config.index), |w| spectrum.write_csv(w))?;
                eprintln!("spectrum N={n} index={} top={:e}", config.index, spectrum.top(1)[0]);
            }
            Ok(Vec::new())
        }
        Command::Corrections => {
            let m = config.m.unwrap_or(1);
            for &n in &config.ns {
                let spec = config.spec(n).map_err(|e| out.fail(&format!("N = {n}"), e))?;
                let rows = map_indices(m, config.workers, |i| {
                    compute_z(&spec.sample(i as u64), opts.ell, opts.table.as_ref())
                });
                let rows: Vec<_> = rows
                    .into_iter()
                    .collect::<sparse_edge::Result<_>>()
                    .map_err(|e| out.fail(&format!("N = {n}"), e))?;
                out.with_file(&format!("corrections_N{n}.csv"), |w| {
                    writeln!(w, "schema_version,{SCHEMA_VERSION}")?;
                    let z_cols: Vec<String> = (1..=opts.ell).map(|j| format!("z{j}")).collect();
                    writeln!(w, "index,seed,{},x", z_cols.join(","))?;
                    for (i, c) in rows.iter().enumerate() {
                        let z: Vec<String> = c.z.iter().map(|v| format!("{v:e}")).collect();
                        writeln!(w, "{i},{},{},{:e}", sample_seed(spec.master_seed(), i as u64), z.join(","), c.x)?;
                    }
                    Ok(())
                })?;
                eprintln!("corrections N={n} M={m}");
            }
            Ok(Vec::new())
        }
        Command::Rigidity | Command::LocalLaw | Command::Fluct | Command::Stability | Command::Goe => {
            experiments(config, &opts, out)
        }
    }
}

fn build_model(config: &RunConfig, out: &Writer) -> Result<SelfConsistentModel, RunError> {
    SelfConsistentModel::build(
        &config.z,
        BuildOptions {
            series_depth: config.series_depth,
        },
    )
    .map_err(|e| out.fail("model", e))
}

fn experiments(config: &RunConfig, opts: &RunOptions, out: &mut Writer) -> Result<Vec<Contract>, RunError> {
    let m = config.m.expect("validated: experiments carry M");
    let name = config.command.name();
    let mut reports = Vec::with_capacity(config.ns.len());
    let mut contracts = Vec::new();
    for &n in &config.ns {
        let context = format!("{name} N = {n}");
        let spec = config.spec(n).map_err(|e| out.fail(&context, e))?;
        let clock = Instant::now();
        let report = match config.command {
            Command::Rigidity => rigidity_run(&spec, m, config.k, opts),
            Command::LocalLaw => local_law_run(&spec, m, &config.grid, opts),
            Command::Fluct => fluctuation_run(&spec, m, opts),
            Command::Stability => stability_check(&spec, m, &config.grid, opts),
            Command::Goe => goe_compare_run(&spec, m, opts),
            _ => unreachable!("not an experiment"),
        }
        .map_err(|e| out.fail(&context, e))?;
        out.report(&report, &format!("{name}_N{n}"))?;
        eprintln!(
            "{name} N={n} M={m} degenerate={} ({:.1} s)",
            report.degenerate.len(),
            clock.elapsed().as_secs_f64()
        );
        contracts.extend(report.contracts.iter().cloned());
        reports.push(report);
    }
    if reports.len() >= 2 {
        let trend = match config.command {
            Command::Rigidity => {
                let t = rigidity_trend(&reports).map_err(|e| out.fail("trend", e))?;
                contracts.extend(t.contracts.iter().cloned());
                Some(serde_json::to_value(&t))
            }
            Command::LocalLaw => {
                let (t, c) = local_law_trend(&reports).map_err(|e| out.fail("trend", e))?;
                contracts.extend(c.iter().cloned());
                Some(serde_json::to_value(json!({ "trend": t, "contracts": c })))
            }
            _ => None,
        };
        if let Some(value) = trend {
            let value = value.map_err(|e| out.fail("trend", e))?;
            let text = serde_json::to_string_pretty(&value).map_err(|e| out.fail("trend", e))?;
            out.text(&format!("{name}_trend.json"), &(text + "\n"))?;
        }
    }
    Ok(contracts)
}
