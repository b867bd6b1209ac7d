//! Command-line surface: configuration, sweeps, JSONL stores and reports.
//!
//! Exit codes: 0 success, 1 error or failed comparison, 2 validity warnings
//! (suppressed by `--force`).

pub mod config;
pub mod record;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use geophase::decompose::{decompose_family, fit_power_law, DecomposeOptions, FamilyMember};
use geophase::evolve::{integrate_coherence, predict_closed_form_with, wrap_angle, RunConfig};
use geophase::kernel::{kernel_exact, kernel_gaussian};
use geophase::oracle::ensemble_average;
use geophase::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{KernelForm, Method, Resolved};
use crate::record::RunRecord;

/// Environment variable naming the default directory for file artifacts.
pub const OUT_DIR_ENV: &str = "GEOPHASE_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_WARN: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "geophase", version, about = "Berry phase and dephasing of a qubit with a rotating noise axis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set model.density.weight=30`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Exit 0 even when validity checks fail.
    #[arg(long)]
    force: bool,
    /// Directory for file artifacts (default: $GEOPHASE_OUT_DIR, then `.`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coupling constants and validity flags as JSON.
    Constants(ConfigArgs),
    /// Bath kernels on a lag grid, written as CSV.
    Kernel {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One Redfield run plus the closed-form prediction, as JSON.
    Evolve {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also write the coherence trace as CSV.
        #[arg(long)]
        trace: Option<Option<PathBuf>>,
    },
    /// Monte-Carlo ensemble estimate, as JSON.
    Oracle {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also write per-realization coherences as CSV.
        #[arg(long)]
        samples: Option<Option<PathBuf>>,
    },
    /// Runs a `t_p` family and appends JSONL records.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fits and labels the phase and dephasing of one family from a JSONL store.
    Decompose {
        records: PathBuf,
        #[arg(long, value_enum, default_value = "redfield")]
        method: MethodArg,
        /// Pick one family when the store holds several.
        #[arg(long)]
        hash: Option<String>,
        /// Standard errors allowed for terms expected to vanish.
        #[arg(long, default_value_t = 2.0)]
        sigmas: f64,
        /// Absolute allowance added to every vanishing-term check.
        #[arg(long, default_value_t = 1e-12)]
        floor: f64,
    },
    /// Discrepancy table of closed-form and oracle records against Redfield.
    Compare {
        records: PathBuf,
        #[arg(long)]
        hash: Option<String>,
        /// Absolute phase tolerance in radians.
        #[arg(long, default_value_t = 1e-3)]
        phase_tol: f64,
        /// Relative tolerance on the dephasing exponent.
        #[arg(long, default_value_t = 0.05)]
        d_rel_tol: f64,
        /// Oracle standard errors accepted on top of the fixed tolerances.
        #[arg(long, default_value_t = 3.0)]
        sigmas: f64,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Redfield,
    ClosedForm,
    Oracle,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Redfield => Method::Redfield,
            MethodArg::ClosedForm => Method::ClosedForm,
            MethodArg::Oracle => Method::Oracle,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match dispatch(cli.command, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn std::io::Write) -> Result<i32> {
    match cmd {
        Command::Constants(c) => constants(&c, out),
        Command::Kernel { cfg, out: path } => kernel(&cfg, path, out),
        Command::Evolve { cfg, trace } => evolve(&cfg, trace, out),
        Command::Oracle { cfg, samples } => oracle(&cfg, samples, out),
        Command::Sweep { cfg, out: path } => sweep(&cfg, path, out),
        Command::Decompose { records, method, hash, sigmas, floor } => decompose(&records, method.into(), hash, sigmas, floor, out),
        Command::Compare { records, hash, phase_tol, d_rel_tol, sigmas } => compare(&records, hash, Tolerances { phase_tol, d_rel_tol, sigmas }, out),
    }
}

struct Session {
    resolved: Resolved,
    warnings: Vec<String>,
    force: bool,
    out_dir: PathBuf,
}

impl Session {
    fn open(a: &ConfigArgs) -> Result<Self> {
        let resolved = config::load(&a.config, &a.overrides)?;
        let warnings = resolved.model.coupling_constants()?.warnings();
        for w in &warnings {
            eprintln!("WARNING: {w}");
        }
        let out_dir = a
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self { resolved, warnings, force: a.force, out_dir })
    }

    fn artifact(&self, explicit: Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
        let p = explicit.unwrap_or_else(|| self.out_dir.join(default_name));
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(p)
    }

    fn exit_code(&self) -> i32 {
        if self.warnings.is_empty() || self.force {
            EXIT_OK
        } else {
            eprintln!("validity checks failed; rerun with --force to accept");
            EXIT_WARN
        }
    }
}

fn print_json<T: Serialize>(out: &mut dyn std::io::Write, v: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

fn constants(a: &ConfigArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let s = Session::open(a)?;
    let c = s.resolved.model.coupling_constants()?;
    let mut v = serde_json::to_value(&c)?;
    v["warnings"] = serde_json::to_value(&s.warnings)?;
    v["config_hash"] = s.resolved.config_hash()?.into();
    print_json(out, &v)?;
    Ok(s.exit_code())
}

fn kernel(a: &ConfigArgs, path: Option<PathBuf>, out: &mut dyn std::io::Write) -> Result<i32> {
    let s = Session::open(a)?;
    let k = &s.resolved.config.kernel;
    if k.points < 2 || !(k.tau_max > 0.0) {
        bail!("kernel grid needs points >= 2 and tau_max > 0");
    }
    let model = &s.resolved.model;
    let c = model.coupling_constants()?;
    let rows = (0..k.points)
        .into_par_iter()
        .map(|i| {
            let tau = k.tau_max * i as f64 / (k.points - 1) as f64 / model.omega_m;
            match k.form {
                KernelForm::Gaussian => Ok(kernel_gaussian(&c, tau)),
                KernelForm::Exact => kernel_exact(model, tau),
            }
        })
        .collect::<geophase::Result<Vec<_>>>()?;
    let p = s.artifact(path, "kernel.csv")?;
    let mut w = csv::Writer::from_path(&p).with_context(|| format!("creating {}", p.display()))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    writeln!(out, "{}", p.display())?;
    Ok(s.exit_code())
}

#[derive(Serialize)]
struct EvolveReport<'a> {
    record: &'a RunRecord,
    result: &'a geophase::evolve::RunResult,
    closed_form: &'a geophase::evolve::ClosedForm,
}

fn base_record(r: &Resolved, cfg: &RunConfig, method: Method) -> Result<RunRecord> {
    Ok(RunRecord {
        config_hash: r.config_hash()?,
        seed: r.seed(),
        method,
        t_p: cfg.t_p(),
        phi_total: f64::NAN,
        d_total: f64::NAN,
        stderr_phi: None,
        stderr_d: None,
        solid_angle: cfg.loop_spec.solid_angle()?,
        b_lab: cfg.b_lab,
        shape: cfg.loop_spec.shape().clone(),
        timestamp: record::now(),
    })
}

fn run_one(r: &Resolved, cfg: &RunConfig, method: Method) -> Result<RunRecord> {
    let mut rec = base_record(r, cfg, method)?;
    match method {
        Method::Redfield => {
            let res = integrate_coherence(cfg)?;
            rec.phi_total = res.phi_total;
            rec.d_total = res.d_total;
        }
        Method::ClosedForm => {
            let p = predict_closed_form_with(cfg, r.config.run.coefficients)?;
            rec.phi_total = wrap_angle(p.phi_total);
            rec.d_total = p.d_total;
        }
        Method::Oracle => {
            let e = ensemble_average(&cfg.model, &cfg.loop_spec, cfg.b_lab, &r.ensemble())?;
            rec.phi_total = e.phi_mc;
            rec.d_total = e.d_mc;
            rec.stderr_phi = Some(e.stderr_phi);
            rec.stderr_d = Some(e.stderr_d);
        }
    }
    Ok(rec)
}

fn evolve(a: &ConfigArgs, trace: Option<Option<PathBuf>>, out: &mut dyn std::io::Write) -> Result<i32> {
    let s = Session::open(a)?;
    let cfg = s.resolved.run.clone().with_trace(trace.is_some());
    let mut res = integrate_coherence(&cfg)?;
    let closed = predict_closed_form_with(&cfg, s.resolved.config.run.coefficients)?;
    let mut rec = base_record(&s.resolved, &cfg, Method::Redfield)?;
    rec.phi_total = res.phi_total;
    rec.d_total = res.d_total;
    if let Some(explicit) = trace {
        let p = s.artifact(explicit, "trace.csv")?;
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("creating {}", p.display()))?;
        for row in res.trace.take().unwrap_or_default() {
            w.serialize(row)?;
        }
        w.flush()?;
        eprintln!("trace written to {}", p.display());
    }
    print_json(out, &EvolveReport { record: &rec, result: &res, closed_form: &closed })?;
    Ok(s.exit_code())
}

#[derive(Serialize)]
struct SampleRow {
    index: usize,
    re_s: f64,
    im_s: f64,
}

fn oracle(a: &ConfigArgs, samples: Option<Option<PathBuf>>, out: &mut dyn std::io::Write) -> Result<i32> {
    let s = Session::open(a)?;
    let cfg = &s.resolved.run;
    let est = ensemble_average(&cfg.model, &cfg.loop_spec, cfg.b_lab, &s.resolved.ensemble())?;
    let mut rec = base_record(&s.resolved, cfg, Method::Oracle)?;
    rec.phi_total = est.phi_mc;
    rec.d_total = est.d_mc;
    rec.stderr_phi = Some(est.stderr_phi);
    rec.stderr_d = Some(est.stderr_d);
    if let Some(explicit) = samples {
        let p = s.artifact(explicit, "realizations.csv")?;
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("creating {}", p.display()))?;
        for (index, z) in est.samples.iter().enumerate() {
            w.serialize(SampleRow { index, re_s: z.re, im_s: z.im })?;
        }
        w.flush()?;
        eprintln!("realizations written to {}", p.display());
    }
    print_json(out, &serde_json::json!({ "record": rec, "estimate": est }))?;
    Ok(s.exit_code())
}

fn sweep(a: &ConfigArgs, path: Option<PathBuf>, out: &mut dyn std::io::Write) -> Result<i32> {
    let s = Session::open(a)?;
    let sw = s.resolved.config.sweep.clone().context("config has no [sweep] table")?;
    if sw.points == 0 || !(sw.t_min > 0.0 && sw.t_max >= sw.t_min) {
        bail!("sweep needs points >= 1 and 0 < t_min <= t_max");
    }
    if sw.methods.is_empty() {
        bail!("sweep.methods is empty");
    }
    let grid = geophase::decompose::geometric_grid(sw.t_min, sw.t_max, sw.points);
    let jobs: Vec<(f64, Method)> = grid.iter().flat_map(|&t| sw.methods.iter().map(move |&m| (t, m))).collect();
    // Members run in parallel; records are written afterwards in grid order
    // through one appender.
    let records = jobs
        .par_iter()
        .map(|&(t_p, m)| run_one(&s.resolved, &s.resolved.run.with_period(t_p)?, m))
        .collect::<Result<Vec<_>>>()?;
    let p = s.artifact(path, "sweep.jsonl")?;
    record::append(&p, &records)?;
    writeln!(out, "{} records appended to {}", records.len(), p.display())?;
    Ok(s.exit_code())
}

/// Records of one method and one family, sorted by `t_p`.
fn select(records: Vec<RunRecord>, method: Option<Method>, hash: Option<&str>) -> Result<Vec<RunRecord>> {
    let mut chosen: Vec<RunRecord> = records.into_iter().filter(|r| hash.is_none_or(|h| r.config_hash == h)).collect();
    if let Some(first) = chosen.first() {
        if let Some(other) = chosen.iter().find(|r| r.config_hash != first.config_hash) {
            return Err(Error::FamilyMismatch(format!(
                "store mixes config hashes {} and {}; pick one with --hash",
                first.config_hash, other.config_hash
            ))
            .into());
        }
    }
    if let Some(m) = method {
        chosen.retain(|r| r.method == m);
    }
    chosen.sort_by(|a, b| a.t_p.total_cmp(&b.t_p));
    Ok(chosen)
}

#[derive(Serialize)]
struct DecomposeReport {
    config_hash: String,
    method: Method,
    n_records: usize,
    solid_angle: f64,
    decomposition: geophase::decompose::Decomposition,
    /// Power law of `φ_total + 𝒜` (phase unwrapped around `−𝒜`); absent when
    /// the values change sign.
    phase_excess_power_law: Option<geophase::decompose::PowerLaw>,
    dephasing_power_law: Option<geophase::decompose::PowerLaw>,
}

fn decompose(path: &Path, method: Method, hash: Option<String>, sigmas: f64, floor: f64, out: &mut dyn std::io::Write) -> Result<i32> {
    let recs = select(record::read(path)?, Some(method), hash.as_deref())?;
    let first = recs.first().with_context(|| format!("no {method:?} records in {}", path.display()))?;
    let area = first.solid_angle;
    // Phases are stored modulo 2π; unwrap them around the Berry value.
    let members: Vec<FamilyMember> = recs
        .iter()
        .map(|r| FamilyMember {
            shape: r.shape.clone(),
            b_lab: r.b_lab,
            t_p: r.t_p,
            phi_total: wrap_angle(r.phi_total + area) - area,
            d_total: r.d_total,
        })
        .collect();
    let opts = DecomposeOptions { sigmas, floor, solid_angle: Some(area), field_present: false };
    let decomposition = decompose_family(&members, &opts)?;
    let excess: Vec<(f64, f64)> = members.iter().map(|m| (m.t_p, m.phi_total + area)).collect();
    let d: Vec<(f64, f64)> = members.iter().map(|m| (m.t_p, m.d_total)).collect();
    let report = DecomposeReport {
        config_hash: first.config_hash.clone(),
        method,
        n_records: members.len(),
        solid_angle: area,
        decomposition,
        phase_excess_power_law: fit_power_law(&excess).ok(),
        dephasing_power_law: fit_power_law(&d).ok(),
    };
    print_json(out, &report)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy)]
struct Tolerances {
    phase_tol: f64,
    d_rel_tol: f64,
    sigmas: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub t_p: f64,
    pub method: Method,
    pub quantity: &'static str,
    pub reference: f64,
    pub value: f64,
    pub diff: f64,
    pub allowed: f64,
    pub passed: bool,
}

fn same_t(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn compare(path: &Path, hash: Option<String>, tol: Tolerances, out: &mut dyn std::io::Write) -> Result<i32> {
    let recs = select(record::read(path)?, None, hash.as_deref())?;
    let refs: Vec<&RunRecord> = recs.iter().filter(|r| r.method == Method::Redfield).collect();
    if refs.is_empty() {
        bail!("no redfield records to compare against in {}", path.display());
    }
    let mut rows = Vec::new();
    for r in recs.iter().filter(|r| r.method != Method::Redfield) {
        let Some(base) = refs.iter().find(|b| same_t(b.t_p, r.t_p)) else {
            bail!("no redfield record at t_p = {}", r.t_p);
        };
        let noise = |se: Option<f64>| tol.sigmas * se.unwrap_or(0.0);
        let dphi = wrap_angle(r.phi_total - base.phi_total);
        let allowed_phi = tol.phase_tol.max(noise(r.stderr_phi));
        rows.push(CompareRow {
            t_p: r.t_p,
            method: r.method,
            quantity: "phi_total",
            reference: base.phi_total,
            value: r.phi_total,
            diff: dphi,
            allowed: allowed_phi,
            passed: dphi.abs() <= allowed_phi,
        });
        let dd = r.d_total - base.d_total;
        let allowed_d = (tol.d_rel_tol * base.d_total.abs()).max(noise(r.stderr_d));
        rows.push(CompareRow {
            t_p: r.t_p,
            method: r.method,
            quantity: "d_total",
            reference: base.d_total,
            value: r.d_total,
            diff: dd,
            allowed: allowed_d,
            passed: dd.abs() <= allowed_d,
        });
    }
    if rows.is_empty() {
        bail!("only redfield records in {}; nothing to compare", path.display());
    }
    out.write_all(format_table(&rows).as_bytes())?;
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        writeln!(out, "{failed} of {} comparisons failed", rows.len())?;
        return Ok(EXIT_ERROR);
    }
    Ok(EXIT_OK)
}

pub fn format_table(rows: &[CompareRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>12} {:<12} {:<10} {:>14} {:>14} {:>12} {:>12} {}", "t_p", "method", "quantity", "redfield", "value", "diff", "allowed", "status");
    for r in rows {
        let method = match r.method {
            Method::Redfield => "redfield",
            Method::ClosedForm => "closed_form",
            Method::Oracle => "oracle",
        };
        let _ = writeln!(
            s,
            "{:>12.4} {:<12} {:<10} {:>14.6e} {:>14.6e} {:>12.3e} {:>12.3e} {}",
            r.t_p,
            method,
            r.quantity,
            r.reference,
            r.value,
            r.diff,
            r.allowed,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    s
}
