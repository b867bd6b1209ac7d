//! Run configuration: a TOML file with nested tables, patched by `--set`
//! overrides and resolved into the library types.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use geophase::evolve::{Coefficients, KernelChoice, RunConfig};
use geophase::geometry::{LoopShape, LoopSpec};
use geophase::oracle::EnsembleConfig;
use geophase::spectral::{Density, Regime, SpectralModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    #[serde(rename = "loop")]
    pub loop_: LoopSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub oracle: OracleSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub kernel: KernelSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub regime: Regime,
    /// `βΩ_m`; omit for classical models, `inf` for zero temperature.
    pub beta_omega_m: Option<f64>,
    #[serde(default = "one")]
    pub omega_m: f64,
    pub density: Option<Density>,
    /// Two-column CSV with header `x,j`, read as a tabulated density.
    pub density_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub t_p: f64,
    pub shape: Option<LoopShape>,
    /// CSV with header `s,theta,phi`, read as a piecewise table.
    pub table_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    #[serde(default)]
    pub b_lab: [f64; 3],
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub kernel: KernelChoice,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub coefficients: Coefficients,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { kernel: KernelChoice::Auto, tolerance: default_tolerance(), coefficients: Coefficients::CouplingConstants }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default = "one_u64")]
    pub seed: u64,
    pub dt_max: Option<f64>,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { n_modes: default_modes(), n_realizations: default_realizations(), seed: 1, dt_max: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Redfield,
    ClosedForm,
    Oracle,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    Gaussian,
    Exact,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    /// Largest lag, in units of `1/Ω_m`.
    #[serde(default = "default_tau_max")]
    pub tau_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_form")]
    pub form: KernelForm,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { tau_max: default_tau_max(), points: default_points(), form: default_form() }
    }
}

fn one() -> f64 {
    1.0
}
fn one_u64() -> u64 {
    1
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_modes() -> usize {
    64
}
fn default_realizations() -> usize {
    4000
}
fn default_methods() -> Vec<Method> {
    vec![Method::Redfield]
}
fn default_tau_max() -> f64 {
    2.0
}
fn default_points() -> usize {
    201
}
fn default_form() -> KernelForm {
    KernelForm::Gaussian
}

/// Config after overrides, with CSV inputs read and library types built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: Config,
    pub model: SpectralModel,
    pub run: RunConfig,
}

impl Resolved {
    pub fn ensemble(&self) -> EnsembleConfig {
        let o = &self.config.oracle;
        EnsembleConfig { n_modes: o.n_modes, n_realizations: o.n_realizations, base_seed: o.seed, dt_max: o.dt_max }
    }

    pub fn seed(&self) -> u64 {
        self.config.oracle.seed
    }

    /// SHA-256 of the canonical JSON of everything that defines a run family:
    /// model, loop shape, field and solver settings. `t_p` and the seed are
    /// left out so that all members of a sweep share one hash.
    pub fn config_hash(&self) -> Result<String> {
        let o = &self.config.oracle;
        let view = serde_json::json!({
            "model": &self.model,
            "shape": self.run.loop_spec.shape(),
            "b_lab": self.run.b_lab,
            "kernel": self.run.kernel,
            "tolerance": self.run.integrator_tolerance,
            "coefficients": self.config.run.coefficients,
            "oracle": { "n_modes": o.n_modes, "n_realizations": o.n_realizations, "dt_max": o.dt_max },
        });
        Ok(hash_json(&view))
    }
}

pub fn hash_json(v: &serde_json::Value) -> String {
    let text = canonical(v).to_string();
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Sorts object keys recursively, independent of the map's own ordering.
fn canonical(v: &serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            Value::Object(keys.into_iter().map(|k| (k.clone(), canonical(&m[k]))).collect())
        }
        Value::Array(a) => Value::Array(a.iter().map(canonical).collect()),
        other => other.clone(),
    }
}

/// Applies `key.path=value` to a TOML table. Values are parsed as TOML and
/// fall back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment.split_once('=').with_context(|| format!("override {assignment:?} is not key=value"))?;
    let value = parse_value(raw.trim());
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override {assignment:?} has an empty key");
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().with_context(|| format!("override {assignment:?}: {k} is not a table"))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

pub fn load(path: &Path, overrides: &[String]) -> Result<Resolved> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let config: Config = table.try_into().with_context(|| format!("invalid config {}", path.display()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    resolve(config, base)
}

pub fn resolve(config: Config, base: &Path) -> Result<Resolved> {
    let m = &config.model;
    let density = match (&m.density, &m.density_csv) {
        (Some(d), None) => d.clone(),
        (None, Some(p)) => read_spectrum(&base.join(p))?,
        _ => bail!("model needs exactly one of `density` and `density_csv`"),
    };
    let beta = match (m.regime, m.beta_omega_m) {
        (Regime::Classical, None) => 0.0,
        (Regime::Classical, Some(b)) if b == 0.0 => 0.0,
        (Regime::Classical, Some(b)) => bail!("classical models take no beta_omega_m (got {b})"),
        (Regime::Quantum, Some(b)) => b,
        (Regime::Quantum, None) => bail!("quantum models need beta_omega_m (use inf for zero temperature)"),
    };
    let model = SpectralModel { density, omega_m: m.omega_m, beta_omega_m: beta, regime: m.regime };
    model.validate()?;
    let l = &config.loop_;
    let shape = match (&l.shape, &l.table_csv) {
        (Some(s), None) => s.clone(),
        (None, Some(p)) => read_loop_table(&base.join(p))?,
        _ => bail!("loop needs exactly one of `shape` and `table_csv`"),
    };
    let loop_spec = LoopSpec::new(shape, l.t_p)?;
    let run = RunConfig::new(model.clone(), loop_spec)
        .with_field(config.field.b_lab)
        .with_kernel(config.run.kernel)
        .with_tolerance(config.run.tolerance);
    run.validate()?;
    Ok(Resolved { config, model, run })
}

#[derive(Deserialize)]
struct SpectrumRow {
    x: f64,
    j: f64,
}

#[derive(Deserialize)]
struct LoopRow {
    s: f64,
    theta: f64,
    phi: f64,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).with_context(|| format!("opening {}", path.display()))?;
    rdr.deserialize().map(|r| r.with_context(|| format!("reading {}", path.display()))).collect()
}

pub fn read_spectrum(path: &Path) -> Result<Density> {
    let rows: Vec<SpectrumRow> = read_rows(path)?;
    Ok(Density::tabulated(rows.iter().map(|r| r.x).collect(), rows.iter().map(|r| r.j).collect())?)
}

pub fn read_loop_table(path: &Path) -> Result<LoopShape> {
    let rows: Vec<LoopRow> = read_rows(path)?;
    Ok(LoopShape::PiecewiseTable {
        s: rows.iter().map(|r| r.s).collect(),
        theta: rows.iter().map(|r| r.theta).collect(),
        phi: rows.iter().map(|r| r.phi).collect(),
    })
}
