//! Command-line front end.
//!
//! Each command reads one JSON config, writes its result to `--out` and
//! returns an exit code: 0 ok, 1 numerical failure, 2 config error,
//! 3 acceptance-threshold violation. Failures print a JSON object on stderr.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::complexity::{
    b_critical, larkin_mass, near_critical_constants, near_critical_fit, sigma_elastic,
    sigma_soft_spins, t_critical, ComplexityResult, ElasticManifoldModel, Method, SoftSpinModel,
    DEFAULT_EPSILONS,
};
use crate::error::AtlasError;
use crate::freeconv::{density, FreeConvolution, GridSpec};
use crate::mde::MdeModel;
use crate::measures::{laplacian_spectrum, DiscreteMeasure, GriddedDensity, LatticeSpec, MeasureSpec};
use crate::montecarlo::{landscape_demo, validate_block_model, CorrelatorSpec, SamplerConfig};
use crate::numerics::linspace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_THRESHOLD: i32 = 3;

/// Environment variable that overrides `--jobs`.
pub const JOBS_ENV: &str = "ATLAS_JOBS";

pub const PHASE_HEADER: &str = "t_or_b,sigma_tot,sigma_min,phase,u_star_tot,u_star_min";

/// Acceptance windows for the fitted near-critical exponents.
pub const TOT_EXPONENT_RANGE: (f64, f64) = (1.8, 2.2);
pub const MIN_EXPONENT_RANGE: (f64, f64) = (2.7, 3.3);

#[derive(Debug, Parser)]
#[command(name = "atlas", version, about = "Annealed complexity phase diagrams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (ATLAS_JOBS takes precedence).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Complexity and phase along a parameter sweep (CSV).
    Phase,
    /// t_c, or Larkin mass and b_c, with the near-critical constants (JSON).
    Thresholds,
    /// Power-law fit of the complexity just above threshold (JSON).
    FitCritical,
    /// Block random matrices against the deterministic limit (JSON).
    McValidate,
    /// Minima counts of confined 2-d Gaussian landscapes (CSV).
    LandscapeDemo,
    /// Density of the free convolution as `x,rho` (CSV).
    Density,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    SoftSpins {
        mu_d: MeasureSpec,
        #[serde(default)]
        t: Option<f64>,
    },
    Elastic {
        lattice: LatticeSpec,
        #[serde(default)]
        b: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    T,
    B,
    Mu0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl SweepConfig {
    fn values(&self) -> Result<Vec<f64>, CliError> {
        if !self.min.is_finite() || !self.max.is_finite() || self.steps < 1 || self.min > self.max {
            return Err(CliError::config("sweep needs finite min <= max and steps >= 1"));
        }
        Ok(linspace(self.min, self.max, self.steps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McThresholds {
    pub w1: f64,
    pub logdet_gap: f64,
    pub outlier: f64,
}

impl Default for McThresholds {
    fn default() -> Self {
        McThresholds { w1: 0.05, logdet_gap: 0.02, outlier: 0.15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub samples: usize,
    /// Defaults to the zero vector.
    #[serde(default)]
    pub u: Option<Vec<f64>>,
    /// Noise strength; defaults to `sqrt(b)` of the model.
    #[serde(default, rename = "J")]
    pub j: Option<f64>,
    #[serde(default)]
    pub thresholds: McThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    #[serde(default = "default_correlator")]
    pub correlator: CorrelatorSpec,
    #[serde(default = "default_confinement", rename = "D")]
    pub d: [[f64; 2]; 2],
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
    #[serde(default = "default_box", rename = "box")]
    pub half_width: f64,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    /// Number of seeds; seed `s` runs `seed + s`.
    #[serde(default = "default_seed_count")]
    pub seeds: usize,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        LandscapeConfig {
            correlator: default_correlator(),
            d: default_confinement(),
            scales: default_scales(),
            half_width: default_box(),
            grid_n: default_grid_n(),
            seeds: default_seed_count(),
        }
    }
}

fn default_correlator() -> CorrelatorSpec {
    CorrelatorSpec { c0: 0.0, terms: vec![(1.0, 80f64.sqrt())] }
}
fn default_confinement() -> [[f64; 2]; 2] {
    [[6.0, 0.0], [0.0, 1.0]]
}
fn default_scales() -> Vec<f64> {
    vec![0.0, 3.0, 6.0, 10.0]
}
fn default_box() -> f64 {
    1.0
}
fn default_grid_n() -> usize {
    41
}
fn default_seed_count() -> usize {
    20
}

/// One JSON document per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Density grid override.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default)]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub landscape: Option<LandscapeConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn model(&self) -> Result<&ModelConfig, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::config("config has no model"))
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(AtlasError),
    Io(String),
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (kind, message) = match self {
            CliError::Config(m) => ("config", m.clone()),
            CliError::Io(m) => ("io", m.clone()),
            CliError::Numerical(e) => ("numerical", e.to_string()),
        };
        json!({ "error": kind, "message": message, "exit_code": self.exit_code() })
    }
}

impl From<AtlasError> for CliError {
    fn from(e: AtlasError) -> Self {
        match e {
            // bad parameters are a configuration problem, not a solver one
            AtlasError::InvalidInput(m) => CliError::Config(m),
            other => CliError::Numerical(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

fn resolve_jobs(flag: Option<usize>) -> CliResult<Option<usize>> {
    match std::env::var(JOBS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|k| *k >= 1)
            .map(Some)
            .ok_or_else(|| CliError::Config(format!("{JOBS_ENV} = {v:?} is not a positive integer"))),
        Err(_) => match flag {
            Some(0) => Err(CliError::config("--jobs must be at least 1")),
            other => Ok(other),
        },
    }
}

pub fn run(cli: &Cli) -> CliResult<i32> {
    let config_path = cli.config.as_deref().ok_or_else(|| CliError::config("--config is required"))?;
    let out = cli.out.as_deref().ok_or_else(|| CliError::config("--out is required"))?;
    let config = RunConfig::load(config_path)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = resolve_jobs(cli.jobs)? {
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    pool.install(|| run_command(cli.command, &config, out, cli.seed))
}

/// Runs one command on an already parsed config.
pub fn run_command(command: Command, config: &RunConfig, out: &Path, seed: Option<u64>) -> CliResult<i32> {
    let seed = seed.or(config.seed).unwrap_or(0);
    match command {
        Command::Phase => cmd_phase(config, out),
        Command::Thresholds => cmd_thresholds(config, out),
        Command::FitCritical => cmd_fit_critical(config, out),
        Command::McValidate => cmd_mc_validate(config, out, seed),
        Command::LandscapeDemo => cmd_landscape_demo(config, out, seed),
        Command::Density => cmd_density(config, out),
    }
}

fn write_out(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    write_out(path, &s)
}

/// Complexity along the sweep (or at the single configured point).
pub fn cmd_phase(config: &RunConfig, out: &Path) -> CliResult<i32> {
    let method = config.method.unwrap_or(Method::ClosedForm);
    let model = config.model()?;
    let points: Vec<f64> = match (model, &config.sweep) {
        (_, Some(s)) => s.values()?,
        (ModelConfig::SoftSpins { t: Some(t), .. }, None) => vec![*t],
        (ModelConfig::Elastic { b: Some(b), .. }, None) => vec![*b],
        _ => return Err(CliError::config("phase needs a sweep or a fixed t / b")),
    };
    let param = config.sweep.map(|s| s.param);
    let eval: Box<dyn Fn(f64) -> crate::Result<ComplexityResult> + Sync> = match model {
        ModelConfig::SoftSpins { mu_d, .. } => {
            if matches!(param, Some(SweepParam::B | SweepParam::Mu0)) {
                return Err(CliError::config("soft-spin models sweep t"));
            }
            let mu = mu_d.to_discrete()?;
            Box::new(move |t| sigma_soft_spins(&SoftSpinModel::new(mu.clone(), t)?, method))
        }
        ModelConfig::Elastic { lattice, b } => {
            lattice.validate()?;
            let lattice = *lattice;
            match param {
                Some(SweepParam::T) => return Err(CliError::config("elastic models sweep b or mu0")),
                Some(SweepParam::Mu0) => {
                    let b = b.ok_or_else(|| CliError::config("a mu0 sweep needs a fixed b"))?;
                    Box::new(move |mu0| sigma_elastic(&ElasticManifoldModel::new(lattice.with_mu0(mu0), b)?, method))
                }
                _ => Box::new(move |b| sigma_elastic(&ElasticManifoldModel::new(lattice, b)?, method)),
            }
        }
    };
    let rows: Vec<ComplexityResult> = points.par_iter().map(|&p| eval(p)).collect::<crate::Result<_>>()?;
    let mut csv = String::from(PHASE_HEADER);
    csv.push('\n');
    for (p, r) in points.iter().zip(&rows) {
        let _ = writeln!(csv, "{p},{},{},{},{},{}", r.sigma_tot, r.sigma_min, r.phase, r.u_star_tot, r.u_star_min);
    }
    write_out(out, &csv)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Thresholds {
    SoftSpins {
        t_c: f64,
        c_tot: f64,
        c_min: f64,
    },
    /// `b_c` and the constants need `mu0 > 0`.
    Elastic {
        mu_c: f64,
        b_c: Option<f64>,
        c_tot: Option<f64>,
        c_min: Option<f64>,
    },
}

pub fn thresholds(model: &ModelConfig) -> CliResult<Thresholds> {
    match model {
        ModelConfig::SoftSpins { mu_d, .. } => {
            let mu = mu_d.to_discrete()?;
            let c = near_critical_constants(&mu)?;
            Ok(Thresholds::SoftSpins { t_c: t_critical(&mu)?, c_tot: c.c_tot, c_min: c.c_min })
        }
        ModelConfig::Elastic { lattice, b } => {
            let b = b.ok_or_else(|| CliError::config("thresholds for the elastic manifold need b"))?;
            let mu_c = larkin_mass(lattice, b)?;
            if lattice.mu0 > 0.0 {
                let c = near_critical_constants(&laplacian_spectrum(lattice, true)?)?;
                Ok(Thresholds::Elastic {
                    mu_c,
                    b_c: Some(b_critical(lattice)?),
                    c_tot: Some(c.c_tot),
                    c_min: Some(c.c_min),
                })
            } else {
                Ok(Thresholds::Elastic { mu_c, b_c: None, c_tot: None, c_min: None })
            }
        }
    }
}

pub fn cmd_thresholds(config: &RunConfig, out: &Path) -> CliResult<i32> {
    write_json(out, &thresholds(config.model()?)?)?;
    Ok(EXIT_OK)
}

fn base_measure(model: &ModelConfig) -> CliResult<DiscreteMeasure> {
    Ok(match model {
        ModelConfig::SoftSpins { mu_d, .. } => mu_d.to_discrete()?,
        ModelConfig::Elastic { lattice, .. } => laplacian_spectrum(lattice, true)?,
    })
}

pub fn cmd_fit_critical(config: &RunConfig, out: &Path) -> CliResult<i32> {
    let mu = base_measure(config.model()?)?;
    let eps = config.epsilons.clone().unwrap_or_else(|| DEFAULT_EPSILONS.to_vec());
    let fit = near_critical_fit(&mu, &eps)?;
    let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
    let ok = inside(fit.exponent_tot, TOT_EXPONENT_RANGE) && inside(fit.exponent_min, MIN_EXPONENT_RANGE);
    let constants = near_critical_constants(&mu)?;
    write_json(out, &json!({ "fit": fit, "constants": constants, "exponents_ok": ok }))?;
    Ok(if ok { EXIT_OK } else { EXIT_THRESHOLD })
}

pub fn cmd_mc_validate(config: &RunConfig, out: &Path, seed: u64) -> CliResult<i32> {
    let mc = config.mc.as_ref().ok_or_else(|| CliError::config("mc-validate needs an \"mc\" section"))?;
    let (lattice, b) = match config.model()? {
        ModelConfig::Elastic { lattice, b } => (*lattice, *b),
        ModelConfig::SoftSpins { .. } => return Err(CliError::config("mc-validate needs an elastic model")),
    };
    let j = match (mc.j, b) {
        (Some(j), _) => j,
        (None, Some(b)) => b.sqrt(),
        (None, None) => return Err(CliError::config("mc-validate needs J or b")),
    };
    if !(j > 0.0) {
        return Err(CliError::config("mc-validate needs J > 0"));
    }
    let model = MdeModel::new(lattice, j)?;
    let u = mc.u.clone().unwrap_or_else(|| vec![0.0; model.sites()]);
    if u.len() != model.sites() {
        return Err(CliError::Config(format!("u has {} entries for {} sites", u.len(), model.sites())));
    }
    let cfg = SamplerConfig::new(mc.n, mc.samples, seed)?;
    let v = validate_block_model(&model, &u, &cfg)?;
    let th = mc.thresholds;
    let exceed = v.outliers.max_exceed_right.max(v.outliers.max_exceed_left);
    let passed = v.w1_max < th.w1 && v.logdet.gap < th.logdet_gap && exceed < th.outlier;
    let report = json!({
        "w1_distance": v.w1_max,
        "w1_mean": v.w1_mean,
        "logdet_gap": v.logdet.gap,
        "logdet_rate": v.logdet.rate,
        "logdet_theory": v.logdet.theory,
        "outlier_exceedances": {
            "right": v.outliers.max_exceed_right,
            "left": v.outliers.max_exceed_left,
        },
        "seeds": { "base": seed, "samples": mc.samples, "resampled": v.logdet.resampled },
        "thresholds": th,
        "passed": passed,
    });
    write_json(out, &report)?;
    Ok(if passed { EXIT_OK } else { EXIT_THRESHOLD })
}

/// Writes `seed,scale,minima` rows to `out` and the verdict next to it as
/// `<out>.verdict.json`. A rising mean count exits with 3.
pub fn cmd_landscape_demo(config: &RunConfig, out: &Path, seed: u64) -> CliResult<i32> {
    let lc = config.landscape.clone().unwrap_or_default();
    if lc.seeds < 1 {
        return Err(CliError::config("landscape demo needs at least one seed"));
    }
    let seeds: Vec<u64> = (0..lc.seeds as u64).map(|s| seed.wrapping_add(s)).collect();
    let demo = landscape_demo(&lc.correlator, &lc.d, &lc.scales, lc.half_width, lc.grid_n, &seeds)?;
    let mut csv = String::from("seed,scale,minima\n");
    for (si, s) in seeds.iter().enumerate() {
        for (ki, k) in demo.scales.iter().enumerate() {
            let _ = writeln!(csv, "{s},{k},{}", demo.counts[ki][si]);
        }
    }
    write_out(out, &csv)?;
    let last = demo.counts.len() - 1;
    let fewer_at_max = (0..seeds.len()).filter(|&s| demo.counts[last][s] <= demo.counts[0][s]).count() as f64
        / seeds.len() as f64;
    let verdict = json!({
        "scales": demo.scales,
        "means": demo.means,
        "non_increasing": demo.non_increasing,
        "fraction_not_more_at_largest_scale": fewer_at_max,
        "jitter": demo.jitter,
    });
    write_json(&verdict_path(out), &verdict)?;
    Ok(if demo.non_increasing { EXIT_OK } else { EXIT_THRESHOLD })
}

pub fn verdict_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".verdict.json");
    out.with_file_name(name)
}

pub fn cmd_density(config: &RunConfig, out: &Path) -> CliResult<i32> {
    let model = config.model()?;
    let t = match model {
        ModelConfig::SoftSpins { t, .. } => t.ok_or_else(|| CliError::config("density needs t"))?,
        ModelConfig::Elastic { b, .. } => b.ok_or_else(|| CliError::config("density needs b"))?,
    };
    let mu = base_measure(model)?;
    let grid = match config.grid {
        Some(g) => g,
        None => FreeConvolution::new(&mu, t)?.default_grid(),
    };
    write_out(out, &density_csv(&density(&mu, t, grid)?))?;
    Ok(EXIT_OK)
}

/// Two-column `x,rho` CSV.
pub fn density_csv(d: &GriddedDensity) -> String {
    let mut s = String::from("x,rho\n");
    for (x, r) in d.nodes().zip(d.values()) {
        let _ = writeln!(s, "{x},{r}");
    }
    s
}

/// One eigenvalue per line.
pub fn eigenvalues_csv(ev: &[f64]) -> String {
    let mut s = String::from("eigenvalue\n");
    for x in ev {
        let _ = writeln!(s, "{x}");
    }
    s
}

/// `x,y,value` rows for a sampled landscape.
pub fn field_csv(points: &[(f64, f64)], values: &[f64]) -> String {
    let mut s = String::from("x,y,value\n");
    for ((x, y), v) in points.iter().zip(values) {
        let _ = writeln!(s, "{x},{y},{v}");
    }
    s
}
