//! Fiber-length sweeps for the single-photon and coherent-source campaigns.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::channel::{FluctuationSpec, SystemParams, DEFAULT_SIGMA_DIVISOR};
use crate::keyrate::{
    coefficients_for, optimize_intensities, single_photon_pipeline, OptimizerConfig, RateStatus,
};
use crate::output::Format;
use crate::virtual_bounds::CLOSED_FORM_LIMIT;

pub const DEFAULT_MU_D2: f64 = 2e-4;
pub const DEFAULT_SIM1_THETAS: [f64; 6] = [0.0, 1.0, 3.0, 5.0, 7.0, 9.0];
pub const DEFAULT_SIM2_PAIRS: [(f64, f64); 5] =
    [(0.0, 0.0), (1.0, 1.0), (3.0, 3.0), (5.0, 5.0), (7.0, 7.0)];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// I/O failures are distinguished from bad configuration by the CLI.
    pub fn is_io(&self) -> bool {
        matches!(self, ConfigError::Read { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    SinglePhoton,
    Coherent,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SinglePhoton => "sim1",
            Mode::Coherent => "sim2",
        }
    }
}

/// Inclusive grid `start, start + step, ..., <= stop` in km.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for FiberRange {
    fn default() -> Self {
        FiberRange {
            start: 0.0,
            stop: 250.0,
            step: 1.0,
        }
    }
}

impl FiberRange {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(ConfigError::invalid("fiber.step", format!("{} must be positive", self.step)));
        }
        if !(self.start >= 0.0 && self.start.is_finite()) {
            return Err(ConfigError::invalid("fiber.start", format!("{} must be non-negative", self.start)));
        }
        if !(self.stop >= self.start && self.stop.is_finite()) {
            return Err(ConfigError::invalid(
                "fiber.stop",
                format!("{} must not be below start {}", self.stop, self.start),
            ));
        }
        Ok(())
    }

    pub fn lengths(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + self.step * i as f64).collect()
    }
}

impl FromStr for FiberRange {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(ConfigError::invalid("fiber", format!("expected start:stop:step, got {s:?}")));
        };
        let num = |field: &str, v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| ConfigError::invalid(field, format!("{v:?}: {e}")))
        };
        let range = FiberRange {
            start: num("fiber.start", start)?,
            stop: num("fiber.stop", stop)?,
            step: num("fiber.step", step)?,
        };
        range.validate()?;
        Ok(range)
    }
}

impl fmt::Display for FiberRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    fiber: Option<FiberRange>,
    #[serde(default)]
    fluctuation: FluctuationSection,
    #[serde(default)]
    system: SystemSection,
    #[serde(default)]
    optimizer: OptimizerSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluctuationSection {
    theta: Option<Vec<f64>>,
    x: Option<Vec<f64>>,
    sigma_divisor: Option<f64>,
    delta_theta: Option<f64>,
    delta_mu: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    attenuation_db_per_km: Option<f64>,
    eta_b: Option<f64>,
    p_d: Option<f64>,
    f_ec: Option<f64>,
    p_z: Option<f64>,
    p_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerSection {
    grid: Option<usize>,
    resolution: Option<f64>,
    mu_s_min: Option<f64>,
    mu_d2: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    path: Option<PathBuf>,
    format: Option<String>,
    workers: Option<usize>,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub fiber: Option<FiberRange>,
    pub theta: Option<Vec<f64>>,
    pub x: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub fiber: FiberRange,
    /// `(theta degrees, x percent)` pairs.
    pub fluctuations: Vec<(f64, f64)>,
    pub system: SystemParams,
    /// Supplies the divisor and tagging deltas; phase and intensity widths
    /// come from `fluctuations`.
    pub fluctuation_template: FluctuationSpec,
    pub mu_d2: f64,
    pub optimizer: OptimizerConfig,
    pub out: PathBuf,
    pub format: Format,
    /// `None` lets the thread pool pick.
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn defaults(mode: Mode) -> Self {
        let fluctuations = match mode {
            Mode::SinglePhoton => DEFAULT_SIM1_THETAS.iter().map(|&t| (t, 0.0)).collect(),
            Mode::Coherent => DEFAULT_SIM2_PAIRS.to_vec(),
        };
        let fiber = match mode {
            Mode::SinglePhoton => FiberRange::default(),
            Mode::Coherent => FiberRange {
                stop: 200.0,
                ..Default::default()
            },
        };
        RunConfig {
            mode,
            fiber,
            fluctuations,
            system: SystemParams::default(),
            fluctuation_template: FluctuationSpec {
                sigma_divisor: DEFAULT_SIGMA_DIVISOR,
                ..Default::default()
            },
            mu_d2: DEFAULT_MU_D2,
            optimizer: OptimizerConfig::default(),
            out: PathBuf::from(format!("{}.csv", mode.name())),
            format: Format::Csv,
            workers: None,
        }
    }

    /// Defaults, then the optional TOML file, then command-line overrides.
    pub fn load(mode: Mode, path: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::parse_file(p, &text)?
            }
            None => FileConfig::default(),
        };
        Self::assemble(mode, file, overrides)
    }

    /// Same as [`RunConfig::load`] with the file contents given directly.
    pub fn from_toml(mode: Mode, text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let file = Self::parse_file(Path::new("<inline>"), text)?;
        Self::assemble(mode, file, overrides)
    }

    fn parse_file(path: &Path, text: &str) -> Result<FileConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    fn assemble(mode: Mode, file: FileConfig, ov: &Overrides) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::defaults(mode);

        if let Some(f) = ov.fiber.or(file.fiber) {
            cfg.fiber = f;
        }
        let theta = ov.theta.clone().or(file.fluctuation.theta.clone());
        let x = ov.x.clone().or(file.fluctuation.x.clone());
        if let Some(pairs) = pair_lists(mode, theta, x)? {
            cfg.fluctuations = pairs;
        }

        let fl = &file.fluctuation;
        let t = &mut cfg.fluctuation_template;
        set(&mut t.sigma_divisor, fl.sigma_divisor);
        set(&mut t.delta_theta, fl.delta_theta);
        set(&mut t.delta_mu, fl.delta_mu);

        let sy = &file.system;
        let s = &mut cfg.system;
        set(&mut s.attenuation_db_per_km, sy.attenuation_db_per_km);
        set(&mut s.eta_b, sy.eta_b);
        set(&mut s.p_d, sy.p_d);
        set(&mut s.f_ec, sy.f_ec);
        set(&mut s.p_z, sy.p_z);
        set(&mut s.p_s, sy.p_s);

        let op = &file.optimizer;
        set(&mut cfg.optimizer.grid, op.grid);
        set(&mut cfg.optimizer.resolution, op.resolution);
        set(&mut cfg.optimizer.mu_s_min, op.mu_s_min);
        set(&mut cfg.mu_d2, op.mu_d2);

        let format = match (ov.format, file.output.format) {
            (Some(f), _) => Some(f),
            (None, Some(s)) => Some(s.parse::<Format>().map_err(|e| ConfigError::invalid("output.format", e))?),
            (None, None) => None,
        };
        if let Some(f) = format {
            cfg.format = f;
        }
        cfg.out = match ov.out.clone().or(file.output.path) {
            Some(p) => p,
            None => PathBuf::from(format!("{}.{}", mode.name(), cfg.format.extension())),
        };
        cfg.workers = ov.workers.or(file.output.workers).or(cfg.workers);

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.fiber.validate()?;
        if self.fluctuations.is_empty() {
            return Err(ConfigError::invalid("fluctuation", "list is empty"));
        }
        let limit = CLOSED_FORM_LIMIT.to_degrees();
        for &(theta, x) in &self.fluctuations {
            if !(0.0..limit).contains(&theta) {
                return Err(ConfigError::invalid(
                    "fluctuation.theta",
                    format!("{theta} outside [0, {limit})"),
                ));
            }
            if !(0.0..100.0).contains(&x) {
                return Err(ConfigError::invalid("fluctuation.x", format!("{x} outside [0, 100)")));
            }
            self.spec_for(theta, x)
                .validate()
                .map_err(|e| ConfigError::invalid("fluctuation", e.to_string()))?;
        }
        self.system
            .validate()
            .map_err(|e| ConfigError::invalid("system", e.to_string()))?;
        let op = &self.optimizer;
        if op.grid < 2 {
            return Err(ConfigError::invalid("optimizer.grid", "needs at least 2 points"));
        }
        if !(op.resolution > 0.0) {
            return Err(ConfigError::invalid("optimizer.resolution", "must be positive"));
        }
        if !(op.mu_s_min > 0.0 && op.mu_s_min < 1.0) {
            return Err(ConfigError::invalid("optimizer.mu_s_min", "must lie in (0, 1)"));
        }
        if !(self.mu_d2 > 0.0 && self.mu_d2 < op.mu_s_min) {
            return Err(ConfigError::invalid("optimizer.mu_d2", "must lie in (0, mu_s_min)"));
        }
        if self.workers == Some(0) {
            return Err(ConfigError::invalid("workers", "must be at least 1"));
        }
        Ok(())
    }

    fn spec_for(&self, theta_deg: f64, x_pct: f64) -> FluctuationSpec {
        FluctuationSpec {
            theta_halfwidth: theta_deg.to_radians(),
            intensity_pct: x_pct,
            ..self.fluctuation_template
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn pair_lists(
    mode: Mode,
    theta: Option<Vec<f64>>,
    x: Option<Vec<f64>>,
) -> Result<Option<Vec<(f64, f64)>>, ConfigError> {
    match mode {
        Mode::SinglePhoton => {
            if x.as_ref().is_some_and(|v| v.iter().any(|&p| p != 0.0)) {
                return Err(ConfigError::invalid(
                    "fluctuation.x",
                    "the single-photon source has no intensity fluctuation",
                ));
            }
            Ok(theta.map(|t| t.into_iter().map(|v| (v, 0.0)).collect()))
        }
        Mode::Coherent => match (theta, x) {
            (None, None) => Ok(None),
            (Some(t), None) => Ok(Some(t.into_iter().map(|v| (v, v)).collect())),
            (None, Some(x)) => Ok(Some(x.into_iter().map(|v| (v, v)).collect())),
            (Some(t), Some(x)) => {
                if t.len() != x.len() {
                    return Err(ConfigError::invalid(
                        "fluctuation",
                        format!("theta has {} entries but x has {}", t.len(), x.len()),
                    ));
                }
                Ok(Some(t.into_iter().zip(x).collect()))
            }
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub fiber_length_km: f64,
    pub theta_deg: f64,
    pub x_pct: f64,
    pub rate: f64,
    pub e_z: f64,
    pub e_x_upper: f64,
    pub q_det: f64,
    pub q1_lo: f64,
    pub mu_s_opt: Option<f64>,
    pub mu_d1_opt: Option<f64>,
    pub status: RateStatus,
}

fn sorted_pairs(cfg: &RunConfig) -> Vec<(f64, f64)> {
    let mut pairs = cfg.fluctuations.clone();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs
}

fn run_parallel<T, F>(workers: Option<usize>, items: Vec<T>, f: F) -> Vec<SweepRow>
where
    T: Send + Sync,
    F: Fn(&T) -> SweepRow + Send + Sync,
{
    let work = || items.par_iter().map(&f).collect();
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(_) => items.iter().map(&f).collect(),
        },
        None => work(),
    }
}

/// Single-photon source with phase fluctuations; one row per `(theta, length)`.
pub fn run_first_simulation(cfg: &RunConfig) -> Result<Vec<SweepRow>, ConfigError> {
    if cfg.mode != Mode::SinglePhoton {
        return Err(ConfigError::invalid("mode", "sim1 needs the single-photon mode"));
    }
    cfg.validate()?;
    let mut points = Vec::new();
    for (theta, x) in sorted_pairs(cfg) {
        let spec = cfg.spec_for(theta, x);
        let g = coefficients_for(&spec).map_err(|e| ConfigError::invalid("fluctuation.theta", e.to_string()))?;
        for l in cfg.fiber.lengths() {
            points.push((theta, spec, g, l));
        }
    }
    Ok(run_parallel(cfg.workers, points, |&(theta, spec, g, l)| {
        let r = single_photon_pipeline(&cfg.system.at_length(l), &spec, &g);
        SweepRow {
            fiber_length_km: l,
            theta_deg: theta,
            x_pct: 0.0,
            rate: r.rate,
            e_z: r.e_z,
            e_x_upper: r.e_x_upper,
            q_det: r.q_det_zzs,
            q1_lo: r.q1_lo,
            mu_s_opt: None,
            mu_d1_opt: None,
            status: r.status,
        }
    }))
}

/// Coherent source with optimized decoy intensities; one row per
/// `(theta, x, length)`.
pub fn run_second_simulation(cfg: &RunConfig) -> Result<Vec<SweepRow>, ConfigError> {
    if cfg.mode != Mode::Coherent {
        return Err(ConfigError::invalid("mode", "sim2 needs the coherent mode"));
    }
    cfg.validate()?;
    let mut points = Vec::new();
    for (theta, x) in sorted_pairs(cfg) {
        for l in cfg.fiber.lengths() {
            points.push((theta, x, l));
        }
    }
    Ok(run_parallel(cfg.workers, points, |&(theta, x, l)| {
        let spec = cfg.spec_for(theta, x);
        let params = cfg.system.at_length(l);
        let row = |rate, e_z, e_x_upper, q_det, q1_lo, mus: Option<(f64, f64)>, status| SweepRow {
            fiber_length_km: l,
            theta_deg: theta,
            x_pct: x,
            rate,
            e_z,
            e_x_upper,
            q_det,
            q1_lo,
            mu_s_opt: mus.map(|m| m.0),
            mu_d1_opt: mus.map(|m| m.1),
            status,
        };
        match optimize_intensities(&params, &spec, cfg.mu_d2, &cfg.optimizer) {
            Ok(o) => {
                let r = &o.result;
                let mus = (o.intensities.mu_s, o.intensities.mu_d1);
                row(r.rate, r.e_z, r.e_x_upper, r.q_det_zzs, r.q1_lo, Some(mus), r.status)
            }
            Err(_) => row(0.0, 0.5, 0.5, 0.0, 0.0, None, RateStatus::Infeasible),
        }
    }))
}

/// Runs the sweep that matches `cfg.mode`.
pub fn run(cfg: &RunConfig) -> Result<Vec<SweepRow>, ConfigError> {
    match cfg.mode {
        Mode::SinglePhoton => run_first_simulation(cfg),
        Mode::Coherent => run_second_simulation(cfg),
    }
}

/// Largest length with a positive rate, if any, for one fluctuation pair.
pub fn cutoff(rows: &[SweepRow], theta_deg: f64, x_pct: f64) -> Option<f64> {
    rows.iter()
        .filter(|r| r.theta_deg == theta_deg && r.x_pct == x_pct && r.rate > 0.0)
        .map(|r| r.fiber_length_km)
        .max_by(f64::total_cmp)
}
