//! Run configuration and its flat `key = value` text format.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are rejected.
//! Unset keys take the defaults below; [`Config::to_text`] writes every key,
//! so parsing the echo reproduces the configuration exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grid::{GridError, PolarGrid};
use crate::linsolve::SolveMethod;
use crate::pressure::BoundaryMode;
use crate::state::{PhysParams, StateError};

/// Environment variable overriding `output_dir`.
pub const OUTDIR_ENV: &str = "CRAWLFV_OUTDIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {0} not found")]
    MissingFile(PathBuf),
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Params(#[from] StateError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Initial condition descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// `c̃ = cos(θ − π) + 1`, `μ̃ = ½·c̃(R, θ)`.
    Polarised,
    /// `c = 1` (so `c̃ = r`), `μ̃ = 0`.
    Uniform,
    /// Tabulated values read from a field snapshot and a boundary snapshot.
    Table { field: PathBuf, mu: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub params: PhysParams,
    pub dt: f64,
    pub t_max: f64,
    pub boundary_mode: BoundaryMode,
    pub solver: SolveMethod,
    pub solver_tol: f64,
    /// Steady-state window length.
    pub t_ss: f64,
    /// Steady-state tolerance on `max_k |Δμ̃_k|`.
    pub eps_ss: f64,
    pub initial: InitialCondition,
    pub output_dir: PathBuf,
    /// Snapshot cadence in steps; 0 writes only the first and last state.
    pub snapshot_every: usize,
    pub dr_list: Vec<f64>,
    pub dt_list: Vec<f64>,
    pub kon_list: Vec<f64>,
    /// Worker threads for sweeps; 0 uses all cores.
    pub sweep_workers: usize,
    /// Write per-record timeseries during sweeps.
    pub sweep_run_outputs: bool,
    pub mass_check_steps: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            r_min: 0.5,
            r_max: 1.5,
            n_r: 19,
            n_theta: 120,
            params: PhysParams::default(),
            dt: 1e-2,
            t_max: 200.0,
            boundary_mode: BoundaryMode::Paper,
            solver: SolveMethod::Direct,
            solver_tol: 1e-12,
            t_ss: 1.0,
            eps_ss: 1e-8,
            initial: InitialCondition::Polarised,
            output_dir: PathBuf::from("out"),
            snapshot_every: 0,
            dr_list: vec![5e-3, 1e-2, 2e-2, 2.5e-2],
            dt_list: vec![1e-3, 2e-3, 5e-3, 1e-2, 1.5e-2],
            kon_list: vec![0.3],
            sweep_workers: 0,
            sweep_run_outputs: false,
            mass_check_steps: 1000,
        }
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|e| ConfigError::BadValue {
        line,
        key: key.to_string(),
        message: e.to_string(),
    })
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse::<usize>().map_err(|e| ConfigError::BadValue {
        line,
        key: key.to_string(),
        message: e.to_string(),
    })
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|item| parse_f64(line, key, item.trim()))
        .collect()
}

fn join_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
}

impl Config {
    pub fn grid(&self) -> Result<PolarGrid, GridError> {
        PolarGrid::new(self.r_min, self.r_max, self.n_r, self.n_theta)
    }

    /// Parses the text format on top of the defaults.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut table_field: Option<PathBuf> = None;
        let mut table_mu: Option<PathBuf> = None;
        let mut initial_name: Option<(usize, String)> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim();
            let value = value.trim();
            let p = &mut cfg.params;
            match key {
                "r_min" => cfg.r_min = parse_f64(line, key, value)?,
                "r_max" => cfg.r_max = parse_f64(line, key, value)?,
                "n_r" => cfg.n_r = parse_usize(line, key, value)?,
                "n_theta" => cfg.n_theta = parse_usize(line, key, value)?,
                "k_d" => p.k_d = parse_f64(line, key, value)?,
                "delta" => p.delta = parse_f64(line, key, value)?,
                "gamma" => p.gamma = parse_f64(line, key, value)?,
                "diffusion" => p.diffusion = parse_f64(line, key, value)?,
                "k_on" => p.k_on = parse_f64(line, key, value)?,
                "k_off" => p.k_off = parse_f64(line, key, value)?,
                "dt" => cfg.dt = parse_f64(line, key, value)?,
                "t_max" => cfg.t_max = parse_f64(line, key, value)?,
                "boundary_mode" => {
                    cfg.boundary_mode = value.parse().map_err(|message| ConfigError::BadValue {
                        line,
                        key: key.to_string(),
                        message,
                    })?
                }
                "solver" => {
                    cfg.solver = value.parse().map_err(|message| ConfigError::BadValue {
                        line,
                        key: key.to_string(),
                        message,
                    })?
                }
                "solver_tol" => cfg.solver_tol = parse_f64(line, key, value)?,
                "t_ss" => cfg.t_ss = parse_f64(line, key, value)?,
                "eps_ss" => cfg.eps_ss = parse_f64(line, key, value)?,
                "initial" => initial_name = Some((line, value.to_string())),
                "initial_field" => table_field = Some(PathBuf::from(value)),
                "initial_mu" => table_mu = Some(PathBuf::from(value)),
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "snapshot_every" => cfg.snapshot_every = parse_usize(line, key, value)?,
                "dr_list" => cfg.dr_list = parse_list(line, key, value)?,
                "dt_list" => cfg.dt_list = parse_list(line, key, value)?,
                "kon_list" => cfg.kon_list = parse_list(line, key, value)?,
                "sweep_workers" => cfg.sweep_workers = parse_usize(line, key, value)?,
                "sweep_run_outputs" => {
                    cfg.sweep_run_outputs = value.parse().map_err(|_| ConfigError::BadValue {
                        line,
                        key: key.to_string(),
                        message: "expected true|false".into(),
                    })?
                }
                "mass_check_steps" => cfg.mass_check_steps = parse_usize(line, key, value)?,
                other => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: other.to_string(),
                    })
                }
            }
        }
        if let Some((line, name)) = initial_name {
            cfg.initial = match name.as_str() {
                "polarised" => InitialCondition::Polarised,
                "uniform" => InitialCondition::Uniform,
                "table" => match (table_field, table_mu) {
                    (Some(field), Some(mu)) => InitialCondition::Table { field, mu },
                    _ => {
                        return Err(ConfigError::BadValue {
                            line,
                            key: "initial".into(),
                            message: "`table` needs initial_field and initial_mu".into(),
                        })
                    }
                },
                other => {
                    return Err(ConfigError::BadValue {
                        line,
                        key: "initial".into(),
                        message: format!("unknown preset `{other}` (expected polarised|uniform|table)"),
                    })
                }
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses a config file.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                ConfigError::MissingFile(path.to_path_buf())
            } else {
                ConfigError::Io {
                    path: path.to_path_buf(),
                    source,
                }
            }
        })?;
        Self::parse_str(&text)
    }

    /// Applies the output directory override from the environment, if set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Some(dir) = std::env::var_os(OUTDIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid()?;
        self.params.validate()?;
        let positive = [
            ("dt", self.dt),
            ("t_max", self.t_max),
            ("t_ss", self.t_ss),
            ("eps_ss", self.eps_ss),
            ("solver_tol", self.solver_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, list) in [("dr_list", &self.dr_list), ("dt_list", &self.dt_list)] {
            if let Some(v) = list.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(ConfigError::Invalid(format!("{name} entries must be positive, got {v}")));
            }
        }
        if let Some(v) = self.kon_list.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(ConfigError::Invalid(format!("kon_list entries must be nonnegative, got {v}")));
        }
        Ok(())
    }

    /// Full echo of the configuration in the parseable text format.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("r_min", format!("{:e}", self.r_min));
        kv("r_max", format!("{:e}", self.r_max));
        kv("n_r", self.n_r.to_string());
        kv("n_theta", self.n_theta.to_string());
        kv("k_d", format!("{:e}", p.k_d));
        kv("delta", format!("{:e}", p.delta));
        kv("gamma", format!("{:e}", p.gamma));
        kv("diffusion", format!("{:e}", p.diffusion));
        kv("k_on", format!("{:e}", p.k_on));
        kv("k_off", format!("{:e}", p.k_off));
        kv("dt", format!("{:e}", self.dt));
        kv("t_max", format!("{:e}", self.t_max));
        kv("boundary_mode", self.boundary_mode.to_string());
        kv("solver", self.solver.to_string());
        kv("solver_tol", format!("{:e}", self.solver_tol));
        kv("t_ss", format!("{:e}", self.t_ss));
        kv("eps_ss", format!("{:e}", self.eps_ss));
        match &self.initial {
            InitialCondition::Polarised => kv("initial", "polarised".into()),
            InitialCondition::Uniform => kv("initial", "uniform".into()),
            InitialCondition::Table { field, mu } => {
                kv("initial", "table".into());
                kv("initial_field", field.display().to_string());
                kv("initial_mu", mu.display().to_string());
            }
        }
        kv("output_dir", self.output_dir.display().to_string());
        kv("snapshot_every", self.snapshot_every.to_string());
        kv("dr_list", join_list(&self.dr_list));
        kv("dt_list", join_list(&self.dt_list));
        kv("kon_list", join_list(&self.kon_list));
        kv("sweep_workers", self.sweep_workers.to_string());
        kv("sweep_run_outputs", self.sweep_run_outputs.to_string());
        kv("mass_check_steps", self.mass_check_steps.to_string());
        s
    }
}
