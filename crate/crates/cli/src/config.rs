//! Run configuration: canonical defaults, `key = value` files and flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bsde_cfft::boundary_control::{BoundaryControlConfig, ShiftScheme};
use bsde_cfft::grid::{make_grids, Grids};
use bsde_cfft::kernels::check_alpha;
use bsde_cfft::solver::{MarketModel, ProblemSpec};
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliError, Result};
use crate::sweep::SweepAxes;

pub const MAX_GRID_EXP: u32 = 24;
pub const MIN_GRID_EXP: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format {other:?}, expected csv")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("csv")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub s0: f64,
    pub strike: f64,
    pub mu: f64,
    pub dividend: f64,
    pub rate: f64,
    pub borrow_rate: f64,
    pub sigma: f64,
    pub maturity: f64,
    /// Truncation width `L` of the log-price interval.
    pub trunc_width: f64,
    /// `N = 2^grid_exp` lattice points.
    pub grid_exp: u32,
    pub steps: usize,
    pub alpha: f64,
    pub scheme: ShiftScheme,
    pub floor_payoff: bool,
    /// Keep every time slice (needed for the delta-surface file).
    pub retain_surfaces: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub sweep: Option<SweepAxes>,
    /// Concurrent sweep cells; defaults to the available parallelism.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = MarketModel::canonical();
        Self {
            s0: m.s0,
            strike: 100.0,
            mu: m.mu,
            dividend: m.dividend,
            rate: m.rate,
            borrow_rate: m.borrow_rate,
            sigma: m.sigma,
            maturity: 1.0,
            trunc_width: 10.0,
            grid_exp: 12,
            steps: 1000,
            alpha: BoundaryControlConfig::DEFAULT_ALPHA,
            scheme: ShiftScheme::Exponential,
            floor_payoff: false,
            retain_surfaces: false,
            out: None,
            format: Format::Csv,
            sweep: None,
            workers: None,
        }
    }
}

/// Command-line flags. Every flag is optional and overrides the config file,
/// which in turn overrides the canonical defaults.
#[derive(Debug, Clone, Default, Parser)]
#[command(
    name = "bsde-cfft",
    version,
    about = "Convolution-FFT BSDE solver for European calls"
)]
pub struct Args {
    /// Flat `key = value` file using the flag names as keys
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long)]
    pub strike: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub dividend: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rate: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub borrow_rate: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub maturity: Option<f64>,
    /// Truncation width L of the log-price interval
    #[arg(long)]
    pub trunc_width: Option<f64>,
    /// N = 2^grid_exp lattice points
    #[arg(long)]
    pub grid_exp: Option<u32>,
    /// Number of time steps n
    #[arg(long)]
    pub steps: Option<usize>,
    /// Damping exponent (negative, not -1)
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Boundary treatment: exponential, linear or none
    #[arg(long)]
    pub scheme: Option<ShiftScheme>,
    /// Floor Y at zero after every step
    #[arg(long)]
    pub floor_payoff: bool,
    /// Keep every time slice and write the delta surface
    #[arg(long)]
    pub retain_surfaces: bool,
    /// Sweep axes, e.g. "steps=1000,2000;trunc_width=10,12;grid_exp=10,12;scheme=exponential,none"
    #[arg(long, value_name = "AXES")]
    pub sweep: Option<String>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Concurrent sweep cells
    #[arg(long)]
    pub workers: Option<usize>,
}

fn parse_field<T: FromStr>(field: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e: T::Err| config_err(field, format!("cannot parse {value:?}: {e}")))
}

fn parse_bool(field: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(config_err(field, format!("expected true or false, got {other:?}"))),
    }
}

impl RunConfig {
    /// Sets one field from its textual key (flag name with `-` or `_`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let k = key.as_str();
        match k {
            "s0" => self.s0 = parse_field(k, value)?,
            "strike" => self.strike = parse_field(k, value)?,
            "mu" => self.mu = parse_field(k, value)?,
            "dividend" => self.dividend = parse_field(k, value)?,
            "rate" => self.rate = parse_field(k, value)?,
            "borrow_rate" => self.borrow_rate = parse_field(k, value)?,
            "sigma" => self.sigma = parse_field(k, value)?,
            "maturity" => self.maturity = parse_field(k, value)?,
            "trunc_width" => self.trunc_width = parse_field(k, value)?,
            "grid_exp" => self.grid_exp = parse_field(k, value)?,
            "steps" => self.steps = parse_field(k, value)?,
            "alpha" => self.alpha = parse_field(k, value)?,
            "scheme" => self.scheme = parse_field(k, value)?,
            "floor_payoff" => self.floor_payoff = parse_bool(k, value)?,
            "retain_surfaces" => self.retain_surfaces = parse_bool(k, value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "format" => self.format = parse_field(k, value)?,
            "sweep" => self.sweep = Some(SweepAxes::parse(value)?),
            "workers" => self.workers = Some(parse_field(k, value)?),
            _ => return Err(config_err(k, "unknown key")),
        }
        Ok(())
    }

    /// Applies a flat `key = value` text. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::ConfigFile {
                path: origin.to_path_buf(),
                line: i + 1,
                reason: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key, value).map_err(|e| CliError::ConfigFile {
                path: origin.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text, path)
    }

    pub fn apply_args(&mut self, a: &Args) -> Result<()> {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = a.$f.clone() {
                    self.$f = v;
                }
            )*};
        }
        take!(
            s0,
            strike,
            mu,
            dividend,
            rate,
            borrow_rate,
            sigma,
            maturity,
            trunc_width,
            grid_exp,
            steps,
            alpha,
            scheme,
            format
        );
        if a.floor_payoff {
            self.floor_payoff = true;
        }
        if a.retain_surfaces {
            self.retain_surfaces = true;
        }
        if let Some(out) = &a.out {
            self.out = Some(out.clone());
        }
        if let Some(spec) = &a.sweep {
            self.sweep = Some(SweepAxes::parse(spec)?);
        }
        if let Some(w) = a.workers {
            self.workers = Some(w);
        }
        Ok(())
    }

    /// Defaults, then the `--config` file, then flags; validated.
    pub fn from_args(a: &Args) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = &a.config {
            cfg.apply_file(path)?;
        }
        cfg.apply_args(a)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid_points(&self) -> usize {
        1usize << self.grid_exp.min(MAX_GRID_EXP)
    }

    /// Checks every field and the derived core objects.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("s0", self.s0),
            ("strike", self.strike),
            ("sigma", self.sigma),
            ("maturity", self.maturity),
            ("trunc_width", self.trunc_width),
        ];
        for (field, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(config_err(field, format!("must be a finite number > 0, got {v}")));
            }
        }
        for (field, v) in [
            ("mu", self.mu),
            ("dividend", self.dividend),
            ("rate", self.rate),
            ("borrow_rate", self.borrow_rate),
        ] {
            if !v.is_finite() {
                return Err(config_err(field, format!("must be finite, got {v}")));
            }
        }
        if self.borrow_rate < self.rate {
            return Err(config_err(
                "borrow_rate",
                format!("must be >= rate ({}), got {}", self.rate, self.borrow_rate),
            ));
        }
        if !(MIN_GRID_EXP..=MAX_GRID_EXP).contains(&self.grid_exp) {
            return Err(config_err(
                "grid_exp",
                format!("must lie in {MIN_GRID_EXP}..={MAX_GRID_EXP}, got {}", self.grid_exp),
            ));
        }
        if self.steps == 0 {
            return Err(config_err("steps", "need at least one time step"));
        }
        check_alpha(self.alpha).map_err(|e| config_err("alpha", e.to_string()))?;
        if self.workers == Some(0) {
            return Err(config_err("workers", "need at least one worker"));
        }
        self.model().validate().map_err(core_field_err)?;
        self.grids()?;
        Ok(())
    }

    pub fn model(&self) -> MarketModel {
        MarketModel {
            mu: self.mu,
            dividend: self.dividend,
            rate: self.rate,
            borrow_rate: self.borrow_rate,
            sigma: self.sigma,
            s0: self.s0,
        }
    }

    /// Lattice centred on `ln S_0`.
    pub fn grids(&self) -> Result<Grids> {
        make_grids(
            self.s0.ln(),
            self.trunc_width,
            self.grid_points(),
            self.maturity,
            self.steps,
        )
        .map_err(core_field_err)
    }

    pub fn boundary(&self) -> Result<BoundaryControlConfig> {
        BoundaryControlConfig::new(self.alpha, self.scheme).map_err(|e| config_err("alpha", e.to_string()))
    }

    pub fn problem(&self) -> ProblemSpec {
        ProblemSpec::call(&self.model(), self.strike).with_floor(self.floor_payoff)
    }
}

fn core_field_err(e: bsde_cfft::Error) -> CliError {
    match e {
        bsde_cfft::Error::InvalidParameter { name, reason } => config_err(name, reason),
        other => config_err("config", other.to_string()),
    }
}
