//! Single runs and their CSV report rows.

use std::fmt::Display;
use std::io::Write;
use std::time::{Duration, Instant};

use bsde_cfft::analytics::{compare_at_spot, error_profile, CallOracle, ErrorProfile, ProfileWindow};
use bsde_cfft::solver::{Retain, Solution, Solver};
use serde::{Serialize, Serializer};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Version of the report column layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Scientific notation with six significant digits and a two-digit
/// exponent, e.g. `1.15300e-06`.
pub fn sci(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.5e}");
    let (mant, exp) = s.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

fn sci_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_str(&sci(*v)),
        None => s.serialize_none(),
    }
}

/// One row per run. Column names in the CSV are these field names. Result
/// fields are empty when the run failed (see `error`) or, for oracle
/// columns, when no closed form applies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub s0: f64,
    pub strike: f64,
    pub mu: f64,
    pub dividend: f64,
    pub rate: f64,
    pub borrow_rate: f64,
    pub sigma: f64,
    pub maturity: f64,
    pub trunc_width: f64,
    pub grid_points: usize,
    pub steps: usize,
    pub alpha: f64,
    pub scheme: String,
    pub floor_payoff: bool,
    /// `Y_0` at `S_0`.
    pub price: Option<f64>,
    pub price_bs: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub price_abs_err: Option<f64>,
    /// `Z_0/(σ S_0)`.
    pub delta: Option<f64>,
    /// At-the-money (spot = strike) deltas.
    pub delta_bs: Option<f64>,
    pub delta_z: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub delta_z_abs_err: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub delta_z_rel_err: Option<f64>,
    pub delta_fd: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub delta_fd_abs_err: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub delta_fd_rel_err: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub price_boundary_max: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub price_interior_max: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub delta_boundary_max: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub delta_interior_max: Option<f64>,
    pub oracle_free: Option<bool>,
    pub stability_satisfied: Option<bool>,
    pub stability_threshold: Option<u64>,
    pub shift_a_min: Option<f64>,
    pub shift_a_max: Option<f64>,
    pub shift_a_final: Option<f64>,
    pub shift_b_min: Option<f64>,
    pub shift_b_max: Option<f64>,
    pub shift_b_final: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub shift_max_residual: Option<f64>,
    pub error: String,
    /// Kept out of data rows so reruns are byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunReport {
    fn echo(cfg: &RunConfig) -> Self {
        Self {
            s0: cfg.s0,
            strike: cfg.strike,
            mu: cfg.mu,
            dividend: cfg.dividend,
            rate: cfg.rate,
            borrow_rate: cfg.borrow_rate,
            sigma: cfg.sigma,
            maturity: cfg.maturity,
            trunc_width: cfg.trunc_width,
            grid_points: cfg.grid_points(),
            steps: cfg.steps,
            alpha: cfg.alpha,
            scheme: cfg.scheme.to_string(),
            floor_payoff: cfg.floor_payoff,
            price: None,
            price_bs: None,
            price_abs_err: None,
            delta: None,
            delta_bs: None,
            delta_z: None,
            delta_z_abs_err: None,
            delta_z_rel_err: None,
            delta_fd: None,
            delta_fd_abs_err: None,
            delta_fd_rel_err: None,
            price_boundary_max: None,
            price_interior_max: None,
            delta_boundary_max: None,
            delta_interior_max: None,
            oracle_free: None,
            stability_satisfied: None,
            stability_threshold: None,
            shift_a_min: None,
            shift_a_max: None,
            shift_a_final: None,
            shift_b_min: None,
            shift_b_max: None,
            shift_b_final: None,
            shift_max_residual: None,
            error: String::new(),
            wall_time: Duration::ZERO,
        }
    }

    /// Error row: the configuration echo plus the message.
    pub fn failed(cfg: &RunConfig, err: &dyn Display) -> Self {
        Self {
            error: err.to_string(),
            ..Self::echo(cfg)
        }
    }

    pub fn is_error(&self) -> bool {
        !self.error.is_empty()
    }

    /// The header line, derived from the field names.
    pub fn csv_header() -> String {
        let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
        w.serialize(Self::echo(&RunConfig::default()))
            .expect("in-memory serialization");
        let bytes = w.into_inner().expect("in-memory flush");
        let text = String::from_utf8(bytes).expect("utf-8 header");
        text.lines().next().unwrap_or_default().to_string()
    }

    /// The data line, without the trailing newline.
    pub fn csv_line(&self) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.serialize(self).expect("in-memory serialization");
        let bytes = w.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("utf-8 row").trim_end().to_string()
    }
}

/// Metadata line opening every report file.
pub fn metadata_line() -> String {
    format!(
        "# bsde-cfft report schema={SCHEMA_VERSION} version={}",
        env!("CARGO_PKG_VERSION")
    )
}

/// Writes a metadata line, the header and one data line per row. Wall times
/// follow as `#` lines so data lines stay byte-identical across reruns.
pub fn write_report(out: &mut dyn Write, rows: &[RunReport]) -> std::io::Result<()> {
    writeln!(out, "{}", metadata_line())?;
    writeln!(out, "{}", RunReport::csv_header())?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    for (i, row) in rows.iter().enumerate() {
        writeln!(out, "# wall_time_s row={i} value={:.6}", row.wall_time.as_secs_f64())?;
    }
    Ok(())
}

/// A finished run: the report plus the raw solution.
pub struct RunOutput {
    pub report: RunReport,
    pub solution: Solution,
    pub profile: ErrorProfile,
}

/// Solves one configuration and runs the analytics on `t_0`.
pub fn run_with_solution(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let model = cfg.model();
    let grids = cfg.grids()?;
    let context = format!(
        "solve n={} L={} N={} scheme={}",
        cfg.steps,
        cfg.trunc_width,
        cfg.grid_points(),
        cfg.scheme
    );
    let wrap = |source| CliError::Solver {
        context: context.clone(),
        source,
    };
    let solver = Solver::new(model, cfg.problem(), cfg.boundary()?, grids.clone()).map_err(wrap)?;
    let retain = if cfg.retain_surfaces {
        Retain::All
    } else {
        Retain::Initial
    };
    let solution = solver.solve(retain).map_err(wrap)?;
    let s = solution.initial();

    let oracle = CallOracle {
        strike: cfg.strike,
        maturity: cfg.maturity,
    };
    let profile = error_profile(&s.y, &s.z, &model, &oracle, &grids.space, ProfileWindow::default()).map_err(wrap)?;
    let at_s0 = compare_at_spot(&s.y, &s.z, &model, &oracle, &grids.space, cfg.s0).map_err(wrap)?;
    let atm = compare_at_spot(&s.y, &s.z, &model, &oracle, &grids.space, cfg.strike).map_err(wrap)?;
    let oracle_on = !profile.oracle_free;
    let when = |v: f64| oracle_on.then_some(v);

    let mut r = RunReport::echo(cfg);
    r.price = Some(at_s0.price);
    r.price_bs = when(at_s0.price_bs);
    r.price_abs_err = when(at_s0.price_abs_err);
    r.delta = Some(at_s0.delta_z);
    r.delta_bs = when(atm.delta_bs);
    r.delta_z = Some(atm.delta_z);
    r.delta_z_abs_err = when(atm.delta_z_abs_err);
    r.delta_z_rel_err = when(atm.delta_z_rel_err);
    r.delta_fd = Some(atm.delta_fd);
    r.delta_fd_abs_err = when(atm.delta_fd_abs_err);
    r.delta_fd_rel_err = when(atm.delta_fd_rel_err);
    r.price_boundary_max = when(profile.price_window.boundary_max);
    r.price_interior_max = when(profile.price_window.interior_max);
    r.delta_boundary_max = when(profile.delta_window.boundary_max);
    r.delta_interior_max = when(profile.delta_window.interior_max);
    r.oracle_free = Some(profile.oracle_free);
    r.stability_satisfied = Some(solution.stability.satisfied);
    r.stability_threshold = Some(solution.stability.threshold);
    if let Some(sh) = solution.shift_summary() {
        r.shift_a_min = Some(sh.a_min);
        r.shift_a_max = Some(sh.a_max);
        r.shift_a_final = Some(sh.a_final);
        r.shift_b_min = Some(sh.b_min);
        r.shift_b_max = Some(sh.b_max);
        r.shift_b_final = Some(sh.b_final);
        r.shift_max_residual = Some(sh.max_residual);
    }
    r.wall_time = started.elapsed();
    Ok(RunOutput {
        report: r,
        solution,
        profile,
    })
}

pub fn run_single(cfg: &RunConfig) -> Result<RunReport> {
    run_with_solution(cfg).map(|o| o.report)
}
