//! Backward time stepping on the log-price lattice.
//!
//! Each step maps `(Y_{i+1}, ·)` to `(Y_i, Z_i)`:
//!
//! 1. fit the shift `(A, B)` on `Y_{i+1}` and form the damped-shifted vector,
//! 2. convolve it against `Ψ_y` and `Ψ_z` with one forward and two inverse
//!    transforms,
//! 3. undamp, add the shift's conditional expectations back, giving `Ŷ` and `Z̄`,
//! 4. explicit driver update `Y_i = Ŷ + Δt f(t_i, x, Ŷ, Z̄)`, optionally
//!    floored at zero.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundary_control::{BoundaryControlConfig, Damping, PeriodicityResiduals, ShiftParams, ShiftScheme};
use crate::error::{invalid, Error, Result};
use crate::grid::{stability_check, Grids, SpatialGrid, StabilityReport};
use crate::kernels::{build_multipliers, MultiplierSet, StepCoefficients};
use crate::transform::CenteredDft;

/// Geometric Brownian motion with dividend yield, plus lending and
/// borrowing rates for the driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub mu: f64,
    pub dividend: f64,
    pub rate: f64,
    pub borrow_rate: f64,
    pub sigma: f64,
    pub s0: f64,
}

impl MarketModel {
    /// `S_0 = 100, μ = 0.05, d = 0, r = R = 0.01, σ = 0.2`.
    pub fn canonical() -> Self {
        Self {
            mu: 0.05,
            dividend: 0.0,
            rate: 0.01,
            borrow_rate: 0.01,
            sigma: 0.2,
            s0: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("mu", self.mu),
            ("dividend", self.dividend),
            ("rate", self.rate),
            ("borrow_rate", self.borrow_rate),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(invalid("sigma", format!("volatility must be > 0, got {}", self.sigma)));
        }
        if !(self.s0 > 0.0) || !self.s0.is_finite() {
            return Err(invalid("s0", format!("spot must be > 0, got {}", self.s0)));
        }
        if self.borrow_rate < self.rate {
            return Err(invalid(
                "borrow_rate",
                format!(
                    "borrowing rate {} is below lending rate {}",
                    self.borrow_rate, self.rate
                ),
            ));
        }
        Ok(())
    }

    /// Log-price drift `η = μ − d − σ²/2`.
    pub fn eta(&self) -> f64 {
        self.mu - self.dividend - 0.5 * self.sigma * self.sigma
    }

    pub fn x0(&self) -> f64 {
        self.s0.ln()
    }

    pub fn step_coefficients(&self, dt: f64) -> Result<StepCoefficients> {
        StepCoefficients::new(self.eta(), self.sigma, dt)
    }
}

/// Terminal condition `g(x)` over log-price.
pub trait Terminal: Send + Sync {
    fn value(&self, x: f64) -> f64;

    /// `Z_N = σ ∂_x g` when known in closed form.
    fn analytic_z(&self, _x: f64, _sigma: f64) -> Option<f64> {
        None
    }
}

/// Driver `f(t, x, y, z)` of the backward equation.
pub trait Driver: Send + Sync {
    fn eval(&self, t: f64, x: f64, y: f64, z: f64) -> f64;

    /// Whether `f` is affine in `(y, z)`.
    fn is_linear(&self) -> bool {
        false
    }
}

impl<F> Terminal for F
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payoff {
    /// `(e^x − K)^+`
    Call {
        strike: f64,
    },
    Constant {
        value: f64,
    },
    /// `scale · e^x`
    Exponential {
        scale: f64,
    },
}

impl Terminal for Payoff {
    fn value(&self, x: f64) -> f64 {
        match *self {
            Payoff::Call { strike } => (x.exp() - strike).max(0.0),
            Payoff::Constant { value } => value,
            Payoff::Exponential { scale } => scale * x.exp(),
        }
    }

    fn analytic_z(&self, x: f64, sigma: f64) -> Option<f64> {
        match *self {
            Payoff::Call { strike } => Some(if x > strike.ln() { sigma * x.exp() } else { 0.0 }),
            Payoff::Constant { .. } => Some(0.0),
            Payoff::Exponential { scale } => Some(sigma * scale * x.exp()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverKind {
    Zero,
    /// `f = −r y`
    Discount {
        rate: f64,
    },
    /// `f = −r y − (μ − d − r) σ⁻¹ z + (R − r)(y − σ⁻¹ z)⁻`
    DifferentRates {
        mu: f64,
        dividend: f64,
        rate: f64,
        borrow_rate: f64,
        sigma: f64,
    },
}

impl DriverKind {
    pub fn different_rates(model: &MarketModel) -> Self {
        DriverKind::DifferentRates {
            mu: model.mu,
            dividend: model.dividend,
            rate: model.rate,
            borrow_rate: model.borrow_rate,
            sigma: model.sigma,
        }
    }
}

impl Driver for DriverKind {
    fn eval(&self, _t: f64, _x: f64, y: f64, z: f64) -> f64 {
        match *self {
            DriverKind::Zero => 0.0,
            DriverKind::Discount { rate } => -rate * y,
            DriverKind::DifferentRates {
                mu,
                dividend,
                rate,
                borrow_rate,
                sigma,
            } => {
                let zs = z / sigma;
                let negative_part = (-(y - zs)).max(0.0);
                -rate * y - (mu - dividend - rate) * zs + (borrow_rate - rate) * negative_part
            }
        }
    }

    fn is_linear(&self) -> bool {
        match *self {
            DriverKind::DifferentRates { rate, borrow_rate, .. } => borrow_rate == rate,
            _ => true,
        }
    }
}

/// Terminal condition, driver and the optional non-negativity floor.
#[derive(Clone)]
pub struct ProblemSpec {
    pub terminal: Arc<dyn Terminal>,
    pub driver: Arc<dyn Driver>,
    pub floor_to_payoff: bool,
    /// Initialize `Z_N` from [`Terminal::analytic_z`] instead of zero.
    pub analytic_terminal_z: bool,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("floor_to_payoff", &self.floor_to_payoff)
            .field("analytic_terminal_z", &self.analytic_terminal_z)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new(terminal: impl Terminal + 'static, driver: impl Driver + 'static) -> Self {
        Self {
            terminal: Arc::new(terminal),
            driver: Arc::new(driver),
            floor_to_payoff: false,
            analytic_terminal_z: false,
        }
    }

    /// Call payoff with the different-rates driver of `model`.
    pub fn call(model: &MarketModel, strike: f64) -> Self {
        Self::new(Payoff::Call { strike }, DriverKind::different_rates(model))
    }

    pub fn with_floor(mut self, on: bool) -> Self {
        self.floor_to_payoff = on;
        self
    }

    pub fn with_analytic_terminal_z(mut self, on: bool) -> Self {
        self.analytic_terminal_z = on;
        self
    }

    /// Checks the terminal is finite on the lattice and that sampled
    /// difference quotients of the driver in `(y, z)` stay bounded.
    pub fn validate(&self, space: &SpatialGrid) -> Result<()> {
        if space.points().iter().any(|&x| !self.terminal.value(x).is_finite()) {
            return Err(Error::NonFiniteInput("terminal condition on grid"));
        }
        const MAX_QUOTIENT: f64 = 1e8;
        let xs = space.points();
        let h = 1e-3;
        for &x in [xs[0], xs[xs.len() / 2], xs[xs.len() - 1]].iter() {
            for &(y, z) in &[(0.0, 0.0), (1.0, -1.0), (-50.0, 20.0), (100.0, 30.0)] {
                let f0 = self.driver.eval(0.0, x, y, z);
                let qy = (self.driver.eval(0.0, x, y + h, z) - f0) / h;
                let qz = (self.driver.eval(0.0, x, y, z + h) - f0) / h;
                if !f0.is_finite() || !qy.is_finite() || !qz.is_finite() {
                    return Err(Error::NonFiniteInput("driver"));
                }
                if qy.abs() > MAX_QUOTIENT || qz.abs() > MAX_QUOTIENT {
                    return Err(invalid("driver", "difference quotients suggest a non-Lipschitz driver"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    /// Step whose target `Y_{step+1}` was shifted.
    pub step: usize,
    pub params: ShiftParams,
    pub residuals: PeriodicityResiduals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub step_index: usize,
    pub shift_history: Vec<ShiftRecord>,
}

/// `Y_N = g(x_n)`, `Z_N = 0` (or the analytic terminal `Z` when requested).
pub fn init_terminal(spec: &ProblemSpec, model: &MarketModel, grids: &Grids) -> Result<SolverState> {
    let xs = grids.space.points();
    let y: Vec<f64> = xs.iter().map(|&x| spec.terminal.value(x)).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("terminal condition on grid"));
    }
    let z = if spec.analytic_terminal_z {
        xs.iter()
            .map(|&x| spec.terminal.analytic_z(x, model.sigma).unwrap_or(0.0))
            .collect()
    } else {
        vec![0.0; xs.len()]
    };
    Ok(SolverState {
        y,
        z,
        step_index: grids.time.n_steps(),
        shift_history: Vec::new(),
    })
}

/// Which time slices a solve keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Retain {
    /// `t_0` only.
    #[default]
    Initial,
    /// Every computed step `t_0 .. t_{n−1}`.
    All,
    /// `t_0` and every step index divisible by the stride.
    Every(usize),
}

impl Retain {
    fn keeps(&self, step: usize) -> bool {
        match *self {
            Retain::Initial => step == 0,
            Retain::All => true,
            Retain::Every(k) => step == 0 || (k > 0 && step.is_multiple_of(k)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub step: usize,
    pub t: f64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Retained slices in ascending step order; the first is `t_0`.
    pub surfaces: Vec<Surface>,
    /// One record per step, ascending by step.
    pub shift_history: Vec<ShiftRecord>,
    pub stability: StabilityReport,
}

impl Solution {
    pub fn initial(&self) -> &Surface {
        &self.surfaces[0]
    }

    pub fn shift_summary(&self) -> Option<ShiftSummary> {
        ShiftSummary::from_history(&self.shift_history)
    }
}

/// Range and last value (the step producing `t_0`) of each shift parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSummary {
    pub a_min: f64,
    pub a_max: f64,
    pub a_final: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub b_final: f64,
    /// Largest [`PeriodicityResiduals::relative`] over the run.
    pub max_residual: f64,
}

impl ShiftSummary {
    /// `None` for an empty history. Records are in ascending step order, so
    /// the final values are those of step 0.
    pub fn from_history(history: &[ShiftRecord]) -> Option<Self> {
        let last = history.iter().min_by_key(|r| r.step)?;
        let mut s = Self {
            a_min: f64::INFINITY,
            a_max: f64::NEG_INFINITY,
            a_final: last.params.a,
            b_min: f64::INFINITY,
            b_max: f64::NEG_INFINITY,
            b_final: last.params.b,
            max_residual: 0.0,
        };
        for r in history {
            s.a_min = s.a_min.min(r.params.a);
            s.a_max = s.a_max.max(r.params.a);
            s.b_min = s.b_min.min(r.params.b);
            s.b_max = s.b_max.max(r.params.b);
            s.max_residual = s.max_residual.max(r.residuals.relative());
        }
        Some(s)
    }
}

/// Precomputed transform plan, damping profile and multipliers for one
/// configuration. Coefficients are time-homogeneous, so the multipliers are
/// built once.
pub struct Solver {
    model: MarketModel,
    spec: ProblemSpec,
    cfg: BoundaryControlConfig,
    grids: Grids,
    plan: CenteredDft,
    damping: Damping,
    kset: MultiplierSet,
}

impl Solver {
    pub fn new(model: MarketModel, spec: ProblemSpec, cfg: BoundaryControlConfig, grids: Grids) -> Result<Self> {
        model.validate()?;
        let cfg = BoundaryControlConfig::new(cfg.alpha, cfg.scheme)?;
        spec.validate(&grids.space)?;
        let coeffs = model.step_coefficients(grids.time.dt())?;
        let kset = build_multipliers(&coeffs, cfg.alpha, &grids.freq, &grids.space)?;
        let plan = CenteredDft::new(&grids.space, &grids.freq);
        let damping = Damping::new(cfg, &grids.space);
        Ok(Self {
            model,
            spec,
            cfg,
            grids,
            plan,
            damping,
            kset,
        })
    }

    pub fn grids(&self) -> &Grids {
        &self.grids
    }

    pub fn multipliers(&self) -> &MultiplierSet {
        &self.kset
    }

    pub fn init(&self) -> Result<SolverState> {
        init_terminal(&self.spec, &self.model, &self.grids)
    }

    pub fn step(&self, state: SolverState) -> Result<SolverState> {
        step_with(&self.plan, &self.damping, &self.kset, &self.spec, &self.grids, state)
    }

    pub fn solve(&self, retain: Retain) -> Result<Solution> {
        let stability = stability_check(&self.grids.space, &self.grids.time, self.model.sigma)?;
        let mut state = self.init()?;
        let mut surfaces = Vec::new();
        while state.step_index > 0 {
            state = self.step(state)?;
            if retain.keeps(state.step_index) {
                surfaces.push(Surface {
                    step: state.step_index,
                    t: self.grids.time.t(state.step_index),
                    y: state.y.clone(),
                    z: state.z.clone(),
                });
            }
        }
        surfaces.reverse();
        let mut shift_history = state.shift_history;
        shift_history.reverse();
        Ok(Solution {
            surfaces,
            shift_history,
            stability,
        })
    }

    pub fn config(&self) -> &BoundaryControlConfig {
        &self.cfg
    }
}

fn step_with(
    plan: &CenteredDft,
    damping: &Damping,
    kset: &MultiplierSet,
    spec: &ProblemSpec,
    grids: &Grids,
    state: SolverState,
) -> Result<SolverState> {
    if state.step_index == 0 {
        return Err(invalid("step_index", "state is already at t_0"));
    }
    let step = state.step_index - 1;
    let scheme = damping.config().scheme;
    let non_finite = |what| Error::NonFinite {
        step,
        scheme: scheme.to_string(),
        what,
    };

    let params = damping.solve(&state.y)?;
    let tilde = damping.apply(&state.y, &params);
    let residuals = PeriodicityResiduals::measure(&tilde, &grids.space)?;
    if scheme != ShiftScheme::None {
        residuals.check()?;
    }

    let conv = plan.apply_multipliers(&tilde, &[&kset.psi_y, &kset.psi_z])?;
    let conv_y: Vec<f64> = conv[0].iter().map(|c| c.re).collect();
    let conv_z: Vec<f64> = conv[1].iter().map(|c| c.re).collect();
    let y_hat = damping.invert_y(&conv_y, &params, kset, &grids.space);
    let z = damping.invert_z(&conv_z, &params, kset);

    let t = grids.time.t(step);
    let dt = grids.time.dt();
    let mut y: Vec<f64> = y_hat
        .iter()
        .zip(&z)
        .zip(grids.space.points())
        .map(|((&yh, &zv), &x)| yh + spec.driver.eval(t, x, yh, zv) * dt)
        .collect();
    if spec.floor_to_payoff {
        for v in y.iter_mut() {
            *v = v.max(0.0);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(non_finite("Y"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(non_finite("Z"));
    }

    let mut shift_history = state.shift_history;
    shift_history.push(ShiftRecord {
        step,
        params,
        residuals,
    });
    Ok(SolverState {
        y,
        z,
        step_index: step,
        shift_history,
    })
}

/// One backward step from `t_{i+1}` to `t_i`. Plans the transform on every
/// call; [`Solver`] amortizes that across steps.
pub fn backward_step(
    state: SolverState,
    kset: &MultiplierSet,
    cfg: &BoundaryControlConfig,
    spec: &ProblemSpec,
    grids: &Grids,
) -> Result<SolverState> {
    let plan = CenteredDft::new(&grids.space, &grids.freq);
    let damping = Damping::new(*cfg, &grids.space);
    step_with(&plan, &damping, kset, spec, grids, state)
}

/// Runs all `n_steps` backward iterations from `t_n` to `t_0`.
pub fn solve(
    model: &MarketModel,
    spec: &ProblemSpec,
    cfg: &BoundaryControlConfig,
    grids: &Grids,
    retain: Retain,
) -> Result<Solution> {
    Solver::new(*model, spec.clone(), *cfg, grids.clone())?.solve(retain)
}
