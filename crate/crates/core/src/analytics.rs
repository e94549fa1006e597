//! Black-Scholes oracle and error metrology for solver output.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::boundary_control::{BoundaryControlConfig, Damping, ShiftParams};
use crate::error::{check_len, invalid, Error, Result};
use crate::grid::{Grids, SpatialGrid};
use crate::solver::MarketModel;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// `1 − erf(x)` without cancellation for large `x`.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub price: f64,
    pub delta: f64,
}

/// Black-Scholes European call with rate `r` and dividend yield `d`.
pub fn bs_price_delta(model: &MarketModel, strike: f64, maturity: f64, spot: f64) -> Result<Quote> {
    for (name, v) in [
        ("spot", spot),
        ("strike", strike),
        ("maturity", maturity),
        ("sigma", model.sigma),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(name, format!("must be > 0, got {v}")));
        }
    }
    let vol = model.sigma * maturity.sqrt();
    let d1 = ((spot / strike).ln() + (model.rate - model.dividend + 0.5 * model.sigma * model.sigma) * maturity) / vol;
    let d2 = d1 - vol;
    let carry = (-model.dividend * maturity).exp();
    let discount = (-model.rate * maturity).exp();
    Ok(Quote {
        price: spot * carry * norm_cdf(d1) - strike * discount * norm_cdf(d2),
        delta: carry * norm_cdf(d1),
    })
}

/// Hedge ratio `Δ = Z / (σ S)`.
pub fn delta_from_z(z: &[f64], model: &MarketModel, space: &SpatialGrid) -> Result<Vec<f64>> {
    check_len(space.len(), z.len())?;
    if !(model.sigma > 0.0) {
        return Err(invalid("sigma", "must be > 0"));
    }
    Ok(z.iter()
        .zip(space.points())
        .map(|(z, x)| z / (model.sigma * x.exp()))
        .collect())
}

/// `dY/dS = (dY/dx)/S`: central differences inside, the second-order
/// one-sided boundary stencils at the ends.
pub fn delta_from_fd(y: &[f64], space: &SpatialGrid) -> Result<Vec<f64>> {
    check_len(space.len(), y.len())?;
    let n = y.len();
    if n < 3 {
        return Err(Error::Insufficient(format!("need at least 3 samples, got {n}")));
    }
    let (left, right) = crate::boundary_control::boundary_slopes(y, space)?;
    let h = 2.0 * space.dx();
    let xs = space.points();
    Ok((0..n)
        .map(|i| {
            let slope = match i {
                0 => left,
                i if i == n - 1 => right,
                i => (y[i + 1] - y[i - 1]) / h,
            };
            slope / xs[i].exp()
        })
        .collect())
}

/// Fractions of the lattice treated as boundary (each side) and interior
/// (centred) when summarizing errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileWindow {
    pub boundary_fraction: f64,
    pub interior_fraction: f64,
}

impl Default for ProfileWindow {
    fn default() -> Self {
        Self {
            boundary_fraction: 0.10,
            interior_fraction: 0.50,
        }
    }
}

impl ProfileWindow {
    /// Index ranges `(left boundary, right boundary, interior)`.
    pub fn ranges(&self, n: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>, std::ops::Range<usize>) {
        let nb = ((n as f64 * self.boundary_fraction).floor() as usize).clamp(1, n / 2);
        let ni = ((n as f64 * self.interior_fraction).floor() as usize).clamp(1, n);
        let start = (n - ni) / 2;
        (0..nb, n - nb..n, start..start + ni)
    }

    pub fn summarize(&self, errors: &[f64]) -> WindowMax {
        let (l, r, mid) = self.ranges(errors.len());
        let max_abs = |r: std::ops::Range<usize>| errors[r].iter().fold(0.0f64, |m, e| m.max(e.abs()));
        WindowMax {
            boundary_max: max_abs(l).max(max_abs(r)),
            interior_max: max_abs(mid),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowMax {
    pub boundary_max: f64,
    pub interior_max: f64,
}

/// Pointwise comparison of `t_0` surfaces against the Black-Scholes oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    /// Spot values `e^{x_n}`.
    pub grid_x: Vec<f64>,
    pub price: Vec<f64>,
    pub delta: Vec<f64>,
    /// Signed `solver − oracle`.
    pub price_error: Vec<f64>,
    pub delta_error: Vec<f64>,
    pub price_window: WindowMax,
    pub delta_window: WindowMax,
    /// Set when no closed form applies; error vectors are then empty.
    pub oracle_free: bool,
}

impl ErrorProfile {
    /// Builds a profile from solver values and oracle values on the same
    /// spots.
    pub fn from_values(
        spots: Vec<f64>,
        price: Vec<f64>,
        delta: Vec<f64>,
        oracle_price: &[f64],
        oracle_delta: &[f64],
        window: ProfileWindow,
    ) -> Result<Self> {
        let n = spots.len();
        for len in [price.len(), delta.len(), oracle_price.len(), oracle_delta.len()] {
            check_len(n, len)?;
        }
        let price_error: Vec<f64> = price.iter().zip(oracle_price).map(|(a, b)| a - b).collect();
        let delta_error: Vec<f64> = delta.iter().zip(oracle_delta).map(|(a, b)| a - b).collect();
        Ok(Self {
            price_window: window.summarize(&price_error),
            delta_window: window.summarize(&delta_error),
            grid_x: spots,
            price,
            delta,
            price_error,
            delta_error,
            oracle_free: false,
        })
    }
}

/// European call oracle parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CallOracle {
    pub strike: f64,
    pub maturity: f64,
}

impl CallOracle {
    pub fn applicable(&self, model: &MarketModel) -> bool {
        model.borrow_rate == model.rate
    }

    pub fn quotes(&self, model: &MarketModel, spots: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        spots
            .iter()
            .map(|&s| bs_price_delta(model, self.strike, self.maturity, s).map(|q| (q.price, q.delta)))
            .collect::<Result<Vec<_>>>()
            .map(|v| v.into_iter().unzip())
    }
}

/// Compares `Y_0` and the `Z_0`-implied delta with the Black-Scholes call
/// across every lattice spot. With `R ≠ r` there is no closed form and the
/// profile is marked oracle-free.
pub fn error_profile(
    y0: &[f64],
    z0: &[f64],
    model: &MarketModel,
    oracle: &CallOracle,
    space: &SpatialGrid,
    window: ProfileWindow,
) -> Result<ErrorProfile> {
    check_len(space.len(), y0.len())?;
    let spots: Vec<f64> = space.points().iter().map(|x| x.exp()).collect();
    let delta = delta_from_z(z0, model, space)?;
    if !oracle.applicable(model) {
        return Ok(ErrorProfile {
            grid_x: spots,
            price: y0.to_vec(),
            delta,
            price_error: Vec::new(),
            delta_error: Vec::new(),
            price_window: WindowMax::default(),
            delta_window: WindowMax::default(),
            oracle_free: true,
        });
    }
    let (bs_price, bs_delta) = oracle.quotes(model, &spots)?;
    ErrorProfile::from_values(spots, y0.to_vec(), delta, &bs_price, &bs_delta, window)
}

/// Price and both deltas at one spot against the closed form. Deltas come
/// via `Z` and via finite differences of `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotComparison {
    pub spot: f64,
    pub on_grid: bool,
    pub price: f64,
    pub price_bs: f64,
    pub price_abs_err: f64,
    pub delta_bs: f64,
    pub delta_z: f64,
    pub delta_fd: f64,
    pub delta_z_abs_err: f64,
    pub delta_z_rel_err: f64,
    pub delta_fd_abs_err: f64,
    pub delta_fd_rel_err: f64,
}

/// Reads price and deltas at `spot`: the node value when `ln spot` is on the
/// lattice, linear interpolation otherwise.
pub fn compare_at_spot(
    y0: &[f64],
    z0: &[f64],
    model: &MarketModel,
    oracle: &CallOracle,
    space: &SpatialGrid,
    spot: f64,
) -> Result<SpotComparison> {
    if !(spot > 0.0) {
        return Err(invalid("spot", format!("must be > 0, got {spot}")));
    }
    let x = spot.ln();
    let dz = delta_from_z(z0, model, space)?;
    let dfd = delta_from_fd(y0, space)?;
    let price = space.interpolate(y0, x);
    let delta_z = space.interpolate(&dz, x);
    let delta_fd = space.interpolate(&dfd, x);
    let bs = bs_price_delta(model, oracle.strike, oracle.maturity, spot)?;
    let zabs = (delta_z - bs.delta).abs();
    let fdabs = (delta_fd - bs.delta).abs();
    Ok(SpotComparison {
        spot,
        on_grid: space.on_grid(x),
        price,
        price_bs: bs.price,
        price_abs_err: (price - bs.price).abs(),
        delta_bs: bs.delta,
        delta_z,
        delta_fd,
        delta_z_abs_err: zabs,
        delta_z_rel_err: zabs / bs.delta.abs(),
        delta_fd_abs_err: fdabs,
        delta_fd_rel_err: fdabs / bs.delta.abs(),
    })
}

/// Inputs to the convolution error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Sup of the damped, unshifted target on the lattice.
    pub f_bar: f64,
    /// Sup of the damped, shifted target.
    pub f_hat: f64,
    /// Discrete Fourier coefficient error constant.
    pub eps: f64,
    /// Coefficient decay order.
    pub m: f64,
}

impl BoundInputs {
    pub const DEFAULT_EPS: f64 = 1.0;
    pub const DEFAULT_M: f64 = 2.0;

    pub fn new(f_bar: f64, f_hat: f64, eps: f64, m: f64) -> Result<Self> {
        if !(f_hat <= f_bar) || f_hat < 0.0 {
            return Err(invalid(
                "f_hat",
                format!("need 0 <= f_hat <= f_bar, got {f_hat} vs {f_bar}"),
            ));
        }
        if !(m >= 2.0) {
            return Err(invalid("m", format!("decay order must be >= 2, got {m}")));
        }
        if !(eps > 0.0) {
            return Err(invalid("eps", format!("must be > 0, got {eps}")));
        }
        Ok(Self { f_bar, f_hat, eps, m })
    }

    /// Measures `f̄ = sup |y|` and `f̂ = sup |e^{αx}(y − h)|` from a grid vector
    /// and a fitted shift.
    pub fn measure(
        y: &[f64],
        shift: &ShiftParams,
        cfg: &BoundaryControlConfig,
        space: &SpatialGrid,
        eps: f64,
        m: f64,
    ) -> Result<Self> {
        let d = Damping::new(*cfg, space);
        let sup = |v: Vec<f64>| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let f_bar = sup(y.to_vec());
        let f_hat = sup(d.apply(y, shift));
        Self::new(f_bar, f_hat, eps, m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurves {
    pub x: Vec<f64>,
    /// Damped-and-shifted Y bound, growing like `e^{−αx}`.
    pub y_bound: Vec<f64>,
    /// Damped-and-shifted Z bound. Carries a `1/(σ|α|√(2πΔt))` term, so it
    /// grows without limit as `Δt → 0`.
    pub z_bound: Vec<f64>,
    /// Plain (undamped, unshifted) bound, constant in `x`.
    pub plain: f64,
}

/// `1 − erf(σ(N−2)π/L · √(Δt/2))`.
pub fn truncation_factor(sigma: f64, n: usize, width: f64, dt: f64) -> f64 {
    erfc(sigma * (n as f64 - 2.0) * PI / width * (dt / 2.0).sqrt())
}

/// `C_L (f̄ (1 − erf(·)) + ε L N^{−m})` with `C_L = L / (σ√(2πΔt))`.
pub fn plain_bound(inputs: &BoundInputs, sigma: f64, grids: &Grids) -> f64 {
    let (width, n, dt) = (grids.space.width(), grids.space.len(), grids.time.dt());
    let c_l = width / (sigma * (2.0 * PI * dt).sqrt());
    c_l * (inputs.f_bar * truncation_factor(sigma, n, width, dt) + inputs.eps * width * (n as f64).powf(-inputs.m))
}

/// Evaluates the damped-and-shifted Y and Z error bounds pointwise on the
/// spatial lattice.
pub fn bound_curve(
    inputs: &BoundInputs,
    cfg: &BoundaryControlConfig,
    model: &MarketModel,
    grids: &Grids,
) -> BoundCurves {
    let (width, n, dt) = (grids.space.width(), grids.space.len(), grids.time.dt());
    let sigma = model.sigma;
    let alpha = cfg.alpha;
    let eta = model.eta();
    let root = (2.0 * PI * dt).sqrt();
    let c_alpha = width * (-alpha * dt * (eta - 0.5 * sigma * sigma * alpha)).exp() / (sigma * root);
    let trunc = truncation_factor(sigma, n, width, dt);
    let y_inner = inputs.f_hat * trunc + inputs.eps * width * (n as f64).powf(-inputs.m);
    let z_inner = inputs.f_hat * trunc + 1.0 / (sigma * alpha.abs() * root);
    let k = 0.5 * sigma * sigma * PI * PI;
    let spectral_tail = (-k * (n as f64).powi(2) / (width * width) * dt).exp();

    let x = grids.space.points().to_vec();
    let (y_bound, z_bound) = x
        .iter()
        .map(|&x| {
            let grow = (-alpha * x).exp();
            (
                c_alpha * grow * y_inner,
                c_alpha * sigma * grow / alpha.abs() * z_inner + spectral_tail,
            )
        })
        .unzip();
    BoundCurves {
        x,
        y_bound,
        z_bound,
        plain: plain_bound(inputs, sigma, grids),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConvergenceFit {
    /// Least-squares slope of `ln err` against `ln Δt`.
    Order { order: f64, intercept: f64 },
    /// Every error was exactly zero.
    Exact,
}

impl ConvergenceFit {
    pub fn order(&self) -> Option<f64> {
        match self {
            ConvergenceFit::Order { order, .. } => Some(*order),
            ConvergenceFit::Exact => None,
        }
    }
}

/// Fits `err ≈ c Δt^p` over at least three refinement levels.
pub fn convergence_fit(points: &[(f64, f64)]) -> Result<ConvergenceFit> {
    if points.len() < 3 {
        return Err(Error::Insufficient(format!(
            "convergence fit needs at least 3 levels, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(dt, e)| !(dt > 0.0) || !e.is_finite() || e < 0.0) {
        return Err(invalid(
            "errors",
            "need positive step sizes and finite non-negative errors",
        ));
    }
    let zeros = points.iter().filter(|p| p.1 == 0.0).count();
    if zeros == points.len() {
        return Ok(ConvergenceFit::Exact);
    }
    if zeros > 0 {
        return Err(invalid(
            "errors",
            "some but not all errors are zero; log-log fit undefined",
        ));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(dt, e)| (dt.ln(), e.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("errors", "step sizes must differ"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let order = sxy / sxx;
    Ok(ConvergenceFit::Order {
        order,
        intercept: my - order * mx,
    })
}
