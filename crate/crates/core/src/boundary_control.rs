//! Damp-and-shift transforms applied to the grid function before each FFT
//! convolution, and their exact inversion afterwards.
//!
//! The transformed target is `ũ(x) = e^{αx} (u(x) − h(x))` with
//!
//! * `h(x) = A e^x + B` for [`ShiftScheme::Exponential`],
//! * `h(x) = A x + B` for [`ShiftScheme::Linear`],
//! * `h ≡ 0` for [`ShiftScheme::None`].
//!
//! `(A, B)` are fitted every step so that the sampled `ũ` is periodic on the
//! lattice: equal values at `x_0` and `x_{N−1}`, and equal one-sided slopes
//! under the second-order boundary stencils of [`boundary_slopes`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::SpatialGrid;
use crate::kernels::{check_alpha, MultiplierSet};

/// Smallest determinant magnitude accepted by the 2×2 shift solve.
pub const SINGULAR_DET: f64 = 1e-300;
/// Cancellation threshold relative to the magnitude of the determinant terms.
pub const SINGULAR_REL: f64 = 1e-12;
/// Relative tolerance on the periodicity residuals after a shift solve.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftScheme {
    Exponential,
    Linear,
    None,
}

impl ShiftScheme {
    pub const ALL: [ShiftScheme; 3] = [Self::Exponential, Self::Linear, Self::None];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Exponential => "exponential",
            Self::Linear => "linear",
            Self::None => "none",
        }
    }
}

impl fmt::Display for ShiftScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShiftScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(Self::Exponential),
            "linear" | "lin" => Ok(Self::Linear),
            "none" => Ok(Self::None),
            other => Err(invalid(
                "scheme",
                format!("expected exponential|linear|none, got `{other}`"),
            )),
        }
    }
}

/// Damping exponent (fixed for the whole run) and shift family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryControlConfig {
    pub alpha: f64,
    pub scheme: ShiftScheme,
}

impl BoundaryControlConfig {
    /// Default damping. The exponential shift absorbs the `e^x` growth of a
    /// call, so mild damping suffices and keeps the `e^{−αx}` amplification of
    /// right-edge errors small.
    pub const DEFAULT_ALPHA: f64 = -0.5;

    pub fn new(alpha: f64, scheme: ShiftScheme) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, scheme })
    }
}

impl Default for BoundaryControlConfig {
    fn default() -> Self {
        Self {
            alpha: Self::DEFAULT_ALPHA,
            scheme: ShiftScheme::Exponential,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    /// Coefficient of `e^x` (exponential) or `x` (linear).
    pub a: f64,
    pub b: f64,
}

/// Second-order one-sided slopes at `x_0` and `x_{N−1}`:
/// `(−3y₀ + 4y₁ − y₂)/(2Δx)` and `(3y_{N−1} − 4y_{N−2} + y_{N−3})/(2Δx)`.
pub fn boundary_slopes(y: &[f64], space: &SpatialGrid) -> Result<(f64, f64)> {
    if y.len() < 3 {
        return Err(Error::Insufficient(format!(
            "boundary slopes need at least 3 samples, got {}",
            y.len()
        )));
    }
    Ok(stencil_slopes(y, space.dx()))
}

#[inline]
fn stencil_slopes(y: &[f64], dx: f64) -> (f64, f64) {
    let n = y.len();
    let left = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dx);
    let right = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * dx);
    (left, right)
}

/// Periodicity defects of a sampled damped-shifted vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityResiduals {
    /// `|ũ(x_0) − ũ(x_{N−1})|`
    pub value: f64,
    /// `|ũ'(x_0) − ũ'(x_{N−1})|` under the boundary stencils.
    pub slope: f64,
    /// `‖ũ‖∞`
    pub sup_norm: f64,
}

impl PeriodicityResiduals {
    pub fn measure(tilde: &[f64], space: &SpatialGrid) -> Result<Self> {
        let (left, right) = boundary_slopes(tilde, space)?;
        Ok(Self {
            value: (tilde[0] - tilde[tilde.len() - 1]).abs(),
            slope: (left - right).abs(),
            sup_norm: tilde.iter().fold(0.0, |m, v| m.max(v.abs())),
        })
    }

    pub fn tolerance(&self) -> f64 {
        RESIDUAL_TOL * (1.0 + self.sup_norm)
    }

    /// Larger residual divided by `1 + ‖ũ‖∞`.
    pub fn relative(&self) -> f64 {
        self.value.max(self.slope) / (1.0 + self.sup_norm)
    }

    pub fn within_tolerance(&self) -> bool {
        self.value <= self.tolerance() && self.slope <= self.tolerance()
    }

    pub fn check(&self) -> Result<()> {
        if self.within_tolerance() {
            Ok(())
        } else {
            Err(Error::ShiftResidual {
                value: self.value,
                slope: self.slope,
                tolerance: self.tolerance(),
            })
        }
    }
}

/// Cached damping profile for one lattice: `e^{αx_n}`, `e^{−αx_n}` and the
/// shift basis `φ(x_n)` (`e^x` or `x`).
#[derive(Debug, Clone, PartialEq)]
pub struct Damping {
    cfg: BoundaryControlConfig,
    dx: f64,
    damp: Vec<f64>,
    undamp: Vec<f64>,
    basis: Vec<f64>,
    damped_basis: Vec<f64>,
}

impl Damping {
    pub fn new(cfg: BoundaryControlConfig, space: &SpatialGrid) -> Self {
        let alpha = cfg.alpha;
        let xs = space.points();
        let damp = xs.iter().map(|x| (alpha * x).exp()).collect();
        let undamp = xs.iter().map(|x| (-alpha * x).exp()).collect();
        let basis = match cfg.scheme {
            ShiftScheme::Exponential => xs.iter().map(|x| x.exp()).collect(),
            ShiftScheme::Linear => xs.to_vec(),
            ShiftScheme::None => vec![0.0; xs.len()],
        };
        let damped_basis = match cfg.scheme {
            ShiftScheme::Exponential => xs.iter().map(|x| ((alpha + 1.0) * x).exp()).collect(),
            ShiftScheme::Linear => xs.iter().map(|x| x * (alpha * x).exp()).collect(),
            ShiftScheme::None => vec![0.0; xs.len()],
        };
        Self {
            cfg,
            dx: space.dx(),
            damp,
            undamp,
            basis,
            damped_basis,
        }
    }

    pub fn config(&self) -> &BoundaryControlConfig {
        &self.cfg
    }

    /// Solves the 2×2 periodicity system in closed form. Returns zero
    /// parameters for [`ShiftScheme::None`].
    pub fn solve(&self, y: &[f64]) -> Result<ShiftParams> {
        crate::error::check_len(self.damp.len(), y.len())?;
        if self.cfg.scheme == ShiftScheme::None {
            return Ok(ShiftParams::default());
        }
        let n = y.len();
        if n < 6 {
            return Err(Error::Insufficient(format!(
                "shift solve needs at least 6 samples, got {n}"
            )));
        }
        let idx = [0, 1, 2, n - 3, n - 2, n - 1];
        if idx.iter().any(|&i| !y[i].is_finite()) {
            return Err(Error::NonFiniteInput("shift solve"));
        }
        // damped target, damped basis and damped constant at the stencil nodes
        let pick = |f: &dyn Fn(usize) -> f64| -> [f64; 6] { idx.map(f) };
        let dy = pick(&|i| self.damp[i] * y[i]);
        let d1 = pick(&|i| self.damped_basis[i]);
        let d0 = pick(&|i| self.damp[i]);

        let dx = self.dx;
        let value_gap = |f: &[f64; 6]| f[5] - f[0];
        let slope_gap = |f: &[f64; 6]| {
            let left = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx);
            let right = (3.0 * f[5] - 4.0 * f[4] + f[3]) / (2.0 * dx);
            right - left
        };
        let (v1, v0, vy) = (value_gap(&d1), value_gap(&d0), value_gap(&dy));
        let (s1, s0, sy) = (slope_gap(&d1), slope_gap(&d0), slope_gap(&dy));

        let det = v1 * s0 - v0 * s1;
        let scale = (v1 * s0).abs() + (v0 * s1).abs();
        if !det.is_finite() || det.abs() < SINGULAR_DET || det.abs() <= SINGULAR_REL * scale {
            return Err(Error::SingularShift { det });
        }
        let a = (vy * s0 - v0 * sy) / det;
        let b = (v1 * sy - vy * s1) / det;
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFiniteInput("shift parameters"));
        }
        Ok(ShiftParams { a, b })
    }

    /// `ỹ_n = e^{αx_n} (y_n − (A φ(x_n) + B))`.
    pub fn apply(&self, y: &[f64], p: &ShiftParams) -> Vec<f64> {
        y.iter()
            .zip(&self.damp)
            .zip(&self.basis)
            .map(|((&y, &w), &phi)| w * (y - (p.a * phi + p.b)))
            .collect()
    }

    pub fn undamp(&self) -> &[f64] {
        &self.undamp
    }

    /// `Ŷ_n = e^{−αx_n} c_n + A E[φ(X_{i+1}) | x_n] + B`.
    pub fn invert_y(&self, conv_out: &[f64], p: &ShiftParams, kset: &MultiplierSet, space: &SpatialGrid) -> Vec<f64> {
        match self.cfg.scheme {
            ShiftScheme::Exponential => recover(conv_out, &self.undamp, p, |i| kset.y_recover[i]),
            ShiftScheme::Linear => {
                let drift = kset.coeffs.eta * kset.coeffs.dt;
                let xs = space.points();
                recover(conv_out, &self.undamp, p, |i| xs[i] + drift)
            }
            ShiftScheme::None => recover(conv_out, &self.undamp, &ShiftParams::default(), |_| 0.0),
        }
    }

    /// `Z̄_n = e^{−αx_n} c_n + A E[φ(X_{i+1}) ΔW | x_n] / Δt`; `B` has no
    /// Z contribution.
    pub fn invert_z(&self, conv_out: &[f64], p: &ShiftParams, kset: &MultiplierSet) -> Vec<f64> {
        let p = ShiftParams { a: p.a, b: 0.0 };
        match self.cfg.scheme {
            ShiftScheme::Exponential => recover(conv_out, &self.undamp, &p, |i| kset.z_recover[i]),
            ShiftScheme::Linear => {
                let sigma = kset.coeffs.sigma;
                recover(conv_out, &self.undamp, &p, |_| sigma)
            }
            ShiftScheme::None => recover(conv_out, &self.undamp, &ShiftParams::default(), |_| 0.0),
        }
    }
}

#[inline]
fn recover(conv_out: &[f64], undamp: &[f64], p: &ShiftParams, term: impl Fn(usize) -> f64) -> Vec<f64> {
    conv_out
        .iter()
        .zip(undamp)
        .enumerate()
        .map(|(i, (&c, &u))| u * c + p.a * term(i) + p.b)
        .collect()
}

/// Fits `(A, B)` and verifies the periodicity residuals of the resulting
/// damped-shifted vector.
pub fn solve_shift(y: &[f64], cfg: &BoundaryControlConfig, space: &SpatialGrid) -> Result<ShiftParams> {
    if cfg.scheme == ShiftScheme::None {
        return Err(invalid("scheme", "no shift is solved for scheme `none`"));
    }
    let damping = Damping::new(*cfg, space);
    let p = damping.solve(y)?;
    PeriodicityResiduals::measure(&damping.apply(y, &p), space)?.check()?;
    Ok(p)
}

pub fn apply_shift_damp(y: &[f64], p: &ShiftParams, cfg: &BoundaryControlConfig, space: &SpatialGrid) -> Vec<f64> {
    let p = if cfg.scheme == ShiftScheme::None {
        ShiftParams::default()
    } else {
        *p
    };
    Damping::new(*cfg, space).apply(y, &p)
}

pub fn invert_shift_damp_y(
    conv_out: &[f64],
    p: &ShiftParams,
    kset: &MultiplierSet,
    cfg: &BoundaryControlConfig,
    space: &SpatialGrid,
) -> Vec<f64> {
    Damping::new(*cfg, space).invert_y(conv_out, p, kset, space)
}

pub fn invert_shift_damp_z(
    conv_out: &[f64],
    p: &ShiftParams,
    kset: &MultiplierSet,
    cfg: &BoundaryControlConfig,
    space: &SpatialGrid,
) -> Vec<f64> {
    Damping::new(*cfg, space).invert_z(conv_out, p, kset)
}
