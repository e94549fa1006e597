//! Characteristic function of the one-step Gaussian increment and the
//! damped Fourier multipliers built from it.
//!
//! Over one step the log-price increment is `ηΔt + σΔW`, with characteristic
//! function `ψ(v) = exp(Δt (η i v − σ² v² / 2))`. Damping by `e^{αx}` moves
//! the evaluation to `v + αi`:
//!
//! * `Ψ_y(v) = ψ(v + αi)` gives `E[Y_{i+1} | X_i]`,
//! * `Ψ_z(v) = σ (iv − α) ψ(v + αi)` gives `E[Y_{i+1} ΔW_i | X_i] / Δt`.
//!
//! The shift `h(x) = A e^x + B` is recovered through `Ÿ(x) = e^x ψ(−i)` and
//! `Z̈(x) = −(ηΔt e^x ψ(−i) + i e^x ψ'(−i)) / (σΔt)`, which simplifies to
//! `σ e^x ψ(−i)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{FrequencyGrid, SpatialGrid};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Drift, volatility and step size frozen over one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCoefficients {
    pub eta: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl StepCoefficients {
    pub fn new(eta: f64, sigma: f64, dt: f64) -> Result<Self> {
        if !eta.is_finite() {
            return Err(invalid("eta", "drift must be finite"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma", format!("volatility must be > 0, got {sigma}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("dt", format!("step size must be > 0, got {dt}")));
        }
        Ok(Self { eta, sigma, dt })
    }
}

/// `ψ(v) = exp(Δt (η i v − σ² v² / 2))` for complex `v`.
pub fn char_fn(c: &StepCoefficients, v: Complex64) -> Complex64 {
    (c.dt * (c.eta * I * v - 0.5 * c.sigma * c.sigma * v * v)).exp()
}

/// `ψ'(v) = Δt (η i − σ² v) ψ(v)`.
pub fn char_fn_deriv(c: &StepCoefficients, v: Complex64) -> Complex64 {
    c.dt * (c.eta * I - c.sigma * c.sigma * v) * char_fn(c, v)
}

/// Fourier multipliers and shift-recovery terms for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSet {
    pub coeffs: StepCoefficients,
    pub alpha: f64,
    pub psi_y: Vec<Complex64>,
    pub psi_z: Vec<Complex64>,
    /// `Ÿ(x_n) = e^{x_n} ψ(−i)`
    pub y_recover: Vec<f64>,
    /// `Z̈(x_n)`, real after cancellation of the complex intermediates.
    pub z_recover: Vec<f64>,
}

impl MultiplierSet {
    pub fn len(&self) -> usize {
        self.psi_y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi_y.is_empty()
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha >= 0.0 {
        return Err(invalid("alpha", format!("damping exponent must be < 0, got {alpha}")));
    }
    if alpha == -1.0 {
        return Err(invalid(
            "alpha",
            "alpha = -1 makes the exponential shift system singular",
        ));
    }
    Ok(())
}

pub fn build_multipliers(
    c: &StepCoefficients,
    alpha: f64,
    freq: &FrequencyGrid,
    space: &SpatialGrid,
) -> Result<MultiplierSet> {
    check_alpha(alpha)?;
    let shift = Complex64::new(0.0, alpha);
    let (psi_y, psi_z): (Vec<_>, Vec<_>) = freq
        .points()
        .iter()
        .map(|&v| {
            let psi = char_fn(c, v + shift);
            (psi, c.sigma * Complex64::new(-alpha, v) * psi)
        })
        .unzip();

    let minus_i = -I;
    let psi_mi = char_fn(c, minus_i);
    let dpsi_mi = char_fn_deriv(c, minus_i);
    let mut y_recover = Vec::with_capacity(space.len());
    let mut z_recover = Vec::with_capacity(space.len());
    for &x in space.points() {
        let ex = x.exp();
        y_recover.push((ex * psi_mi).re);
        let z = -(c.eta * c.dt * ex * psi_mi + I * ex * dpsi_mi) / (c.sigma * c.dt);
        if z.im.abs() > 1e-12 * z.re.abs().max(1.0) {
            return Err(Error::InvalidParameter {
                name: "z_recover",
                reason: format!("imaginary residue {:e} at x = {x}", z.im),
            });
        }
        z_recover.push(z.re);
    }
    Ok(MultiplierSet {
        coeffs: *c,
        alpha,
        psi_y,
        psi_z,
        y_recover,
        z_recover,
    })
}
