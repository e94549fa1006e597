//! Spatial, frequency and time lattices.
//!
//! The spatial lattice is half-open: `N` samples `x_0 .. x_{N-1}` spaced
//! `Δx = L/N`, so `x_{N-1} = x_0 + L - Δx` is the right-most sample used by
//! the shift conditions. The frequency lattice `v_k = (k - N/2) Δv` with
//! `Δv = 2π/L` is centered on zero and satisfies `Δx Δv = 2π/N`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    x0: f64,
    width: f64,
    dx: f64,
    points: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(x_center: f64, width: f64, n: usize) -> Result<Self> {
        if !x_center.is_finite() {
            return Err(invalid("x_center", "must be finite"));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(invalid("L", format!("truncation width must be > 0, got {width}")));
        }
        if n < MIN_POINTS || !n.is_power_of_two() {
            return Err(invalid(
                "N",
                format!("point count must be a power of two >= {MIN_POINTS}, got {n}"),
            ));
        }
        let x0 = x_center - 0.5 * width;
        let dx = width / n as f64;
        let points = (0..n).map(|i| x0 + i as f64 * dx).collect();
        Ok(Self { x0, width, dx, points })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Truncation width `L`.
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Last sample `x_{N-1}`, the right boundary used by the shift solve.
    pub fn right(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Index of the sample nearest to `x`, clamped to the lattice.
    pub fn nearest_index(&self, x: f64) -> usize {
        let raw = ((x - self.x0) / self.dx).round();
        raw.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// Linear interpolation of grid values at `x`; exact node values when `x`
    /// lies on the lattice (within `1e-9 Δx`).
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let pos = (x - self.x0) / self.dx;
        let nearest = pos.round();
        if (pos - nearest).abs() <= 1e-9 && nearest >= 0.0 && nearest < self.len() as f64 {
            return values[nearest as usize];
        }
        let lo = pos.floor().clamp(0.0, (self.len() - 2) as f64) as usize;
        let w = (pos - lo as f64).clamp(0.0, 1.0);
        values[lo] * (1.0 - w) + values[lo + 1] * w
    }

    /// Whether `x` coincides with a lattice node.
    pub fn on_grid(&self, x: f64) -> bool {
        let pos = (x - self.x0) / self.dx;
        (pos - pos.round()).abs() <= 1e-9 && pos.round() >= 0.0 && pos.round() < self.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    dv: f64,
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn from_spatial(space: &SpatialGrid) -> Self {
        let n = space.len();
        let dv = 2.0 * PI / space.width();
        let half = (n / 2) as i64;
        let points = (0..n as i64).map(|k| (k - half) as f64 * dv).collect();
        Self { dv, points }
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Index of the zero-frequency bin, `N/2`.
    pub fn zero_index(&self) -> usize {
        self.points.len() / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(invalid("T", format!("horizon must be > 0, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(invalid("n_steps", "at least one time step is required"));
        }
        Ok(Self {
            horizon,
            n_steps,
            dt: horizon / n_steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

/// The three lattices a solve runs on. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub space: SpatialGrid,
    pub freq: FrequencyGrid,
    pub time: TimeGrid,
}

/// Builds the spatial lattice on `x_center + [-L/2, L/2)`, its frequency
/// lattice, and the uniform time grid.
pub fn make_grids(x_center: f64, width: f64, n_points: usize, horizon: f64, n_steps: usize) -> Result<Grids> {
    let space = SpatialGrid::new(x_center, width, n_points)?;
    let freq = FrequencyGrid::from_spatial(&space);
    let time = TimeGrid::new(horizon, n_steps)?;
    Ok(Grids { space, freq, time })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub satisfied: bool,
    /// Smallest admissible point count, `ceil((L/σ) sqrt(2/Δt))`.
    pub threshold: u64,
}

/// Evaluates `N >= (L/σ) sqrt(2/Δt)`. Only reports; never rejects a run.
pub fn stability_check(space: &SpatialGrid, time: &TimeGrid, sigma: f64) -> Result<StabilityReport> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid("sigma", format!("volatility must be > 0, got {sigma}")));
    }
    let raw = space.width() / sigma * (2.0 / time.dt()).sqrt();
    // snap values within rounding of an integer so equality counts as satisfied
    let snapped = raw.round();
    let threshold = if (raw - snapped).abs() <= 1e-9 * snapped.max(1.0) {
        snapped
    } else {
        raw.ceil()
    };
    let threshold = threshold as u64;
    Ok(StabilityReport {
        satisfied: space.len() as u64 >= threshold,
        threshold,
    })
}
