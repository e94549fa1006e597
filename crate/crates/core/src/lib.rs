//! Convolution-FFT solver for one-dimensional forward-backward SDEs.
//!
//! The backward component is stepped on a truncated log-price lattice. Each
//! step evaluates the conditional expectations `E[Y_{i+1} | X_i]` and
//! `E[Y_{i+1} ΔW_i | X_i] / Δt` as convolutions with the short-time Gaussian
//! transition kernel, computed as pointwise products in a centered discrete
//! Fourier basis. Before transforming, the grid function is damped by
//! `e^{αx}` and shifted by a fitted `h(x) = A e^x + B` so that the transformed
//! target is value- and slope-periodic on the lattice; the shift is added
//! back in closed form afterwards.
//!
//! Module map:
//!
//! * [`grid`]: spatial, frequency and time lattices, stability check
//! * [`transform`]: centered DFT/IDFT and multiplier convolution
//! * [`kernels`]: characteristic function, Fourier multipliers, recovery terms
//! * [`boundary_control`]: damp-and-shift transforms and their inversion
//! * [`solver`]: backward time stepping
//! * [`analytics`]: Black-Scholes oracle, deltas, error profiles, bounds, rates

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod boundary_control;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
pub use num_complex::Complex64;
