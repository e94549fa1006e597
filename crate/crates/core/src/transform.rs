//! Centered discrete Fourier transform on the solver lattices.
//!
//! Forward: `D[f](v_k) = Σ_n f_n e^{-i v_k x_n}` (unnormalized).
//! Inverse: `D⁻¹[F](x_n) = (1/N) Σ_k F_k e^{i v_k x_n}`.
//!
//! With `v_k = (k - N/2)Δv` and `x_n = x_0 + nΔx` the kernel factors as
//! `e^{-i v_k x_n} = e^{-i v_k x_0} (-1)^n e^{-2πi kn/N}`, so both directions
//! reduce to a standard power-of-two FFT with alternating-sign pre/post
//! multiplication and one global phase vector.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Result};
use crate::grid::{FrequencyGrid, SpatialGrid};

/// Precomputed transform plan for one lattice pair. Shareable across threads;
/// every call allocates its own scratch.
#[derive(Clone)]
pub struct CenteredDft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `e^{-i v_k x_0}`
    phase: Vec<Complex64>,
}

impl std::fmt::Debug for CenteredDft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CenteredDft").field("n", &self.n).finish()
    }
}

#[inline]
fn flip_odd(buf: &mut [Complex64]) {
    for v in buf.iter_mut().skip(1).step_by(2) {
        *v = -*v;
    }
}

impl CenteredDft {
    pub fn new(space: &SpatialGrid, freq: &FrequencyGrid) -> Self {
        let n = space.len();
        debug_assert_eq!(n, freq.len());
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let x0 = space.x0();
        let phase = freq
            .points()
            .iter()
            .map(|&v| Complex64::from_polar(1.0, -v * x0))
            .collect();
        Self {
            n,
            forward,
            inverse,
            phase,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn fft_in_place(&self, plan: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
    }

    /// `(-1)^n`-centered FFT without the `x_0` phase.
    fn centered_forward(&self, buf: &mut [Complex64]) {
        flip_odd(buf);
        self.fft_in_place(&self.forward, buf);
    }

    /// Inverse of [`Self::centered_forward`], including the `1/N`.
    fn centered_inverse(&self, buf: &mut [Complex64]) {
        self.fft_in_place(&self.inverse, buf);
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
        flip_odd(buf);
    }

    pub fn dft(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n, f.len())?;
        let mut buf = f.to_vec();
        self.centered_forward(&mut buf);
        for (v, p) in buf.iter_mut().zip(&self.phase) {
            *v *= p;
        }
        Ok(buf)
    }

    pub fn dft_real(&self, f: &[f64]) -> Result<Vec<Complex64>> {
        check_len(self.n, f.len())?;
        let buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.dft(&buf)
    }

    pub fn idft(&self, spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n, spectrum.len())?;
        let mut buf: Vec<Complex64> = spectrum.iter().zip(&self.phase).map(|(v, p)| v * p.conj()).collect();
        self.centered_inverse(&mut buf);
        Ok(buf)
    }

    /// `D⁻¹[D[f] ⊙ M]`. The `x_0` phases of the two directions cancel, so
    /// they are skipped.
    pub fn apply_multiplier(&self, f: &[Complex64], multiplier: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n, f.len())?;
        check_len(self.n, multiplier.len())?;
        let mut buf = f.to_vec();
        self.centered_forward(&mut buf);
        for (v, m) in buf.iter_mut().zip(multiplier) {
            *v *= m;
        }
        self.centered_inverse(&mut buf);
        Ok(buf)
    }

    /// Convolves one real grid vector against several multipliers, sharing
    /// the forward transform. Outputs stay complex.
    pub fn apply_multipliers(&self, f: &[f64], multipliers: &[&[Complex64]]) -> Result<Vec<Vec<Complex64>>> {
        check_len(self.n, f.len())?;
        let mut spectrum: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.centered_forward(&mut spectrum);
        multipliers
            .iter()
            .map(|m| {
                check_len(self.n, m.len())?;
                let mut buf: Vec<Complex64> = spectrum.iter().zip(m.iter()).map(|(s, m)| s * m).collect();
                self.centered_inverse(&mut buf);
                Ok(buf)
            })
            .collect()
    }
}

/// One-shot forward transform; plans on every call.
pub fn dft_centered(f: &[Complex64], space: &SpatialGrid, freq: &FrequencyGrid) -> Result<Vec<Complex64>> {
    check_len(space.len(), f.len())?;
    CenteredDft::new(space, freq).dft(f)
}

/// One-shot inverse transform; plans on every call.
pub fn idft_centered(spectrum: &[Complex64], space: &SpatialGrid, freq: &FrequencyGrid) -> Result<Vec<Complex64>> {
    check_len(space.len(), spectrum.len())?;
    CenteredDft::new(space, freq).idft(spectrum)
}

/// One-shot `idft_centered(dft_centered(f) ⊙ M)`.
pub fn apply_multiplier(
    f: &[Complex64],
    multiplier: &[Complex64],
    space: &SpatialGrid,
    freq: &FrequencyGrid,
) -> Result<Vec<Complex64>> {
    check_len(space.len(), f.len())?;
    CenteredDft::new(space, freq).apply_multiplier(f, multiplier)
}

pub fn real_parts(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|c| c.re).collect()
}
