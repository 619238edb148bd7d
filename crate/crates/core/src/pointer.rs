//! Gaussian von Neumann pointer on its own grid.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Grid1D, Spectral, StateVector};

/// Smallest pointer width, in grid spacings, that still counts as resolved.
pub const MIN_DELTA_IN_DX: f64 = 3.0;
/// Largest probability tolerated on either edge point of a fresh pointer.
pub const EDGE_TAIL_LIMIT: f64 = 1e-12;
/// Probability allowed in the outer bands of the pointer grid before a
/// periodic wrap-around is declared.
pub const WRAP_TAIL_LIMIT: f64 = 1e-9;
/// Each outer band covers this fraction of the grid.
pub const WRAP_BAND_FRACTION: usize = 16;

/// Pointer wave function together with its nominal width Δ.
#[derive(Clone, Debug)]
pub struct PointerState {
    grid: Grid1D,
    amplitudes: Vec<C64>,
    delta: f64,
    label: String,
}

/// Position statistics of a pointer at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointerReadout {
    pub mean: f64,
    pub variance: f64,
    /// Probability per grid point; sums to one.
    pub distribution: Vec<f64>,
    pub time: f64,
}

/// Gaussian pointer centred at zero whose position density has standard deviation `delta`.
pub fn make_pointer(grid: Grid1D, delta: f64) -> Result<PointerState> {
    if !(delta > MIN_DELTA_IN_DX * grid.dx()) {
        return Err(Error::Configuration(format!(
            "pointer width {delta} is not resolved by grid spacing {} (need > {MIN_DELTA_IN_DX} dx)",
            grid.dx()
        )));
    }
    let amps: Vec<C64> = grid
        .points()
        .iter()
        .map(|&x| C64::from((-x * x / (4.0 * delta * delta)).exp()))
        .collect();
    let psi = StateVector::new(amps)?;
    let probs = psi.probabilities();
    let edge = probs[0].max(probs[probs.len() - 1]);
    if edge >= EDGE_TAIL_LIMIT {
        return Err(Error::Configuration(format!(
            "pointer tails reach the grid edges (edge probability {edge:e}); widen the pointer grid"
        )));
    }
    let pointer = PointerState {
        grid,
        amplitudes: psi.into_amplitudes(),
        delta,
        label: String::from("pointer"),
    };
    let r = readout(&pointer, 0.0);
    if r.mean.abs() > 1e-6 || (r.variance.sqrt() - delta).abs() > 1e-6 * delta.max(1.0) {
        return Err(Error::NumericalIntegrity(format!(
            "pointer moments off: mean {:e}, stddev {} vs {delta}",
            r.mean,
            r.variance.sqrt()
        )));
    }
    Ok(pointer)
}

impl PointerState {
    /// Wraps arbitrary amplitudes (normalized on the way in).
    pub fn from_amplitudes(grid: Grid1D, amplitudes: Vec<C64>, delta: f64) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::Structural(format!(
                "pointer grid has {} points, got {} amplitudes",
                grid.n_points(),
                amplitudes.len()
            )));
        }
        let psi = StateVector::new(amplitudes)?;
        Ok(Self { grid, amplitudes: psi.into_amplitudes(), delta, label: String::from("pointer") })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn to_state(&self) -> StateVector {
        StateVector::from_amplitudes(vec![self.amplitudes.len()], self.amplitudes.clone())
            .expect("pointer amplitudes match grid")
    }

    /// Rigid spectral translation by `shift`.
    pub fn displaced(&self, shift: f64) -> Result<Self> {
        let spectral = Spectral::new(self.grid);
        let mut amps = self.amplitudes.clone();
        spectral.translate(&mut amps, shift);
        check_wrap(&amps.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>())?;
        Ok(Self { amplitudes: amps, ..self.clone() })
    }

    /// Multiplies the wave function by `exp(i k x)`.
    pub fn kicked(&self, k: f64) -> Self {
        let amplitudes = self
            .grid
            .points()
            .iter()
            .zip(&self.amplitudes)
            .map(|(&x, &z)| z * C64::from_polar(1.0, k * x))
            .collect();
        Self { amplitudes, ..self.clone() }
    }

    pub fn fidelity(&self, other: &PointerState) -> Result<f64> {
        self.to_state().fidelity(&other.to_state())
    }
}

/// Dense spectral momentum operator `p = -i d/dx` on a periodic grid.
///
/// Same wavenumber convention as [`Spectral::translate`], so
/// `exp(-i s p)` is the translation by `s`.
pub fn momentum_matrix(grid: &Grid1D) -> nalgebra::DMatrix<C64> {
    let n = grid.n_points();
    let dx = grid.dx();
    let k = grid.wavenumbers();
    // entries depend only on (i - j) mod n
    let row: Vec<C64> = (0..n)
        .map(|d| k.iter().map(|&kk| kk * C64::from_polar(1.0, kk * d as f64 * dx)).sum::<C64>() / n as f64)
        .collect();
    nalgebra::DMatrix::from_fn(n, n, |i, j| row[(i + n - j) % n])
}

/// Position statistics of the pointer.
pub fn readout(p: &PointerState, time: f64) -> PointerReadout {
    let dist: Vec<f64> = p.amplitudes.iter().map(|z| z.norm_sqr()).collect();
    PointerReadout::from_distribution(&p.grid, dist, time)
}

/// Mean momentum `<p>` computed spectrally.
pub fn momentum_readout(p: &PointerState) -> f64 {
    let spectral = Spectral::new(p.grid);
    momentum_mean(&spectral, &spectral.momentum_distribution(&p.amplitudes))
}

pub(crate) fn momentum_mean(spectral: &Spectral, weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let n = weights.len();
    spectral
        .wavenumbers()
        .iter()
        .zip(weights)
        .enumerate()
        // the Nyquist bin has no definite sign
        .filter(|(j, _)| !(n.is_multiple_of(2) && *j == n / 2))
        .map(|(_, (k, w))| k * w)
        .sum::<f64>()
        / total
}

impl PointerReadout {
    /// Statistics of an (unnormalized) probability vector on `grid`.
    pub fn from_distribution(grid: &Grid1D, mut distribution: Vec<f64>, time: f64) -> Self {
        let total: f64 = distribution.iter().sum();
        distribution.iter_mut().for_each(|p| *p /= total);
        let xs = grid.points();
        let mean: f64 = xs.iter().zip(&distribution).map(|(x, p)| x * p).sum();
        let variance = xs
            .iter()
            .zip(&distribution)
            .map(|(x, p)| (x - mean) * (x - mean) * p)
            .sum::<f64>()
            .max(0.0);
        Self { mean, variance, distribution, time }
    }
}

/// Fails if more than `WRAP_TAIL_LIMIT` of the probability sits in the outer bands.
pub fn check_wrap(distribution: &[f64]) -> Result<()> {
    let mass = edge_mass(distribution);
    if mass > WRAP_TAIL_LIMIT {
        return Err(Error::NumericalIntegrity(format!(
            "pointer probability {mass:e} reached the grid edges (periodic wrap-around)"
        )));
    }
    Ok(())
}

pub fn edge_mass(distribution: &[f64]) -> f64 {
    let n = distribution.len();
    let band = (n / WRAP_BAND_FRACTION).max(1);
    let total: f64 = distribution.iter().sum();
    let edges: f64 = distribution[..band].iter().chain(&distribution[n - band..]).sum();
    edges / total
}
