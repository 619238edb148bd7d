use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_GRID_POINTS: usize = 8;

/// Uniform one-dimensional position grid, endpoints included.
///
/// Spectral operators treat the grid as periodic with period `n_points * dx`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n_points: usize,
    x_min: f64,
    x_max: f64,
}

impl Grid1D {
    pub fn new(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n_points < MIN_GRID_POINTS {
            return Err(Error::Configuration(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {n_points}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::Configuration(format!(
                "grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self { n_points, x_min, x_max })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Length of the periodic cell used by spectral operators.
    pub fn period(&self) -> f64 {
        self.n_points as f64 * self.dx()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / self.period();
        (0..n)
            // Nyquist mode (even n) taken as positive
            .map(|j| {
                let m = if j <= n / 2 { j as isize } else { j as isize - n as isize };
                m as f64 * dk
            })
            .collect()
    }

    /// Index of the grid point nearest to `x` (clamped to the grid).
    pub fn nearest_index(&self, x: f64) -> usize {
        let raw = ((x - self.x_min) / self.dx()).round();
        raw.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

/// Cached FFT plans and wavenumbers for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid1D,
    k: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid1D) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n_points();
        Self {
            grid,
            k: grid.wavenumbers(),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, buf: &mut [C64]) {
        self.forward.process(buf);
    }

    /// Inverse transform in place, normalized so that `inverse(forward(v)) == v`.
    pub fn inverse(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    /// Multiply by `phase(k)` in Fourier space.
    pub fn apply_multiplier(&self, buf: &mut [C64], multiplier: impl Fn(f64) -> C64) {
        self.forward(buf);
        for (z, &k) in buf.iter_mut().zip(&self.k) {
            *z *= multiplier(k);
        }
        self.inverse(buf);
    }

    /// Rigid translation by `shift` (periodic).
    pub fn translate(&self, buf: &mut [C64], shift: f64) {
        if shift == 0.0 {
            return;
        }
        self.apply_multiplier(buf, |k| C64::from_polar(1.0, -k * shift));
    }

    /// Spectral first derivative. The Nyquist component is dropped so that
    /// real input gives real output.
    pub fn derivative(&self, values: &[C64]) -> Vec<C64> {
        let n = self.grid.n_points();
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        for (j, (z, &k)) in buf.iter_mut().zip(&self.k).enumerate() {
            if n.is_multiple_of(2) && j == n / 2 {
                *z = C64::new(0.0, 0.0);
            } else {
                *z *= C64::new(0.0, k);
            }
        }
        self.inverse(&mut buf);
        buf
    }

    /// Momentum-space probability weights of grid amplitudes (sum-normalized input).
    pub fn momentum_distribution(&self, amplitudes: &[C64]) -> Vec<f64> {
        let mut buf = amplitudes.to_vec();
        self.forward(&mut buf);
        let n = buf.len() as f64;
        buf.iter().map(|z| z.norm_sqr() / n).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_inverted_grids() {
        assert!(Grid1D::new(7, 0.0, 1.0).is_err());
        assert!(Grid1D::new(16, 1.0, 1.0).is_err());
        assert!(Grid1D::new(16, 2.0, -1.0).is_err());
        let g = Grid1D::new(11, -1.0, 1.0).unwrap();
        assert!((g.dx() - 0.2).abs() < 1e-15);
        assert_eq!(g.nearest_index(0.01), 5);
        assert_eq!(g.nearest_index(-9.0), 0);
    }

    #[test]
    fn translation_of_gaussian_moves_its_mean() {
        let g = Grid1D::new(128, -4.0, 4.0).unwrap();
        let s = Spectral::new(g);
        let mut amps: Vec<C64> = g.points().iter().map(|x| C64::from((-x * x / 0.2).exp())).collect();
        s.translate(&mut amps, 0.731);
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let mean: f64 = g.points().iter().zip(&amps).map(|(x, z)| x * z.norm_sqr()).sum::<f64>() / norm;
        assert!((mean - 0.731).abs() < 1e-10, "{mean}");
    }

    #[test]
    fn derivative_of_sine() {
        let n = 64;
        let g = Grid1D::new(n, 0.0, 2.0 * PI * (n - 1) as f64 / n as f64).unwrap();
        let s = Spectral::new(g);
        let vals: Vec<C64> = g.points().iter().map(|x| C64::from((3.0 * x).sin())).collect();
        let d = s.derivative(&vals);
        for (x, z) in g.points().iter().zip(&d) {
            assert!((z.re - 3.0 * (3.0 * x).cos()).abs() < 1e-10);
            assert!(z.im.abs() < 1e-12);
        }
    }
}
