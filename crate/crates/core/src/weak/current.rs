//! Local probability currents and phase reconstruction from them.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Grid1D, Spectral, StateVector};

/// Density threshold, relative to the maximum, below which the phase is undefined.
pub const PHASE_DENSITY_FLOOR: f64 = 1e-6;

fn wave_function(psi: &StateVector, grid: &Grid1D) -> Result<Vec<C64>> {
    if psi.dims().len() != 1 || psi.dim() != grid.n_points() {
        return Err(Error::Structural(format!(
            "state with dims {:?} does not live on a {}-point grid",
            psi.dims(),
            grid.n_points()
        )));
    }
    let scale = 1.0 / (psi.norm() * grid.dx().sqrt());
    Ok(psi.amplitudes().iter().map(|z| z * scale).collect())
}

/// `j(x) = Im(ψ* ∂ψ/∂x)` at every grid point, with ψ(x) = a_i / √dx.
pub fn current_density(psi: &StateVector, grid: &Grid1D) -> Result<Vec<f64>> {
    let f = wave_function(psi, grid)?;
    let df = Spectral::new(*grid).derivative(&f);
    Ok(f.iter().zip(&df).map(|(a, d)| (a.conj() * d).im).collect())
}

/// Current at grid index `index`.
pub fn local_current(psi: &StateVector, grid: &Grid1D, index: usize) -> Result<f64> {
    if index >= grid.n_points() {
        return Err(Error::Structural(format!("grid index {index} out of range")));
    }
    Ok(current_density(psi, grid)?[index])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReconstruction {
    /// Phase at each grid point; `None` where the density is below threshold.
    pub phase: Vec<Option<f64>>,
    /// Inclusive index ranges of the regions over which the phase was
    /// integrated; each carries its own arbitrary constant.
    pub segments: Vec<(usize, usize)>,
}

impl PhaseReconstruction {
    /// Largest segment, where the reconstruction is most meaningful.
    pub fn main_segment(&self) -> Option<(usize, usize)> {
        self.segments.iter().copied().max_by_key(|(a, b)| b - a)
    }
}

/// Integrates `j / |ψ|²` (trapezoid rule) over every region where
/// `|ψ|² > PHASE_DENSITY_FLOOR · max|ψ|²`, starting each region at zero.
pub fn reconstruct_phase(psi: &StateVector, grid: &Grid1D) -> Result<PhaseReconstruction> {
    let f = wave_function(psi, grid)?;
    let j = current_density(psi, grid)?;
    let rho: Vec<f64> = f.iter().map(|z| z.norm_sqr()).collect();
    let floor = PHASE_DENSITY_FLOOR * rho.iter().copied().fold(0.0, f64::max);
    let grad: Vec<Option<f64>> = j.iter().zip(&rho).map(|(&j, &r)| (r > floor).then(|| j / r)).collect();

    let dx = grid.dx();
    let mut phase = vec![None; grad.len()];
    let mut segments = Vec::new();
    let mut start = None;
    for i in 0..=grad.len() {
        match (grad.get(i).copied().flatten(), start) {
            (Some(_), None) => {
                start = Some(i);
                phase[i] = Some(0.0);
            }
            (Some(g), Some(_)) => {
                let prev = grad[i - 1].expect("inside a segment");
                phase[i] = Some(phase[i - 1].expect("inside a segment") + 0.5 * dx * (prev + g));
            }
            (None, Some(s)) => {
                segments.push((s, i - 1));
                start = None;
            }
            (None, None) => {}
        }
    }
    Ok(PhaseReconstruction { phase, segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{grid_state, GridHamiltonian, ground_state};

    #[test]
    fn real_state_has_no_current() {
        let grid = Grid1D::new(64, -8.0, 8.0).unwrap();
        let psi = grid_state(&grid, |x| C64::from((-x * x / 2.0).exp() * (1.0 + 0.3 * x))).unwrap();
        assert!(current_density(&psi, &grid).unwrap().iter().all(|j| j.abs() < 1e-10));
    }

    #[test]
    fn plane_wave_current_is_uniform() {
        let grid = Grid1D::new(64, 0.0, 6.3).unwrap();
        let l = grid.period();
        let k = grid.wavenumbers()[3];
        let psi = grid_state(&grid, |x| C64::from_polar(1.0, k * x)).unwrap();
        for i in 0..64 {
            assert!((local_current(&psi, &grid, i).unwrap() - k / l).abs() < 1e-6);
        }
    }

    #[test]
    fn eigenstate_current_is_divergence_free() {
        let grid = Grid1D::new(64, -10.0, 10.0).unwrap();
        let h = GridHamiltonian::harmonic(grid, 1.0, 0.0).operator_at(0.0).unwrap();
        let (_, psi) = ground_state(&h).unwrap();
        let psi = psi.with_phase(0.7);
        let j: Vec<C64> = current_density(&psi, &grid).unwrap().into_iter().map(C64::from).collect();
        let dj = Spectral::new(grid).derivative(&j);
        assert!(dj.iter().all(|z| z.norm() < 1e-8));
    }

    #[test]
    fn imprinted_phase_is_recovered() {
        let grid = Grid1D::new(128, -10.0, 10.0).unwrap();
        let theta = |x: f64| 0.8 * (0.6 * x).sin() + 0.1 * x * x;
        let psi = grid_state(&grid, |x| C64::from_polar((-x * x / 4.0).exp(), theta(x))).unwrap();
        let rec = reconstruct_phase(&psi, &grid).unwrap();
        let (a, b) = rec.main_segment().unwrap();
        let diffs: Vec<f64> = (a..=b).map(|i| rec.phase[i].unwrap() - theta(grid.x(i))).collect();
        let offset = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let err = diffs.iter().map(|d| (d - offset).abs()).fold(0.0, f64::max);
        assert!(err < 1e-2, "{err}");
        assert!(rec.phase[0].is_none());
    }
}
