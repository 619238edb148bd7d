//! Finite-dimensional Hilbert spaces: states, operators, composites and the
//! dense reference evolvers.

pub mod evolve;
pub mod grid;
pub mod hamiltonian;
pub mod operator;
pub mod state;

use num_complex::Complex64 as C64;

pub use evolve::{evolve_dense, evolve_stepped};
pub use grid::{Grid1D, Spectral};
pub use hamiltonian::{kinetic_matrix, GridHamiltonian};
pub use operator::{expectation, partial_trace, reduced_from_pure, DensityMatrix, Eigenspace, Operator, Spectrum};
pub use state::{tensor, StateVector};

use crate::error::Result;

/// Largest composite dimension handled by the dense machinery.
pub const MAX_COMPOSITE_DIM: usize = 8192;

/// Samples a wave function on the grid and normalizes the amplitude vector.
pub fn grid_state(grid: &Grid1D, f: impl Fn(f64) -> C64) -> Result<StateVector> {
    StateVector::new(grid.points().into_iter().map(f).collect())
}

/// Position-density observable at grid index `index`: the rank-one grid
/// projector divided by `dx`, so its expectation approximates `|ψ(x)|²`.
pub fn position_density(grid: &Grid1D, index: usize) -> Result<Operator> {
    Operator::basis_projector(grid.n_points(), index, 1.0 / grid.dx())
}

/// `|a_i|² / dx` for a normalized single-factor grid state.
pub fn density_on_grid(psi: &StateVector, grid: &Grid1D) -> Vec<f64> {
    let dx = grid.dx();
    psi.probabilities().into_iter().map(|p| p / dx).collect()
}

/// Ground state (lowest eigenvector) of a Hermitian operator, with a real,
/// positive largest component.
pub fn ground_state(h: &Operator) -> Result<(f64, StateVector)> {
    let spec = h.spectrum()?;
    Ok((spec.values[0], fix_phase(spec.eigenvector(0))))
}

/// Rotates the global phase so the largest-magnitude amplitude is real and positive.
pub fn fix_phase(psi: StateVector) -> StateVector {
    let (_, z) = psi
        .amplitudes()
        .iter()
        .enumerate()
        .fold((0usize, C64::new(0.0, 0.0)), |best, (i, &z)| if z.norm() > best.1.norm() { (i, z) } else { best });
    if z.norm() == 0.0 {
        return psi;
    }
    let phase = -z.arg();
    psi.with_phase(phase)
}
