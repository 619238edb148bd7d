use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::grid::Grid1D;
use super::operator::Operator;
use crate::error::Result;

/// Spectral kinetic energy `p²/2` on a periodic grid (ħ = m = 1).
///
/// `T_ij = (1/N) Σ_k (k²/2) cos(k (x_i − x_j))`, which is real symmetric by
/// construction.
pub fn kinetic_matrix(grid: &Grid1D) -> DMatrix<C64> {
    let n = grid.n_points();
    let dx = grid.dx();
    let k = grid.wavenumbers();
    // T depends only on i - j
    let row: Vec<f64> = (0..n)
        .map(|d| k.iter().map(|&kk| 0.5 * kk * kk * (kk * d as f64 * dx).cos()).sum::<f64>() / n as f64)
        .collect();
    DMatrix::from_fn(n, n, |i, j| C64::from(row[i.abs_diff(j)]))
}

/// Potential energy sampled on grid points at time `t`.
pub type PotentialFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Kinetic plus position-diagonal potential, possibly time dependent.
///
/// Keeps the potential as a function so that split-operator kernels can use
/// it directly; `operator_at` gives the dense form.
#[derive(Clone)]
pub struct GridHamiltonian {
    grid: Grid1D,
    potential: PotentialFn,
    time_dependent: bool,
}

impl std::fmt::Debug for GridHamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridHamiltonian")
            .field("grid", &self.grid)
            .field("time_dependent", &self.time_dependent)
            .finish()
    }
}

impl GridHamiltonian {
    pub fn new(grid: Grid1D, potential: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            grid,
            potential: Arc::new(move |x, _t| potential(x)),
            time_dependent: false,
        }
    }

    pub fn time_dependent(grid: Grid1D, potential: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { grid, potential: Arc::new(potential), time_dependent: true }
    }

    /// `½ ω² (x − center)²`.
    pub fn harmonic(grid: Grid1D, omega: f64, center: f64) -> Self {
        Self::new(grid, move |x| 0.5 * omega * omega * (x - center) * (x - center))
    }

    /// Harmonic trap whose center follows `center(t)`.
    pub fn moving_harmonic(grid: Grid1D, omega: f64, center: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::time_dependent(grid, move |x, t| {
            let c = center(t);
            0.5 * omega * omega * (x - c) * (x - c)
        })
    }

    /// Free particle on the periodic grid.
    pub fn free(grid: Grid1D) -> Self {
        Self::new(grid, |_| 0.0)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn potential_at(&self, t: f64) -> Vec<f64> {
        self.grid.points().iter().map(|&x| (self.potential)(x, t)).collect()
    }

    pub fn operator_at(&self, t: f64) -> Result<Operator> {
        let mut m = kinetic_matrix(&self.grid);
        for (i, v) in self.potential_at(t).into_iter().enumerate() {
            m[(i, i)] += C64::from(v);
        }
        Operator::hermitian(m)
    }
}
