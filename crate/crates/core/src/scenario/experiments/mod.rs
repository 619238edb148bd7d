//! The shipped experiments. Each takes a validated configuration and fills
//! an [`Output`] with tables, summary values and checks.

mod bell;
mod phase;
mod reconstruction;
mod survival;
mod tracking;
mod two_state;
mod velocity;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bundle::{Check, Table, Value};
use super::config::{Experiment, PointerSection, ScenarioConfig, SystemSection, TargetRange};
use crate::error::{Error, Result};
use crate::hilbert::{ground_state, Grid1D, GridHamiltonian, Operator, StateVector};
use crate::protection::SystemDynamics;
use crate::weak::RunOptions;

#[derive(Debug, Default)]
pub(crate) struct Output {
    pub tables: BTreeMap<String, Table>,
    pub summary: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
}

impl Output {
    fn table(&mut self, name: &str, table: Table) {
        self.tables.insert(name.to_string(), table);
    }

    fn put(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    fn check(&mut self, check: Check) {
        self.checks.push(check);
    }
}

pub(crate) fn run(config: &ScenarioConfig) -> Result<Output> {
    let e = config.experiment();
    let out = match e {
        Experiment::E1 | Experiment::E3 => reconstruction::run(config),
        Experiment::E2 => survival::run(config),
        Experiment::E4 => phase::run(config),
        Experiment::E5 => velocity::run(config),
        Experiment::E6 => bell::run(config),
        Experiment::E7 => two_state::run(config),
        Experiment::E8 => tracking::run(config),
    };
    out.map_err(|err| if err.is_validation() { err } else { err.context(format!("experiment {e} ({})", config.scenario.name)) })
}

/// Generator for stream `stream` of the scenario seed.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids of auxiliary runs sit above every trial index.
const AUX_STREAM: u64 = 1 << 40;

/// A system living on a 1D grid.
pub(crate) struct GridSystem {
    pub grid: Grid1D,
    pub dynamics: SystemDynamics,
    pub hamiltonian: Operator,
    pub ground: StateVector,
    /// Closed-form ground-state density, where one exists.
    pub analytic: Option<Box<dyn Fn(f64) -> f64>>,
}

/// Hard-wall Hamiltonian `-½ d²/dx²` with three-point differences.
fn box_hamiltonian(grid: &Grid1D) -> Result<Operator> {
    let n = grid.n_points();
    let k = 0.5 / (grid.dx() * grid.dx());
    let mut h = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = C64::from(2.0 * k);
        if i + 1 < n {
            h[(i, i + 1)] = C64::from(-k);
            h[(i + 1, i)] = C64::from(-k);
        }
    }
    Operator::hermitian(h)
}

pub(crate) fn grid_system(system: &SystemSection) -> Result<GridSystem> {
    match *system {
        SystemSection::Oscillator { points, x_min, x_max, omega } => {
            let grid = Grid1D::new(points, x_min, x_max)?;
            let gh = GridHamiltonian::harmonic(grid, omega, 0.0);
            let hamiltonian = gh.operator_at(0.0)?;
            let (_, ground) = ground_state(&hamiltonian)?;
            let norm = (omega / std::f64::consts::PI).sqrt();
            Ok(GridSystem {
                grid,
                dynamics: SystemDynamics::Grid(gh),
                hamiltonian,
                ground,
                analytic: Some(Box::new(move |x| norm * (-omega * x * x).exp())),
            })
        }
        SystemSection::Box { points, x_min, x_max } => {
            let grid = Grid1D::new(points, x_min, x_max)?;
            let hamiltonian = box_hamiltonian(&grid)?;
            let (_, ground) = ground_state(&hamiltonian)?;
            Ok(GridSystem { grid, dynamics: SystemDynamics::Dense(hamiltonian.clone()), hamiltonian, ground, analytic: None })
        }
        _ => Err(Error::validation("system.kind", "expected a grid system")),
    }
}

/// Dense Hamiltonian of a non-grid system: the custom matrix, or for
/// qubits the number of excitations weighted by position, `Σ_k 2^k n_k`,
/// which is nondegenerate.
pub(crate) fn matrix_system(system: &SystemSection) -> Result<Operator> {
    match system {
        SystemSection::Custom { real, imag } => {
            let d = real.len();
            let m = DMatrix::from_fn(d, d, |i, j| C64::new(real[i][j], imag.as_ref().map_or(0.0, |im| im[i][j])));
            Operator::hermitian(m).map_err(|e| Error::validation("system.real", e.to_string()))
        }
        SystemSection::Qubits { n } => {
            let diag: Vec<f64> = (0..1usize << n).map(|k| k as f64).collect();
            Ok(Operator::from_real_diagonal(&diag))
        }
        SystemSection::Oscillator { .. } | SystemSection::Box { .. } => Ok(grid_system(system)?.hamiltonian),
    }
}

/// Distinct grid indices nearest to evenly spaced positions.
pub(crate) fn target_indices(grid: &Grid1D, range: TargetRange) -> Result<Vec<usize>> {
    let idx: Vec<usize> = (0..range.count)
        .map(|k| {
            let x = if range.count == 1 {
                range.from
            } else {
                range.from + (range.to - range.from) * k as f64 / (range.count - 1) as f64
            };
            grid.nearest_index(x)
        })
        .collect();
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::validation(
            "measurement.targets.count",
            format!("{} targets between {} and {} do not fall on distinct grid points", range.count, range.from, range.to),
        ));
    }
    Ok(idx)
}

pub(crate) fn run_options(pointer: &PointerSection, dt: f64, trace_samples: usize, parallel: bool, floor: f64) -> Result<RunOptions> {
    let grid = Grid1D::new(pointer.points, pointer.x_min, pointer.x_max)?;
    let mut o = RunOptions::new(grid, pointer.delta);
    o.dt = dt;
    o.trace_samples = trace_samples;
    o.parallel = parallel;
    o.fidelity_floor = floor;
    Ok(o)
}

/// `‖a - b‖ / ‖b‖`.
pub(crate) fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Pearson correlation; NaN for constant input.
pub(crate) fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let sa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>().sqrt();
    let sb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>().sqrt();
    cov / (sa * sb)
}

/// Largest deviation from the mean, relative to the mean.
pub(crate) fn relative_spread(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).abs()).fold(0.0, f64::max) / m.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics_helpers() {
        assert!((correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - 0.9986).abs() < 1e-3);
        assert!((relative_l2(&[1.0, 1.0], &[1.0, 2.0]) - (1.0f64 / 5.0).sqrt()).abs() < 1e-15);
        assert!((relative_spread(&[0.9, 1.0, 1.1]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn box_ground_state_is_a_half_sine() {
        let sys = grid_system(&SystemSection::Box { points: 64, x_min: 0.0, x_max: 1.0 }).unwrap();
        let psi = sys.ground.probabilities();
        let mid = psi.len() / 2;
        assert!(psi[mid] > psi[1] && psi[mid] > psi[62]);
        assert!(sys.analytic.is_none());
    }

    #[test]
    fn coinciding_targets_rejected() {
        let grid = Grid1D::new(16, -1.0, 1.0).unwrap();
        assert!(target_indices(&grid, TargetRange { from: 0.0, to: 0.1, count: 5 }).is_err());
        assert_eq!(target_indices(&grid, TargetRange { from: 0.0, to: 0.0, count: 1 }).unwrap(), vec![8]);
    }

    #[test]
    fn streams_differ() {
        use rand::Rng;
        let a: u64 = stream_rng(1, 0).random();
        let b: u64 = stream_rng(1, 1).random();
        let c: u64 = stream_rng(1, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
