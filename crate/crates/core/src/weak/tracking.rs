//! Following a slowly changing protected state "in real time".
//!
//! Every target is coupled to its own pointer on its own copy of the
//! system; all copies share the same prepared state and the same
//! time-dependent Hamiltonian. Pointer increments over consecutive windows,
//! divided by the coupling delivered in the window, estimate the window
//! average of each target expectation value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::composite::SystemPointer;
use super::continuous::{evolve_continuous, ContinuousCoupling};
use super::protocol::{continuous_window, RunOptions};
use super::CouplingSpec;
use crate::error::{Error, Result};
use crate::hilbert::{expectation, Operator, StateVector};
use crate::pointer::{check_wrap, make_pointer};
use crate::protection::{gap_in_spectrum, ProtectionScheme, SystemDynamics};

/// Smallest acceptable `gap² / |<n|dH/dt|0>|`.
pub const ADIABATIC_RATIO: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct TrackingOptions {
    pub run: RunOptions,
    /// Number of equal reconstruction windows over the coupling interval.
    pub windows: usize,
    /// Position attached to each target, for centroids.
    pub positions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingWindow {
    pub t_start: f64,
    pub t_end: f64,
    /// Integrated coupling delivered in the window, per target.
    pub strength: Vec<f64>,
    /// Estimated expectation value of each target.
    pub estimate: Vec<f64>,
    /// Same quantity in the instantaneous protected state at mid-window.
    pub reference: Vec<f64>,
    pub centroid: f64,
    pub reference_centroid: f64,
    /// Relative L2 distance between estimate and reference.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingRecord {
    pub windows: Vec<TrackingWindow>,
    /// Smallest `gap² / |<n|dH/dt|0>|` found along the run; `None` for static dynamics.
    pub adiabaticity: Option<f64>,
    pub warnings: Vec<String>,
    pub final_means: Vec<f64>,
}

impl TrackingRecord {
    /// Largest centroid deviation, relative to the reference centroid drift.
    pub fn centroid_tracking_error(&self) -> f64 {
        let (Some(first), Some(last)) = (self.windows.first(), self.windows.last()) else {
            return 0.0;
        };
        let drift = (last.reference_centroid - first.reference_centroid).abs();
        let worst = self
            .windows
            .iter()
            .map(|w| (w.centroid - w.reference_centroid).abs())
            .fold(0.0, f64::max);
        if drift > 0.0 {
            worst / drift
        } else {
            worst
        }
    }
}

/// Tracks the protected state of a Hamiltonian scheme whose dynamics may
/// depend on time. Targets must use continuous schedules.
pub fn track_nonstationary(
    psi0: &StateVector,
    scheme: &ProtectionScheme,
    targets: &[CouplingSpec],
    options: &TrackingOptions,
) -> Result<TrackingRecord> {
    let ProtectionScheme::Hamiltonian { dynamics, protected_index, .. } = scheme else {
        return Err(Error::Contract(format!("tracking needs a Hamiltonian scheme, got {}", scheme.kind())));
    };
    if targets.is_empty() || options.windows == 0 {
        return Err(Error::Configuration("tracking needs at least one target and one window".into()));
    }
    if options.positions.len() != targets.len() {
        return Err(Error::Configuration(format!(
            "{} positions given for {} targets",
            options.positions.len(),
            targets.len()
        )));
    }
    let specs: Vec<&CouplingSpec> = targets.iter().collect();
    let (t0, t1) = continuous_window(&specs)?;
    let width = (t1 - t0) / options.windows as f64;
    let bounds: Vec<f64> = (0..=options.windows).map(|w| t0 + w as f64 * width).collect();

    // pointer means at every window boundary, one independent copy per target
    let means: Vec<Vec<f64>> = targets
        .par_iter()
        .map(|spec| {
            let pointer = make_pointer(options.run.pointer_grid, options.run.delta)?.with_label(spec.label());
            let mut sp = SystemPointer::new(psi0, &[pointer])?;
            let coupling = [ContinuousCoupling { coupling: spec, pointer: 0 }];
            let mut means = vec![sp.readout(0, t0)?.mean];
            for w in 0..options.windows {
                sp = evolve_continuous(&sp, dynamics, &coupling, bounds[w], bounds[w + 1], options.run.dt, usize::MAX, |_, _| Ok(()))?;
                means.push(sp.readout(0, bounds[w + 1])?.mean);
            }
            check_wrap(&sp.pointer_distribution(0)?)?;
            Ok(means)
        })
        .collect::<Result<_>>()?;

    let mut windows = Vec::with_capacity(options.windows);
    for w in 0..options.windows {
        let (a, b) = (bounds[w], bounds[w + 1]);
        let strength: Vec<f64> = targets.iter().map(|s| delivered(s, a, b)).collect();
        let estimate: Vec<f64> = (0..targets.len())
            .map(|j| if strength[j] > 0.0 { (means[j][w + 1] - means[j][w]) / strength[j] } else { 0.0 })
            .collect();
        let ground = instantaneous_state(dynamics, *protected_index, 0.5 * (a + b))?;
        let reference = targets
            .iter()
            .map(|s| expectation(&ground, s.observable()))
            .collect::<Result<Vec<f64>>>()?;
        let norm: f64 = reference.iter().map(|r| r * r).sum::<f64>().sqrt();
        let error = estimate.iter().zip(&reference).map(|(e, r)| (e - r) * (e - r)).sum::<f64>().sqrt() / norm.max(1e-300);
        windows.push(TrackingWindow {
            t_start: a,
            t_end: b,
            centroid: centroid(&options.positions, &estimate),
            reference_centroid: centroid(&options.positions, &reference),
            strength,
            estimate,
            reference,
            error,
        });
    }

    let adiabaticity = adiabaticity(dynamics, *protected_index, t0, t1, 4 * options.windows.max(8))?;
    let mut warnings = Vec::new();
    if let Some(adiabaticity) = adiabaticity.filter(|&a| a < ADIABATIC_RATIO) {
        warnings.push(format!(
            "non-adiabatic drive: gap²/|<n|dH/dt|0>| = {adiabaticity:.3} is below {ADIABATIC_RATIO}"
        ));
    }
    Ok(TrackingRecord {
        windows,
        adiabaticity,
        warnings,
        final_means: means.iter().map(|m| *m.last().expect("at least one window")).collect(),
    })
}

/// Coupling integrated over `[a, b]`.
fn delivered(spec: &CouplingSpec, a: f64, b: f64) -> f64 {
    let n = 2000;
    let h = (b - a) / n as f64;
    (0..n).map(|k| spec.rate(a + (k as f64 + 0.5) * h)).sum::<f64>() * h
}

fn centroid(positions: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    positions.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total
}

fn instantaneous_state(dynamics: &SystemDynamics, index: usize, t: f64) -> Result<StateVector> {
    Ok(dynamics.operator_at(t)?.spectrum()?.eigenvector(index))
}

/// Minimum over sample times of `gap² / max_n |<n|dH/dt|index>|`.
fn adiabaticity(dynamics: &SystemDynamics, index: usize, t0: f64, t1: f64, samples: usize) -> Result<Option<f64>> {
    if !dynamics.is_time_dependent() {
        return Ok(None);
    }
    let h = 1e-4 * (t1 - t0);
    let mut worst = f64::INFINITY;
    for s in 0..samples {
        let t = t0 + (s as f64 + 0.5) * (t1 - t0) / samples as f64;
        let spec = dynamics.operator_at(t)?.spectrum()?;
        let gap = gap_in_spectrum(&spec, index)?;
        let dh = dynamics
            .operator_at(t + h)?
            .combine(1.0.into(), &dynamics.operator_at(t - h)?, (-1.0).into())?
            .entries()
            / num_complex::Complex64::from(2.0 * h);
        let dh = Operator::general(dh)?;
        let ground = spec.eigenvector(index);
        let dh_ground = dh.apply(&ground)?;
        let coupling = (0..spec.dim())
            .filter(|&n| n != index)
            .map(|n| {
                let v = spec.vectors.column(n);
                v.iter().zip(&dh_ground).map(|(a, b)| a.conj() * b).sum::<num_complex::Complex64>().norm()
            })
            .fold(0.0, f64::max);
        if coupling > 0.0 {
            worst = worst.min(gap * gap / coupling);
        }
    }
    Ok(Some(worst))
}
