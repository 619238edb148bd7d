//! Continuous von Neumann coupling during Hamiltonian evolution.
//!
//! With every pointer held in its momentum representation the total
//! Hamiltonian `H_sys ⊗ 1 + Σ_j g_j(t) A_j ⊗ p_j` is block diagonal: each
//! tuple of pointer momenta sees only the system operator
//! `H_sys + Σ_j g_j(t) k_j A_j`. Blocks are advanced with a Strang splitting
//! (system half step, coupling phases, system half step).

use num_complex::Complex64 as C64;

use super::composite::{for_each_fiber, transform_system, SystemPointer};
use super::{CouplingSpec, ObservableSpectrum};
use crate::error::{Error, Result};
use crate::hilbert::evolve::STEP_NORM_DRIFT;
use crate::hilbert::state::l2_norm;
use crate::hilbert::Spectral;
use crate::protection::SystemDynamics;

/// A continuous coupling attached to one pointer of the composite.
#[derive(Clone, Copy, Debug)]
pub struct ContinuousCoupling<'a> {
    pub coupling: &'a CouplingSpec,
    pub pointer: usize,
}

enum SystemStep {
    Grid { spectral: Spectral, kinetic_half: Vec<C64>, potential: Option<Vec<f64>> },
    Dense { half: nalgebra::DMatrix<C64> },
}

/// Evolves `start` from `t0` to `t1` with time step close to `dt`.
///
/// `on_sample(t, state)` is called at `t0`, after every `sample_every` steps
/// and at `t1`, always with the pointers in position representation.
#[allow(clippy::too_many_arguments)]
pub fn evolve_continuous<F>(
    start: &SystemPointer,
    dynamics: &SystemDynamics,
    couplings: &[ContinuousCoupling<'_>],
    t0: f64,
    t1: f64,
    dt: f64,
    sample_every: usize,
    mut on_sample: F,
) -> Result<SystemPointer>
where
    F: FnMut(f64, &SystemPointer) -> Result<()>,
{
    if !(dt > 0.0) || t1 < t0 {
        return Err(Error::Contract(format!("bad time grid: t0 = {t0}, t1 = {t1}, dt = {dt}")));
    }
    let d = start.system_dim();
    if dynamics.dim() != d {
        return Err(Error::Structural(format!(
            "system Hamiltonian of dimension {} for system of dimension {d}",
            dynamics.dim()
        )));
    }
    for c in couplings {
        if c.pointer >= start.pointer_count() {
            return Err(Error::Structural(format!("coupling refers to missing pointer {}", c.pointer)));
        }
        if c.coupling.observable().dim() != d {
            return Err(Error::Structural("coupled observable does not match the system".into()));
        }
    }
    let sample_every = sample_every.max(1);
    let steps = ((t1 - t0) / dt).ceil() as usize;
    let h = if steps > 0 { (t1 - t0) / steps as f64 } else { 0.0 };
    let dims = start.state().dims().to_vec();
    let rest = start.rest_dim();

    // pointer momentum of every rest index, per pointer
    let slots = start.slots();
    let mut momenta = vec![vec![0.0; rest]; slots.len()];
    for (j, slot) in slots.iter().enumerate() {
        let n = slot.grid().n_points();
        let stride: usize = dims[j + 2..].iter().product();
        let ks = slot.spectral.wavenumbers();
        for (r, k) in momenta[j].iter_mut().enumerate() {
            *k = ks[(r / stride) % n];
        }
    }

    let system = match dynamics {
        SystemDynamics::Grid(gh) => {
            let spectral = Spectral::new(*gh.grid());
            let kinetic_half = spectral
                .wavenumbers()
                .iter()
                .map(|&k| C64::from_polar(1.0, -0.25 * k * k * h))
                .collect();
            let potential = (!gh.is_time_dependent()).then(|| gh.potential_at(t0));
            SystemStep::Grid { spectral, kinetic_half, potential }
        }
        SystemDynamics::Dense(op) => {
            op.require_hermitian("system Hamiltonian")?;
            SystemStep::Dense { half: op.spectrum()?.propagator(0.5 * h) }
        }
    };

    let mut amps = start.state().amplitudes().to_vec();
    to_momentum(&mut amps, &dims, start, true);

    let emit = |amps: &[C64], t: f64, on_sample: &mut F| -> Result<()> {
        let mut pos = amps.to_vec();
        to_momentum(&mut pos, &dims, start, false);
        on_sample(t, &start.with_amplitudes(pos)?)
    };
    emit(&amps, t0, &mut on_sample)?;

    let system_half = |amps: &mut Vec<C64>| match &system {
        SystemStep::Grid { spectral, kinetic_half, .. } => {
            for_each_fiber(amps, &dims, 0, |_, fiber| {
                spectral.forward(fiber);
                for (z, w) in fiber.iter_mut().zip(kinetic_half) {
                    *z *= w;
                }
                spectral.inverse(fiber);
            });
        }
        SystemStep::Dense { half } => transform_system(amps, d, half),
    };

    for step in 0..steps {
        let t_mid = t0 + (step as f64 + 0.5) * h;
        let norm_before = l2_norm(&amps);
        system_half(&mut amps);

        // diagonal part: potential plus diagonal couplings
        let mut diag_rate = vec![0.0; d];
        let potential = match &system {
            SystemStep::Grid { potential: Some(v), .. } => Some(v.clone()),
            SystemStep::Grid { potential: None, .. } => match dynamics {
                SystemDynamics::Grid(gh) => Some(gh.potential_at(t_mid)),
                SystemDynamics::Dense(_) => None,
            },
            SystemStep::Dense { .. } => None,
        };
        let diagonal: Vec<(f64, &[f64], usize)> = couplings
            .iter()
            .filter_map(|c| match c.coupling.spectrum() {
                ObservableSpectrum::Diagonal(a) => Some((c.coupling.rate(t_mid), a.as_slice(), c.pointer)),
                ObservableSpectrum::Eigen(_) => None,
            })
            .filter(|(g, _, _)| *g != 0.0)
            .collect();
        if potential.is_some() || !diagonal.is_empty() {
            for i in 0..d {
                let v = potential.as_ref().map_or(0.0, |p| p[i]);
                diag_rate[i] = v;
                let row = &mut amps[i * rest..(i + 1) * rest];
                for (r, z) in row.iter_mut().enumerate() {
                    let mut theta = v;
                    for &(g, a, j) in &diagonal {
                        theta += g * momenta[j][r] * a[i];
                    }
                    if theta != 0.0 {
                        *z *= C64::from_polar(1.0, -theta * h);
                    }
                }
            }
        }

        for c in couplings {
            let ObservableSpectrum::Eigen(spec) = c.coupling.spectrum() else { continue };
            let g = c.coupling.rate(t_mid);
            if g == 0.0 {
                continue;
            }
            transform_system(&mut amps, d, &spec.vectors.adjoint());
            for (m, &a) in spec.values.iter().enumerate() {
                for (r, z) in amps[m * rest..(m + 1) * rest].iter_mut().enumerate() {
                    *z *= C64::from_polar(1.0, -g * momenta[c.pointer][r] * a * h);
                }
            }
            transform_system(&mut amps, d, &spec.vectors);
        }

        system_half(&mut amps);

        let norm_after = l2_norm(&amps);
        if (norm_after - norm_before).abs() > STEP_NORM_DRIFT {
            return Err(Error::NumericalIntegrity(format!(
                "norm drifted by {:e} in one coupled step",
                (norm_after - norm_before).abs()
            )));
        }
        amps.iter_mut().for_each(|z| *z /= norm_after);

        let done = step + 1 == steps;
        if (step + 1) % sample_every == 0 || done {
            emit(&amps, t0 + (step + 1) as f64 * h, &mut on_sample)?;
        }
    }

    to_momentum(&mut amps, &dims, start, false);
    start.with_amplitudes(amps)
}

fn to_momentum(amps: &mut [C64], dims: &[usize], sp: &SystemPointer, forward: bool) {
    for (j, slot) in sp.slots().iter().enumerate() {
        for_each_fiber(amps, dims, j + 1, |_, fiber| {
            if forward {
                slot.spectral.forward(fiber);
            } else {
                slot.spectral.inverse(fiber);
            }
        });
    }
}
