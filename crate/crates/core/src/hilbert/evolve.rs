//! Dense Schrödinger propagation (ħ = 1).
//!
//! `evolve_dense` is the reference evolver: a full Hermitian
//! eigendecomposition followed by exact phases. Every faster kernel in the
//! crate is tested against it.

use num_complex::Complex64 as C64;

use super::operator::{apply_matrix, Operator};
use super::state::{l2_norm, StateVector};
use crate::error::{Error, Result};

/// Per-step norm drift beyond which evolution is aborted instead of renormalized.
pub const STEP_NORM_DRIFT: f64 = 1e-8;

/// `exp(-i H t) psi` via eigendecomposition of `H`.
pub fn evolve_dense(psi: &StateVector, h: &Operator, t: f64) -> Result<StateVector> {
    h.require_hermitian("Hamiltonian")?;
    check_dims(psi, h)?;
    if t == 0.0 {
        return Ok(psi.clone());
    }
    let u = h.spectrum()?.propagator(t);
    let out = apply_matrix(&u, psi.amplitudes());
    renormalize(psi, out)
}

/// Midpoint product of short-time dense propagators from `t0` to `t1`.
///
/// The number of steps is `ceil((t1 - t0) / dt)`; the step is shrunk so the
/// steps tile the interval exactly.
pub fn evolve_stepped<F>(psi: &StateVector, h_of_t: F, t0: f64, t1: f64, dt: f64) -> Result<StateVector>
where
    F: Fn(f64) -> Result<Operator>,
{
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("time step must be positive, got {dt}")));
    }
    if t1 < t0 {
        return Err(Error::Contract(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    let steps = ((t1 - t0) / dt).ceil() as usize;
    if steps == 0 {
        return Ok(psi.clone());
    }
    let h_step = (t1 - t0) / steps as f64;
    let mut state = psi.clone();
    for k in 0..steps {
        let t_mid = t0 + (k as f64 + 0.5) * h_step;
        let h = h_of_t(t_mid)?;
        h.require_hermitian("Hamiltonian")?;
        check_dims(&state, &h)?;
        let u = h.spectrum()?.propagator(h_step);
        let out = apply_matrix(&u, state.amplitudes());
        state = renormalize(&state, out)?;
    }
    Ok(state)
}

fn check_dims(psi: &StateVector, h: &Operator) -> Result<()> {
    if psi.dim() != h.dim() {
        return Err(Error::Structural(format!(
            "Hamiltonian of dimension {} acting on state of dimension {}",
            h.dim(),
            psi.dim()
        )));
    }
    Ok(())
}

/// Restores unit norm after one step, or fails if the step drifted too far.
pub(crate) fn renormalize(before: &StateVector, after: Vec<C64>) -> Result<StateVector> {
    let n_after = l2_norm(&after);
    let drift = (n_after - before.norm()).abs();
    if drift > STEP_NORM_DRIFT {
        return Err(Error::NumericalIntegrity(format!("norm drifted by {drift:e} in one step")));
    }
    StateVector::from_amplitudes(before.dims().to_vec(), after)?.normalized()
}
