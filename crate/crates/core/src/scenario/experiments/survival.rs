//! Survival of a full Zeno run (E2).
//!
//! Each of the `round(1/ε)` couplings leaves the protected state with a
//! component of weight `ε²/Δ²` on the orthogonal complement, which the next
//! verification removes with that probability. The disturbance is applied
//! as an exact rotation of that size; its size is cross-checked against a
//! genuine pointer coupling of an observable with variance 4 in the
//! protected state.

use rayon::prelude::*;

use super::{matrix_system, stream_rng, Output};
use crate::error::Result;
use crate::hilbert::{Grid1D, Operator};
use crate::pointer::make_pointer;
use crate::protection::{disturbed_zeno_run, failure_rotation, survival_probability, ProtectionScheme, ZenoMode};
use crate::scenario::bundle::{Check, Table};
use crate::scenario::config::ScenarioConfig;
use crate::weak::{couple_weak, CouplingSpec, SystemPointer};

/// Survival demanded of the weakest coupling in a sweep.
pub const LIMIT_SURVIVAL: f64 = 0.99;

/// `(1 - ε²/Δ²)^round(1/ε)`.
pub fn predicted_survival(epsilon: f64, delta: f64) -> f64 {
    (1.0 - epsilon * epsilon / (delta * delta)).powi((1.0 / epsilon).round() as i32)
}

/// Failure probability of one verification after a real weak coupling.
fn coupled_failure(protected: &crate::hilbert::StateVector, partner: &crate::hilbert::StateVector, epsilon: f64, delta: f64) -> Result<f64> {
    let cross = nalgebra::DVector::from_column_slice(protected.amplitudes())
        * nalgebra::DVector::from_column_slice(partner.amplitudes()).adjoint();
    let sym = (&cross + cross.adjoint()) * num_complex::Complex64::from(2.0);
    let a = Operator::hermitian_symmetrized(sym)?;
    let grid = Grid1D::new(128, -10.0 * delta, 10.0 * delta)?;
    let pointer = make_pointer(grid, delta)?;
    let sp = SystemPointer::new(protected, &[pointer])?;
    let coupled = couple_weak(&sp, &CouplingSpec::impulsive_pulses(a, epsilon, 1)?, 0, epsilon)?;
    Ok(1.0 - coupled.system_fidelity(protected)?)
}

pub(super) fn run(config: &ScenarioConfig) -> Result<Output> {
    let sv = config.survival.as_ref().expect("validated");
    let h = matrix_system(&config.system)?;
    let spec = h.spectrum()?;
    let protected = spec.eigenvector(0);
    let partner = spec.eigenvector(1);
    let period = config.protection.as_ref().map_or(0.01, |p| p.period);
    let scheme = ProtectionScheme::zeno(h, period, ZenoMode::Stochastic, &protected)?;
    let trials = config.scenario.trials;

    let mut out = Output::default();
    let mut table = Table::new(&[
        "epsilon",
        "delta",
        "trials",
        "survived",
        "predicted",
        "exact",
        "frequency",
        "sigma",
        "coupled_failure",
    ]);
    let mut all_within = true;
    let mut worst_z = 0.0f64;
    let mut exact_by_eps = Vec::new();
    for (e, &eps) in sv.epsilons.iter().enumerate() {
        let failure = eps * eps / (sv.delta * sv.delta);
        let steps = (1.0 / eps).round() as usize;
        let kick = failure_rotation(&protected, &partner, failure)?;
        let survived: usize = (0..trials)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream_rng(config.scenario.seed, ((e as u64) << 32) | k as u64);
                Ok(disturbed_zeno_run(&scheme, &kick, steps, &mut rng)?.survived as usize)
            })
            .collect::<Result<Vec<usize>>>()?
            .into_iter()
            .sum();
        let predicted = predicted_survival(eps, sv.delta);
        let exact = survival_probability(&scheme, &kick, steps)?;
        let frequency = survived as f64 / trials as f64;
        let sigma = (predicted * (1.0 - predicted) / trials as f64).sqrt();
        let z = (frequency - predicted).abs() / sigma.max(f64::MIN_POSITIVE);
        let within = (frequency - predicted).abs() <= 3.0 * sigma;
        all_within &= within;
        worst_z = worst_z.max(z);
        exact_by_eps.push((eps, exact));
        table.push(vec![
            eps.into(),
            sv.delta.into(),
            trials.into(),
            survived.into(),
            predicted.into(),
            exact.into(),
            frequency.into(),
            sigma.into(),
            coupled_failure(&protected, &partner, eps, sv.delta)?.into(),
        ]);
    }
    out.table("survival", table);
    out.put("max_z_score", worst_z);
    out.check(Check {
        name: "survival_within_3_sigma".into(),
        passed: all_within,
        value: worst_z,
        threshold: 3.0,
        detail: "Monte Carlo survival frequency against the closed form, every epsilon".into(),
    });
    exact_by_eps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = exact_by_eps.windows(2).all(|w| w[0].1 >= w[1].1);
    out.check(Check {
        name: "survival_grows_as_coupling_weakens".into(),
        passed: monotone,
        value: exact_by_eps.first().map_or(f64::NAN, |x| x.1),
        threshold: exact_by_eps.last().map_or(f64::NAN, |x| x.1),
        detail: "exact survival probability is monotone in epsilon".into(),
    });
    let (eps_min, weakest) = exact_by_eps[0];
    out.put("weakest_epsilon", eps_min);
    out.check(Check {
        name: "weakest_coupling_survives".into(),
        passed: weakest >= LIMIT_SURVIVAL,
        value: weakest,
        threshold: LIMIT_SURVIVAL,
        detail: format!("exact survival at epsilon = {eps_min:e}"),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::StateVector;

    #[test]
    fn closed_form() {
        assert!((predicted_survival(0.01, 0.1) - 0.99f64.powi(100)).abs() < 1e-15);
        assert!((predicted_survival(0.01, 0.1) - 0.366).abs() < 1e-3);
    }

    #[test]
    fn pointer_coupling_matches_calibration() {
        let up = StateVector::basis(2, 0).unwrap();
        let down = StateVector::basis(2, 1).unwrap();
        for eps in [1e-2, 1e-3] {
            let f = coupled_failure(&up, &down, eps, 0.1).unwrap();
            let want = 0.5 * (1.0 - (-2.0 * eps * eps / 0.01f64).exp());
            assert!((f - want).abs() < 1e-9 * want.max(1e-6), "{f} vs {want}");
            assert!((f / (eps * eps / 0.01) - 1.0).abs() < 0.02);
        }
    }
}
