//! Two-state-vector protection by a non-Hermitian effective Hamiltonian (E7).

use num_complex::Complex64 as C64;

use super::{matrix_system, Output};
use crate::error::Result;
use crate::hilbert::operator::apply_matrix;
use crate::hilbert::StateVector;
use crate::protection::{biorthogonal_h_eff, evolve_two_state, ProtectionScheme};
use crate::scenario::bundle::{Check, Table};
use crate::scenario::config::ScenarioConfig;
use crate::tsvf::TwoStateVector;

pub const HOLD_FIDELITY: f64 = 0.99;

fn vector(pairs: &[[f64; 2]]) -> Result<StateVector> {
    StateVector::new(pairs.iter().map(|p| C64::new(p[0], p[1])).collect())?.normalized()
}

pub(super) fn run(config: &ScenarioConfig) -> Result<Output> {
    let ts = config.two_state.as_ref().expect("validated");
    let psi = vector(&ts.forward)?;
    let phi = vector(&ts.backward)?;
    let mut values = vec![C64::new(ts.energies[0], 0.0)];
    values.extend(ts.energies[1..].iter().zip(&ts.decay).map(|(&e, &g)| C64::new(e, -g)));
    let h_eff = biorthogonal_h_eff(&psi, &phi, &values)?;
    let scheme = ProtectionScheme::effective_complex(h_eff);
    let gap = ts.decay.iter().copied().fold(f64::INFINITY, f64::min);
    let total = ts.gap_times / gap;
    let dt = total / ts.samples as f64;

    // a displaced start: equal admixture of the uniform vector into both states
    let d = psi.dim();
    let uniform = C64::from(0.3 / (d as f64).sqrt());
    let displaced = |s: &StateVector| StateVector::new(s.amplitudes().iter().map(|a| a + uniform).collect());

    let control = matrix_system(&config.system)?;
    let spectrum = control.spectrum()?;
    let ground = spectrum.eigenvector(0);
    let step = spectrum.propagator(dt);
    let step_back = spectrum.propagator(-dt);

    let mut held = TwoStateVector::new(psi.clone(), phi.clone())?;
    let mut relaxing = TwoStateVector::new(displaced(&psi)?, displaced(&phi)?)?;
    let mut c_psi = psi.amplitudes().to_vec();
    let mut c_phi = phi.amplitudes().to_vec();
    let mut c_ground = ground.amplitudes().to_vec();

    let mut table = Table::new(&[
        "time",
        "forward_fidelity",
        "backward_fidelity",
        "relaxing_forward",
        "relaxing_backward",
        "control_forward",
        "control_backward",
        "control_coincident",
    ]);
    let fid = |a: &[C64], b: &StateVector| -> Result<f64> { StateVector::new(a.to_vec())?.fidelity(b) };
    let (mut min_fwd, mut min_bwd, mut min_ctrl, mut min_coincident) = (1.0f64, 1.0f64, 1.0f64, 1.0f64);
    for s in 0..=ts.samples {
        if s > 0 {
            held = evolve_two_state(&held, &scheme, dt)?;
            relaxing = evolve_two_state(&relaxing, &scheme, dt)?;
            // Hermitian control: the same forward and backward maps, which are unitary
            c_psi = apply_matrix(&step, &c_psi);
            c_phi = apply_matrix(&step_back, &c_phi);
            c_ground = apply_matrix(&step, &c_ground);
        }
        let f = held.forward().fidelity(&psi)?;
        let b = held.backward().fidelity(&phi)?;
        let (cf, cb, cg) = (fid(&c_psi, &psi)?, fid(&c_phi, &phi)?, fid(&c_ground, &ground)?);
        min_fwd = min_fwd.min(f);
        min_bwd = min_bwd.min(b);
        min_ctrl = min_ctrl.min(cf.min(cb));
        min_coincident = min_coincident.min(cg);
        table.push(vec![
            (s as f64 * dt).into(),
            f.into(),
            b.into(),
            relaxing.forward().fidelity(&psi)?.into(),
            relaxing.backward().fidelity(&phi)?.into(),
            cf.into(),
            cb.into(),
            cg.into(),
        ]);
    }
    let relaxed = relaxing.forward().fidelity(&psi)?.min(relaxing.backward().fidelity(&phi)?);

    let mut out = Output::default();
    out.table("two_state", table);
    out.put("pair_overlap", phi.inner(&psi)?.norm());
    out.put("gap", gap);
    out.put("duration", total);
    out.put("relaxed_fidelity", relaxed);
    out.put("control_min_distinct_fidelity", min_ctrl);
    out.put("control_min_coincident_fidelity", min_coincident);
    out.check(Check::above("forward_held", min_fwd, HOLD_FIDELITY, format!("min forward fidelity over {} gap times", ts.gap_times)));
    out.check(Check::above("backward_held", min_bwd, HOLD_FIDELITY, format!("min backward fidelity over {} gap times", ts.gap_times)));
    out.check(Check::above("displaced_pair_relaxes", relaxed, HOLD_FIDELITY, "final fidelity of a displaced pair"));
    out.check(Check {
        name: "hermitian_protects_only_coincident_pair".into(),
        passed: min_coincident > HOLD_FIDELITY && min_ctrl < HOLD_FIDELITY,
        value: min_ctrl,
        threshold: HOLD_FIDELITY,
        detail: format!("coincident eigenpair min fidelity {min_coincident:.6}, distinct pair min fidelity {min_ctrl:.6}"),
    });
    Ok(out)
}
