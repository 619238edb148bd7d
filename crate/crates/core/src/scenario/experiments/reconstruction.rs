//! Single-system reconstruction of `|ψ(x)|²` (E1 Zeno, E3 Hamiltonian).

use rand::Rng;
use rayon::prelude::*;

use super::{grid_system, relative_l2, run_options, stream_rng, target_indices, Output, AUX_STREAM};
use crate::error::Result;
use crate::hilbert::{density_on_grid, position_density, GridHamiltonian, StateVector};
use crate::protection::{Envelope, ProtectionScheme, SystemDynamics, ZenoMode};
use crate::scenario::bundle::{Check, Table};
use crate::scenario::config::{ProtectionKind, ScenarioConfig};
use crate::weak::{run_protective_measurement, CouplingSpec, Protection, ProtectiveRunRecord, RunOptions};

/// Relative L2 error a reconstruction must stay under.
pub const RECONSTRUCTION_TOLERANCE: f64 = 0.05;
/// A control "fails" if its error exceeds this or its fidelity drops below the floor.
pub const CONTROL_ERROR: f64 = 0.2;
pub const CONTROL_FIDELITY: f64 = 0.9;

struct Trial {
    attempts: Vec<(bool, usize)>,
    records: Option<Vec<ProtectiveRunRecord>>,
}

fn attempt_until_success<R: Rng>(
    psi: &StateVector,
    scheme: &ProtectionScheme,
    targets: &[CouplingSpec],
    options: &RunOptions,
    max_retries: usize,
    rng: &mut R,
) -> Result<Trial> {
    let mut attempts = Vec::new();
    for _ in 0..=max_retries {
        let recs = run_protective_measurement(psi, Protection::Scheme(scheme), targets, options, rng)?;
        let ok = recs.len() == targets.len() && recs.iter().all(|r| r.survived);
        attempts.push((ok, recs.len()));
        if ok {
            return Ok(Trial { attempts, records: Some(recs) });
        }
    }
    Ok(Trial { attempts, records: None })
}

pub(super) fn run(config: &ScenarioConfig) -> Result<Output> {
    let protection = config.protection.as_ref().expect("validated");
    let m = config.measurement.as_ref().expect("validated");
    let sys = grid_system(&config.system)?;
    let idx = target_indices(&sys.grid, m.targets)?;
    let zeno = protection.kind == ProtectionKind::Zeno;

    let targets = idx
        .iter()
        .map(|&i| {
            let op = position_density(&sys.grid, i)?;
            let spec = if zeno {
                CouplingSpec::impulsive(op, m.epsilon.expect("validated"))?
            } else {
                let duration = m.duration.expect("validated");
                CouplingSpec::continuous(op, m.total_strength.expect("validated"), Envelope::new(0.0, duration, m.ramp)?)?
            };
            Ok(spec.with_label(format!("x{i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let scheme = if zeno {
        ProtectionScheme::zeno(sys.hamiltonian.clone(), protection.period, ZenoMode::Stochastic, &sys.ground)?
    } else {
        ProtectionScheme::hamiltonian(sys.dynamics.clone(), 0)?
    };
    let pointer = config.pointer.as_ref().expect("validated");
    let options = run_options(pointer, m.dt, m.trace_samples, m.parallel, protection.fidelity_floor)?;

    let exact_all = density_on_grid(&sys.ground, &sys.grid);
    let exact: Vec<f64> = idx.iter().map(|&i| exact_all[i]).collect();
    let analytic: Vec<f64> = idx
        .iter()
        .map(|&i| sys.analytic.as_ref().map_or(f64::NAN, |f| f(sys.grid.x(i))))
        .collect();

    let seed = config.scenario.seed;
    let trials: Vec<Trial> = (0..config.scenario.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            attempt_until_success(&sys.ground, &scheme, &targets, &options, protection.max_retries, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut out = Output::default();
    let mut recon = Table::new(&["trial", "index", "x", "measured", "exact", "analytic", "error"]);
    let mut attempts = Table::new(&["trial", "attempt", "survived", "targets_completed"]);
    let mut traces = Table::new(&["trial", "target", "time", "mean", "variance"]);
    let mut worst = 0.0f64;
    let mut failed_trials = 0usize;
    for (k, trial) in trials.iter().enumerate() {
        for (a, &(ok, n)) in trial.attempts.iter().enumerate() {
            attempts.push(vec![k.into(), a.into(), ok.into(), n.into()]);
        }
        let Some(recs) = &trial.records else {
            failed_trials += 1;
            worst = f64::INFINITY;
            continue;
        };
        let measured: Vec<f64> = recs.iter().map(|r| r.final_mean).collect();
        worst = worst.max(relative_l2(&measured, &exact));
        for (j, &i) in idx.iter().enumerate() {
            recon.push(vec![
                k.into(),
                i.into(),
                sys.grid.x(i).into(),
                measured[j].into(),
                exact[j].into(),
                analytic[j].into(),
                (measured[j] - exact[j]).into(),
            ]);
            for p in &recs[j].pointer_trace {
                traces.push(vec![k.into(), recs[j].label.as_str().into(), p.time.into(), p.mean.into(), p.variance.into()]);
            }
        }
    }
    let total_attempts: usize = trials.iter().map(|t| t.attempts.len()).sum();
    out.put("targets", idx.len());
    out.put("l2_error", worst);
    out.put("trials_without_success", failed_trials);
    out.put("attempts", total_attempts);
    if let ProtectionScheme::Hamiltonian { gap, .. } = &scheme {
        out.put("gap", *gap);
    }
    out.check(Check::below("reconstruction_error", worst, RECONSTRUCTION_TOLERANCE, "worst relative L2 error over trials"));

    if m.control {
        let free = SystemDynamics::Grid(GridHamiltonian::free(sys.grid));
        let period = if zeno { protection.period } else { 1.0 };
        let mut rng = stream_rng(seed, AUX_STREAM);
        let recs = run_protective_measurement(&sys.ground, Protection::None { dynamics: Some(&free), period }, &targets, &options, &mut rng)?;
        let measured: Vec<f64> = recs.iter().map(|r| r.final_mean).collect();
        let err = relative_l2(&measured, &exact);
        let min_fidelity = recs.iter().map(|r| r.final_system_fidelity).fold(1.0, f64::min);
        let mut control = Table::new(&["index", "x", "measured", "exact", "system_fidelity"]);
        for (j, &i) in idx.iter().enumerate() {
            control.push(vec![
                i.into(),
                sys.grid.x(i).into(),
                measured[j].into(),
                exact[j].into(),
                recs[j].final_system_fidelity.into(),
            ]);
        }
        out.table("control", control);
        out.put("control_l2_error", err);
        out.put("control_min_fidelity", min_fidelity);
        out.check(Check {
            name: "control_fails".into(),
            passed: err > CONTROL_ERROR || min_fidelity < CONTROL_FIDELITY,
            value: err,
            threshold: CONTROL_ERROR,
            detail: format!("unprotected free evolution: error {err:.4}, min fidelity {min_fidelity:.4}"),
        });
    }
    out.table("reconstruction", recon);
    out.table("attempts", attempts);
    out.table("pointer_traces", traces);
    Ok(out)
}
