//! The protective-measurement protocol on a single system.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::composite::{couple_weak, SystemPointer};
use super::continuous::{evolve_continuous, ContinuousCoupling};
use super::{CouplingSpec, Schedule};
use crate::error::{Error, Result};
use crate::hilbert::{Grid1D, StateVector};
use crate::pointer::{check_wrap, make_pointer, PointerReadout, PointerState};
use crate::protection::{zeno_step, ProtectionScheme, SystemDynamics, ZenoMode, ZenoOutcomeLog, ZenoState};

/// Required fidelity between the initial state and the protected state.
pub const PREPARATION_FIDELITY: f64 = 1.0 - 1e-6;

/// What keeps the system in place while the pointers are coupled.
#[derive(Clone, Copy, Debug)]
pub enum Protection<'a> {
    Scheme(&'a ProtectionScheme),
    /// No protection. Impulsive pulses are separated by `period` of free
    /// evolution under `dynamics` (if any); continuous couplings evolve
    /// under `dynamics`.
    None { dynamics: Option<&'a SystemDynamics>, period: f64 },
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub pointer_grid: Grid1D,
    /// Pointer width Δ.
    pub delta: f64,
    /// Approximate number of pointer samples per target.
    pub trace_samples: usize,
    /// Time step of continuous evolution.
    pub dt: f64,
    /// Couple all targets at once, one pointer each, in a single composite.
    pub parallel: bool,
    /// A continuous run survives if the final system fidelity stays above this.
    pub fidelity_floor: f64,
}

impl RunOptions {
    pub fn new(pointer_grid: Grid1D, delta: f64) -> Self {
        Self { pointer_grid, delta, trace_samples: 20, dt: 0.05, parallel: false, fidelity_floor: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtectiveRunRecord {
    pub label: String,
    pub pointer_trace: Vec<PointerReadout>,
    pub zeno_log: Option<ZenoOutcomeLog>,
    /// Fidelity of the system with the protected state after this target.
    pub final_system_fidelity: f64,
    pub survived: bool,
    pub final_mean: f64,
    pub final_momentum: f64,
}

/// Measures every target on one system prepared in `psi0`.
///
/// Targets are measured one after another (or all at once when
/// `options.parallel`). Between groups every pointer is read out once and
/// the conditional system state carries on. A failed Zeno verification ends
/// the run; the records collected so far are returned with `survived = false`
/// on the failing one.
pub fn run_protective_measurement<R: Rng + ?Sized>(
    psi0: &StateVector,
    protection: Protection<'_>,
    targets: &[CouplingSpec],
    options: &RunOptions,
    rng: &mut R,
) -> Result<Vec<ProtectiveRunRecord>> {
    if targets.is_empty() {
        return Err(Error::Configuration("no measurement targets".into()));
    }
    let reference = match protection {
        Protection::Scheme(scheme) => {
            let protected = scheme.protected_state()?;
            let f = protected.fidelity(psi0)?;
            if f < PREPARATION_FIDELITY {
                return Err(Error::Contract(format!("initial state has fidelity {f} with the protected state")));
            }
            protected
        }
        Protection::None { period, .. } => {
            if !(period > 0.0) {
                return Err(Error::Configuration(format!("free-evolution period must be positive, got {period}")));
            }
            psi0.clone()
        }
    };
    for t in targets {
        if t.observable().dim() != psi0.dim() {
            return Err(Error::Structural(format!(
                "target '{}' acts on dimension {}, system has {}",
                t.label(),
                t.observable().dim(),
                psi0.dim()
            )));
        }
    }
    let groups: Vec<Vec<usize>> = if options.parallel {
        vec![(0..targets.len()).collect()]
    } else {
        (0..targets.len()).map(|i| vec![i]).collect()
    };

    let mut system = psi0.clone();
    let mut records = Vec::with_capacity(targets.len());
    for group in groups {
        let specs: Vec<&CouplingSpec> = group.iter().map(|&i| &targets[i]).collect();
        let pointers = specs
            .iter()
            .map(|s| Ok(make_pointer(options.pointer_grid, options.delta)?.with_label(s.label())))
            .collect::<Result<Vec<PointerState>>>()?;
        let start = SystemPointer::new(&system, &pointers)?;
        let (sp, traces, log) = run_group(start, protection, &specs, options, rng)?;
        let survived = match &log {
            Some(log) => log.survived,
            None => true,
        };
        let fidelity = sp.system_fidelity(&reference)?.clamp(0.0, 1.0);
        let survived = survived && (log.is_some() || fidelity >= options.fidelity_floor);
        for (j, (spec, trace)) in specs.iter().zip(traces).enumerate() {
            check_wrap(&sp.pointer_distribution(j)?)?;
            records.push(ProtectiveRunRecord {
                label: spec.label().to_owned(),
                final_mean: trace.last().map_or(0.0, |r| r.mean),
                pointer_trace: trace,
                zeno_log: log.clone(),
                final_system_fidelity: fidelity,
                survived,
                final_momentum: sp.momentum_mean(j)?,
            });
        }
        if !survived && log.is_some() {
            break;
        }
        system = sp.detach_system(rng)?;
    }
    Ok(records)
}

type GroupResult = (SystemPointer, Vec<Vec<PointerReadout>>, Option<ZenoOutcomeLog>);

fn run_group<R: Rng + ?Sized>(
    start: SystemPointer,
    protection: Protection<'_>,
    specs: &[&CouplingSpec],
    options: &RunOptions,
    rng: &mut R,
) -> Result<GroupResult> {
    let impulsive = specs.iter().all(|s| matches!(s.schedule(), Schedule::Impulsive { .. }));
    let continuous = specs.iter().all(|s| matches!(s.schedule(), Schedule::Continuous(_)));
    if !impulsive && !continuous {
        return Err(Error::Configuration("targets measured together must share a schedule kind".into()));
    }
    match protection {
        Protection::Scheme(scheme @ ProtectionScheme::Zeno { mode, period, protected, .. }) => {
            if !impulsive {
                return Err(Error::Configuration("Zeno protection is driven by impulsive couplings".into()));
            }
            if *mode != ZenoMode::Stochastic {
                return Err(Error::Configuration(
                    "a protective measurement run needs stochastic Zeno verification".into(),
                ));
            }
            let mut log = ZenoOutcomeLog::new(*protected);
            let (sp, traces) = run_impulsive(start, specs, *period, options, |sp, t| {
                let (next, outcome) = zeno_step(&ZenoState::Pure(sp.state().clone()), scheme, rng)?;
                log.record(t, outcome);
                let ZenoState::Pure(next) = next else { unreachable!("stochastic step returns a pure state") };
                Ok((SystemPointer::from_parts(next, sp.slots().to_vec())?, log.survived))
            })?;
            Ok((sp, traces, Some(log)))
        }
        Protection::Scheme(ProtectionScheme::Hamiltonian { dynamics, .. }) => {
            if !continuous {
                return Err(Error::Configuration("Hamiltonian protection is driven by continuous couplings".into()));
            }
            let (sp, traces) = run_continuous(start, dynamics, specs, options)?;
            Ok((sp, traces, None))
        }
        Protection::Scheme(other) => Err(Error::Contract(format!(
            "{} protection holds a two-state vector, not a single state",
            other.kind()
        ))),
        Protection::None { dynamics, period } => {
            if continuous {
                let dynamics = dynamics.ok_or_else(|| {
                    Error::Configuration("continuous couplings without protection need system dynamics".into())
                })?;
                let (sp, traces) = run_continuous(start, dynamics, specs, options)?;
                return Ok((sp, traces, None));
            }
            let (sp, traces) = run_impulsive(start, specs, period, options, |sp, t| {
                let next = match dynamics {
                    Some(d) => evolve_continuous(sp, d, &[], t - period, t, options.dt.min(period), usize::MAX, |_, _| Ok(()))?,
                    None => sp.clone(),
                };
                Ok((next, true))
            })?;
            Ok((sp, traces, None))
        }
    }
}

/// Pulse loop; `between(state, t)` runs after each pulse and reports whether to go on.
fn run_impulsive<F>(
    mut sp: SystemPointer,
    specs: &[&CouplingSpec],
    period: f64,
    options: &RunOptions,
    mut between: F,
) -> Result<(SystemPointer, Vec<Vec<PointerReadout>>)>
where
    F: FnMut(&SystemPointer, f64) -> Result<(SystemPointer, bool)>,
{
    let counts: Vec<usize> = specs
        .iter()
        .map(|s| match s.schedule() {
            Schedule::Impulsive { pulses } => pulses,
            Schedule::Continuous(_) => 0,
        })
        .collect();
    let total = counts.iter().copied().max().unwrap_or(0);
    let every = (total / options.trace_samples.max(1)).max(1);
    let mut traces: Vec<Vec<PointerReadout>> =
        (0..specs.len()).map(|j| Ok(vec![sp.readout(j, 0.0)?])).collect::<Result<_>>()?;
    for n in 0..total {
        for (j, spec) in specs.iter().enumerate() {
            if n < counts[j] {
                sp = couple_weak(&sp, spec, j, spec.strength())?;
            }
        }
        let t = (n + 1) as f64 * period;
        let (next, go_on) = between(&sp, t)?;
        sp = next;
        if (n + 1) % every == 0 || n + 1 == total || !go_on {
            for (j, trace) in traces.iter_mut().enumerate() {
                trace.push(sp.readout(j, t)?);
            }
        }
        if !go_on {
            break;
        }
    }
    Ok((sp, traces))
}

fn run_continuous(
    sp: SystemPointer,
    dynamics: &SystemDynamics,
    specs: &[&CouplingSpec],
    options: &RunOptions,
) -> Result<(SystemPointer, Vec<Vec<PointerReadout>>)> {
    let (t0, t1) = continuous_window(specs)?;
    let steps = ((t1 - t0) / options.dt).ceil().max(1.0) as usize;
    let every = (steps / options.trace_samples.max(1)).max(1);
    let couplings: Vec<ContinuousCoupling<'_>> =
        specs.iter().enumerate().map(|(pointer, &coupling)| ContinuousCoupling { coupling, pointer }).collect();
    let mut traces = vec![Vec::new(); specs.len()];
    let out = evolve_continuous(&sp, dynamics, &couplings, t0, t1, options.dt, every, |t, s| {
        for (j, trace) in traces.iter_mut().enumerate() {
            trace.push(s.readout(j, t)?);
        }
        Ok(())
    })?;
    Ok((out, traces))
}

/// Earliest switch-on and latest switch-off of a set of continuous couplings.
pub(crate) fn continuous_window(specs: &[&CouplingSpec]) -> Result<(f64, f64)> {
    let mut window: Option<(f64, f64)> = None;
    for s in specs {
        let Schedule::Continuous(env) = s.schedule() else {
            return Err(Error::Configuration("expected a continuous coupling".into()));
        };
        window = Some(match window {
            None => (env.t_on, env.t_off),
            Some((a, b)) => (a.min(env.t_on), b.max(env.t_off)),
        });
    }
    window.ok_or_else(|| Error::Configuration("no continuous couplings".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Operator;
    use crate::protection::Envelope;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pointer_grid() -> Grid1D {
        Grid1D::new(112, -1.3, 2.3).unwrap()
    }

    fn qutrit() -> (StateVector, Operator) {
        let psi = StateVector::from_real(&[0.6, 0.64, 0.48]).unwrap();
        (psi.clone(), Operator::projector(&psi))
    }

    #[test]
    fn zeno_run_reads_expectation_values() {
        let (psi, proj) = qutrit();
        let scheme = ProtectionScheme::zeno(proj, 0.1, ZenoMode::Stochastic, &psi).unwrap();
        let targets: Vec<CouplingSpec> = (0..3)
            .map(|i| CouplingSpec::impulsive(Operator::basis_projector(3, i, 1.0).unwrap(), 0.01).unwrap())
            .collect();
        let options = RunOptions::new(pointer_grid(), 0.15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let records = run_protective_measurement(&psi, Protection::Scheme(&scheme), &targets, &options, &mut rng).unwrap();
        assert_eq!(records.len(), 3);
        for (r, p) in records.iter().zip(psi.probabilities()) {
            assert!(r.survived);
            // exact up to the second-order effect of the projections
            assert!((r.final_mean - p).abs() < 1e-3, "{} vs {p}", r.final_mean);
            assert!((r.final_system_fidelity - 1.0).abs() < 1e-12);
            assert!(r.pointer_trace.windows(2).all(|w| w[1].time > w[0].time));
            // variance within Δ²(1 ± Nε²/Δ²)
            let var = r.pointer_trace.last().unwrap().variance;
            assert!((var - 0.15f64.powi(2)).abs() < 100.0 * 0.01f64.powi(2), "{var}");
        }
    }

    #[test]
    fn parallel_targets_match_sequential() {
        let (psi, proj) = qutrit();
        let scheme = ProtectionScheme::zeno(proj, 0.1, ZenoMode::Stochastic, &psi).unwrap();
        let targets: Vec<CouplingSpec> = (0..2)
            .map(|i| CouplingSpec::impulsive_pulses(Operator::basis_projector(3, i, 1.0).unwrap(), 0.01, 20).unwrap())
            .collect();
        let mut options = RunOptions::new(Grid1D::new(48, -2.0, 2.0).unwrap(), 0.26);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let seq = run_protective_measurement(&psi, Protection::Scheme(&scheme), &targets, &options, &mut rng).unwrap();
        options.parallel = true;
        let par = run_protective_measurement(&psi, Protection::Scheme(&scheme), &targets, &options, &mut rng).unwrap();
        for (a, b) in seq.iter().zip(&par) {
            assert!(a.survived && b.survived);
            assert!((a.final_mean - b.final_mean).abs() < 1e-3, "{} vs {}", a.final_mean, b.final_mean);
        }
    }

    #[test]
    fn hamiltonian_run_on_dense_system() {
        let h = Operator::from_real_diagonal(&[0.0, 1.0, 2.0]);
        let scheme = ProtectionScheme::hamiltonian(SystemDynamics::Dense(h), 0).unwrap();
        let psi = scheme.protected_state().unwrap();
        let env = Envelope::new(0.0, 30.0, 5.0).unwrap();
        let obs = Operator::hermitian(nalgebra::DMatrix::from_fn(3, 3, |i, j| {
            num_complex::Complex64::from(if i == j { 1.0 } else { 0.2 })
        }))
        .unwrap();
        let target = CouplingSpec::continuous(obs, 0.5, env).unwrap();
        let options = RunOptions::new(pointer_grid(), 0.15);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let records = run_protective_measurement(&psi, Protection::Scheme(&scheme), &[target], &options, &mut rng).unwrap();
        let r = &records[0];
        assert!(r.survived);
        // <A> = 1 in the ground state
        assert!((r.final_mean - 0.5).abs() < 1e-3, "{}", r.final_mean);
        assert!(r.final_system_fidelity > 0.999);
    }

    #[test]
    fn mismatched_schedule_rejected() {
        let (psi, proj) = qutrit();
        let scheme = ProtectionScheme::zeno(proj, 0.1, ZenoMode::Stochastic, &psi).unwrap();
        let env = Envelope::new(0.0, 10.0, 1.0).unwrap();
        let target = CouplingSpec::continuous(Operator::basis_projector(3, 0, 1.0).unwrap(), 0.1, env).unwrap();
        let options = RunOptions::new(pointer_grid(), 0.15);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(run_protective_measurement(&psi, Protection::Scheme(&scheme), &[target], &options, &mut rng).is_err());
    }

    #[test]
    fn unprepared_state_rejected() {
        let (psi, proj) = qutrit();
        let scheme = ProtectionScheme::zeno(proj, 0.1, ZenoMode::Stochastic, &psi).unwrap();
        let other = StateVector::basis(3, 0).unwrap();
        let target = CouplingSpec::impulsive(Operator::basis_projector(3, 0, 1.0).unwrap(), 0.1).unwrap();
        let options = RunOptions::new(pointer_grid(), 0.15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(matches!(
            run_protective_measurement(&other, Protection::Scheme(&scheme), &[target], &options, &mut rng),
            Err(Error::Contract(_))
        ));
    }
}
