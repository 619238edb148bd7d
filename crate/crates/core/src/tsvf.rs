//! Pre- and postselected ensembles: two-state vectors, weak values and
//! postselected pointer statistics.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::operator::apply_matrix;
use crate::hilbert::state::inner;
use crate::hilbert::{Operator, StateVector};
use crate::pointer::{make_pointer, PointerReadout, PointerState};
use crate::protection::ProtectionScheme;
use crate::weak::composite::transform_system;
use crate::weak::protocol::continuous_window;
use crate::weak::{evolve_continuous, ContinuousCoupling, CouplingSpec, RunOptions, SystemPointer};

/// Postselection probabilities below this are treated as impossible.
pub const MIN_POSTSELECTION_PROBABILITY: f64 = 1e-300;
/// Idempotency and completeness tolerance for projector families.
pub const PROJECTOR_TOLERANCE: f64 = 1e-10;
/// First-order back-action neglect is flagged above this value of ε²N.
pub const BACKACTION_LIMIT: f64 = 0.01;

/// Smallest |<φ|ψ>| for which a two-state vector is well defined.
pub const MIN_OVERLAP: f64 = 1e-12;

/// Forward-evolving state ψ and backward-evolving state φ.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoStateVector {
    forward: StateVector,
    backward: StateVector,
    overlap: C64,
}

impl TwoStateVector {
    /// Normalizes both states and checks that they are not orthogonal.
    pub fn new(forward: StateVector, backward: StateVector) -> Result<Self> {
        let forward = forward.normalized()?;
        let backward = backward.normalized()?;
        let overlap = backward.inner(&forward)?;
        if overlap.norm() <= MIN_OVERLAP {
            return Err(Error::DegenerateTwoState(overlap.norm()));
        }
        Ok(Self { forward, backward, overlap })
    }

    pub fn forward(&self) -> &StateVector {
        &self.forward
    }

    pub fn backward(&self) -> &StateVector {
        &self.backward
    }

    /// `<φ|ψ>`.
    pub fn overlap(&self) -> C64 {
        self.overlap
    }
}

/// `<φ|A|ψ> / <φ|ψ>`.
pub fn weak_value(a: &Operator, tsv: &TwoStateVector) -> Result<C64> {
    let a_psi = a.apply(tsv.forward())?;
    let num = inner(tsv.backward().amplitudes(), &a_psi);
    Ok(num / tsv.overlap())
}


/// Orthonormal range of a projector: the eigenvectors with eigenvalue one.
pub fn projector_range(p: &Operator) -> Result<Vec<Vec<C64>>> {
    p.require_hermitian("postselection projector")?;
    let spec = p.spectrum()?;
    let mut range = Vec::new();
    for (k, &v) in spec.values.iter().enumerate() {
        if (v - 1.0).abs() < PROJECTOR_TOLERANCE {
            range.push(spec.vectors.column(k).iter().copied().collect());
        } else if v.abs() > PROJECTOR_TOLERANCE {
            return Err(Error::Contract(format!("operator with eigenvalue {v} is not a projector")));
        }
    }
    Ok(range)
}

/// Composite conditioned on a system projector, and the probability of that outcome.
#[derive(Clone, Debug)]
pub struct Postselected {
    pub composite: SystemPointer,
    pub probability: f64,
}

impl Postselected {
    /// Conditional state of a single pointer (the system must have been
    /// postselected onto a pure state).
    pub fn pointer(&self) -> Result<PointerState> {
        self.composite.pointer_state(0)
    }

    pub fn readout(&self, pointer: usize) -> Result<PointerReadout> {
        self.composite.readout(pointer, 0.0)
    }
}

/// `(P ⊗ 1) Φ` renormalized, with probability `|(P ⊗ 1) Φ|²`.
pub fn postselect(composite: &SystemPointer, projector: &Operator) -> Result<Postselected> {
    let d = composite.system_dim();
    if projector.dim() != d {
        return Err(Error::Structural(format!(
            "projector of dimension {} for system of dimension {d}",
            projector.dim()
        )));
    }
    let range = projector_range(projector)?;
    let mut p = DMatrix::<C64>::zeros(d, d);
    for v in &range {
        for i in 0..d {
            for j in 0..d {
                p[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    let mut amps = composite.state().amplitudes().to_vec();
    transform_system(&mut amps, d, &p);
    let probability = amps.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if probability < MIN_POSTSELECTION_PROBABILITY {
        return Err(Error::ImpossiblePostselection(probability));
    }
    Ok(Postselected { composite: composite.with_amplitudes(amps)?, probability })
}

/// Postselection onto the pure state `phi`.
pub fn postselect_state(composite: &SystemPointer, phi: &StateVector) -> Result<Postselected> {
    postselect(composite, &Operator::projector(phi))
}

/// Samples one outcome of a complete projector family with Born weights.
pub fn sample_postselection<R: Rng + ?Sized>(
    composite: &SystemPointer,
    family: &[Operator],
    rng: &mut R,
) -> Result<(usize, Postselected)> {
    let mut outcomes = Vec::with_capacity(family.len());
    for p in family {
        match postselect(composite, p) {
            Ok(o) => outcomes.push(Some(o)),
            Err(Error::ImpossiblePostselection(_)) => outcomes.push(None),
            Err(e) => return Err(e),
        }
    }
    let weights: Vec<f64> = outcomes.iter().map(|o| o.as_ref().map_or(0.0, |o| o.probability)).collect();
    let k = sample_index(&weights, rng)?;
    Ok((k, outcomes[k].take().expect("sampled outcome has weight")))
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NumericalIntegrity("no outcome has weight".into()));
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = k;
            if u < w {
                return Ok(k);
            }
        }
        u -= w;
    }
    Ok(last)
}

/// One bin of a postselected ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubensembleStats {
    pub postselection_label: String,
    /// Trials that ended in this bin.
    pub count: usize,
    /// Probability of this outcome for the full run.
    pub probability: f64,
    /// Probability of the bin under the undisturbed preselected state.
    pub distortion: f64,
    pub times: Vec<f64>,
    /// Conditional pointer mean for coupling stopped at each sample time.
    pub means: Vec<f64>,
    /// Outcome probability for coupling stopped at each sample time.
    pub probabilities: Vec<f64>,
    /// `(time, velocity)` from finite differences of `means`.
    pub pointer_velocity_trace: Vec<(f64, f64)>,
    /// `g(t) Re A_w(t)` with the backward state evolved back from the
    /// postselection; the first-order prediction of the velocity.
    pub predicted_velocity: Vec<f64>,
    pub weak_value_re: Vec<f64>,
    pub weak_value_im: Vec<f64>,
    pub mean_final: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubensembleAnalysis {
    pub times: Vec<f64>,
    /// Pointer mean without postselection.
    pub unconditioned: Vec<f64>,
    /// Probability-weighted mean of the conditional means over every outcome.
    pub aggregate: Vec<f64>,
    pub aggregate_velocity: Vec<(f64, f64)>,
    /// Bins with at least one trial.
    pub bins: Vec<SubensembleStats>,
    /// Labels of bins no trial landed in.
    pub omitted: Vec<String>,
    /// ε²N of the run, with ε the coupling of one integration step.
    pub backaction: f64,
    pub backaction_flag: bool,
}

/// Centered finite differences, one-sided at the ends.
pub fn finite_difference(times: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let n = times.len();
    if n < 2 {
        return times.iter().map(|&t| (t, 0.0)).collect();
    }
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (times[i], (values[b] - values[a]) / (times[b] - times[a]))
        })
        .collect()
}

/// Postselected pointer motion under Hamiltonian protection.
///
/// The coupling is stopped at each sample time `t`, after which the system
/// evolves freely until the end of the schedule `T` and is postselected.
/// Because the system evolution after `t` is known, postselecting `P` at
/// `T` equals postselecting `U(T,t)† P U(T,t)` at `t`, so one coupled run
/// yields every conditional mean exactly. `n_trials` final outcomes are
/// sampled from the full-run probabilities to fill the bin counts.
pub fn subensemble_analysis<R: Rng + ?Sized>(
    psi0: &StateVector,
    scheme: &ProtectionScheme,
    target: &CouplingSpec,
    family: &[(String, Operator)],
    n_trials: usize,
    options: &RunOptions,
    rng: &mut R,
) -> Result<SubensembleAnalysis> {
    let ProtectionScheme::Hamiltonian { dynamics, hamiltonian, .. } = scheme else {
        return Err(Error::Contract(format!("subensemble analysis needs Hermitian protection, got {}", scheme.kind())));
    };
    if dynamics.is_time_dependent() {
        return Err(Error::Contract("subensemble analysis needs static protection".into()));
    }
    if n_trials == 0 || family.is_empty() {
        return Err(Error::Configuration("need at least one trial and one postselection outcome".into()));
    }
    let d = psi0.dim();
    let ranges = family.iter().map(|(_, p)| projector_range(p)).collect::<Result<Vec<_>>>()?;
    check_complete(&ranges, d)?;

    let (t0, t1) = continuous_window(&[target])?;
    let spectrum = hamiltonian.spectrum()?;
    let steps = ((t1 - t0) / options.dt).ceil().max(1.0) as usize;
    let every = (steps / options.trace_samples.max(1)).max(1);
    let pointer = make_pointer(options.pointer_grid, options.delta)?.with_label(target.label());
    let start = SystemPointer::new(psi0, &[pointer])?;
    let couplings = [ContinuousCoupling { coupling: target, pointer: 0 }];
    let a_op = target.observable();

    let mut times = Vec::new();
    let mut unconditioned = Vec::new();
    let mut bin_means = vec![Vec::new(); family.len()];
    let mut bin_probs = vec![Vec::new(); family.len()];
    let mut wv = vec![Vec::new(); family.len()];
    let grid_points = options.pointer_grid.points();
    evolve_continuous(&start, dynamics, &couplings, t0, t1, options.dt, every, |t, sp| {
        times.push(t);
        unconditioned.push(sp.readout(0, t)?.mean);
        let back = spectrum.propagator(-(t1 - t));
        let psi_t = StateVector::new(apply_matrix(&spectrum.propagator(t - t0), psi0.amplitudes()))?;
        let a_psi = a_op.apply(&psi_t)?;
        let rest = sp.rest_dim();
        let amps = sp.state().amplitudes();
        for (k, range) in ranges.iter().enumerate() {
            let mut dist = vec![0.0; rest];
            let mut proj_psi = vec![C64::new(0.0, 0.0); d];
            for v in range {
                let chi = apply_matrix(&back, v);
                for r in 0..rest {
                    let c: C64 = (0..d).map(|i| chi[i].conj() * amps[i * rest + r]).sum();
                    dist[r] += c.norm_sqr();
                }
                let ov = inner(&chi, psi_t.amplitudes());
                for (p, c) in proj_psi.iter_mut().zip(&chi) {
                    *p += c * ov;
                }
            }
            let prob: f64 = dist.iter().sum();
            bin_probs[k].push(prob);
            bin_means[k].push(if prob > 0.0 {
                grid_points.iter().zip(&dist).map(|(x, p)| x * p).sum::<f64>() / prob
            } else {
                0.0
            });
            // generalized weak value <ψ|Π A|ψ> / <ψ|Π|ψ>
            let den = inner(&proj_psi, psi_t.amplitudes());
            let w = if den.norm() > MIN_POSTSELECTION_PROBABILITY { inner(&proj_psi, &a_psi) / den } else { C64::new(f64::NAN, f64::NAN) };
            wv[k].push(w);
        }
        Ok(())
    })?;

    let final_probs: Vec<f64> = bin_probs.iter().map(|p| *p.last().expect("at least one sample")).collect();
    let mut counts = vec![0usize; family.len()];
    for _ in 0..n_trials {
        counts[sample_index(&final_probs, rng)?] += 1;
    }

    let aggregate: Vec<f64> = (0..times.len())
        .map(|s| (0..family.len()).map(|k| bin_probs[k][s] * bin_means[k][s]).sum())
        .collect();
    let mut bins = Vec::new();
    let mut omitted = Vec::new();
    for (k, (label, proj)) in family.iter().enumerate() {
        if counts[k] == 0 {
            omitted.push(label.clone());
            continue;
        }
        let predicted = times
            .iter()
            .zip(&wv[k])
            .map(|(&t, w)| target.rate(t) * w.re)
            .collect();
        bins.push(SubensembleStats {
            postselection_label: label.clone(),
            count: counts[k],
            probability: final_probs[k],
            distortion: crate::hilbert::expectation(psi0, proj)?,
            pointer_velocity_trace: finite_difference(&times, &bin_means[k]),
            predicted_velocity: predicted,
            weak_value_re: wv[k].iter().map(|w| w.re).collect(),
            weak_value_im: wv[k].iter().map(|w| w.im).collect(),
            mean_final: *bin_means[k].last().expect("at least one sample"),
            means: bin_means[k].clone(),
            probabilities: bin_probs[k].clone(),
            times: times.clone(),
        });
    }
    let eps = target.total_strength() / steps as f64;
    let backaction = eps * eps * steps as f64;
    Ok(SubensembleAnalysis {
        aggregate_velocity: finite_difference(&times, &aggregate),
        times,
        unconditioned,
        aggregate,
        bins,
        omitted,
        backaction,
        backaction_flag: backaction > BACKACTION_LIMIT,
    })
}

fn check_complete(ranges: &[Vec<Vec<C64>>], d: usize) -> Result<()> {
    let mut sum = DMatrix::<C64>::zeros(d, d);
    for v in ranges.iter().flatten() {
        for i in 0..d {
            for j in 0..d {
                sum[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    let defect = (sum - DMatrix::<C64>::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if defect > PROJECTOR_TOLERANCE.sqrt() {
        return Err(Error::Configuration(format!(
            "postselection family is not a resolution of the identity (defect {defect:e})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn weak_value_of_projector_on_a() {
        let psi = StateVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        let phi = StateVector::basis(2, 0).unwrap();
        let pa = Operator::from_real_diagonal(&[1.0, 0.0]);
        let w = weak_value(&pa, &TwoStateVector::new(psi, phi).unwrap()).unwrap();
        assert!((w - C64::from(1.0)).norm() < 1e-15);
    }

    #[test]
    fn anomalous_weak_value_is_two() {
        // hand evaluation: <φ|P_A|ψ> = (2/√5)(1/√2), <φ|ψ> = (2 - 1)/(√5 √2)
        let psi = StateVector::from_real(&[1.0, 1.0]).unwrap();
        let phi = StateVector::from_real(&[2.0, -1.0]).unwrap();
        let pa = Operator::from_real_diagonal(&[1.0, 0.0]);
        let w = weak_value(&pa, &TwoStateVector::new(psi, phi).unwrap()).unwrap();
        assert!((w - C64::from(2.0)).norm() < 1e-14);
    }

    #[test]
    fn orthogonal_pair_rejected() {
        let err = TwoStateVector::new(StateVector::basis(2, 0).unwrap(), StateVector::basis(2, 1).unwrap());
        assert!(matches!(err, Err(Error::DegenerateTwoState(_))));
    }

    use crate::hilbert::Grid1D;
    use crate::protection::{Envelope, SystemDynamics};
    use crate::weak::couple_weak;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pointer() -> PointerState {
        make_pointer(Grid1D::new(128, -1.0, 1.0).unwrap(), 0.1).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, d: usize) -> StateVector {
        StateVector::new((0..d).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()).unwrap()
    }

    fn random_observable(rng: &mut ChaCha8Rng, d: usize) -> Operator {
        let m = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        Operator::hermitian_symmetrized(&m + m.adjoint()).unwrap()
    }

    #[test]
    fn identity_postselection_keeps_everything() {
        let sys = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let coupling = CouplingSpec::impulsive(Operator::from_real_diagonal(&[1.0, -1.0]), 0.05).unwrap();
        let sp = couple_weak(&SystemPointer::new(&sys, &[pointer()]).unwrap(), &coupling, 0, 0.05).unwrap();
        let out = postselect(&sp, &Operator::identity(2)).unwrap();
        assert!((out.probability - 1.0).abs() < 1e-12);
        assert!((out.readout(0).unwrap().mean - sp.readout(0, 0.0).unwrap().mean).abs() < 1e-14);
    }

    #[test]
    fn product_state_pointer_is_unchanged() {
        let sys = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let p = pointer();
        let sp = SystemPointer::new(&sys, std::slice::from_ref(&p)).unwrap();
        let phi = StateVector::from_real(&[1.0, -0.3]).unwrap();
        let out = postselect_state(&sp, &phi).unwrap();
        assert!((out.pointer().unwrap().fidelity(&p).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            postselect_state(&SystemPointer::new(&StateVector::basis(2, 0).unwrap(), &[p]).unwrap(), &StateVector::basis(2, 1).unwrap()),
            Err(Error::ImpossiblePostselection(_))
        ));
    }

    #[test]
    fn weak_value_equals_expectation_when_pre_equals_post() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let psi = random_state(&mut rng, 4);
            let a = random_observable(&mut rng, 4);
            let w = weak_value(&a, &TwoStateVector::new(psi.clone(), psi.clone()).unwrap()).unwrap();
            assert!((w - C64::from(crate::hilbert::expectation(&psi, &a).unwrap())).norm() < 1e-12);
        }
    }

    #[test]
    fn conditional_pointer_follows_weak_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let eps = 1e-3;
        let delta = 0.1;
        for _ in 0..10 {
            let psi = random_state(&mut rng, 3);
            let phi = random_state(&mut rng, 3);
            let a = random_observable(&mut rng, 3);
            let w = weak_value(&a, &TwoStateVector::new(psi.clone(), phi.clone()).unwrap()).unwrap();
            let coupling = CouplingSpec::impulsive(a, eps).unwrap();
            let sp = couple_weak(&SystemPointer::new(&psi, &[pointer()]).unwrap(), &coupling, 0, eps).unwrap();
            let out = postselect_state(&sp, &phi).unwrap();
            let mean = out.readout(0).unwrap().mean;
            let p_mean = out.composite.momentum_mean(0).unwrap();
            let scale = 1.0 + w.norm_sqr();
            assert!((mean - eps * w.re).abs() < 50.0 * eps * eps * scale, "{mean} vs {}", eps * w.re);
            assert!((p_mean - eps * w.im / (2.0 * delta * delta)).abs() < 0.05 * eps * scale / (delta * delta), "{p_mean} vs {w}");
        }
    }

    #[test]
    fn weak_value_linearity_and_resolution_of_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let psi = random_state(&mut rng, 5);
        let phi = random_state(&mut rng, 5);
        let tsv = TwoStateVector::new(psi, phi).unwrap();
        let a = random_observable(&mut rng, 5);
        let b = random_observable(&mut rng, 5);
        let combo = a.combine(C64::from(0.7), &b, C64::from(-1.3)).unwrap();
        let lhs = weak_value(&combo, &tsv).unwrap();
        let rhs = weak_value(&a, &tsv).unwrap() * 0.7 - weak_value(&b, &tsv).unwrap() * 1.3;
        assert!((lhs - rhs).norm() < 1e-12);
        let total: C64 = (0..5).map(|i| weak_value(&Operator::basis_projector(5, i, 1.0).unwrap(), &tsv).unwrap()).sum();
        assert!((total - C64::from(1.0)).norm() < 1e-10);
    }

    #[test]
    fn total_probability_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let psi = random_state(&mut rng, 4);
        let a = random_observable(&mut rng, 4);
        let coupling = CouplingSpec::impulsive(a, 0.02).unwrap();
        let sp = couple_weak(&SystemPointer::new(&psi, &[pointer()]).unwrap(), &coupling, 0, 0.02).unwrap();
        let basis = random_observable(&mut rng, 4).spectrum().unwrap();
        let weighted: f64 = (0..4)
            .map(|k| {
                let out = postselect_state(&sp, &basis.eigenvector(k)).unwrap();
                out.probability * out.readout(0).unwrap().mean
            })
            .sum();
        assert!((weighted - sp.readout(0, 0.0).unwrap().mean).abs() < 1e-10);
    }

    #[test]
    fn sampling_respects_born_weights() {
        let sys = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let sp = SystemPointer::new(&sys, &[pointer()]).unwrap();
        let family = [Operator::basis_projector(2, 0, 1.0).unwrap(), Operator::basis_projector(2, 1, 1.0).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let hits = (0..2000).filter(|_| sample_postselection(&sp, &family, &mut rng).unwrap().0 == 0).count();
        // 0.36 ± 3σ
        assert!((hits as f64 / 2000.0 - 0.36).abs() < 3.0 * (0.36f64 * 0.64 / 2000.0).sqrt());
    }

    #[test]
    fn preselected_subensemble_moves_uniformly() {
        let h = Operator::from_real_diagonal(&[0.0, 1.0, 2.3]);
        let scheme = ProtectionScheme::hamiltonian(SystemDynamics::Dense(h), 0).unwrap();
        let psi = scheme.protected_state().unwrap();
        let a = Operator::hermitian(DMatrix::from_fn(3, 3, |i, j| C64::from(if i == j { 0.5 + i as f64 } else { 0.1 }))).unwrap();
        let env = Envelope::new(0.0, 20.0, 0.0).unwrap();
        let target = CouplingSpec::continuous(a, 0.3, env).unwrap();
        let pre = Operator::projector(&psi);
        let family = vec![
            ("pre".to_string(), pre.clone()),
            ("rest".to_string(), Operator::identity(3).combine(C64::from(1.0), &pre, C64::from(-1.0)).unwrap()),
        ];
        let mut options = RunOptions::new(Grid1D::new(96, -1.2, 1.8).unwrap(), 0.15);
        options.dt = 0.02;
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let out = subensemble_analysis(&psi, &scheme, &target, &family, 100, &options, &mut rng).unwrap();
        for (x, y) in out.aggregate.iter().zip(&out.unconditioned) {
            assert!((x - y).abs() < 1e-10);
        }
        let bin = &out.bins[0];
        assert_eq!(bin.postselection_label, "pre");
        let v: Vec<f64> = bin.pointer_velocity_trace.iter().map(|p| p.1).collect();
        let mean_v = v.iter().sum::<f64>() / v.len() as f64;
        assert!(v.iter().all(|x| (x - mean_v).abs() < 0.05 * mean_v.abs()), "{v:?}");
        assert!((bin.mean_final - 0.3 * 0.5).abs() < 5e-3, "{}", bin.mean_final);
        assert!(!out.backaction_flag);
    }

    #[test]
    fn incomplete_family_rejected() {
        let h = Operator::from_real_diagonal(&[0.0, 1.0]);
        let scheme = ProtectionScheme::hamiltonian(SystemDynamics::Dense(h), 0).unwrap();
        let psi = scheme.protected_state().unwrap();
        let target = CouplingSpec::continuous(Operator::from_real_diagonal(&[1.0, 0.0]), 0.1, Envelope::new(0.0, 1.0, 0.0).unwrap()).unwrap();
        let family = vec![("a".to_string(), Operator::basis_projector(2, 0, 1.0).unwrap())];
        let options = RunOptions::new(Grid1D::new(96, -1.2, 1.8).unwrap(), 0.15);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        assert!(subensemble_analysis(&psi, &scheme, &target, &family, 10, &options, &mut rng).is_err());
    }
}
