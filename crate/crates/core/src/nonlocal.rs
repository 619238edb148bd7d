//! Two-qubit nonlocal states: Bell basis, modular-sum observables and their
//! nondemolition measurement, and the spin encoding of a two-mode state.
//!
//! Basis order is `|↑↑>, |↑↓>, |↓↑>, |↓↓>`; spin values map to bits as
//! `↑ ↦ 0`, `↓ ↦ 1` in either basis.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::operator::apply_matrix;
use crate::hilbert::{Operator, StateVector};
use crate::protection::{ProtectionScheme, ZenoMode};

const TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [BellLabel::PhiPlus, BellLabel::PhiMinus, BellLabel::PsiPlus, BellLabel::PsiMinus];

    /// Modular-sum outcomes `(z, x)` of this Bell state.
    pub fn bits(self) -> (u8, u8) {
        match self {
            BellLabel::PhiPlus => (0, 0),
            BellLabel::PhiMinus => (0, 1),
            BellLabel::PsiPlus => (1, 0),
            BellLabel::PsiMinus => (1, 1),
        }
    }

    pub fn from_bits(bits: (u8, u8)) -> Result<Self> {
        BellLabel::ALL
            .into_iter()
            .find(|l| l.bits() == bits)
            .ok_or_else(|| Error::Contract(format!("{bits:?} are not modular-sum outcomes")))
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BellLabel::PhiPlus => "phi+",
            BellLabel::PhiMinus => "phi-",
            BellLabel::PsiPlus => "psi+",
            BellLabel::PsiMinus => "psi-",
        })
    }
}

#[derive(Clone, Debug)]
pub struct BellBasis {
    states: Vec<(BellLabel, StateVector)>,
}

impl BellBasis {
    pub fn new() -> Self {
        let s = FRAC_1_SQRT_2;
        let make = |v: [f64; 4]| {
            StateVector::from_amplitudes(vec![2, 2], v.iter().map(|&x| C64::from(x)).collect()).expect("normalized Bell vector")
        };
        let states = vec![
            (BellLabel::PhiPlus, make([s, 0.0, 0.0, s])),
            (BellLabel::PhiMinus, make([s, 0.0, 0.0, -s])),
            (BellLabel::PsiPlus, make([0.0, s, s, 0.0])),
            (BellLabel::PsiMinus, make([0.0, s, -s, 0.0])),
        ];
        Self { states }
    }

    pub fn state(&self, label: BellLabel) -> &StateVector {
        &self.states.iter().find(|(l, _)| *l == label).expect("all labels present").1
    }

    pub fn iter(&self) -> impl Iterator<Item = (BellLabel, &StateVector)> {
        self.states.iter().map(|(l, s)| (*l, s))
    }

    /// Bell state with fidelity one to `psi`, if any.
    pub fn identify(&self, psi: &StateVector) -> Result<Option<BellLabel>> {
        for (label, b) in self.iter() {
            if (b.fidelity(psi)? - 1.0).abs() < 1e-10 {
                return Ok(Some(label));
            }
        }
        Ok(None)
    }
}

impl Default for BellBasis {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinBase {
    Z,
    X,
}

/// `(σ^A + σ^B) mod 2` in one spin basis, as a 0/1-valued operator.
#[derive(Clone, Debug)]
pub struct ModularObservable {
    pub base: SpinBase,
    pub operator: Operator,
}

impl ModularObservable {
    /// Projector onto outcome `bit`.
    pub fn projector(&self, bit: u8) -> DMatrix<C64> {
        let m = self.operator.entries().clone();
        if bit == 1 {
            m
        } else {
            DMatrix::identity(4, 4) - m
        }
    }
}

/// Modular sum of the two spins in the chosen basis.
pub fn modular_sum(base: SpinBase) -> ModularObservable {
    let parity = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
        [0.0, 1.0, 1.0, 0.0].iter().map(|&x| C64::from(x)).collect(),
    ));
    let entries = match base {
        SpinBase::Z => parity,
        SpinBase::X => {
            let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0].map(|x| C64::from(x * FRAC_1_SQRT_2)));
            let hh = h.kronecker(&h);
            &hh * parity * &hh
        }
    };
    let operator = Operator::hermitian_symmetrized(entries).expect("modular sum is Hermitian");
    ModularObservable { base, operator }
}

/// Outcome of a nondemolition Bell measurement.
#[derive(Clone, Debug)]
pub struct NondemolitionOutcome {
    pub bits: (u8, u8),
    pub label: BellLabel,
    pub post_state: StateVector,
}

fn check_two_qubits(psi: &StateVector) -> Result<()> {
    if psi.dim() != 4 {
        return Err(Error::Structural(format!("expected a two-qubit state, got dimension {}", psi.dim())));
    }
    Ok(())
}

/// Projective measurement of the z then x modular sums.
pub fn nondemolition_measure<R: Rng + ?Sized>(psi: &StateVector, rng: &mut R) -> Result<NondemolitionOutcome> {
    check_two_qubits(psi)?;
    let mut state = psi.amplitudes().to_vec();
    let mut bits = [0u8; 2];
    for (slot, base) in [SpinBase::Z, SpinBase::X].into_iter().enumerate() {
        let obs = modular_sum(base);
        let branches: Vec<Vec<C64>> = (0..2).map(|b| apply_matrix(&obs.projector(b), &state)).collect();
        let p0: f64 = branches[0].iter().map(|z| z.norm_sqr()).sum();
        let p1: f64 = branches[1].iter().map(|z| z.norm_sqr()).sum();
        let bit = if rng.random::<f64>() * (p0 + p1) < p0 { 0 } else { 1 };
        bits[slot] = bit as u8;
        state = branches[bit].clone();
    }
    let post_state = StateVector::from_amplitudes(vec![2, 2], state)?.normalized()?;
    let bits = (bits[0], bits[1]);
    Ok(NondemolitionOutcome { bits, label: BellLabel::from_bits(bits)?, post_state })
}

/// Every outcome of [`nondemolition_measure`] with its probability and post-state.
pub fn nondemolition_outcomes(psi: &StateVector) -> Result<Vec<(BellLabel, f64, Option<StateVector>)>> {
    check_two_qubits(psi)?;
    let psi = psi.clone().normalized()?;
    BellLabel::ALL
        .into_iter()
        .map(|label| {
            let (bz, bx) = label.bits();
            let pz = modular_sum(SpinBase::Z).projector(bz);
            let px = modular_sum(SpinBase::X).projector(bx);
            let out = apply_matrix(&(px * pz), psi.amplitudes());
            let p: f64 = out.iter().map(|z| z.norm_sqr()).sum();
            let post = if p > TOL * TOL {
                Some(StateVector::from_amplitudes(vec![2, 2], out)?.normalized()?)
            } else {
                None
            };
            Ok((label, p, post))
        })
        .collect()
}

/// `α|↑↑> + β|↓↓>`, the spin encoding of `α|A> + β|B>`.
pub fn swap_mode_to_spins(alpha: C64, beta: C64) -> Result<StateVector> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Contract(format!("|α|² + |β|² = {norm}, expected 1")));
    }
    StateVector::from_amplitudes(vec![2, 2], vec![alpha, C64::new(0.0, 0.0), C64::new(0.0, 0.0), beta])
}

/// Zeno scheme that verifies both modular sums at once.
///
/// The pair is combined into `M_z + 2 M_x`, whose four eigenvalues label the
/// Bell states one to one.
pub fn bell_zeno_scheme(protected: &StateVector, period: f64) -> Result<ProtectionScheme> {
    check_two_qubits(protected)?;
    let joint = modular_sum(SpinBase::Z)
        .operator
        .combine(C64::from(1.0), &modular_sum(SpinBase::X).operator, C64::from(2.0))?;
    let joint = Operator::hermitian_symmetrized(joint.entries().clone())?;
    ProtectionScheme::zeno(joint, period, ZenoMode::Stochastic, protected)
}

/// Disturbance of a two-mode superposition under nondemolition Bell verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceReport {
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    /// Probability and post-state fidelity with the input, per Bell outcome.
    pub outcomes: Vec<(BellLabel, f64, f64)>,
    /// Fidelity with the input averaged over outcomes.
    pub mean_fidelity: f64,
}

pub fn verification_disturbance(alpha: C64, beta: C64) -> Result<DisturbanceReport> {
    let input = swap_mode_to_spins(alpha, beta)?;
    let mut outcomes = Vec::new();
    let mut mean_fidelity = 0.0;
    for (label, p, post) in nondemolition_outcomes(&input)? {
        let f = match &post {
            Some(s) => s.fidelity(&input)?,
            None => 0.0,
        };
        mean_fidelity += p * f;
        outcomes.push((label, p, f));
    }
    Ok(DisturbanceReport { alpha: (alpha.re, alpha.im), beta: (beta.re, beta.im), outcomes, mean_fidelity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak::{couple_weak, CouplingSpec, SystemPointer};
    use crate::pointer::make_pointer;
    use crate::hilbert::Grid1D;
    use crate::protection::{zeno_step, ZenoState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bell_basis_is_orthonormal() {
        let basis = BellBasis::new();
        for (la, a) in basis.iter() {
            for (lb, b) in basis.iter() {
                let ov = a.inner(b).unwrap().norm();
                let expected = if la == lb { 1.0 } else { 0.0 };
                assert!((ov - expected).abs() < TOL);
            }
        }
    }

    #[test]
    fn modular_sum_eigenvalues() {
        let z = modular_sum(SpinBase::Z);
        let up_up = StateVector::from_amplitudes(vec![2, 2], vec![C64::from(1.0), 0.0.into(), 0.0.into(), 0.0.into()]).unwrap();
        let up_down = StateVector::from_amplitudes(vec![2, 2], vec![0.0.into(), C64::from(1.0), 0.0.into(), 0.0.into()]).unwrap();
        assert!(crate::hilbert::expectation(&up_up, &z.operator).unwrap().abs() < TOL);
        assert!((crate::hilbert::expectation(&up_down, &z.operator).unwrap() - 1.0).abs() < TOL);
        let x = modular_sum(SpinBase::X);
        for m in [&z, &x] {
            let spec = m.operator.spectrum().unwrap();
            assert!(spec.values.iter().all(|v| v.abs() < TOL || (v - 1.0).abs() < TOL));
        }
        assert!(z.operator.commutator_norm(&x.operator).unwrap() < TOL);
    }

    #[test]
    fn bell_states_are_joint_eigenstates_with_distinct_labels() {
        let basis = BellBasis::new();
        let z = modular_sum(SpinBase::Z);
        let x = modular_sum(SpinBase::X);
        let mut seen = std::collections::BTreeSet::new();
        for (label, b) in basis.iter() {
            let ez = crate::hilbert::expectation(b, &z.operator).unwrap();
            let ex = crate::hilbert::expectation(b, &x.operator).unwrap();
            assert_eq!((ez.round() as u8, ex.round() as u8), label.bits());
            let zb = z.operator.apply(b).unwrap();
            assert!(zb.iter().zip(b.amplitudes()).all(|(a, c)| (a - c * ez).norm() < TOL));
            seen.insert(label.bits());
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn bell_states_measured_without_demolition() {
        let basis = BellBasis::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (label, b) in basis.iter() {
            let out = nondemolition_measure(b, &mut rng).unwrap();
            assert_eq!(out.label, label);
            assert!((out.post_state.fidelity(b).unwrap() - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn random_states_collapse_to_bell_states_and_repeat() {
        let basis = BellBasis::new();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = StateVector::from_amplitudes(
                vec![2, 2],
                (0..4).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect(),
            )
            .unwrap()
            .normalized()
            .unwrap();
            let first = nondemolition_measure(&psi, &mut rng).unwrap();
            assert_eq!(basis.identify(&first.post_state).unwrap(), Some(first.label));
            let second = nondemolition_measure(&first.post_state, &mut rng).unwrap();
            assert_eq!(second.bits, first.bits);
            assert!((second.post_state.fidelity(&first.post_state).unwrap() - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn measurement_order_does_not_matter() {
        let psi = swap_mode_to_spins(C64::from(0.6), C64::from(0.8)).unwrap();
        let z = modular_sum(SpinBase::Z);
        let x = modular_sum(SpinBase::X);
        for bz in 0..2 {
            for bx in 0..2 {
                let zx = apply_matrix(&(x.projector(bx) * z.projector(bz)), psi.amplitudes());
                let xz = apply_matrix(&(z.projector(bz) * x.projector(bx)), psi.amplitudes());
                assert!(zx.iter().zip(&xz).all(|(a, b)| (a - b).norm() < TOL));
            }
        }
    }

    #[test]
    fn unequal_weights_are_disturbed() {
        let report = verification_disturbance(C64::from(0.6), C64::from(0.8)).unwrap();
        // oracle: the input only overlaps Φ+ and Φ-, with amplitudes (0.6 ± 0.8)/√2
        let p_plus = (0.6f64 + 0.8).powi(2) / 2.0;
        let p_minus = (0.6f64 - 0.8).powi(2) / 2.0;
        let (_, p, f) = report.outcomes[0];
        assert!((p - p_plus).abs() < 1e-12 && (f - p_plus).abs() < 1e-12);
        assert!((report.mean_fidelity - (p_plus * p_plus + p_minus * p_minus)).abs() < 1e-12);
        assert!(report.mean_fidelity < 1.0);
        let equal = verification_disturbance(C64::from(FRAC_1_SQRT_2), C64::from(FRAC_1_SQRT_2)).unwrap();
        assert!((equal.mean_fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_encoding() {
        let s = FRAC_1_SQRT_2;
        let phi = swap_mode_to_spins(C64::from(s), C64::from(s)).unwrap();
        assert!((phi.fidelity(BellBasis::new().state(BellLabel::PhiPlus)).unwrap() - 1.0).abs() < 1e-15);
        let up = swap_mode_to_spins(C64::from(1.0), C64::from(0.0)).unwrap();
        assert_eq!(up.amplitudes()[0], C64::from(1.0));
        let v = swap_mode_to_spins(C64::from(0.6), C64::new(0.0, 0.8)).unwrap();
        assert_eq!(v.amplitudes()[3], C64::new(0.0, 0.8));
        assert!(matches!(swap_mode_to_spins(C64::from(0.6), C64::from(0.6)), Err(Error::Contract(_))));
    }

    #[test]
    fn zeno_verification_protects_phi_plus_during_weak_run() {
        let phi = BellBasis::new().state(BellLabel::PhiPlus).clone();
        let flat = StateVector::new(phi.amplitudes().to_vec()).unwrap();
        let scheme = bell_zeno_scheme(&flat, 1.0).unwrap();
        let ProtectionScheme::Zeno { protected, .. } = &scheme else { unreachable!() };
        let eps = 0.01;
        let delta = 0.1;
        // local spin of the first qubit
        let sz_a = Operator::from_real_diagonal(&[1.0, 1.0, -1.0, -1.0]);
        let coupling = CouplingSpec::impulsive(sz_a, eps).unwrap();
        let pointer = make_pointer(Grid1D::new(96, -1.2, 1.2).unwrap(), delta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut survived = 0;
        for _ in 0..10 {
            let mut sp = SystemPointer::new(&flat, std::slice::from_ref(&pointer)).unwrap();
            let mut ok = true;
            for _ in 0..100 {
                sp = couple_weak(&sp, &coupling, 0, eps).unwrap();
                let (next, outcome) = zeno_step(&ZenoState::Pure(sp.state().clone()), &scheme, &mut rng).unwrap();
                let ZenoState::Pure(next) = next else { unreachable!() };
                sp = SystemPointer::from_parts(next, sp.slots().to_vec()).unwrap();
                if outcome != *protected as i64 {
                    ok = false;
                    break;
                }
            }
            if ok {
                survived += 1;
                assert!(sp.system_fidelity(&flat).unwrap() > 1.0 - 10.0 * eps * eps / (delta * delta));
            }
        }
        assert!(survived > 0);
    }
}
