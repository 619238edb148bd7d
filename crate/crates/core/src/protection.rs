//! State protection: Zeno verification, gapped Hamiltonians, and the
//! non-Hermitian effective Hamiltonian that protects a two-state vector.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::operator::{apply_matrix, DEGENERACY_TOLERANCE};
use crate::hilbert::{DensityMatrix, GridHamiltonian, Operator, Spectrum, StateVector};
use crate::tsvf::TwoStateVector;

/// Probability below which a projected branch is considered empty.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZenoMode {
    /// Sample an outcome with Born probabilities and collapse.
    Stochastic,
    /// Apply the measurement without reading it (dephasing channel).
    Nonselective,
}

/// Dynamics of the protected system between or during couplings.
#[derive(Clone, Debug)]
pub enum SystemDynamics {
    /// Kinetic plus potential on a grid; propagated with split-operator kernels.
    Grid(GridHamiltonian),
    /// Static dense Hamiltonian.
    Dense(Operator),
}

impl SystemDynamics {
    pub fn dim(&self) -> usize {
        match self {
            SystemDynamics::Grid(h) => h.grid().n_points(),
            SystemDynamics::Dense(h) => h.dim(),
        }
    }

    pub fn operator_at(&self, t: f64) -> Result<Operator> {
        match self {
            SystemDynamics::Grid(h) => h.operator_at(t),
            SystemDynamics::Dense(h) => Ok(h.clone()),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, SystemDynamics::Grid(h) if h.is_time_dependent())
    }
}

/// Orthonormal basis of one eigenspace of a Zeno observable.
#[derive(Clone, Debug)]
pub struct ZenoSpace {
    pub value: f64,
    pub basis: Vec<Vec<C64>>,
}

#[derive(Clone, Debug)]
pub enum ProtectionScheme {
    Zeno {
        observable: Operator,
        period: f64,
        mode: ZenoMode,
        /// Index (ascending eigenvalue order) of the eigenspace holding the protected state.
        protected: usize,
        spaces: Vec<ZenoSpace>,
    },
    Hamiltonian {
        dynamics: SystemDynamics,
        /// Hamiltonian at t = 0.
        hamiltonian: Operator,
        protected_index: usize,
        gap: f64,
    },
    EffectiveComplex {
        h_eff: Operator,
    },
}

impl ProtectionScheme {
    /// Zeno protection of `state` by frequent measurement of `observable`.
    ///
    /// `state` must be a nondegenerate eigenvector of `observable`.
    pub fn zeno(observable: Operator, period: f64, mode: ZenoMode, state: &StateVector) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Configuration(format!("Zeno period must be positive, got {period}")));
        }
        let spectrum = observable.spectrum()?;
        if spectrum.dim() != state.dim() {
            return Err(Error::Structural(format!(
                "Zeno observable of dimension {} for state of dimension {}",
                spectrum.dim(),
                state.dim()
            )));
        }
        let protected = spectrum.eigenspace_of(state, 1e-9).ok_or_else(|| {
            Error::ProtectionImpossible("state is not an eigenstate of the Zeno observable".into())
        })?;
        let spaces: Vec<ZenoSpace> = spectrum
            .eigenspaces()
            .into_iter()
            .map(|s| ZenoSpace {
                value: s.value,
                basis: s.columns.iter().map(|&c| spectrum.vectors.column(c).iter().copied().collect()).collect(),
            })
            .collect();
        if spaces[protected].basis.len() != 1 {
            return Err(Error::ProtectionImpossible(format!(
                "protected eigenvalue {} is {}-fold degenerate",
                spaces[protected].value,
                spaces[protected].basis.len()
            )));
        }
        Ok(ProtectionScheme::Zeno { observable, period, mode, protected, spaces })
    }

    /// Hamiltonian protection of eigenstate `protected_index` (ascending energy).
    pub fn hamiltonian(dynamics: SystemDynamics, protected_index: usize) -> Result<Self> {
        let hamiltonian = dynamics.operator_at(0.0)?;
        let gap = compute_gap(&hamiltonian, protected_index)?;
        Ok(ProtectionScheme::Hamiltonian { dynamics, hamiltonian, protected_index, gap })
    }

    /// Like [`ProtectionScheme::hamiltonian`] but also checks a declared gap.
    pub fn hamiltonian_with_gap(dynamics: SystemDynamics, protected_index: usize, declared_gap: f64) -> Result<Self> {
        let scheme = Self::hamiltonian(dynamics, protected_index)?;
        if let ProtectionScheme::Hamiltonian { gap, .. } = &scheme {
            if (gap - declared_gap).abs() > 1e-10 {
                return Err(Error::Configuration(format!("declared gap {declared_gap} but spectrum gives {gap}")));
            }
        }
        Ok(scheme)
    }

    pub fn effective_complex(h_eff: Operator) -> Self {
        ProtectionScheme::EffectiveComplex { h_eff }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProtectionScheme::Zeno { .. } => "zeno",
            ProtectionScheme::Hamiltonian { .. } => "hamiltonian",
            ProtectionScheme::EffectiveComplex { .. } => "effective_complex",
        }
    }

    /// Protected state of a Zeno or Hamiltonian scheme.
    pub fn protected_state(&self) -> Result<StateVector> {
        match self {
            ProtectionScheme::Zeno { spaces, protected, .. } => {
                let v = spaces[*protected].basis[0].clone();
                StateVector::new(v)
            }
            ProtectionScheme::Hamiltonian { hamiltonian, protected_index, .. } => {
                Ok(crate::hilbert::fix_phase(hamiltonian.spectrum()?.eigenvector(*protected_index)))
            }
            ProtectionScheme::EffectiveComplex { .. } => {
                Err(Error::Contract("an effective complex scheme protects a two-state vector, not a single state".into()))
            }
        }
    }

    pub fn system_dim(&self) -> usize {
        match self {
            ProtectionScheme::Zeno { observable, .. } => observable.dim(),
            ProtectionScheme::Hamiltonian { hamiltonian, .. } => hamiltonian.dim(),
            ProtectionScheme::EffectiveComplex { h_eff } => h_eff.dim(),
        }
    }
}

/// Minimum distance from eigenvalue `index` to the rest of the spectrum.
pub fn compute_gap(h: &Operator, index: usize) -> Result<f64> {
    let spec = h.spectrum()?;
    gap_in_spectrum(&spec, index)
}

pub(crate) fn gap_in_spectrum(spec: &Spectrum, index: usize) -> Result<f64> {
    if index >= spec.dim() {
        return Err(Error::Structural(format!("eigenstate index {index} out of range for dimension {}", spec.dim())));
    }
    if spec.dim() == 1 {
        return Err(Error::ProtectionImpossible("one-dimensional space has no gap".into()));
    }
    let e = spec.values[index];
    let gap = spec
        .values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != index)
        .map(|(_, &v)| (v - e).abs())
        .fold(f64::INFINITY, f64::min);
    if gap <= DEGENERACY_TOLERANCE {
        return Err(Error::ProtectionImpossible(format!("eigenvalue {e} at index {index} is degenerate")));
    }
    Ok(gap)
}

/// Pure or mixed state handed to a Zeno verification.
#[derive(Clone, Debug)]
pub enum ZenoState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

/// Times and outcomes of the verification measurements of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ZenoOutcomeLog {
    pub times: Vec<f64>,
    pub outcomes: Vec<i64>,
    pub survived: bool,
    pub protected: i64,
}

impl ZenoOutcomeLog {
    pub fn new(protected: usize) -> Self {
        Self { times: Vec::new(), outcomes: Vec::new(), survived: true, protected: protected as i64 }
    }

    pub fn record(&mut self, time: f64, outcome: i64) {
        self.times.push(time);
        self.outcomes.push(outcome);
        if outcome != self.protected {
            self.survived = false;
        }
    }
}

/// Components `<v|_sys Φ` of a composite amplitude vector, system factor first.
fn project_components(v: &[C64], amps: &[C64], rest: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); rest];
    for (i, &vi) in v.iter().enumerate() {
        let w = vi.conj();
        if w == C64::new(0.0, 0.0) {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(&amps[i * rest..(i + 1) * rest]) {
            *o += w * a;
        }
    }
    out
}

fn space_weight(space: &ZenoSpace, amps: &[C64], rest: usize) -> (f64, Vec<Vec<C64>>) {
    let comps: Vec<Vec<C64>> = space.basis.iter().map(|v| project_components(v, amps, rest)).collect();
    let w = comps.iter().flatten().map(|z| z.norm_sqr()).sum();
    (w, comps)
}

fn assemble(space: &ZenoSpace, comps: &[Vec<C64>], d: usize, rest: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); d * rest];
    for (v, c) in space.basis.iter().zip(comps) {
        for (i, &vi) in v.iter().enumerate() {
            if vi == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, &cj) in out[i * rest..(i + 1) * rest].iter_mut().zip(c) {
                *o += vi * cj;
            }
        }
    }
    out
}

/// One verification measurement of the Zeno observable on the system factor
/// (first tensor factor) of `state`.
///
/// Stochastic mode samples an eigenspace and collapses onto it; the outcome
/// is its index. Nonselective mode returns the dephased mixed state and
/// outcome `-1`.
pub fn zeno_step<R: Rng + ?Sized>(state: &ZenoState, scheme: &ProtectionScheme, rng: &mut R) -> Result<(ZenoState, i64)> {
    let ProtectionScheme::Zeno { mode, protected, spaces, observable, .. } = scheme else {
        return Err(Error::Contract(format!("zeno_step needs a Zeno scheme, got {}", scheme.kind())));
    };
    let d = observable.dim();
    match (mode, state) {
        (ZenoMode::Stochastic, ZenoState::Pure(psi)) => {
            let (next, outcome) = zeno_collapse(psi, spaces, *protected, d, rng)?;
            Ok((ZenoState::Pure(next), outcome))
        }
        (ZenoMode::Stochastic, ZenoState::Mixed(_)) => Err(Error::Contract(
            "stochastic Zeno verification needs a pure state".into(),
        )),
        (ZenoMode::Nonselective, ZenoState::Pure(psi)) => {
            Ok((ZenoState::Mixed(dephase(&DensityMatrix::from_pure(psi), spaces, d)?), -1))
        }
        (ZenoMode::Nonselective, ZenoState::Mixed(rho)) => Ok((ZenoState::Mixed(dephase(rho, spaces, d)?), -1)),
    }
}

fn zeno_collapse<R: Rng + ?Sized>(
    psi: &StateVector,
    spaces: &[ZenoSpace],
    protected: usize,
    d: usize,
    rng: &mut R,
) -> Result<(StateVector, i64)> {
    if psi.dims().first() != Some(&d) {
        return Err(Error::Structural(format!(
            "Zeno observable of dimension {d} does not match system factor of {:?}",
            psi.dims()
        )));
    }
    let rest = psi.dim() / d;
    let amps = psi.amplitudes();
    let total = psi.norm() * psi.norm();
    let u: f64 = rng.random::<f64>() * total;

    // protected branch first: it is almost always the one taken
    let (w_prot, comps) = space_weight(&spaces[protected], amps, rest);
    let mut chosen = None;
    if u < w_prot {
        chosen = Some((protected, w_prot, comps));
    } else {
        let mut acc = w_prot;
        let mut last = None;
        for (m, space) in spaces.iter().enumerate().filter(|&(m, _)| m != protected) {
            let (w, c) = space_weight(space, amps, rest);
            acc += w;
            if w > 0.0 {
                last = Some((m, w, c.clone()));
            }
            if u < acc && w > 0.0 {
                chosen = Some((m, w, c));
                break;
            }
        }
        // rounding can leave u just above the accumulated weight
        if chosen.is_none() {
            chosen = last;
        }
    }
    let (m, w, comps) = chosen.ok_or_else(|| Error::NumericalIntegrity("no measurement branch has weight".into()))?;
    if w / total < MIN_BRANCH_PROBABILITY {
        return Err(Error::NumericalIntegrity(format!("sampled branch probability {:e}", w / total)));
    }
    let out = assemble(&spaces[m], &comps, d, rest);
    let next = StateVector::from_amplitudes(psi.dims().to_vec(), out)?.normalized()?;
    Ok((next, m as i64))
}

fn dephase(rho: &DensityMatrix, spaces: &[ZenoSpace], d: usize) -> Result<DensityMatrix> {
    let n = rho.dim();
    if !n.is_multiple_of(d) {
        return Err(Error::Structural(format!("density matrix of dimension {n} has no system factor of dimension {d}")));
    }
    let rest = n / d;
    let mut out = DMatrix::<C64>::zeros(n, n);
    for space in spaces {
        let mut p = DMatrix::<C64>::zeros(d, d);
        for v in &space.basis {
            for i in 0..d {
                for j in 0..d {
                    p[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
        let big = p.kronecker(&DMatrix::<C64>::identity(rest, rest));
        out += &big * rho.entries() * &big;
    }
    Ok(rho.map_entries(|_| out))
}

/// Smooth switching function: `sin²` ramps of width `ramp` at both ends of
/// `[t_on, t_off]`, one in between, zero outside.
pub fn adiabatic_envelope(t: f64, t_on: f64, t_off: f64, ramp: f64) -> Result<f64> {
    Envelope::new(t_on, t_off, ramp).map(|e| e.value(t))
}

/// Validated switching window; see [`adiabatic_envelope`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub t_on: f64,
    pub t_off: f64,
    pub ramp: f64,
}

impl Envelope {
    pub fn new(t_on: f64, t_off: f64, ramp: f64) -> Result<Self> {
        if !(ramp >= 0.0) || !(t_on < t_off) || t_on + ramp > t_off - ramp {
            return Err(Error::Configuration(format!(
                "invalid switching window: t_on = {t_on}, t_off = {t_off}, ramp = {ramp}"
            )));
        }
        Ok(Self { t_on, t_off, ramp })
    }

    pub fn value(&self, t: f64) -> f64 {
        use std::f64::consts::FRAC_PI_2;
        if t <= self.t_on || t >= self.t_off {
            return 0.0;
        }
        if t < self.t_on + self.ramp {
            (FRAC_PI_2 * (t - self.t_on) / self.ramp).sin().powi(2)
        } else if t > self.t_off - self.ramp {
            (FRAC_PI_2 * (self.t_off - t) / self.ramp).sin().powi(2)
        } else {
            1.0
        }
    }

    /// Exact time integral of the envelope.
    pub fn integral(&self) -> f64 {
        self.t_off - self.t_on - self.ramp
    }
}

/// Forward state under `exp(-i H t)` and backward state under the
/// backward-in-time propagation `<φ| exp(-i H t)`, i.e. the ket
/// `exp(+i H† t) |φ>`, both renormalized step by step.
pub fn evolve_two_state(tsv: &TwoStateVector, scheme: &ProtectionScheme, t: f64) -> Result<TwoStateVector> {
    let ProtectionScheme::EffectiveComplex { h_eff } = scheme else {
        return Err(Error::Contract(format!("evolve_two_state needs an effective complex scheme, got {}", scheme.kind())));
    };
    if h_eff.dim() != tsv.forward().dim() {
        return Err(Error::Structural("H_eff dimension does not match the two-state vector".into()));
    }
    if t == 0.0 {
        return Ok(tsv.clone());
    }
    let scale = h_eff.entries().iter().map(|z| z.norm()).sum::<f64>().max(1e-12);
    let steps = ((t.abs() * scale).ceil() as usize).max(1);
    let dt = t / steps as f64;
    let fwd = (h_eff.entries() * C64::new(0.0, -dt)).exp();
    let bwd = (h_eff.entries().adjoint() * C64::new(0.0, dt)).exp();
    let mut psi = tsv.forward().amplitudes().to_vec();
    let mut phi = tsv.backward().amplitudes().to_vec();
    for _ in 0..steps {
        psi = normalize_vec(apply_matrix(&fwd, &psi))?;
        phi = normalize_vec(apply_matrix(&bwd, &phi))?;
    }
    TwoStateVector::new(StateVector::new(psi)?, StateVector::new(phi)?)
}

fn normalize_vec(v: Vec<C64>) -> Result<Vec<C64>> {
    let n = crate::hilbert::state::l2_norm(&v);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::NumericalIntegrity(format!("non-Hermitian step produced norm {n}")));
    }
    Ok(v.into_iter().map(|z| z / n).collect())
}

/// Non-Hermitian `H_eff` with right eigenvector `forward` and left
/// eigenvector `backward`, both for eigenvalue `values[0]`.
///
/// The other right eigenvectors span the orthogonal complement of
/// `backward`, so `backward` is the biorthogonal partner of `forward`. For
/// the pair to be protected `values[0]` must have the largest imaginary part.
pub fn biorthogonal_h_eff(forward: &StateVector, backward: &StateVector, values: &[C64]) -> Result<Operator> {
    let d = forward.dim();
    if backward.dim() != d || values.len() != d {
        return Err(Error::Structural(format!(
            "forward dimension {d}, backward dimension {}, {} eigenvalues",
            backward.dim(),
            values.len()
        )));
    }
    let psi = forward.clone().normalized()?;
    let phi = backward.clone().normalized()?;
    let overlap = phi.inner(&psi)?.norm();
    if overlap < crate::tsvf::MIN_OVERLAP {
        return Err(Error::DegenerateTwoState(overlap));
    }
    // Gram-Schmidt of the standard basis against φ
    let mut complement: Vec<Vec<C64>> = Vec::with_capacity(d - 1);
    let mut taken: Vec<Vec<C64>> = vec![phi.amplitudes().to_vec()];
    for k in 0..d {
        let mut v = vec![C64::new(0.0, 0.0); d];
        v[k] = C64::new(1.0, 0.0);
        for u in &taken {
            let c = crate::hilbert::state::inner(u, &v);
            for (x, y) in v.iter_mut().zip(u) {
                *x -= c * y;
            }
        }
        let n = crate::hilbert::state::l2_norm(&v);
        if n > 1e-6 {
            let v: Vec<C64> = v.into_iter().map(|z| z / n).collect();
            taken.push(v.clone());
            complement.push(v);
        }
        if complement.len() == d - 1 {
            break;
        }
    }
    let mut r = DMatrix::<C64>::zeros(d, d);
    r.set_column(0, &nalgebra::DVector::from_column_slice(psi.amplitudes()));
    for (j, v) in complement.iter().enumerate() {
        r.set_column(j + 1, &nalgebra::DVector::from_column_slice(v));
    }
    let inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalIntegrity("eigenvector matrix is singular".into()))?;
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values));
    Operator::general(r * diag * inv)
}

/// Unitary rotating `protected` towards the orthonormal `partner` so that a
/// subsequent verification fails with probability exactly `failure`.
pub fn failure_rotation(protected: &StateVector, partner: &StateVector, failure: f64) -> Result<DMatrix<C64>> {
    if !(0.0..=1.0).contains(&failure) {
        return Err(Error::Configuration(format!("failure probability {failure} outside [0, 1]")));
    }
    let ov = protected.inner(partner)?;
    if ov.norm() > 1e-12 {
        return Err(Error::Contract("partner must be orthogonal to the protected state".into()));
    }
    let d = protected.dim();
    let theta = failure.sqrt().asin();
    let (c, s) = (theta.cos(), theta.sin());
    let a = nalgebra::DVector::from_column_slice(protected.amplitudes()) / C64::from(protected.norm());
    let b = nalgebra::DVector::from_column_slice(partner.amplitudes()) / C64::from(partner.norm());
    let pa = &a * a.adjoint();
    let pb = &b * b.adjoint();
    let rest = DMatrix::<C64>::identity(d, d) - &pa - &pb;
    // real rotation in the (a, b) plane, identity elsewhere
    let rot = pa * C64::from(c) + pb * C64::from(c) + (&b * a.adjoint()) * C64::from(s) - (&a * b.adjoint()) * C64::from(s);
    Ok(rest + rot)
}

/// One Zeno run in which every coupling disturbs the protected state so that
/// the following verification fails with probability `failure`; `steps`
/// verifications in total.
pub fn disturbed_zeno_run<R: Rng + ?Sized>(
    scheme: &ProtectionScheme,
    disturbance: &DMatrix<C64>,
    steps: usize,
    rng: &mut R,
) -> Result<ZenoOutcomeLog> {
    let ProtectionScheme::Zeno { protected, period, .. } = scheme else {
        return Err(Error::Contract("disturbed_zeno_run needs a Zeno scheme".into()));
    };
    let mut log = ZenoOutcomeLog::new(*protected);
    let mut psi = scheme.protected_state()?;
    for k in 0..steps {
        let kicked = StateVector::from_amplitudes(psi.dims().to_vec(), apply_matrix(disturbance, psi.amplitudes()))?;
        let (next, outcome) = zeno_step(&ZenoState::Pure(kicked), scheme, rng)?;
        log.record((k + 1) as f64 * period, outcome);
        let ZenoState::Pure(next) = next else { unreachable!("stochastic step returns a pure state") };
        psi = next;
    }
    Ok(log)
}

/// Probability that all `steps` verifications of [`disturbed_zeno_run`]
/// succeed, computed by propagating the surviving branch.
pub fn survival_probability(scheme: &ProtectionScheme, disturbance: &DMatrix<C64>, steps: usize) -> Result<f64> {
    let ProtectionScheme::Zeno { protected, spaces, .. } = scheme else {
        return Err(Error::Contract("survival_probability needs a Zeno scheme".into()));
    };
    let v = &spaces[*protected].basis[0];
    let mut psi = scheme.protected_state()?.amplitudes().to_vec();
    let mut survival = 1.0;
    for _ in 0..steps {
        let kicked = apply_matrix(disturbance, &psi);
        let amp = crate::hilbert::state::inner(v, &kicked);
        survival *= amp.norm_sqr();
        psi = v.iter().map(|&x| x * amp / amp.norm()).collect();
    }
    Ok(survival)
}

/// Zeno protection against a constant drive: evolve under `drive` for one
/// period, verify, repeat until `total_time`.
pub fn zeno_under_drive<R: Rng + ?Sized>(
    scheme: &ProtectionScheme,
    drive: &Operator,
    total_time: f64,
    rng: &mut R,
) -> Result<ZenoOutcomeLog> {
    let ProtectionScheme::Zeno { protected, period, .. } = scheme else {
        return Err(Error::Contract("zeno_under_drive needs a Zeno scheme".into()));
    };
    let steps = (total_time / period).round().max(1.0) as usize;
    let dt = total_time / steps as f64;
    let u = drive.spectrum()?.propagator(dt);
    let mut log = ZenoOutcomeLog::new(*protected);
    let mut psi = scheme.protected_state()?;
    for k in 0..steps {
        let evolved = StateVector::from_amplitudes(psi.dims().to_vec(), apply_matrix(&u, psi.amplitudes()))?;
        let (next, outcome) = zeno_step(&ZenoState::Pure(evolved), scheme, rng)?;
        log.record((k + 1) as f64 * dt, outcome);
        if let ZenoState::Pure(next) = next {
            psi = next;
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{tensor, Grid1D};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_scheme() -> ProtectionScheme {
        let up = StateVector::basis(2, 0).unwrap();
        ProtectionScheme::zeno(Operator::projector(&up), 1.0, ZenoMode::Stochastic, &up).unwrap()
    }

    #[test]
    fn eigenstate_survives_unchanged() {
        let scheme = qubit_scheme();
        let ProtectionScheme::Zeno { protected, .. } = &scheme else { unreachable!() };
        let psi = tensor(&StateVector::basis(2, 0).unwrap(), &StateVector::from_real(&[0.3, 0.4, -0.2]).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (out, outcome) = zeno_step(&ZenoState::Pure(psi.clone()), &scheme, &mut rng).unwrap();
            assert_eq!(outcome, *protected as i64);
            let ZenoState::Pure(out) = out else { panic!() };
            assert!((out.fidelity(&psi).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_protected_level_rejected() {
        let psi = StateVector::basis(3, 0).unwrap();
        let obs = Operator::from_real_diagonal(&[1.0, 1.0, 0.0]);
        assert!(matches!(
            ProtectionScheme::zeno(obs, 1.0, ZenoMode::Stochastic, &psi),
            Err(Error::ProtectionImpossible(_))
        ));
        let not_eigen = StateVector::from_real(&[1.0, 0.0, 1.0]).unwrap();
        assert!(ProtectionScheme::zeno(Operator::from_real_diagonal(&[1.0, 2.0, 3.0]), 1.0, ZenoMode::Stochastic, &not_eigen).is_err());
    }

    #[test]
    fn gap_examples() {
        assert!((compute_gap(&Operator::from_real_diagonal(&[0.0, 5.0]), 0).unwrap() - 5.0).abs() < 1e-14);
        assert!(matches!(
            compute_gap(&Operator::from_real_diagonal(&[1.0, 1.0, 3.0]), 0),
            Err(Error::ProtectionImpossible(_))
        ));
        let grid = Grid1D::new(64, -10.0, 10.0).unwrap();
        let h = GridHamiltonian::harmonic(grid, 1.0, 0.0).operator_at(0.0).unwrap();
        assert!((compute_gap(&h, 0).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn envelope_shape() {
        let e = Envelope::new(1.0, 11.0, 2.0).unwrap();
        assert_eq!(e.value(6.0), 1.0);
        assert_eq!(e.value(1.0), 0.0);
        assert!((e.value(2.0) - 0.5).abs() < 1e-15);
        assert!((e.value(10.0) - 0.5).abs() < 1e-14);
        assert_eq!(e.value(12.0), 0.0);
        assert!(Envelope::new(0.0, 3.0, 2.0).is_err());
        assert!(adiabatic_envelope(0.5, 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn envelope_is_c1() {
        let e = Envelope::new(0.0, 10.0, 3.0).unwrap();
        let h = 1e-6;
        for &t in &[0.0, 3.0, 7.0, 10.0] {
            let left = (e.value(t) - e.value(t - h)) / h;
            let right = (e.value(t + h) - e.value(t)) / h;
            assert!((left - right).abs() < 1e-4, "kink at {t}: {left} vs {right}");
            assert!((e.value(t + h) - e.value(t - h)).abs() < 1e-5);
        }
    }

    #[test]
    fn failure_rotation_sets_failure_probability() {
        let scheme = qubit_scheme();
        let rot = failure_rotation(&StateVector::basis(2, 0).unwrap(), &StateVector::basis(2, 1).unwrap(), 0.01).unwrap();
        let p = survival_probability(&scheme, &rot, 100).unwrap();
        assert!((p - 0.99f64.powi(100)).abs() < 1e-12);
    }

    #[test]
    fn nonselective_mode_dephases() {
        let plus = StateVector::from_real(&[1.0, 1.0]).unwrap();
        let up = StateVector::basis(2, 0).unwrap();
        let scheme = ProtectionScheme::zeno(Operator::projector(&up), 1.0, ZenoMode::Nonselective, &up).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, outcome) = zeno_step(&ZenoState::Pure(plus), &scheme, &mut rng).unwrap();
        assert_eq!(outcome, -1);
        let ZenoState::Mixed(rho) = out else { panic!() };
        assert!(rho.entries()[(0, 1)].norm() < 1e-15);
        assert!((rho.trace() - 1.0).abs() < 1e-14);
        assert!((rho.purity() - 0.5).abs() < 1e-14);
    }

    fn pair() -> (StateVector, StateVector, Vec<C64>) {
        let psi = StateVector::from_real(&[1.0, 0.4, -0.2]).unwrap();
        let phi = StateVector::new(vec![C64::new(0.6, 0.1), C64::new(-0.5, 0.0), C64::new(0.3, 0.4)]).unwrap().normalized().unwrap();
        let values = vec![C64::new(0.0, 0.0), C64::new(1.0, -1.0), C64::new(-0.5, -1.5)];
        (psi, phi, values)
    }

    #[test]
    fn biorthogonal_pair_is_an_eigenpair() {
        let (psi, phi, values) = pair();
        let h = biorthogonal_h_eff(&psi, &phi, &values).unwrap();
        assert!(!h.is_hermitian());
        let hp = h.apply(&psi).unwrap();
        assert!(hp.iter().all(|z| z.norm() < 1e-12));
        let hphi = h.adjoint().apply(&phi).unwrap();
        assert!(hphi.iter().all(|z| z.norm() < 1e-12));
        let orth = StateVector::from_real(&[0.0, 1.0, 2.0]).unwrap();
        let phi_orth = StateVector::new(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        assert!(biorthogonal_h_eff(&orth, &StateVector::basis(3, 0).unwrap(), &values).is_err());
        assert!(biorthogonal_h_eff(&psi, &phi_orth, &values[..2]).is_err());
    }

    #[test]
    fn effective_hamiltonian_holds_and_attracts_the_pair() {
        let (psi, phi, values) = pair();
        let scheme = ProtectionScheme::effective_complex(biorthogonal_h_eff(&psi, &phi, &values).unwrap());
        let held = evolve_two_state(&TwoStateVector::new(psi.clone(), phi.clone()).unwrap(), &scheme, 100.0).unwrap();
        assert!(held.forward().fidelity(&psi).unwrap() > 1.0 - 1e-10);
        assert!(held.backward().fidelity(&phi).unwrap() > 1.0 - 1e-10);
        // a displaced pair relaxes back
        let kicked = StateVector::from_real(&[1.0, 0.9, 0.5]).unwrap();
        let back = evolve_two_state(&TwoStateVector::new(kicked.clone(), kicked).unwrap(), &scheme, 30.0).unwrap();
        assert!(back.forward().fidelity(&psi).unwrap() > 0.999);
        assert!(back.backward().fidelity(&phi).unwrap() > 0.999);
    }

    #[test]
    fn hermitian_scheme_keeps_coincident_eigenpair() {
        let h = Operator::from_real_diagonal(&[0.0, 1.0, 2.5]);
        let scheme = ProtectionScheme::effective_complex(h);
        let g = StateVector::basis(3, 0).unwrap();
        let out = evolve_two_state(&TwoStateVector::new(g.clone(), g.clone()).unwrap(), &scheme, 50.0).unwrap();
        assert!(out.forward().fidelity(&g).unwrap() > 1.0 - 1e-10);
        assert!(out.backward().fidelity(&g).unwrap() > 1.0 - 1e-10);
    }
}
