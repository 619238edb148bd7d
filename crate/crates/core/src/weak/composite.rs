use num_complex::Complex64 as C64;
use rand::Rng;

use super::{CouplingSpec, ObservableSpectrum};
use crate::error::{Error, Result};
use crate::hilbert::{reduced_from_pure, DensityMatrix, Grid1D, Spectral, StateVector, MAX_COMPOSITE_DIM};
use crate::pointer::{check_wrap, momentum_mean, PointerReadout, PointerState};

/// One pointer factor of a composite.
#[derive(Clone, Debug)]
pub struct PointerSlot {
    pub spectral: Spectral,
    pub delta: f64,
    pub label: String,
}

impl PointerSlot {
    pub fn grid(&self) -> &Grid1D {
        self.spectral.grid()
    }
}

/// System ⊗ pointer₁ ⊗ … ⊗ pointer_K, system factor first.
#[derive(Clone, Debug)]
pub struct SystemPointer {
    state: StateVector,
    slots: Vec<PointerSlot>,
}

impl SystemPointer {
    pub fn new(system: &StateVector, pointers: &[PointerState]) -> Result<Self> {
        if system.dims().len() != 1 {
            return Err(Error::Structural(format!("system must be a single factor, got dims {:?}", system.dims())));
        }
        let mut dims = vec![system.dim()];
        dims.extend(pointers.iter().map(|p| p.grid().n_points()));
        check_guard(&dims)?;
        let mut amps = system.amplitudes().iter().map(|z| z / system.norm()).collect::<Vec<_>>();
        for p in pointers {
            let mut next = Vec::with_capacity(amps.len() * p.amplitudes().len());
            for &a in &amps {
                next.extend(p.amplitudes().iter().map(|&b| a * b));
            }
            amps = next;
        }
        let state = StateVector::from_amplitudes(dims, amps)?.normalized()?;
        let slots = pointers
            .iter()
            .map(|p| PointerSlot { spectral: Spectral::new(*p.grid()), delta: p.delta(), label: p.label().to_owned() })
            .collect();
        Ok(Self { state, slots })
    }

    pub fn from_parts(state: StateVector, slots: Vec<PointerSlot>) -> Result<Self> {
        let dims = state.dims();
        if dims.len() != slots.len() + 1
            || slots.iter().zip(&dims[1..]).any(|(s, &n)| s.grid().n_points() != n)
        {
            return Err(Error::Structural(format!(
                "state dims {dims:?} do not match {} pointer slots",
                slots.len()
            )));
        }
        Ok(Self { state, slots })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn into_state(self) -> StateVector {
        self.state
    }

    pub fn slots(&self) -> &[PointerSlot] {
        &self.slots
    }

    pub fn system_dim(&self) -> usize {
        self.state.dims()[0]
    }

    /// Product of all pointer dimensions.
    pub fn rest_dim(&self) -> usize {
        self.state.dim() / self.system_dim()
    }

    pub fn pointer_count(&self) -> usize {
        self.slots.len()
    }

    pub(crate) fn with_amplitudes(&self, amps: Vec<C64>) -> Result<Self> {
        Ok(Self {
            state: StateVector::from_amplitudes(self.state.dims().to_vec(), amps)?.normalized()?,
            slots: self.slots.clone(),
        })
    }

    fn check_pointer(&self, pointer: usize) -> Result<()> {
        if pointer >= self.slots.len() {
            return Err(Error::Structural(format!(
                "pointer {pointer} out of range ({} pointers)",
                self.slots.len()
            )));
        }
        Ok(())
    }

    /// Marginal position distribution of one pointer.
    pub fn pointer_distribution(&self, pointer: usize) -> Result<Vec<f64>> {
        self.check_pointer(pointer)?;
        let dims = self.state.dims();
        let axis = pointer + 1;
        let n = dims[axis];
        let stride: usize = dims[axis + 1..].iter().product();
        let mut dist = vec![0.0; n];
        for (idx, z) in self.state.amplitudes().iter().enumerate() {
            dist[(idx / stride) % n] += z.norm_sqr();
        }
        Ok(dist)
    }

    pub fn readout(&self, pointer: usize, time: f64) -> Result<PointerReadout> {
        let dist = self.pointer_distribution(pointer)?;
        Ok(PointerReadout::from_distribution(self.slots[pointer].grid(), dist, time))
    }

    /// `<p>` of one pointer, computed spectrally fibre by fibre.
    pub fn momentum_mean(&self, pointer: usize) -> Result<f64> {
        self.check_pointer(pointer)?;
        let spectral = &self.slots[pointer].spectral;
        let n = spectral.grid().n_points();
        let mut weights = vec![0.0; n];
        let mut amps = self.state.amplitudes().to_vec();
        for_each_fiber(&mut amps, self.state.dims(), pointer + 1, |_, fiber| {
            spectral.forward(fiber);
            for (w, z) in weights.iter_mut().zip(fiber.iter()) {
                *w += z.norm_sqr();
            }
        });
        Ok(momentum_mean(spectral, &weights))
    }

    /// Reduced state of the system factor.
    pub fn reduced_system(&self) -> Result<DensityMatrix> {
        reduced_from_pure(&self.state, 0)
    }

    /// `<ψ|ρ_sys|ψ>`.
    pub fn system_fidelity(&self, psi: &StateVector) -> Result<f64> {
        let d = self.system_dim();
        if psi.dim() != d {
            return Err(Error::Structural("fidelity reference has wrong dimension".into()));
        }
        let rest = self.rest_dim();
        let amps = self.state.amplitudes();
        let mut acc = 0.0;
        for r in 0..rest {
            let c: C64 = (0..d).map(|i| psi.amplitudes()[i].conj() * amps[i * rest + r]).sum();
            acc += c.norm_sqr();
        }
        Ok(acc / (psi.norm() * psi.norm()))
    }

    /// Reads every pointer once (a joint position sample) and returns the
    /// conditional system state.
    pub fn detach_system<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<StateVector> {
        let d = self.system_dim();
        let rest = self.rest_dim();
        let amps = self.state.amplitudes();
        let weights: Vec<f64> = (0..rest)
            .map(|r| (0..d).map(|i| amps[i * rest + r].norm_sqr()).sum())
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = rest - 1;
        for (r, &w) in weights.iter().enumerate() {
            if u < w {
                pick = r;
                break;
            }
            u -= w;
        }
        StateVector::new((0..d).map(|i| amps[i * rest + pick]).collect())
    }

    /// Single pointer of a product state, for pure-pointer postselection results.
    pub fn pointer_state(&self, pointer: usize) -> Result<PointerState> {
        self.check_pointer(pointer)?;
        if self.pointer_count() != 1 {
            return Err(Error::Structural("pointer_state needs a composite with exactly one pointer".into()));
        }
        let d = self.system_dim();
        let rest = self.rest_dim();
        let amps = self.state.amplitudes();
        // dominant system row as reference
        let i_max = (0..d)
            .max_by(|&a, &b| {
                let wa: f64 = amps[a * rest..(a + 1) * rest].iter().map(|z| z.norm_sqr()).sum();
                let wb: f64 = amps[b * rest..(b + 1) * rest].iter().map(|z| z.norm_sqr()).sum();
                wa.total_cmp(&wb)
            })
            .expect("non-empty system");
        let slot = &self.slots[pointer];
        PointerState::from_amplitudes(*slot.grid(), amps[i_max * rest..(i_max + 1) * rest].to_vec(), slot.delta)
            .map(|p| p.with_label(slot.label.clone()))
    }
}

pub(crate) fn check_guard(dims: &[usize]) -> Result<()> {
    let total: usize = dims.iter().product();
    if total > MAX_COMPOSITE_DIM {
        return Err(Error::Structural(format!(
            "composite dimension {total} ({dims:?}) exceeds the limit of {MAX_COMPOSITE_DIM}"
        )));
    }
    Ok(())
}

/// Calls `f(base_index, fiber)` for every fibre along `axis`, writing the
/// (possibly modified) fibre back.
pub(crate) fn for_each_fiber(amps: &mut [C64], dims: &[usize], axis: usize, mut f: impl FnMut(usize, &mut [C64])) {
    let n = dims[axis];
    let stride: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for o in 0..outer {
        for q in 0..stride {
            let base = o * n * stride + q;
            if stride == 1 {
                f(base, &mut amps[base..base + n]);
                continue;
            }
            for (m, b) in buf.iter_mut().enumerate() {
                *b = amps[base + m * stride];
            }
            f(base, &mut buf);
            for (m, b) in buf.iter().enumerate() {
                amps[base + m * stride] = *b;
            }
        }
    }
}

/// Transforms the system factor (axis 0) by `m`: Φ[i, r] ← Σ_j m[i, j] Φ[j, r].
pub(crate) fn transform_system(amps: &mut [C64], d: usize, m: &nalgebra::DMatrix<C64>) {
    let rest = amps.len() / d;
    let mut out = vec![C64::new(0.0, 0.0); amps.len()];
    for j in 0..d {
        let row_in = &amps[j * rest..(j + 1) * rest];
        for i in 0..d {
            let w = m[(i, j)];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, &a) in out[i * rest..(i + 1) * rest].iter_mut().zip(row_in) {
                *o += w * a;
            }
        }
    }
    amps.copy_from_slice(&out);
}

/// One impulsive von Neumann coupling `exp(-i g A ⊗ p)` between the system
/// and pointer `pointer`.
///
/// Evaluated exactly: in the eigenbasis of `A` each system component
/// translates the pointer by `g a`.
pub fn couple_weak(composite: &SystemPointer, coupling: &CouplingSpec, pointer: usize, strength: f64) -> Result<SystemPointer> {
    composite.check_pointer(pointer)?;
    let d = composite.system_dim();
    if coupling.observable().dim() != d {
        return Err(Error::Structural(format!(
            "observable of dimension {} coupled to system of dimension {d}",
            coupling.observable().dim()
        )));
    }
    if strength == 0.0 {
        return Ok(composite.clone());
    }
    let dims = composite.state.dims().to_vec();
    let rest = composite.rest_dim();
    let spectral = &composite.slots[pointer].spectral;
    let mut amps = composite.state.amplitudes().to_vec();
    let shift_rows = |amps: &mut [C64], values: &[f64]| {
        for_each_fiber(amps, &dims, pointer + 1, |base, fiber| {
            let a = values[base / rest];
            if a != 0.0 {
                spectral.translate(fiber, strength * a);
            }
        });
    };
    match coupling.spectrum() {
        ObservableSpectrum::Diagonal(values) => shift_rows(&mut amps, values),
        ObservableSpectrum::Eigen(spec) => {
            transform_system(&mut amps, d, &spec.vectors.adjoint());
            shift_rows(&mut amps, &spec.values);
            transform_system(&mut amps, d, &spec.vectors);
        }
    }
    let out = composite.with_amplitudes(amps)?;
    check_wrap(&out.pointer_distribution(pointer)?)?;
    Ok(out)
}
