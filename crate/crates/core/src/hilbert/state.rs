use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tolerance for the unit-norm invariant of normalized states.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Pure state on a tensor product of finite-dimensional factors.
///
/// Amplitudes are stored in row-major (Kronecker) order: the last factor
/// varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amplitudes: Vec<C64>,
    norm: f64,
}

impl StateVector {
    /// Builds a state without normalizing it.
    pub fn from_amplitudes(dims: Vec<usize>, amplitudes: Vec<C64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Structural(format!("invalid factor dimensions {dims:?}")));
        }
        let total: usize = dims.iter().product();
        if total != amplitudes.len() {
            return Err(Error::Structural(format!(
                "dims {dims:?} need {total} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        let norm = l2_norm(&amplitudes);
        Ok(Self { dims, amplitudes, norm })
    }

    /// Builds and normalizes a single-factor state.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let n = amplitudes.len();
        Self::from_amplitudes(vec![n], amplitudes)?.normalized()
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| C64::from(v)).collect())
    }

    /// Computational basis state `|index>` of a single factor of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Structural(format!("basis index {index} out of range for dimension {dim}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Self::from_amplitudes(vec![dim], amps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    /// Norm cached at construction.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn normalized(self) -> Result<Self> {
        if !(self.norm > 0.0) || !self.norm.is_finite() {
            return Err(Error::NumericalIntegrity(format!("cannot normalize state with norm {}", self.norm)));
        }
        let inv = 1.0 / self.norm;
        let amplitudes: Vec<C64> = self.amplitudes.into_iter().map(|z| z * inv).collect();
        let norm = l2_norm(&amplitudes);
        Ok(Self { dims: self.dims, amplitudes, norm })
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm - 1.0).abs() <= NORM_TOLERANCE
    }

    /// Same amplitudes, different factorization of the same total dimension.
    pub fn reshaped(self, dims: Vec<usize>) -> Result<Self> {
        Self::from_amplitudes(dims, self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::Structural(format!(
                "inner product of dimension {} with {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    /// `|<self|other>|^2` for normalized states.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr() / (self.norm * self.norm * other.norm * other.norm))
    }

    /// Probabilities `|a_i|^2` of the (normalized) state.
    pub fn probabilities(&self) -> Vec<f64> {
        let n2 = self.norm * self.norm;
        self.amplitudes.iter().map(|z| z.norm_sqr() / n2).collect()
    }

    /// Multiplies by a global phase.
    pub fn with_phase(self, phase: f64) -> Self {
        let w = C64::from_polar(1.0, phase);
        let amplitudes = self.amplitudes.into_iter().map(|z| z * w).collect();
        Self { dims: self.dims, amplitudes, norm: self.norm }
    }
}

/// Kronecker product of two states; the result is normalized.
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    let mut amps = Vec::with_capacity(a.dim() * b.dim());
    for &x in &a.amplitudes {
        amps.extend(b.amplitudes.iter().map(|&y| x * y));
    }
    StateVector::from_amplitudes(dims, amps)?.normalized()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn l2_norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
