use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::state::StateVector;
use crate::error::{Error, Result};

pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Largest tolerated imaginary residue of an expectation value.
pub const EXPECTATION_IMAG_TOLERANCE: f64 = 1e-12;
/// Eigenvalues closer than this are treated as one degenerate level.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;

/// Dense square matrix with a validated Hermiticity flag.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    entries: DMatrix<C64>,
    hermitian: bool,
}

pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

impl Operator {
    /// Hermitian operator; fails if `entries` deviates from its adjoint by more than 1e-12.
    pub fn hermitian(entries: DMatrix<C64>) -> Result<Self> {
        check_square(&entries)?;
        let defect = hermiticity_defect(&entries);
        if defect >= HERMITIAN_TOLERANCE {
            return Err(Error::Contract(format!("matrix is not Hermitian (defect {defect:e})")));
        }
        Ok(Self { entries, hermitian: true })
    }

    /// Hermitian operator from a matrix that is Hermitian up to rounding;
    /// the stored entries are `(m + m^dagger) / 2`.
    pub fn hermitian_symmetrized(entries: DMatrix<C64>) -> Result<Self> {
        check_square(&entries)?;
        let sym = (&entries + entries.adjoint()) * C64::new(0.5, 0.0);
        Self::hermitian(sym)
    }

    /// General (possibly non-Hermitian) operator. The flag is set if it happens to be Hermitian.
    pub fn general(entries: DMatrix<C64>) -> Result<Self> {
        check_square(&entries)?;
        let hermitian = hermiticity_defect(&entries) < HERMITIAN_TOLERANCE;
        Ok(Self { entries, hermitian })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&v| C64::from(v)));
        Self { entries: DMatrix::from_diagonal(&d), hermitian: true }
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: DMatrix::identity(dim, dim), hermitian: true }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { entries: DMatrix::zeros(dim, dim), hermitian: true }
    }

    /// Rank-one projector `|psi><psi|` onto a normalized copy of `psi`.
    pub fn projector(psi: &StateVector) -> Self {
        let v = DVector::from_iterator(psi.dim(), psi.amplitudes().iter().map(|z| z / psi.norm()));
        let m = &v * v.adjoint();
        let sym = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Self { entries: sym, hermitian: true }
    }

    /// Diagonal projector onto basis index `index`, scaled by `weight`.
    pub fn basis_projector(dim: usize, index: usize, weight: f64) -> Result<Self> {
        if index >= dim {
            return Err(Error::Structural(format!("projector index {index} out of range for dimension {dim}")));
        }
        let mut diag = vec![0.0; dim];
        diag[index] = weight;
        Ok(Self::from_real_diagonal(&diag))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn require_hermitian(&self, what: &str) -> Result<()> {
        if self.hermitian {
            Ok(())
        } else {
            Err(Error::Contract(format!("{what} must be Hermitian")))
        }
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.adjoint(), hermitian: self.hermitian }
    }

    /// True if every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.entries[(i, j)] == C64::new(0.0, 0.0)))
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { entries: &self.entries * C64::from(s), hermitian: self.hermitian }
    }

    pub fn plus(&self, other: &Operator) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Structural(format!("adding operators of dimension {} and {}", self.dim(), other.dim())));
        }
        Self::general(&self.entries + &other.entries)
    }

    /// Linear combination `a*self + b*other`.
    pub fn combine(&self, a: C64, other: &Operator, b: C64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Structural(format!("combining operators of dimension {} and {}", self.dim(), other.dim())));
        }
        Self::general(&self.entries * a + &other.entries * b)
    }

    pub fn mul(&self, other: &Operator) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Structural(format!("multiplying operators of dimension {} and {}", self.dim(), other.dim())));
        }
        Self::general(&self.entries * &other.entries)
    }

    pub fn commutator_norm(&self, other: &Operator) -> Result<f64> {
        let ab = self.mul(other)?;
        let ba = other.mul(self)?;
        Ok((ab.entries - ba.entries).iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    pub fn kron(&self, other: &Operator) -> Self {
        let entries = self.entries.kronecker(&other.entries);
        Self { entries, hermitian: self.hermitian && other.hermitian }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<Vec<C64>> {
        if psi.dim() != self.dim() {
            return Err(Error::Structural(format!(
                "operator of dimension {} applied to state of dimension {}",
                self.dim(),
                psi.dim()
            )));
        }
        Ok(apply_matrix(&self.entries, psi.amplitudes()))
    }

    /// Sorted Hermitian eigendecomposition.
    pub fn spectrum(&self) -> Result<Spectrum> {
        self.require_hermitian("operator for eigendecomposition")?;
        Ok(Spectrum::of_hermitian(&self.entries))
    }
}

fn check_square(m: &DMatrix<C64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Structural(format!("operator must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

pub fn apply_matrix(m: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    let n = m.nrows();
    let mut out = vec![C64::new(0.0, 0.0); n];
    // column-major walk
    for (j, &vj) in v.iter().enumerate() {
        if vj == C64::new(0.0, 0.0) {
            continue;
        }
        let col = m.column(j);
        for (o, &mij) in out.iter_mut().zip(col.iter()) {
            *o += mij * vj;
        }
    }
    out
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors (columns).
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Spectrum {
    pub fn of_hermitian(m: &DMatrix<C64>) -> Self {
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvector(&self, index: usize) -> StateVector {
        let amps = self.vectors.column(index).iter().copied().collect();
        StateVector::from_amplitudes(vec![self.dim()], amps)
            .and_then(StateVector::normalized)
            .expect("eigenvectors are unit vectors")
    }

    /// `V f(lambda) V^dagger`.
    pub fn function(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let mut scaled = self.vectors.clone();
        for (c, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            scaled.column_mut(c).iter_mut().for_each(|z| *z *= w);
        }
        scaled * self.vectors.adjoint()
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        self.function(|e| C64::from_polar(1.0, -e * t))
    }

    /// Groups of eigenvector indices with equal eigenvalues (within 1e-10), ascending.
    pub fn eigenspaces(&self) -> Vec<Eigenspace> {
        let mut spaces: Vec<Eigenspace> = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            match spaces.last_mut() {
                Some(last) if (v - last.value).abs() <= DEGENERACY_TOLERANCE => last.columns.push(i),
                _ => spaces.push(Eigenspace { value: v, columns: vec![i] }),
            }
        }
        spaces
    }

    /// Index of the eigenspace that `psi` lies in, if it is (within `tol` in fidelity) an eigenvector.
    pub fn eigenspace_of(&self, psi: &StateVector, tol: f64) -> Option<usize> {
        let spaces = self.eigenspaces();
        let amps = psi.amplitudes();
        let n2 = psi.norm() * psi.norm();
        spaces.iter().position(|space| {
            let weight: f64 = space
                .columns
                .iter()
                .map(|&c| super::state::inner(self.vectors.column(c).as_slice(), amps).norm_sqr())
                .sum();
            weight / n2 > 1.0 - tol
        })
    }
}

/// One (possibly degenerate) eigenvalue and the spectrum columns spanning it.
#[derive(Clone, Debug)]
pub struct Eigenspace {
    pub value: f64,
    pub columns: Vec<usize>,
}

/// `<psi|A|psi>` for Hermitian `A` and normalized `psi`.
pub fn expectation(psi: &StateVector, a: &Operator) -> Result<f64> {
    a.require_hermitian("observable")?;
    let a_psi = a.apply(psi)?;
    let n2 = psi.norm() * psi.norm();
    let value = super::state::inner(psi.amplitudes(), &a_psi) / n2;
    if value.im.abs() > EXPECTATION_IMAG_TOLERANCE * value.re.abs().max(1.0) {
        return Err(Error::NumericalIntegrity(format!(
            "expectation value has imaginary part {:e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// Mixed state on a (possibly composite) space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub const TRACE_TOLERANCE: f64 = 1e-10;
    pub const EIGEN_TOLERANCE: f64 = 1e-10;

    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        check_square(&entries)?;
        let defect = hermiticity_defect(&entries);
        if defect >= HERMITIAN_TOLERANCE {
            return Err(Error::Contract(format!("density matrix is not Hermitian (defect {defect:e})")));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > Self::TRACE_TOLERANCE || tr.im.abs() > Self::TRACE_TOLERANCE {
            return Err(Error::Contract(format!("density matrix trace is {tr}")));
        }
        let spec = Spectrum::of_hermitian(&entries);
        if spec.values[0] < -Self::EIGEN_TOLERANCE {
            return Err(Error::Contract(format!("density matrix has eigenvalue {:e}", spec.values[0])));
        }
        Ok(Self { entries })
    }

    /// Skips the positivity check; used for results of trace-preserving maps
    /// applied to valid states. Still symmetrizes away rounding.
    pub(crate) fn from_map_output(entries: DMatrix<C64>) -> Self {
        let entries = (&entries + entries.adjoint()) * C64::new(0.5, 0.0);
        Self { entries }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let v = DVector::from_iterator(psi.dim(), psi.amplitudes().iter().map(|z| z / psi.norm()));
        Self::from_map_output(&v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn purity(&self) -> f64 {
        // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `<psi|rho|psi>`.
    pub fn fidelity_with(&self, psi: &StateVector) -> Result<f64> {
        let v = DMatrix::from_column_slice(psi.dim(), 1, psi.amplitudes());
        if psi.dim() != self.dim() {
            return Err(Error::Structural("fidelity dimension mismatch".into()));
        }
        let r = v.adjoint() * &self.entries * &v;
        Ok(r[(0, 0)].re / (psi.norm() * psi.norm()))
    }

    /// `tr(rho A)`.
    pub fn expectation(&self, a: &Operator) -> Result<f64> {
        a.require_hermitian("observable")?;
        if a.dim() != self.dim() {
            return Err(Error::Structural("expectation dimension mismatch".into()));
        }
        let v = (&self.entries * a.entries()).trace();
        if v.im.abs() > EXPECTATION_IMAG_TOLERANCE * v.re.abs().max(1.0) {
            return Err(Error::NumericalIntegrity(format!("tr(rho A) has imaginary part {:e}", v.im)));
        }
        Ok(v.re)
    }

    /// `U rho U^dagger` for unitary `u`.
    pub fn conjugate_by(&self, u: &DMatrix<C64>) -> Self {
        Self::from_map_output(u * &self.entries * u.adjoint())
    }

    pub fn map_entries(&self, f: impl FnOnce(&DMatrix<C64>) -> DMatrix<C64>) -> Self {
        Self::from_map_output(f(&self.entries))
    }
}

/// Reduced density matrix of factor `keep` of a state with tensor structure `dims`.
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: usize) -> Result<DensityMatrix> {
    let total: usize = dims.iter().product();
    if total != rho.dim() {
        return Err(Error::Structural(format!(
            "dims {dims:?} (product {total}) do not match density matrix dimension {}",
            rho.dim()
        )));
    }
    if keep >= dims.len() {
        return Err(Error::Structural(format!("factor {keep} out of range for dims {dims:?}")));
    }
    let d_keep = dims[keep];
    let inner: usize = dims[keep + 1..].iter().product();
    let outer: usize = dims[..keep].iter().product();
    let m = rho.entries();
    let out = DMatrix::from_fn(d_keep, d_keep, |a, b| {
        let mut acc = C64::new(0.0, 0.0);
        for o in 0..outer {
            for i in 0..inner {
                let ra = (o * d_keep + a) * inner + i;
                let rb = (o * d_keep + b) * inner + i;
                acc += m[(ra, rb)];
            }
        }
        acc
    });
    Ok(DensityMatrix::from_map_output(out))
}

/// Reduced state of factor `keep` computed directly from a pure composite state.
pub fn reduced_from_pure(psi: &StateVector, keep: usize) -> Result<DensityMatrix> {
    let dims = psi.dims();
    if keep >= dims.len() {
        return Err(Error::Structural(format!("factor {keep} out of range for dims {dims:?}")));
    }
    let d_keep = dims[keep];
    let inner: usize = dims[keep + 1..].iter().product();
    let outer: usize = dims[..keep].iter().product();
    let amps = psi.amplitudes();
    let n2 = psi.norm() * psi.norm();
    let out = DMatrix::from_fn(d_keep, d_keep, |a, b| {
        let mut acc = C64::new(0.0, 0.0);
        for o in 0..outer {
            for i in 0..inner {
                acc += amps[(o * d_keep + a) * inner + i] * amps[(o * d_keep + b) * inner + i].conj();
            }
        }
        acc / n2
    });
    Ok(DensityMatrix::from_map_output(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::state::tensor;

    fn sigma_z() -> Operator {
        Operator::from_real_diagonal(&[1.0, -1.0])
    }

    #[test]
    fn hermitian_flag_is_validated() {
        let m = DMatrix::from_row_slice(2, 2, &[C64::from(1.0), C64::new(0.0, 1.0), C64::new(0.0, 1.0), C64::from(0.0)]);
        assert!(matches!(Operator::hermitian(m.clone()), Err(Error::Contract(_))));
        assert!(!Operator::general(m).unwrap().is_hermitian());
    }

    #[test]
    fn expectation_of_own_projector_is_one() {
        let psi = StateVector::new(vec![C64::new(0.2, 0.9), C64::new(-0.4, 0.1), C64::new(1.0, 0.0)]).unwrap();
        let p = Operator::projector(&psi);
        assert!((expectation(&psi, &p).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_z_on_plus_is_zero() {
        let plus = StateVector::from_real(&[1.0, 1.0]).unwrap();
        assert!(expectation(&plus, &sigma_z()).unwrap().abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_expectation_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[C64::from(0.0), C64::from(1.0), C64::from(0.0), C64::from(0.0)]);
        let a = Operator::general(m).unwrap();
        let plus = StateVector::from_real(&[1.0, 1.0]).unwrap();
        assert!(expectation(&plus, &a).is_err());
    }

    #[test]
    fn partial_trace_of_product_state() {
        let a = StateVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let b = StateVector::from_real(&[1.0, 2.0, -1.0]).unwrap();
        let rho = DensityMatrix::from_pure(&tensor(&a, &b).unwrap());
        let red = partial_trace(&rho, &[2, 3], 0).unwrap();
        let expected = DensityMatrix::from_pure(&a);
        assert!((red.entries() - expected.entries()).norm() < 1e-14);
        assert!((red.purity() - 1.0).abs() < 1e-9);
        let red_b = partial_trace(&rho, &[2, 3], 1).unwrap();
        assert!((red_b.entries() - DensityMatrix::from_pure(&b).entries()).norm() < 1e-14);
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let bell = StateVector::from_amplitudes(vec![2, 2], vec![C64::from(1.0), C64::from(0.0), C64::from(0.0), C64::from(1.0)])
            .unwrap()
            .normalized()
            .unwrap();
        let red = partial_trace(&DensityMatrix::from_pure(&bell), &[2, 2], 0).unwrap();
        let half = DMatrix::<C64>::identity(2, 2) * C64::from(0.5);
        assert!((red.entries() - half).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_dimension_mismatch() {
        let rho = DensityMatrix::from_pure(&StateVector::from_real(&[1.0, 0.0, 0.0, 0.0]).unwrap());
        assert!(matches!(partial_trace(&rho, &[2, 3], 0), Err(Error::Structural(_))));
        assert!(matches!(partial_trace(&rho, &[2, 2], 2), Err(Error::Structural(_))));
    }

    #[test]
    fn density_matrix_validation() {
        let bad_trace = DMatrix::<C64>::identity(2, 2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let negative = DMatrix::from_row_slice(2, 2, &[C64::from(1.5), C64::from(0.0), C64::from(0.0), C64::from(-0.5)]);
        assert!(DensityMatrix::new(negative).is_err());
        let ok = DMatrix::<C64>::identity(2, 2) * C64::from(0.5);
        assert!(DensityMatrix::new(ok).is_ok());
    }

    #[test]
    fn eigenspaces_group_degenerate_levels() {
        let spec = Operator::from_real_diagonal(&[3.0, 1.0, 1.0]).spectrum().unwrap();
        let spaces = spec.eigenspaces();
        assert_eq!(spaces.len(), 2);
        assert_eq!(spaces[0].columns.len(), 2);
        assert!((spaces[1].value - 3.0).abs() < 1e-14);
    }
}
