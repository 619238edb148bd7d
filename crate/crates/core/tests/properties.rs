use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use protmeas::hilbert::{evolve_dense, partial_trace, reduced_from_pure, tensor, DensityMatrix, Grid1D, Operator, StateVector};
use protmeas::pointer::make_pointer;
use protmeas::tsvf::{postselect_state, weak_value, TwoStateVector};
use protmeas::weak::{couple_weak, CouplingSpec, SystemPointer};

fn amplitudes(d: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d)
        .prop_filter("non-zero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-2)
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn state(d: usize) -> impl Strategy<Value = StateVector> {
    amplitudes(d).prop_map(|a| StateVector::new(a).unwrap())
}

fn hermitian(d: usize) -> impl Strategy<Value = Operator> {
    amplitudes(d * d).prop_map(move |a| {
        let m = DMatrix::from_vec(d, d, a);
        Operator::hermitian_symmetrized(&m + m.adjoint()).unwrap()
    })
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagators_are_unitary(h in hermitian(5), t in -5.0f64..5.0) {
        let u = h.spectrum().unwrap().propagator(t);
        prop_assert!(max_abs(&(u.adjoint() * &u - DMatrix::identity(5, 5))) < 1e-12);
    }

    #[test]
    fn evolution_preserves_norm_and_composes(psi in state(4), h in hermitian(4), t in 0.0f64..3.0, s in 0.0f64..3.0) {
        let once = evolve_dense(&psi, &h, t + s).unwrap();
        let twice = evolve_dense(&evolve_dense(&psi, &h, t).unwrap(), &h, s).unwrap();
        prop_assert!((once.norm() - 1.0).abs() < 1e-12);
        prop_assert!((once.fidelity(&twice).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn partial_trace_of_product_recovers_factors(a in state(2), b in state(3)) {
        let product = tensor(&a, &b).unwrap();
        let rho = DensityMatrix::from_pure(&product);
        for (keep, factor) in [(0, &a), (1, &b)] {
            let reduced = partial_trace(&rho, &[2, 3], keep).unwrap();
            prop_assert!(max_abs(&(reduced.entries() - DensityMatrix::from_pure(factor).entries())) < 1e-12);
            let direct = reduced_from_pure(&product, keep).unwrap();
            prop_assert!(max_abs(&(direct.entries() - reduced.entries())) < 1e-12);
        }
    }

    #[test]
    fn weak_values_are_linear(psi in state(3), phi in state(3), a in hermitian(3), b in hermitian(3), x in -2.0f64..2.0) {
        let tsv = TwoStateVector::new(psi, phi);
        prop_assume!(tsv.is_ok());
        let tsv = tsv.unwrap();
        let combo = a.combine(C64::from(x), &b, C64::from(1.0)).unwrap();
        let lhs = weak_value(&combo, &tsv).unwrap();
        let rhs = weak_value(&a, &tsv).unwrap() * x + weak_value(&b, &tsv).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-9 * (1.0 + rhs.norm()));
        let total: C64 = (0..3).map(|i| weak_value(&Operator::basis_projector(3, i, 1.0).unwrap(), &tsv).unwrap()).sum();
        prop_assert!((total - 1.0).norm() < 1e-9 * (1.0 + total.norm()));
    }

    #[test]
    fn postselection_probabilities_sum_to_one(psi in state(3), a in hermitian(3), basis in hermitian(3), eps in 1e-3f64..2e-2) {
        let pointer = make_pointer(Grid1D::new(128, -1.0, 1.0).unwrap(), 0.1).unwrap();
        let coupling = CouplingSpec::impulsive(a, eps).unwrap();
        let sp = couple_weak(&SystemPointer::new(&psi, &[pointer]).unwrap(), &coupling, 0, eps).unwrap();
        let spec = basis.spectrum().unwrap();
        let mut total = 0.0;
        let mut weighted = 0.0;
        for k in 0..3 {
            if let Ok(out) = postselect_state(&sp, &spec.eigenvector(k)) {
                total += out.probability;
                weighted += out.probability * out.readout(0).unwrap().mean;
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!((weighted - sp.readout(0, 0.0).unwrap().mean).abs() < 1e-9);
    }

    #[test]
    fn pointer_shift_is_linear_in_the_expectation(psi in state(4), a in hermitian(4), eps in 1e-4f64..1e-2) {
        let pointer = make_pointer(Grid1D::new(128, -1.5, 1.5).unwrap(), 0.15).unwrap();
        let coupling = CouplingSpec::impulsive(a.clone(), eps).unwrap();
        let sp = couple_weak(&SystemPointer::new(&psi, &[pointer]).unwrap(), &coupling, 0, eps).unwrap();
        let expected = eps * protmeas::hilbert::expectation(&psi, &a).unwrap();
        prop_assert!((sp.readout(0, 0.0).unwrap().mean - expected).abs() < 1e-9);
    }
}
