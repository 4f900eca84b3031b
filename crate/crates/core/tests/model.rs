use proptest::prelude::*;
use qmpe_core::linalg::{eig_general, CMatrix};
use qmpe_core::model::{
    build_liouvillian, gibbs_state, kms_check, rate, rate_beta_derivative, BathSpec, ProbeSpec, SpectralDensity,
};
use qmpe_core::C64;

fn hermitian_from(entries: &[(f64, f64)], d: usize) -> CMatrix {
    let m = CMatrix::from_fn(d, d, |i, j| {
        let (a, b) = entries[i * d + j];
        C64::new(a, b)
    });
    m.hermitian_part()
}

#[test]
fn beta_derivative_matches_central_difference() {
    let bath = BathSpec::flat(0.7, 1.3).unwrap();
    let h = 1e-5;
    let fd = (rate(&bath.with_beta(0.7 + h).unwrap(), 1.3).unwrap() - rate(&bath.with_beta(0.7 - h).unwrap(), 1.3).unwrap())
        / (2.0 * h);
    let an = rate_beta_derivative(&bath, 1.3).unwrap();
    assert!(((fd - an) / an).abs() < 1e-6);
    assert!(an < 0.0);
}

#[test]
fn generator_derivative_matches_finite_difference() {
    for sd in [SpectralDensity::Flat, SpectralDensity::Ohmic { omega_ref: 1.0 }] {
        let probe = ProbeSpec::ramp(4, 1.0, 0.05).unwrap();
        let bath = BathSpec::new(1.0, 1.0, sd).unwrap();
        let h = 1e-4;
        let l = build_liouvillian(&probe, &bath).unwrap();
        let lp = build_liouvillian(&probe, &bath.with_beta(1.0 + h).unwrap()).unwrap();
        let lm = build_liouvillian(&probe, &bath.with_beta(1.0 - h).unwrap()).unwrap();
        let fd = (&lp.matrix - &lm.matrix).scale_real(0.5 / h);
        assert!((&fd - &l.beta_derivative).max_abs() < 1e-7);
        // the Hamiltonian part carries no temperature dependence
        assert_eq!(lp.hamiltonian_part, lm.hamiltonian_part);
    }
}

#[test]
fn generator_structure() {
    for d in [2usize, 3, 6] {
        let probe = ProbeSpec::ramp(d, 1.0, 0.05).unwrap();
        let bath = BathSpec::flat(1.0, 1.0).unwrap();
        let l = build_liouvillian(&probe, &bath).unwrap();
        assert!(l.trace_preservation_defect() < 1e-12);
        assert_eq!(l.population_coherence_coupling(), 0.0);
        assert_eq!(l.matrix, &l.hamiltonian_part + &l.dissipative_part);
        let tau = gibbs_state(&probe, &bath);
        assert!(l.apply(&tau).unwrap().frobenius_norm() <= 1e-10);
    }
}

#[test]
fn stationary_population_is_unique() {
    for d in [2usize, 3, 5, 10] {
        let probe = ProbeSpec::degenerate(d, 1.0).unwrap();
        let l = build_liouvillian(&probe, &BathSpec::flat(1.0, 1.0).unwrap()).unwrap();
        let zeros = eig_general(&l.population_block())
            .unwrap()
            .into_iter()
            .filter(|(z, _)| z.norm() < 1e-9)
            .count();
        assert_eq!(zeros, 1);
    }
}

#[test]
fn detailed_balance_on_grid() {
    let probe = ProbeSpec::degenerate(3, 1.0).unwrap();
    for beta in [0.5, 1.0, 2.0] {
        for sd in [SpectralDensity::Flat, SpectralDensity::Ohmic { omega_ref: 1.0 }] {
            let bath = BathSpec::new(beta, 1.0, sd).unwrap();
            let dev = kms_check(&probe, &bath, &[0.25, 0.5, 1.0, 2.0, 4.0]).unwrap();
            assert!(dev <= 1e-12, "beta={beta} dev={dev}");
        }
    }
    assert!(kms_check(&probe, &BathSpec::flat(1.0, 1.0).unwrap(), &[0.0]).is_err());
}

#[test]
fn invalid_baths_rejected() {
    assert!(BathSpec::flat(0.0, 1.0).is_err());
    assert!(BathSpec::flat(1.0, -1.0).is_err());
    assert!(BathSpec::new(1.0, 1.0, SpectralDensity::Ohmic { omega_ref: 0.0 }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermiticity_is_preserved(entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16), eps in 0.0f64..0.1) {
        let probe = ProbeSpec::ramp(4, 1.0, eps).unwrap();
        let l = build_liouvillian(&probe, &BathSpec::flat(1.0, 1.0).unwrap()).unwrap();
        let rho = hermitian_from(&entries, 4);
        let out = l.apply(&rho).unwrap();
        prop_assert!(out.hermiticity_defect() <= 1e-12);
        prop_assert!(out.trace().norm() <= 1e-12);
        let dout = l.apply_beta_derivative(&rho).unwrap();
        prop_assert!(dout.hermiticity_defect() <= 1e-12);
    }

    #[test]
    fn detailed_balance_holds(beta in 0.1f64..5.0, w in 0.05f64..5.0) {
        let bath = BathSpec::flat(beta, 1.0).unwrap();
        let ratio = rate(&bath, w).unwrap() / rate(&bath, -w).unwrap();
        prop_assert!((ratio - (-beta * w).exp()).abs() <= 1e-12);
    }
}
