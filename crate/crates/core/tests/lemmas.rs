use qmpe_core::linalg::{trace_norm, CMatrix, CVector};
use qmpe_core::lemmas::{
    condition_flags, critical_alpha, lemma1_check, lemma2_check, run_lemma_suite, thermometry_conditions_check,
    BlockInstance, LemmaKind,
};
use qmpe_core::model::{occupation_beta_derivative, BathSpec, ProbeSpec, SpectralDensity};
use qmpe_core::rng::{complex_normal, substream};
use qmpe_core::C64;

fn random_block(d: usize, seed: u64) -> CMatrix {
    let mut rng = substream(seed, 0);
    CMatrix::from_fn(d, d, |_, _| complex_normal(&mut rng))
}

#[test]
fn block_bound_equality_cases() {
    let a = random_block(4, 1).hermitian_part();
    let r = lemma1_check(&a, &CVector::zeros(4), C64::new(0.0, 0.0)).unwrap();
    assert!((r.lhs - r.rhs).abs() <= 1e-12);
    assert!((r.lhs - trace_norm(&a).unwrap()).abs() <= 1e-12);

    let r = lemma1_check(&CMatrix::zeros(3, 3), &CVector::basis(3, 0), C64::new(0.0, 0.0)).unwrap();
    assert!((r.lhs - 2.0).abs() <= 1e-12 && (r.rhs - 2.0).abs() <= 1e-12);
}

#[test]
fn mixture_bound_endpoints() {
    let d = 3;
    let mut rng = substream(4, 4);
    let base = BlockInstance {
        a_block: random_block(d, 2).hermitian_part(),
        b_block: random_block(d, 3).hermitian_part(),
        c: (0..d).map(|_| complex_normal(&mut rng)).collect(),
        a: C64::new(0.3, 0.0),
        b: C64::new(-1.2, 0.0),
        alpha: 0.0,
    };
    let r0 = lemma2_check(&base).unwrap();
    let nb = trace_norm(&base.b_block).unwrap() + 1.2;
    assert!((r0.lhs - nb).abs() < 1e-12 && r0.lhs <= r0.rhs + 1e-12);
    let one = BlockInstance { alpha: 1.0, ..base.clone() };
    let r1 = lemma2_check(&one).unwrap();
    assert!((r1.lhs - trace_norm(&one.a_block).unwrap() - 0.3).abs() < 1e-12);
    assert!(lemma2_check(&BlockInstance { alpha: 1.5, ..base }).is_err());
}

#[test]
fn critical_weight_formula() {
    // |alpha a + (1 - alpha) b|^2 + 4 alpha (1 - alpha) c^2 is stationary at the returned weight
    let (a, b, c2) = (C64::new(0.4, 0.3), C64::new(-0.2, 0.1), 0.7);
    let h = |s: f64| (a * s + b * (1.0 - s)).norm_sqr() + 4.0 * s * (1.0 - s) * c2;
    let s = critical_alpha(a, b, c2).unwrap();
    let deriv = (h(s + 1e-6) - h(s - 1e-6)) / 2e-6;
    assert!(deriv.abs() < 1e-8);
    // degenerate quadratic coefficient
    assert!(critical_alpha(C64::new(2.0, 0.0), C64::new(0.0, 0.0), 1.0).is_none());
}

#[test]
fn flags_follow_definitions() {
    let inst = BlockInstance {
        a_block: CMatrix::identity(2),
        b_block: CMatrix::identity(2).scale_real(3.0),
        c: CVector::from_real(&[0.1, 0.0]),
        a: C64::new(1.0, 0.0),
        b: C64::new(2.0, 0.0),
        alpha: 0.5,
    };
    let f = condition_flags(&inst).unwrap();
    assert!(f.cond1 && f.cond2);
    let flipped = BlockInstance { b: C64::new(0.5, 0.0), ..inst };
    assert!(!condition_flags(&flipped).unwrap().cond2);
}

#[test]
fn property_suite_has_no_violations() {
    let dims: Vec<usize> = (2..=8).collect();
    let s = run_lemma_suite(&dims, 1000, 200, 9).unwrap();
    assert_eq!(s.violations(), 0);
    for t in &s.tallies {
        assert_eq!(t.violations, 0, "{:?}", t);
        if t.lemma != LemmaKind::Gallery {
            assert!(t.min_slack >= -1e-9);
        }
    }
    let again = run_lemma_suite(&[3], 50, 10, 9).unwrap();
    let first: Vec<f64> = s.records.iter().filter(|r| r.d == 3 && r.lemma == LemmaKind::BlockBound).take(50).map(|r| r.lhs).collect();
    let second: Vec<f64> = again.records.iter().filter(|r| r.lemma == LemmaKind::BlockBound).map(|r| r.lhs).collect();
    assert_eq!(first, second);
    assert!(run_lemma_suite(&[3], 0, 0, 1).is_err());
}

#[test]
fn physical_blocks_satisfy_all_conditions() {
    let bath = BathSpec::flat(1.0, 1.0).unwrap();
    let probe = ProbeSpec::degenerate(3, 1.0).unwrap();
    let c = thermometry_conditions_check(&probe, &bath, &CVector::basis(2, 0)).unwrap();
    assert!(c.all_hold(), "{c:?}");
    let s = occupation_beta_derivative(1.0, 1.0);
    assert!((c.a - s).abs() < 1e-12);
    assert!((c.b + 2.0 * s).abs() < 1e-12);

    let probe = ProbeSpec::degenerate(10, 1.0).unwrap();
    let uniform = CVector::from_real(&[1.0; 9]).normalized();
    assert!(thermometry_conditions_check(&probe, &bath, &uniform).unwrap().all_hold());

    let mut k = 0u64;
    for d in 3..=10 {
        for sd in [SpectralDensity::Flat, SpectralDensity::Ohmic { omega_ref: 1.0 }] {
            let bath = BathSpec::new(1.0, 1.0, sd).unwrap();
            let probe = ProbeSpec::ramp(d, 1.0, 0.05).unwrap();
            for _ in 0..63 {
                let mut rng = substream(71, k);
                k += 1;
                let psi: CVector = (0..d - 1).map(|_| complex_normal(&mut rng)).collect();
                let c = thermometry_conditions_check(&probe, &bath, &psi.normalized()).unwrap();
                assert!(c.all_hold(), "d={d}: {c:?}");
            }
        }
    }
    assert!(k >= 1000);
    assert!(thermometry_conditions_check(&probe, &bath, &CVector::basis(3, 0)).is_err());
}
