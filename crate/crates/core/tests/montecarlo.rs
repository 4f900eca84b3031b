use qmpe_core::linalg::{CMatrix, CVector};
use qmpe_core::model::{BathSpec, ProbeSpec};
use qmpe_core::montecarlo::{
    f_statistic, haar_pure_state, haar_unitary, lipschitz_check, run_exceedance_experiment, MCConfig,
    LIPSCHITZ_CONSTANT,
};
use qmpe_core::stats::{ks_two_sample, mean_se};
use qmpe_core::C64;

fn mu(d: usize) -> f64 {
    let d = d as f64;
    (d - 1.0) * (d - 2.0) / (d * (d + 1.0))
}

#[test]
fn samples_are_normalized_and_reproducible() {
    for i in 0..100 {
        let v = haar_pure_state(7, 42, i);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert_eq!(v, haar_pure_state(7, 42, i));
    }
    assert_ne!(haar_pure_state(7, 42, 0), haar_pure_state(7, 42, 1));
    assert_ne!(haar_pure_state(7, 42, 0), haar_pure_state(7, 43, 0));
}

#[test]
fn first_and_second_moments() {
    let d = 4;
    let n = 100_000;
    let (mut p0, mut p01) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n as u64 {
        let v = haar_pure_state(d, 5, i);
        p0.push(v[0].norm_sqr());
        p01.push(v[0].norm_sqr() * v[1].norm_sqr());
    }
    let (m, se) = mean_se(&p0);
    assert!((m - 0.25).abs() <= 4.0 * se, "{m} +- {se}");
    let (m, se) = mean_se(&p01);
    assert!((m - 1.0 / 20.0).abs() <= 4.0 * se, "{m} +- {se}");
}

#[test]
fn statistic_reference_values() {
    assert_eq!(f_statistic(&CVector::basis(5, 0)), 0.0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v = CVector::from_real(&[0.0, h, h]);
    assert!((f_statistic(&v) - 0.5).abs() < 1e-15);
}

#[test]
fn statistic_mean_matches_moment_identity() {
    for d in [3usize, 5, 10] {
        let fs: Vec<f64> = (0..10_000).map(|i| f_statistic(&haar_pure_state(d, 77, i))).collect();
        let (m, se) = mean_se(&fs);
        assert!((m - mu(d)).abs() <= 3.0 * se, "d={d}: {m} vs {} (se {se})", mu(d));
    }
}

#[test]
fn lipschitz_ratio_stays_below_constant() {
    let rep = lipschitz_check(100_000, 5, 3).unwrap();
    assert!(rep.max_ratio <= LIPSCHITZ_CONSTANT + 1e-9);
    assert!(rep.max_ratio > 0.5);
    assert_eq!(rep.pairs_used, 100_000);
    // global phase leaves f unchanged
    let v = haar_pure_state(5, 1, 0);
    assert_eq!(f_statistic(&v), f_statistic(&v.scale(C64::new(-1.0, 0.0))));
}

#[test]
fn haar_unitary_is_unitary() {
    let u = haar_unitary(6, 9, 0);
    assert!((&(&u.adjoint() * &u) - &CMatrix::identity(6)).max_abs() < 1e-12);
}

#[test]
fn statistic_distribution_is_unitarily_invariant() {
    let d = 5;
    let n = 10_000u64;
    let base: Vec<f64> = (0..n).map(|i| f_statistic(&haar_pure_state(d, 100, i))).collect();
    // diagonal phases leave every sample's moduli unchanged
    let phases: Vec<C64> = (0..d).map(|k| C64::from_polar(1.0, 0.3 + 1.1 * k as f64)).collect();
    let phased: Vec<f64> = (0..n)
        .map(|i| {
            let v = haar_pure_state(d, 100, i);
            f_statistic(&v.iter().zip(&phases).map(|(a, b)| a * b).collect())
        })
        .collect();
    assert!(base.iter().zip(&phased).all(|(a, b)| (a - b).abs() < 1e-14));
    let (_, p) = ks_two_sample(&base, &phased).unwrap();
    assert!(p > 0.01);
    // a generic fixed unitary, applied to an independent sample set
    let u = haar_unitary(d, 1, 0);
    let rotated: Vec<f64> = (0..n).map(|i| f_statistic(&(&u * &haar_pure_state(d, 200, i)))).collect();
    let (_, p) = ks_two_sample(&base, &rotated).unwrap();
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn experiment_is_deterministic_across_widths() {
    let probe = ProbeSpec::ramp(5, 1.0, 0.05).unwrap();
    let bath = BathSpec::flat(1.0, 1.0).unwrap();
    let run = |w| {
        let mc = MCConfig { n_samples: 24, alpha: 0.2, seed: 11, parallel_width: w };
        format!("{:?}", run_exceedance_experiment(&probe, &bath, &mc, None).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn two_levels_always_exceed() {
    let probe = ProbeSpec::degenerate(2, 1.0).unwrap();
    let bath = BathSpec::flat(1.0, 1.0).unwrap();
    let mc = MCConfig { n_samples: 50, alpha: 0.2, seed: 0, parallel_width: 2 };
    let rep = run_exceedance_experiment(&probe, &bath, &mc, None).unwrap();
    assert_eq!(rep.frequency, 1.0);
    assert_eq!(rep.exceed_count, 50);
    assert_eq!(rep.delta_bound, 0.0);
    let (lo, hi) = rep.wilson_ci95;
    assert!(lo <= rep.frequency && rep.frequency <= hi);
    assert!(rep.consistent_with_bound());
}

#[test]
fn config_validation() {
    let probe = ProbeSpec::degenerate(3, 1.0).unwrap();
    let bath = BathSpec::flat(1.0, 1.0).unwrap();
    for mc in [
        MCConfig { n_samples: 0, alpha: 0.2, seed: 0, parallel_width: 1 },
        MCConfig { n_samples: 5, alpha: 0.0, seed: 0, parallel_width: 1 },
        MCConfig { n_samples: 5, alpha: 1.5, seed: 0, parallel_width: 1 },
        MCConfig { n_samples: 5, alpha: 0.2, seed: 0, parallel_width: 0 },
    ] {
        assert!(run_exceedance_experiment(&probe, &bath, &mc, None).is_err());
    }
}
