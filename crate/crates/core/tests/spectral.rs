use qmpe_core::linalg::{eig_general, expm_action, hs_inner, vectorize, devectorize, CMatrix};
use qmpe_core::model::{build_liouvillian, gibbs_state, BathSpec, ProbeSpec};
use qmpe_core::spectral::{
    analytic_spectrum_degenerate, coherence_rate_comparison, max_slow_overlap, mode_overlaps,
    numerical_spectrum, perturbation_overlap_bound, SpectralData, Subspace,
};
use qmpe_core::C64;

const NBAR: f64 = 0.5819767068693265;

fn unit_bath() -> BathSpec {
    BathSpec::flat(1.0, 1.0).unwrap()
}

fn sorted(mut v: Vec<C64>) -> Vec<C64> {
    v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    v
}

fn ground(d: usize) -> CMatrix {
    CMatrix::unit(d, 0, 0)
}

#[test]
fn three_level_population_values() {
    let probe = ProbeSpec::degenerate(3, 1.0).unwrap();
    let spec = analytic_spectrum_degenerate(&probe, &unit_bath()).unwrap();
    let mut pops: Vec<f64> = spec
        .triples
        .iter()
        .filter(|t| t.subspace == Subspace::Population)
        .map(|t| t.lambda.re)
        .collect();
    pops.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert_eq!(pops.len(), 3);
    assert!(pops[0].abs() < 1e-15);
    assert!((pops[1] + 1.5819767068693265).abs() < 1e-12);
    assert!((pops[2] + 2.7459301206079795).abs() < 1e-12);
    let tau = gibbs_state(&probe, &unit_bath());
    assert!((&spec.steady_state() - &tau).max_abs() < 1e-12);
    let ee = spec
        .triples
        .iter()
        .find(|t| t.subspace == Subspace::Coherence && t.right_op[(1, 2)].norm() > 0.5)
        .unwrap();
    assert!((ee.lambda.re + 1.0 + NBAR).abs() < 1e-12 && ee.lambda.im.abs() < 1e-15);
}

#[test]
fn analytic_triples_are_exact() {
    for d in [2usize, 3, 4, 7] {
        let probe = ProbeSpec::degenerate(d, 1.0).unwrap();
        let l = build_liouvillian(&probe, &unit_bath()).unwrap();
        let spec = analytic_spectrum_degenerate(&probe, &unit_bath()).unwrap();
        assert_eq!(spec.len(), d * d);
        for t in &spec.triples {
            let lr = l.apply(&t.right_op).unwrap();
            assert!((&lr - &t.right_op.scale(t.lambda)).frobenius_norm() < 1e-12, "d={d} lambda={}", t.lambda);
            let adj = devectorize(&l.adjoint().mul_vec(&vectorize(&t.left_op).unwrap())).unwrap();
            assert!((&adj - &t.left_op.scale(t.lambda.conj())).frobenius_norm() < 1e-12);
            assert!((t.right_op.frobenius_norm() - 1.0).abs() < 1e-12);
        }
        assert!(spec.biorthogonality_defect() < 1e-12);
    }
}

#[test]
fn analytic_rejects_detuned_probe() {
    let probe = ProbeSpec::ramp(4, 1.0, 0.05).unwrap();
    assert!(analytic_spectrum_degenerate(&probe, &unit_bath()).is_err());
}

#[test]
fn numerical_matches_analytic_at_zero_detuning() {
    for d in [2usize, 3, 5, 10] {
        let probe = ProbeSpec::degenerate(d, 1.0).unwrap();
        let l = build_liouvillian(&probe, &unit_bath()).unwrap();
        let num = numerical_spectrum(&l).unwrap();
        let ana = analytic_spectrum_degenerate(&probe, &unit_bath()).unwrap();
        let a = sorted(num.eigenvalues());
        let b = sorted(ana.eigenvalues());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-9, "d={d}: {x} vs {y}");
        }
        assert!(num.biorthogonality_defect() < 1e-8, "d={d}");
        assert!(num.triples.iter().all(|t| t.residual <= 1e-8));
        assert!(num.triples.iter().all(|t| t.lambda.re <= 1e-12));
        assert!((num.lambda_max - ana.lambda_max).abs() < 1e-9);
    }
}

#[test]
fn full_matrix_eigensolver_sees_the_same_set() {
    let probe = ProbeSpec::degenerate(3, 1.0).unwrap();
    let l = build_liouvillian(&probe, &unit_bath()).unwrap();
    let ev = sorted(eig_general(&l.matrix).unwrap().into_iter().map(|p| p.0).collect());
    let ana = sorted(analytic_spectrum_degenerate(&probe, &unit_bath()).unwrap().eigenvalues());
    for (x, y) in ev.iter().zip(&ana) {
        assert!((x - y).norm() < 1e-9);
    }
    let count = |target: f64| ev.iter().filter(|z| (z.re - target).abs() < 1e-9 && z.im.abs() < 1e-9).count();
    assert!(count(-(1.0 + NBAR)) >= 3);
    assert_eq!(count(-(3.0 * NBAR + 1.0)), 1);
    assert_eq!(count(0.0), 1);
}

#[test]
fn detuning_shifts_are_order_epsilon() {
    let eps = 0.05;
    let probe = ProbeSpec::ramp(10, 1.0, eps).unwrap();
    let l = build_liouvillian(&probe, &unit_bath()).unwrap();
    let num = numerical_spectrum(&l).unwrap();
    let ana = analytic_spectrum_degenerate(&ProbeSpec::degenerate(10, 1.0).unwrap(), &unit_bath()).unwrap();
    let base = ana.eigenvalues();
    let worst = num
        .eigenvalues()
        .iter()
        .map(|z| base.iter().map(|b| (z - b).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    assert!(worst <= 10.0 * eps, "max shift {worst}");
    assert!(num.biorthogonality_defect() < 1e-8);
    let tau = gibbs_state(&probe, &unit_bath());
    assert!((&num.steady_state() - &tau).max_abs() < 1e-10);
}

#[test]
fn mode_expansion_reproduces_propagation() {
    let probe = ProbeSpec::ramp(4, 1.0, 0.05).unwrap();
    let l = build_liouvillian(&probe, &unit_bath()).unwrap();
    let spec = numerical_spectrum(&l).unwrap();
    for k in 0..20u64 {
        let psi: Vec<C64> = (0..4)
            .map(|i| C64::new(((k * 7 + i * 3) % 11) as f64 - 5.0, ((k + 2 * i) % 5) as f64 - 2.0))
            .collect();
        let v = qmpe_core::CVector::from_vec(psi).normalized();
        let rho = v.projector();
        let c = mode_overlaps(&spec, &rho).unwrap();
        for t in [0.0, 0.1, 1.0, 5.0] {
            let direct = devectorize(&expm_action(&l.matrix, &vectorize(&rho).unwrap(), t).unwrap()).unwrap();
            let modes = spec.reconstruct(&c, t);
            assert!((&direct - &modes).frobenius_norm() <= 1e-7, "k={k} t={t}");
        }
    }
}

#[test]
fn gibbs_state_has_no_decaying_overlap() {
    let probe = ProbeSpec::ramp(5, 1.0, 0.05).unwrap();
    let l = build_liouvillian(&probe, &unit_bath()).unwrap();
    let spec = numerical_spectrum(&l).unwrap();
    let c = mode_overlaps(&spec, &l.gibbs).unwrap();
    assert!(c[1..].iter().all(|z| z.norm() < 1e-9));
    let bad = l.gibbs.scale_real(2.0);
    assert!(mode_overlaps(&spec, &bad).is_err());
}

#[test]
fn excited_state_overlap_with_slow_mode() {
    let probe = ProbeSpec::degenerate(3, 1.0).unwrap();
    let spec = analytic_spectrum_degenerate(&probe, &unit_bath()).unwrap();
    let tail = spec.lower_tail();
    assert_eq!(tail.len(), 1);
    let c = mode_overlaps(&spec, &CMatrix::unit(3, 1, 1)).unwrap();
    assert!((c[tail[0]].norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    let c0 = mode_overlaps(&spec, &ground(3)).unwrap();
    assert!(c0[tail[0]].norm() < 1e-15);
}

#[test]
fn overlap_bound_values() {
    let probe = ProbeSpec::ramp(10, 1.0, 0.05).unwrap();
    let b = perturbation_overlap_bound(&probe, &unit_bath()).unwrap();
    assert!((b - 0.05 / 3.0 * NBAR).abs() < 1e-12);
    assert!((b - 0.0096996).abs() < 1e-7);
    assert_eq!(perturbation_overlap_bound(&ProbeSpec::degenerate(4, 1.0).unwrap(), &unit_bath()).unwrap(), 0.0);
    assert!(perturbation_overlap_bound(&ProbeSpec::degenerate(2, 1.0).unwrap(), &unit_bath()).is_err());
}

#[test]
fn ground_state_slow_overlap_respects_bound() {
    for d in [3usize, 5, 10] {
        for eps in [0.0, 0.01, 0.05] {
            let probe = ProbeSpec::ramp(d, 1.0, eps).unwrap();
            let l = build_liouvillian(&probe, &unit_bath()).unwrap();
            let spec = numerical_spectrum(&l).unwrap();
            let overlap = max_slow_overlap(&spec, &ground(d)).unwrap();
            let bound = perturbation_overlap_bound(&probe, &unit_bath()).unwrap();
            if eps == 0.0 {
                assert!(overlap <= 1e-10, "d={d} overlap={overlap}");
            } else {
                assert!(overlap <= bound * (1.0 + 10.0 * eps), "d={d} eps={eps}: {overlap} vs {bound}");
            }
        }
    }
}

fn right_overlaps(spec: &SpectralData) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..spec.len() {
        for j in i + 1..spec.len() {
            let v = hs_inner(&spec.triples[i].right_op, &spec.triples[j].right_op).norm();
            if v > 1e-9 {
                out.push((i, j, v));
            }
        }
    }
    out
}

#[test]
fn only_stationary_and_fast_modes_are_non_orthogonal() {
    for d in [3usize, 6] {
        let probe = ProbeSpec::degenerate(d, 1.0).unwrap();
        let l = build_liouvillian(&probe, &unit_bath()).unwrap();
        for spec in [analytic_spectrum_degenerate(&probe, &unit_bath()).unwrap(), numerical_spectrum(&l).unwrap()] {
            let pairs = right_overlaps(&spec);
            assert_eq!(pairs.len(), 1, "d={d}: {pairs:?}");
            let (i, j, _) = pairs[0];
            assert_eq!(i, 0);
            let fast = -(d as f64 * NBAR + 1.0);
            assert!((spec.triples[j].lambda.re - fast).abs() < 1e-9);
        }
    }
}

#[test]
fn adjoint_annihilates_identity() {
    let probe = ProbeSpec::ramp(6, 1.0, 0.05).unwrap();
    let l = build_liouvillian(&probe, &unit_bath()).unwrap();
    let out = l.adjoint().mul_vec(&vectorize(&CMatrix::identity(6)).unwrap());
    assert!(out.max_abs() < 1e-12);
}

#[test]
fn slowest_rate_ordering() {
    // With d n >= 1 + n the slowest nonzero rate is the excited cluster at gamma(1 + n).
    let probe = ProbeSpec::ramp(10, 1.0, 0.01).unwrap();
    let l = build_liouvillian(&probe, &unit_bath()).unwrap();
    let spec = numerical_spectrum(&l).unwrap();
    assert!((spec.lambda_min_nonzero - (1.0 + NBAR)).abs() <= 10.0 * 0.01);
    let re: Vec<f64> = spec.triples.iter().map(|t| t.lambda.re.abs()).collect();
    assert!(re.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(re[0], spec.triples[0].lambda.re.abs());
    assert!(re[0] < 1e-12);

    for d in 4..=10usize {
        let l = build_liouvillian(&ProbeSpec::ramp(d, 1.0, 0.01).unwrap(), &unit_bath()).unwrap();
        let lm = numerical_spectrum(&l).unwrap().lambda_min_nonzero;
        assert!((lm - (1.0 + NBAR)).abs() <= 10.0 * 0.01, "d={d}: {lm}");
    }
    // below d = 2 + 1/n the ground-excited coherences are slower
    let l = build_liouvillian(&ProbeSpec::degenerate(3, 1.0).unwrap(), &unit_bath()).unwrap();
    let lm = numerical_spectrum(&l).unwrap().lambda_min_nonzero;
    assert!((lm - 0.5 * (1.0 + 3.0 * NBAR)).abs() < 1e-12);
}

#[test]
fn coherence_rate_is_half_the_summed_escape_rates() {
    for d in [3usize, 5, 10] {
        let probe = ProbeSpec::degenerate(d, 1.0).unwrap();
        let l = build_liouvillian(&probe, &unit_bath()).unwrap();
        let spec = numerical_spectrum(&l).unwrap();
        let cmp = coherence_rate_comparison(&probe, &unit_bath(), &spec).unwrap();
        assert!((cmp.numerical - cmp.escape_rate_half_sum).abs() < 1e-12);
        assert!((cmp.numerical - 0.5 * (1.0 + d as f64 * NBAR)).abs() < 1e-12);
        // neither alternative closed form reproduces the generator
        assert!(cmp.deviation_one() > 0.1 && cmp.deviation_two() > 0.1);
    }
}
