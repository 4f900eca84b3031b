use qmpe_core::linalg::{trace_norm, CMatrix, CVector};
use qmpe_core::model::{build_liouvillian, BathSpec, ProbeSpec, SpectralDensity};
use qmpe_core::rng::{complex_normal, substream};
use qmpe_core::thermometry::{
    distinguishability_report, finite_time_distinguishability, local_distinguishability, roof_bound,
    verify_ground_optimality, BlockDecomposition, DifferenceStatus, ProbeState, StateLabel, TemperatureFamily,
};
use qmpe_core::{Error, C64};

fn ginibre_state(d: usize, seed: u64, index: u64) -> ProbeState {
    let mut rng = substream(seed, index);
    let g = CMatrix::from_fn(d, d, |_, _| complex_normal(&mut rng));
    let m = &g * &g.adjoint();
    let rho = m.scale_real(1.0 / m.trace().re).hermitian_part();
    ProbeState::new(rho, StateLabel::Explicit).unwrap()
}

fn fig3() -> (ProbeSpec, BathSpec) {
    (ProbeSpec::ramp(10, 1.0, 0.05).unwrap(), BathSpec::flat(1.0, 1.0).unwrap())
}

#[test]
fn ground_value_and_roof_for_three_levels() {
    let probe = ProbeSpec::degenerate(3, 1.0).unwrap();
    let bath = BathSpec::flat(1.0, 1.0).unwrap();
    let l = build_liouvillian(&probe, &bath).unwrap();
    let e = std::f64::consts::E;
    let exact = 4.0 * e / (e - 1.0).powi(2);
    let v = local_distinguishability(&l, &ProbeState::ground(3)).unwrap();
    assert!((v - 3.6826946).abs() < 1e-6);
    assert!((v - exact).abs() < 1e-12);
    assert!((roof_bound(&probe, &bath).unwrap() - exact).abs() < 1e-12);

    let two = ProbeSpec::degenerate(2, 1.0).unwrap();
    assert!((roof_bound(&two, &bath).unwrap() - 1.8413473).abs() < 1e-6);
    let doubled = BathSpec::flat(1.0, 2.0).unwrap();
    assert!((roof_bound(&probe, &doubled).unwrap() - 2.0 * exact).abs() < 1e-12);
}

#[test]
fn derivative_channel_matches_finite_difference() {
    let (probe, bath) = (ProbeSpec::ramp(4, 1.0, 0.05).unwrap(), BathSpec::flat(1.0, 1.0).unwrap());
    let l = build_liouvillian(&probe, &bath).unwrap();
    let h = 1e-4;
    let lp = build_liouvillian(&probe, &bath.with_beta(1.0 + h).unwrap()).unwrap();
    let lm = build_liouvillian(&probe, &bath.with_beta(1.0 - h).unwrap()).unwrap();
    for rho in [ProbeState::new(l.gibbs.clone(), StateLabel::Explicit).unwrap(), ginibre_state(4, 3, 0)] {
        let fd = (&lp.apply(rho.matrix()).unwrap() - &lm.apply(rho.matrix()).unwrap()).scale_real(0.5 / h);
        let fd_value = trace_norm(&fd).unwrap();
        let value = local_distinguishability(&l, &rho).unwrap();
        assert!((fd_value - value).abs() <= 1e-7 * value.max(1.0), "{fd_value} vs {value}");
    }
}

#[test]
fn roof_holds_for_random_states() {
    for d in 2..=10 {
        let (probe, bath) = (ProbeSpec::ramp(d, 1.0, 0.05).unwrap(), BathSpec::flat(1.0, 1.0).unwrap());
        let l = build_liouvillian(&probe, &bath).unwrap();
        let roof = roof_bound(&probe, &bath).unwrap();
        for i in 0..200 {
            let rho = if i % 2 == 0 { ProbeState::haar(d, 11, i) } else { ginibre_state(d, 12, i) };
            assert!(local_distinguishability(&l, &rho).unwrap() <= roof + 1e-9);
        }
        let ground = local_distinguishability(&l, &ProbeState::ground(d)).unwrap();
        assert!((ground - roof).abs() <= 1e-9);
    }
}

#[test]
fn only_the_ground_state_saturates() {
    for sd in [SpectralDensity::Flat, SpectralDensity::Ohmic { omega_ref: 1.0 }] {
        let probe = ProbeSpec::ramp(5, 1.0, 0.05).unwrap();
        let bath = BathSpec::new(1.0, 1.0, sd).unwrap();
        let l = build_liouvillian(&probe, &bath).unwrap();
        let roof = roof_bound(&probe, &bath).unwrap();
        for k in 1..5 {
            let gap = roof - local_distinguishability(&l, &ProbeState::basis(5, k)).unwrap();
            assert!(gap > 0.1 * roof, "level {k} gap {gap}");
        }
    }
}

#[test]
fn block_assembly_reproduces_direct_evaluation() {
    let (probe, bath) = (ProbeSpec::ramp(6, 1.0, 0.05).unwrap(), BathSpec::flat(0.8, 1.0).unwrap());
    let l = build_liouvillian(&probe, &bath).unwrap();
    for (i, eta) in [0.0f64, 0.1, 0.5, 0.9, 1.0].into_iter().enumerate() {
        let excited = ProbeState::haar(5, 21, i as u64);
        let phi = excited.state_vector().unwrap();
        let phase = C64::from_polar(1.0, 0.7 * i as f64);
        let mut psi = CVector::zeros(6);
        psi[0] = phase * eta.sqrt();
        for k in 0..5 {
            psi[k + 1] = phi[k] * (1.0 - eta).sqrt();
        }
        let blocks = BlockDecomposition::new(&l, &psi).unwrap();
        let direct = l.apply_beta_derivative(&psi.projector()).unwrap();
        assert!((&blocks.assemble() - &direct).max_abs() <= 1e-10);
        assert!((blocks.eta - eta).abs() < 1e-12);
    }
}

#[test]
fn excited_block_matches_closed_form() {
    // the excited block of d_beta L[|phi><phi|] is -(D P + P D)/2 with D = diag(J n'), P = |phi><phi|
    let (probe, bath) = (ProbeSpec::ramp(5, 1.0, 0.05).unwrap(), BathSpec::flat(1.0, 1.0).unwrap());
    let l = build_liouvillian(&probe, &bath).unwrap();
    let phi = ProbeState::haar(4, 5, 0);
    let v = phi.state_vector().unwrap();
    let psi: CVector = std::iter::once(C64::new(0.0, 0.0)).chain(v.iter().copied()).collect();
    let blocks = BlockDecomposition::new(&l, &psi).unwrap();
    let rates: Vec<f64> = probe
        .transition_frequencies()
        .iter()
        .map(|&w| bath.coupling(w) * qmpe_core::model::occupation_beta_derivative(1.0, w))
        .collect();
    let dm = CMatrix::from_real_diag(&rates);
    let p = v.projector();
    let expected = (&(&dm * &p) + &(&p * &dm)).scale_real(-0.5);
    assert!((&blocks.a_block - &expected).max_abs() < 1e-12);
    let s: f64 = rates.iter().sum();
    assert!((blocks.b + s).abs() < 1e-12);
}

#[test]
fn mixtures_never_beat_their_components() {
    let (probe, bath) = fig3();
    let l = build_liouvillian(&probe, &bath).unwrap();
    for i in 0..20u64 {
        let (p, q) = (ProbeState::haar(10, 31, 2 * i), ProbeState::haar(10, 31, 2 * i + 1));
        let w = (i as f64 + 0.5) / 20.0;
        let mix = &p.matrix().scale_real(w) + &q.matrix().scale_real(1.0 - w);
        let mixed = ProbeState::new(mix.hermitian_part(), StateLabel::Explicit).unwrap();
        let lhs = local_distinguishability(&l, &mixed).unwrap();
        let rhs = w * local_distinguishability(&l, &p).unwrap() + (1.0 - w) * local_distinguishability(&l, &q).unwrap();
        assert!(lhs <= rhs + 1e-12);
    }
}

#[test]
fn ground_optimality_survives_sampling() {
    let (probe, bath) = fig3();
    let l = build_liouvillian(&probe, &bath).unwrap();
    let rep = verify_ground_optimality(&l, &probe, &bath, 1000, 7).unwrap();
    assert!(rep.max_sampled <= rep.roof);
    assert!((rep.ground_value - rep.roof).abs() <= 1e-9);
    assert_eq!(rep.argmax, StateLabel::Ground);
    assert_eq!(rep.evaluations.len(), 10 + 2 + 1000);

    let three = ProbeSpec::degenerate(3, 1.0).unwrap();
    let l3 = build_liouvillian(&three, &bath).unwrap();
    let r = distinguishability_report(&l3, &three, &bath, &ProbeState::basis(3, 1)).unwrap();
    assert!(r.gap_to_roof > 1e-3);
    assert!(r.blocks.is_some());
}

#[test]
fn finite_time_limits() {
    let (probe, bath) = (ProbeSpec::ramp(4, 1.0, 0.05).unwrap(), BathSpec::flat(1.0, 1.0).unwrap());
    let l = build_liouvillian(&probe, &bath).unwrap();
    let rho = ProbeState::haar(4, 2, 0);
    let zero = finite_time_distinguishability(&probe, &bath, &rho, 0.0, None).unwrap();
    assert_eq!(zero.value, 0.0);
    assert_eq!(zero.status, DifferenceStatus::Ok);

    let dt = 1e-3;
    let fam = TemperatureFamily::new(&probe, &bath, None).unwrap();
    for rho in [ProbeState::ground(4), rho] {
        let r = fam.distinguishability(&rho, dt).unwrap();
        let local = local_distinguishability(&l, &rho).unwrap();
        assert!((r.value / dt - local).abs() <= 0.01 * local, "{} vs {local}", r.value / dt);
        assert_eq!(r.status, DifferenceStatus::Ok);
    }
    assert!(matches!(fam.distinguishability(&ProbeState::ground(4), -1.0), Err(Error::Domain(_))));
    assert!(TemperatureFamily::new(&probe, &bath, Some(2.0)).is_err());
}

#[test]
fn ground_state_maximizes_finite_time_signal() {
    let (probe, bath) = fig3();
    let fam = TemperatureFamily::new(&probe, &bath, None).unwrap();
    let ground = fam.distinguishability(&ProbeState::ground(10), 0.1).unwrap().value;
    for i in 0..200 {
        let v = fam.distinguishability(&ProbeState::haar(10, 99, i), 0.1).unwrap().value;
        assert!(ground > v, "sample {i}: {v} >= {ground}");
    }
}

#[test]
fn invalid_states_are_rejected() {
    let bad_trace = CMatrix::from_real_diag(&[0.5, 0.6]);
    assert!(matches!(ProbeState::new(bad_trace, StateLabel::Explicit), Err(Error::Validation(_))));
    let negative = CMatrix::from_real_diag(&[1.5, -0.5]);
    assert!(matches!(ProbeState::new(negative, StateLabel::Explicit), Err(Error::Validation(_))));
    let mut skew = CMatrix::from_real_diag(&[0.5, 0.5]);
    skew[(0, 1)] = C64::new(0.1, 0.0);
    assert!(matches!(ProbeState::new(skew, StateLabel::Explicit), Err(Error::Validation(_))));
    assert!(ProbeState::pure(&CVector::zeros(3), StateLabel::Explicit).is_err());
}
