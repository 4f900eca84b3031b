//! Shared fixtures for the criterion benches in `benches/`.

use qmpe_core::model::{build_liouvillian, BathSpec, Liouvillian, ProbeSpec};
use qmpe_core::thermometry::ProbeState;
use qmpe_core::{CMatrix, CVector};

/// Detuned probe at unit gap, flat coupling, beta = gamma = 1.
pub fn fixture(d: usize) -> (ProbeSpec, BathSpec, Liouvillian) {
    let probe = ProbeSpec::ramp(d, 1.0, 0.05).expect("valid probe");
    let bath = BathSpec::flat(1.0, 1.0).expect("valid bath");
    let l = build_liouvillian(&probe, &bath).expect("generator builds");
    (probe, bath, l)
}

/// Vectorized Haar state, a generic propagation input.
pub fn haar_vec(d: usize) -> CVector {
    qmpe_core::linalg::vectorize(ProbeState::haar(d, 7, 0).matrix()).expect("square")
}

pub fn haar_matrix(d: usize) -> CMatrix {
    ProbeState::haar(d, 7, 1).matrix().clone()
}
