//! Temperature sensitivity of probe states: `|d_beta L[rho]|_1`, its closed-form roof,
//! the ground/excited block split, and the finite-time counterpart.

use std::fmt;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{devectorize, eigenvalues, expm_action, trace_norm, vectorize, CMatrix, CVector, ONE};
use crate::model::{build_liouvillian, rate_beta_derivative, BathSpec, Liouvillian, ProbeSpec};
use crate::montecarlo::haar_pure_state;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateLabel {
    Ground,
    ExcitedUniform,
    UniformSuperposition,
    Basis { level: usize },
    Haar { seed: u64, index: u64 },
    Mixed { alpha: f64, seed: u64, index: u64 },
    Explicit,
}

impl StateLabel {
    pub fn seed(&self) -> Option<u64> {
        match *self {
            StateLabel::Haar { seed, .. } | StateLabel::Mixed { seed, .. } => Some(seed),
            _ => None,
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLabel::Ground => write!(f, "ground"),
            StateLabel::ExcitedUniform => write!(f, "excited_uniform"),
            StateLabel::UniformSuperposition => write!(f, "uniform"),
            StateLabel::Basis { level } => write!(f, "basis({level})"),
            StateLabel::Haar { index, .. } => write!(f, "haar({index})"),
            StateLabel::Mixed { alpha, index, .. } => write!(f, "mixed({alpha},{index})"),
            StateLabel::Explicit => write!(f, "explicit"),
        }
    }
}

/// Validated density matrix with a provenance label.
#[derive(Clone, Debug)]
pub struct ProbeState {
    matrix: CMatrix,
    label: StateLabel,
    pure: Option<CVector>,
}

impl ProbeState {
    pub fn new(matrix: CMatrix, label: StateLabel) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("density matrix must be square".into()));
        }
        if !matrix.is_finite() {
            return Err(Error::Validation("density matrix has non-finite entries".into()));
        }
        if matrix.hermiticity_defect() > 1e-12 {
            return Err(Error::Validation(format!("state is not Hermitian (defect {:.3e})", matrix.hermiticity_defect())));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > 1e-12 {
            return Err(Error::Validation(format!("state trace is {:.15}", tr.re)));
        }
        let min_ev = eigenvalues(&matrix.hermitian_part())?.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if min_ev < -1e-10 {
            return Err(Error::Validation(format!("state has negative eigenvalue {min_ev:.3e}")));
        }
        Ok(Self { matrix, label, pure: None })
    }

    pub fn pure(psi: &CVector, label: StateLabel) -> Result<Self> {
        let n = psi.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Validation("state vector has zero or non-finite norm".into()));
        }
        let psi = psi.scale_real(1.0 / n);
        let mut s = Self::new(psi.projector(), label)?;
        s.pure = Some(psi);
        Ok(s)
    }

    pub fn ground(d: usize) -> Self {
        Self::pure(&CVector::basis(d, 0), StateLabel::Ground).expect("basis state is valid")
    }

    pub fn basis(d: usize, level: usize) -> Self {
        let label = if level == 0 { StateLabel::Ground } else { StateLabel::Basis { level } };
        Self::pure(&CVector::basis(d, level), label).expect("basis state is valid")
    }

    /// Equal superposition of the excited levels.
    pub fn excited_uniform(d: usize) -> Self {
        let mut v = CVector::zeros(d);
        for j in 1..d {
            v[j] = ONE;
        }
        Self::pure(&v, StateLabel::ExcitedUniform).expect("valid")
    }

    /// Equal superposition of all levels.
    pub fn uniform_superposition(d: usize) -> Self {
        let v: CVector = (0..d).map(|_| ONE).collect();
        Self::pure(&v, StateLabel::UniformSuperposition).expect("valid")
    }

    pub fn haar(d: usize, seed: u64, index: u64) -> Self {
        let psi = haar_pure_state(d, seed, index);
        Self::pure(&psi, StateLabel::Haar { seed, index }).expect("normalized Gaussian vector is valid")
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn label(&self) -> &StateLabel {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn state_vector(&self) -> Option<&CVector> {
        self.pure.as_ref()
    }
}

/// Blocks of `d_beta L[rho]` for `psi = sqrt(eta)|0> + sqrt(1 - eta)|phi>`, with
/// `phi` supported on the excited levels.
#[derive(Clone, Debug, Serialize)]
pub struct BlockDecomposition {
    pub eta: f64,
    /// Excited block of `d_beta L[|phi><phi|]`.
    pub a_block: CMatrix,
    /// Excited block of `d_beta L[|0><0|]`.
    pub b_block: CMatrix,
    /// Ground entry of `d_beta L[|phi><phi|]`.
    pub a: f64,
    /// Ground entry of `d_beta L[|0><0|]`.
    pub b: f64,
    /// Excited-ground column of `d_beta L[|phi><0|]`.
    pub c: CVector,
}

impl BlockDecomposition {
    pub fn new(l: &Liouvillian, psi: &CVector) -> Result<Self> {
        let d = l.dim;
        if psi.len() != d {
            return Err(Error::Dimension(format!("state vector has length {}, generator dimension {d}", psi.len())));
        }
        let psi = psi.normalized();
        let p0 = psi[0];
        let phase = if p0.norm() > 0.0 { p0.conj() / p0.norm() } else { ONE };
        let psi = psi.scale(phase);
        let eta = psi[0].norm_sqr().min(1.0);
        let mut phi = psi.clone();
        phi[0] = C64::new(0.0, 0.0);
        let phi = if phi.norm() > 1e-300 { phi.normalized() } else { CVector::basis(d, 1) };
        let ground = CVector::basis(d, 0);

        let dl_phi = l.apply_beta_derivative(&phi.projector())?;
        let dl_g = l.apply_beta_derivative(&ground.projector())?;
        let dl_x = l.apply_beta_derivative(&phi.outer(&ground))?;
        Ok(Self {
            eta,
            a_block: dl_phi.submatrix(1, d, 1, d),
            b_block: dl_g.submatrix(1, d, 1, d),
            a: dl_phi[(0, 0)].re,
            b: dl_g[(0, 0)].re,
            c: (1..d).map(|k| dl_x[(k, 0)]).collect(),
        })
    }

    /// `d_beta L[|psi><psi|]` rebuilt from the blocks, in the original level order.
    pub fn assemble(&self) -> CMatrix {
        let m = self.a_block.rows();
        let d = m + 1;
        let eta = self.eta;
        let s = (eta * (1.0 - eta)).sqrt();
        let mut out = CMatrix::zeros(d, d);
        out[(0, 0)] = C64::new((1.0 - eta) * self.a + eta * self.b, 0.0);
        for k in 0..m {
            out[(k + 1, 0)] = self.c[k] * s;
            out[(0, k + 1)] = self.c[k].conj() * s;
            for j in 0..m {
                out[(k + 1, j + 1)] = self.a_block[(k, j)] * (1.0 - eta) + self.b_block[(k, j)] * eta;
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DistinguishabilityReport {
    pub value: f64,
    pub roof: f64,
    pub gap_to_roof: f64,
    pub blocks: Option<BlockDecomposition>,
}

/// `|d_beta L[rho]|_1`
pub fn local_distinguishability(l: &Liouvillian, rho: &ProbeState) -> Result<f64> {
    if rho.dim() != l.dim {
        return Err(Error::Dimension(format!("state dimension {} vs generator dimension {}", rho.dim(), l.dim)));
    }
    trace_norm(&l.apply_beta_derivative(rho.matrix())?)
}

/// `2 |sum_j d_beta rate(w_j)|`
pub fn roof_bound(probe: &ProbeSpec, bath: &BathSpec) -> Result<f64> {
    let mut s = 0.0;
    for w in probe.transition_frequencies() {
        s += rate_beta_derivative(bath, w)?;
    }
    Ok(2.0 * s.abs())
}

pub fn distinguishability_report(
    l: &Liouvillian,
    probe: &ProbeSpec,
    bath: &BathSpec,
    rho: &ProbeState,
) -> Result<DistinguishabilityReport> {
    let value = local_distinguishability(l, rho)?;
    let roof = roof_bound(probe, bath)?;
    let blocks = match rho.state_vector() {
        Some(psi) if l.dim >= 2 => Some(BlockDecomposition::new(l, psi)?),
        _ => None,
    };
    Ok(DistinguishabilityReport { value, roof, gap_to_roof: roof - value, blocks })
}

#[derive(Clone, Debug, Serialize)]
pub struct Evaluation {
    pub label: StateLabel,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimalityReport {
    pub max_sampled: f64,
    pub roof: f64,
    pub ground_value: f64,
    pub argmax: StateLabel,
    pub evaluations: Vec<Evaluation>,
}

/// Structured candidates plus `n_samples` Haar states; fails with a counterexample
/// if any state beats the roof or the ground state misses it.
pub fn verify_ground_optimality(
    l: &Liouvillian,
    probe: &ProbeSpec,
    bath: &BathSpec,
    n_samples: usize,
    seed: u64,
) -> Result<OptimalityReport> {
    if n_samples == 0 {
        return Err(Error::Validation("n_samples must be at least 1".into()));
    }
    let d = l.dim;
    let roof = roof_bound(probe, bath)?;
    let mut states: Vec<ProbeState> = (0..d).map(|k| ProbeState::basis(d, k)).collect();
    states.push(ProbeState::uniform_superposition(d));
    if d > 2 {
        states.push(ProbeState::excited_uniform(d));
    }
    let mut evaluations: Vec<Evaluation> = states
        .iter()
        .map(|s| Ok(Evaluation { label: s.label().clone(), value: local_distinguishability(l, s)? }))
        .collect::<Result<_>>()?;
    let sampled: Vec<Evaluation> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = ProbeState::haar(d, seed, i);
            Ok(Evaluation { label: s.label().clone(), value: local_distinguishability(l, &s)? })
        })
        .collect::<Result<_>>()?;
    evaluations.extend(sampled);

    let ground_value = evaluations[0].value;
    let (mut argmax, mut max_sampled) = (evaluations[0].label.clone(), f64::NEG_INFINITY);
    for e in &evaluations[1..] {
        if e.value > max_sampled {
            max_sampled = e.value;
            argmax = e.label.clone();
        }
    }
    if let Some(bad) = evaluations.iter().find(|e| e.value > roof + 1e-9) {
        return Err(Error::Counterexample(format!(
            "state {} reaches {:.12} above the roof {:.12}",
            bad.label, bad.value, roof
        )));
    }
    if ground_value < roof - 1e-9 {
        return Err(Error::Counterexample(format!("ground state value {ground_value:.12} misses the roof {roof:.12}")));
    }
    if ground_value >= max_sampled {
        argmax = StateLabel::Ground;
    }
    Ok(OptimalityReport { max_sampled, roof, ground_value, argmax, evaluations })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceStatus {
    Ok,
    /// Step halving changed the value by more than 10%.
    Warning,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FiniteTimeResult {
    pub value: f64,
    pub half_step_value: f64,
    pub status: DifferenceStatus,
}

/// Generators at `beta +- h` and `beta +- h/2` for central differences in temperature.
#[derive(Clone, Debug)]
pub struct TemperatureFamily {
    dbeta: f64,
    plus: Liouvillian,
    minus: Liouvillian,
    plus_half: Liouvillian,
    minus_half: Liouvillian,
}

impl TemperatureFamily {
    /// `dbeta = None` selects `1e-4 * beta`.
    pub fn new(probe: &ProbeSpec, bath: &BathSpec, dbeta: Option<f64>) -> Result<Self> {
        let beta = bath.beta();
        let h = dbeta.unwrap_or(1e-4 * beta);
        if !(h.is_finite() && h > 0.0) || h >= beta {
            return Err(Error::Domain(format!("temperature step must lie in (0, beta), got {h}")));
        }
        let at = |b: f64| build_liouvillian(probe, &bath.with_beta(b)?);
        Ok(Self {
            dbeta: h,
            plus: at(beta + h)?,
            minus: at(beta - h)?,
            plus_half: at(beta + 0.5 * h)?,
            minus_half: at(beta - 0.5 * h)?,
        })
    }

    pub fn dbeta(&self) -> f64 {
        self.dbeta
    }

    fn difference(&self, p: &Liouvillian, m: &Liouvillian, v: &CVector, dt: f64, h: f64) -> Result<f64> {
        let a = expm_action(&p.matrix, v, dt)?;
        let b = expm_action(&m.matrix, v, dt)?;
        trace_norm(&devectorize(&(&a - &b))?.scale_real(0.5 / h))
    }

    /// `|(rho_dt(beta + h) - rho_dt(beta - h)) / 2h|_1`, checked against `h/2`.
    pub fn distinguishability(&self, rho0: &ProbeState, dt: f64) -> Result<FiniteTimeResult> {
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(Error::Domain(format!("evolution time must be non-negative, got {dt}")));
        }
        if rho0.dim() != self.plus.dim {
            return Err(Error::Dimension("state and generator dimensions differ".into()));
        }
        let v = vectorize(rho0.matrix())?;
        let value = self.difference(&self.plus, &self.minus, &v, dt, self.dbeta)?;
        let half_step_value = self.difference(&self.plus_half, &self.minus_half, &v, dt, 0.5 * self.dbeta)?;
        let scale = value.abs().max(half_step_value.abs());
        let status = if scale > 0.0 && (value - half_step_value).abs() > 0.1 * scale {
            DifferenceStatus::Warning
        } else {
            DifferenceStatus::Ok
        };
        Ok(FiniteTimeResult { value, half_step_value, status })
    }
}

pub fn finite_time_distinguishability(
    probe: &ProbeSpec,
    bath: &BathSpec,
    rho0: &ProbeState,
    dt: f64,
    dbeta: Option<f64>,
) -> Result<FiniteTimeResult> {
    TemperatureFamily::new(probe, bath, dbeta)?.distinguishability(rho0, dt)
}
