//! Star-topology probe, bosonic bath rates and the Davies generator.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, vectorize, devectorize, CMatrix};

/// Shape of the bath spectral density, `J(w) = gamma * shape(w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralDensity {
    Flat,
    /// `J(w) = gamma * w / omega_ref`
    Ohmic { omega_ref: f64 },
}

impl SpectralDensity {
    pub fn shape(&self, omega: f64) -> f64 {
        match *self {
            SpectralDensity::Flat => 1.0,
            SpectralDensity::Ohmic { omega_ref } => omega / omega_ref,
        }
    }

    /// `d/dw log shape(w)`
    pub fn log_slope(&self, omega: f64) -> f64 {
        match *self {
            SpectralDensity::Flat => 0.0,
            SpectralDensity::Ohmic { .. } => 1.0 / omega,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    beta: f64,
    gamma: f64,
    spectral_density: SpectralDensity,
}

impl BathSpec {
    pub fn new(beta: f64, gamma: f64, spectral_density: SpectralDensity) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Validation(format!("beta must be positive and finite, got {beta}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Validation(format!("gamma must be positive and finite, got {gamma}")));
        }
        if let SpectralDensity::Ohmic { omega_ref } = spectral_density {
            if !(omega_ref.is_finite() && omega_ref > 0.0) {
                return Err(Error::Validation(format!("ohmic omega_ref must be positive, got {omega_ref}")));
            }
        }
        Ok(Self { beta, gamma, spectral_density })
    }

    pub fn flat(beta: f64, gamma: f64) -> Result<Self> {
        Self::new(beta, gamma, SpectralDensity::Flat)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(beta, self.gamma, self.spectral_density.clone())
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn spectral_density(&self) -> &SpectralDensity {
        &self.spectral_density
    }

    /// `J(|w|)`
    pub fn coupling(&self, omega: f64) -> f64 {
        self.gamma * self.spectral_density.shape(omega.abs())
    }

    /// Bose occupation at `|w|`.
    pub fn occupation(&self, omega: f64) -> f64 {
        occupation(self.beta, omega.abs())
    }
}

/// `1 / (exp(beta w) - 1)`
pub fn occupation(beta: f64, omega: f64) -> f64 {
    1.0 / (beta * omega).exp_m1()
}

/// `d/dbeta` of the occupation, written as `-w n (1 + n)` so it stays finite at large `beta w`.
pub fn occupation_beta_derivative(beta: f64, omega: f64) -> f64 {
    let n = occupation(beta, omega);
    -omega * n * (1.0 + n)
}

fn check_frequency(omega: f64) -> Result<()> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::Domain(format!("transition frequency must be finite and nonzero, got {omega}")));
    }
    Ok(())
}

/// Absorption rate for `w > 0`, emission rate `J(|w|)(1 + n(|w|))` for `w < 0`.
pub fn rate(bath: &BathSpec, omega: f64) -> Result<f64> {
    check_frequency(omega)?;
    let j = bath.coupling(omega);
    let n = bath.occupation(omega);
    Ok(if omega > 0.0 { j * n } else { j * (1.0 + n) })
}

/// `d rate / d beta`; identical for `w` and `-w`.
pub fn rate_beta_derivative(bath: &BathSpec, omega: f64) -> Result<f64> {
    check_frequency(omega)?;
    Ok(bath.coupling(omega) * occupation_beta_derivative(bath.beta, omega.abs()))
}

/// `d/dw log(exp(beta w) rate(w))` at `w > 0`; its modulus is the constant `g`
/// entering the perturbed-overlap and exceedance bounds.
pub fn log_rate_slope(bath: &BathSpec, omega: f64) -> Result<f64> {
    check_frequency(omega)?;
    if omega < 0.0 {
        return Err(Error::Domain("log_rate_slope is defined for positive frequencies".into()));
    }
    Ok(bath.spectral_density.log_slope(omega) - bath.beta * bath.occupation(omega))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    d: usize,
    gap: f64,
    epsilon: f64,
    detunings: Vec<f64>,
}

impl ProbeSpec {
    pub fn degenerate(d: usize, gap: f64) -> Result<Self> {
        Self::with_detunings(d, gap, 0.0, vec![0.0; d.saturating_sub(1)])
    }

    /// `eps_j = eps (2j - d)/(d - 2)`, spanning `[-eps, eps]`; zero for `d = 2`.
    pub fn ramp(d: usize, gap: f64, epsilon: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Validation(format!("dimension must be at least 2, got {d}")));
        }
        let det = if d == 2 {
            vec![0.0]
        } else {
            (1..d).map(|j| epsilon * (2.0 * j as f64 - d as f64) / (d as f64 - 2.0)).collect()
        };
        Self::with_detunings(d, gap, epsilon, det)
    }

    pub fn with_detunings(d: usize, gap: f64, epsilon: f64, detunings: Vec<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::Validation(format!("dimension must be at least 2, got {d}")));
        }
        if detunings.len() != d - 1 {
            return Err(Error::Validation(format!("expected {} detunings, got {}", d - 1, detunings.len())));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Validation(format!("epsilon must be finite and non-negative, got {epsilon}")));
        }
        if !gap.is_finite() {
            return Err(Error::Validation("gap must be finite".into()));
        }
        for (j, &e) in detunings.iter().enumerate() {
            if !e.is_finite() || e.abs() > epsilon * (1.0 + 1e-12) {
                return Err(Error::Validation(format!(
                    "detuning {} = {e} exceeds the declared bound {epsilon}",
                    j + 1
                )));
            }
            if gap + e <= 0.0 {
                return Err(Error::Validation(format!("level {} has non-positive energy {}", j + 1, gap + e)));
            }
        }
        Ok(Self { d, gap, epsilon, detunings })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn is_degenerate(&self) -> bool {
        self.detunings.iter().all(|&e| e == 0.0)
    }

    /// `(0, w_1, ..., w_{d-1})`
    pub fn energies(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.detunings.iter().map(|e| self.gap + e)).collect()
    }

    /// `(w_1, ..., w_{d-1})`
    pub fn transition_frequencies(&self) -> Vec<f64> {
        self.detunings.iter().map(|e| self.gap + e).collect()
    }
}

/// Vectorized generator together with its pieces and its temperature derivative.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    pub dim: usize,
    pub matrix: CMatrix,
    pub hamiltonian_part: CMatrix,
    pub dissipative_part: CMatrix,
    pub beta_derivative: CMatrix,
    /// Base coupling rate, used as the clustering scale.
    pub gamma: f64,
    pub gibbs: CMatrix,
}

impl Liouvillian {
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.check_operator(rho)?;
        devectorize(&self.matrix.mul_vec(&vectorize(rho)?))
    }

    pub fn apply_beta_derivative(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.check_operator(rho)?;
        devectorize(&self.beta_derivative.mul_vec(&vectorize(rho)?))
    }

    /// Hilbert-Schmidt adjoint of the generator.
    pub fn adjoint(&self) -> CMatrix {
        self.matrix.adjoint()
    }

    fn check_operator(&self, rho: &CMatrix) -> Result<()> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, generator acts on dimension {}",
                rho.rows(),
                rho.cols(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `max |vec(I)^dagger L|`
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.dim;
        let n = d * d;
        let mut worst = 0.0f64;
        for col in 0..n {
            let s: C64 = (0..d).map(|i| self.matrix[(i * d + i, col)]).sum();
            worst = worst.max(s.norm());
        }
        worst
    }

    /// Largest entry linking population indices `(i, i)` to coherence indices `(i, j != i)`.
    pub fn population_coherence_coupling(&self) -> f64 {
        let d = self.dim;
        let n = d * d;
        let is_pop = |k: usize| k / d == k % d;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                if is_pop(r) != is_pop(c) {
                    worst = worst.max(self.matrix[(r, c)].norm());
                }
            }
        }
        worst
    }

    /// Rate matrix on the diagonal populations.
    pub fn population_block(&self) -> CMatrix {
        let d = self.dim;
        CMatrix::from_fn(d, d, |i, j| self.matrix[(i * d + i, j * d + j)])
    }
}

/// Superoperator of `rho -> L rho L^dagger - {L^dagger L, rho}/2`.
pub fn dissipator(jump: &CMatrix) -> CMatrix {
    let d = jump.rows();
    let id = CMatrix::identity(d);
    let ldl = &jump.adjoint() * jump;
    let mut out = kron(jump, &jump.conj());
    out -= &kron(&ldl, &id).scale_real(0.5);
    out -= &kron(&id, &ldl.transpose()).scale_real(0.5);
    out
}

/// Superoperator of `rho -> -i[H, rho]`.
pub fn hamiltonian_superoperator(h: &CMatrix) -> CMatrix {
    let id = CMatrix::identity(h.rows());
    (&kron(h, &id) - &kron(&id, &h.transpose())).scale(C64::new(0.0, -1.0))
}

pub fn build_liouvillian(probe: &ProbeSpec, bath: &BathSpec) -> Result<Liouvillian> {
    let d = probe.d();
    let energies = probe.energies();
    let h = CMatrix::from_real_diag(&energies);
    let hamiltonian_part = hamiltonian_superoperator(&h);
    let mut dissipative_part = CMatrix::zeros(d * d, d * d);
    let mut beta_derivative = CMatrix::zeros(d * d, d * d);
    for (j, &w) in energies.iter().enumerate().skip(1) {
        let down = dissipator(&CMatrix::unit(d, 0, j));
        let up = dissipator(&CMatrix::unit(d, j, 0));
        dissipative_part += &down.scale_real(rate(bath, -w)?);
        dissipative_part += &up.scale_real(rate(bath, w)?);
        let mut upsilon = down;
        upsilon += &up;
        beta_derivative += &upsilon.scale_real(rate_beta_derivative(bath, w)?);
    }
    let matrix = &hamiltonian_part + &dissipative_part;
    Ok(Liouvillian {
        dim: d,
        matrix,
        hamiltonian_part,
        dissipative_part,
        beta_derivative,
        gamma: bath.gamma(),
        gibbs: gibbs_state(probe, bath),
    })
}

pub fn gibbs_state(probe: &ProbeSpec, bath: &BathSpec) -> CMatrix {
    let w: Vec<f64> = probe.energies().iter().map(|e| (-bath.beta() * e).exp()).collect();
    let z: f64 = w.iter().sum();
    CMatrix::from_real_diag(&w.iter().map(|x| x / z).collect::<Vec<_>>())
}

/// Largest `|rate(w)/rate(-w) - exp(-beta w)|` over `omegas` and the probe's own transitions.
pub fn kms_check(probe: &ProbeSpec, bath: &BathSpec, omegas: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &w in omegas.iter().chain(probe.transition_frequencies().iter()) {
        let ratio = rate(bath, w)? / rate(bath, -w)?;
        worst = worst.max((ratio - (-bath.beta() * w).exp()).abs());
    }
    Ok(worst)
}

/// Grid argmax of `|d rate/d beta|` over 400 points in `(0, 10/beta]`.
///
/// For the flat and ohmic shapes the sensitivity is monotone decreasing, so the
/// maximizer sits at the first grid point.
pub fn omega_opt_grid(bath: &BathSpec) -> (f64, f64) {
    let top = 10.0 / bath.beta();
    (1..=400)
        .map(|i| {
            let w = top * i as f64 / 400.0;
            (w, bath.coupling(w) * occupation_beta_derivative(bath.beta(), w).abs())
        })
        .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;

    const NBAR: f64 = 0.5819767068693265;

    #[test]
    fn flat_rate_at_unit_temperature() {
        let bath = BathSpec::flat(1.0, 1.0).unwrap();
        assert!((rate(&bath, 1.0).unwrap() - NBAR).abs() < 1e-15);
        assert!((rate(&bath, -1.0).unwrap() - (1.0 + NBAR)).abs() < 1e-15);
        let e = std::f64::consts::E;
        assert!((rate_beta_derivative(&bath, 1.0).unwrap() + e / (e - 1.0).powi(2)).abs() < 1e-15);
        assert!(matches!(rate(&bath, 0.0), Err(Error::Domain(_))));
        assert!(matches!(rate_beta_derivative(&bath, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cold_bath_freezes_absorption() {
        let bath = BathSpec::flat(1e4, 1.0).unwrap();
        assert_eq!(rate(&bath, 1.0).unwrap(), 0.0);
        assert!((rate(&bath, -1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(rate_beta_derivative(&bath, 1.0).unwrap(), -0.0);
    }

    #[test]
    fn two_level_population_block() {
        let probe = ProbeSpec::degenerate(2, 1.0).unwrap();
        let bath = BathSpec::flat(1.0, 1.0).unwrap();
        let l = build_liouvillian(&probe, &bath).unwrap();
        let p = l.population_block();
        let expect = [[-NBAR, 1.0 + NBAR], [NBAR, -(1.0 + NBAR)]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((p[(i, j)].re - expect[i][j]).abs() < 1e-14 && p[(i, j)].im == 0.0);
            }
        }
    }

    #[test]
    fn gibbs_three_level() {
        let probe = ProbeSpec::degenerate(3, 1.0).unwrap();
        let tau = gibbs_state(&probe, &BathSpec::flat(1.0, 1.0).unwrap());
        let expect = [0.5761168847658291, 0.21194155761708544, 0.21194155761708544];
        for (i, e) in expect.iter().enumerate() {
            assert!((tau[(i, i)].re - e).abs() < 1e-12);
        }
        let hot = gibbs_state(&probe, &BathSpec::flat(1e-8, 1.0).unwrap());
        for i in 0..3 {
            assert!((hot[(i, i)].re - 1.0 / 3.0).abs() < 1e-7);
        }
    }

    #[test]
    fn ramp_detunings() {
        let p = ProbeSpec::ramp(5, 1.0, 0.3).unwrap();
        let det = p.detunings();
        assert!((det[0] + 0.3).abs() < 1e-15 && (det[3] - 0.3).abs() < 1e-15);
        assert_eq!(ProbeSpec::ramp(2, 1.0, 0.3).unwrap().detunings(), &[0.0]);
        assert!(ProbeSpec::with_detunings(3, 1.0, 0.1, vec![0.2, 0.0]).is_err());
        assert!(ProbeSpec::degenerate(1, 1.0).is_err());
    }

    #[test]
    fn omega_opt_is_grid_edge_for_flat_density() {
        let bath = BathSpec::flat(1.0, 1.0).unwrap();
        let (w, _) = omega_opt_grid(&bath);
        assert!((w - 10.0 / 400.0).abs() < 1e-15);
    }
}
