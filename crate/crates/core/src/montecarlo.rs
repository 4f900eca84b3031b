//! Haar sampling, the excited-manifold statistic `f`, and the exceedance experiment against
//! random references `(1 - alpha) tau + alpha |s><s|`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::model::{build_liouvillian, BathSpec, ProbeSpec};
use crate::mpemba::{detect_exceeding, evolve_trajectory, ExceedanceStatus, TheoremBoundInputs, TimeGrid};
use crate::rng::{complex_normal, derived_seed, substream};
use crate::spectral::numerical_spectrum;
use crate::stats::{binomial_se, mean_se, wilson_interval, Z95};
use crate::thermometry::{ProbeState, StateLabel};

/// `2 sqrt(2)`
pub const LIPSCHITZ_CONSTANT: f64 = 2.0 * std::f64::consts::SQRT_2;

const LIPSCHITZ_TAG: u64 = 0x4C49_5053;
const UNITARY_TAG: u64 = 0x4841_4152;

/// Normalized vector of independent complex Gaussians drawn from stream `(seed, index)`.
pub fn haar_pure_state(d: usize, seed: u64, index: u64) -> CVector {
    let mut rng = substream(seed, index);
    gaussian_state(d, &mut rng)
}

fn gaussian_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    loop {
        let v: CVector = (0..d).map(|_| complex_normal(rng)).collect();
        if v.norm() > 1e-150 {
            return v.normalized();
        }
    }
}

/// Haar unitary from Gram-Schmidt on a complex Gaussian matrix.
pub fn haar_unitary(d: usize, seed: u64, index: u64) -> CMatrix {
    let mut rng = substream(derived_seed(seed, UNITARY_TAG), index);
    let g = CMatrix::from_fn(d, d, |_, _| complex_normal(&mut rng));
    let mut q = CMatrix::zeros(d, d);
    for j in 0..d {
        let mut v = g.column(j);
        // two passes keep the columns orthogonal to machine precision
        for _ in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let p = qk.dot(&v);
                v.axpy(-p, &qk);
            }
        }
        q.set_column(j, &v.normalized());
    }
    q
}

/// `sum_{i != j >= 1} |psi_i|^2 |psi_j|^2`
pub fn f_statistic(psi: &CVector) -> f64 {
    let p: Vec<f64> = psi.iter().skip(1).map(|z| z.norm_sqr()).collect();
    let s: f64 = p.iter().sum();
    let s2: f64 = p.iter().map(|x| x * x).sum();
    (s * s - s2).max(0.0)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LipschitzReport {
    pub max_ratio: f64,
    pub pairs_used: usize,
}

/// Largest `|f(psi) - f(phi)| / |psi - phi|` over sampled pairs. Half the pairs are
/// independent, half are local perturbations at log-uniform scales.
pub fn lipschitz_check(n_pairs: usize, d: usize, seed: u64) -> Result<LipschitzReport> {
    if d == 0 {
        return Err(Error::Dimension("d must be positive".into()));
    }
    let key = derived_seed(seed, LIPSCHITZ_TAG);
    let ratios: Vec<Option<f64>> = (0..n_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(key, i);
            let psi = gaussian_state(d, &mut rng);
            let phi = if i % 2 == 0 {
                gaussian_state(d, &mut rng)
            } else {
                let scale = 10f64.powf(-4.0 * rng.random::<f64>());
                let xi = gaussian_state(d, &mut rng);
                let mut v = psi.clone();
                v.axpy(num_complex::Complex64::new(scale, 0.0), &xi);
                v.normalized()
            };
            let dist = (&psi - &phi).norm();
            (dist > 1e-15).then(|| (f_statistic(&psi) - f_statistic(&phi)).abs() / dist)
        })
        .collect();
    let used: Vec<f64> = ratios.into_iter().flatten().collect();
    let max_ratio = used.iter().cloned().fold(0.0, f64::max);
    if max_ratio > LIPSCHITZ_CONSTANT + 1e-9 {
        return Err(Error::Counterexample(format!("Lipschitz ratio {max_ratio:.12} exceeds 2 sqrt 2")));
    }
    Ok(LipschitzReport { max_ratio, pairs_used: used.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub n_samples: usize,
    pub alpha: f64,
    pub seed: u64,
    pub parallel_width: usize,
}

impl MCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Validation("n_samples must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Validation(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.parallel_width == 0 {
            return Err(Error::Validation("parallel_width must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleOutcome {
    pub index: u64,
    pub status: ExceedanceStatus,
    pub t_prime: Option<f64>,
    pub method: String,
    pub f: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MCReport {
    pub exceed_count: usize,
    pub inconclusive_count: usize,
    /// Exceedances already holding at the first grid time.
    pub trivial_count: usize,
    pub n: usize,
    pub frequency: f64,
    pub wilson_ci95: (f64, f64),
    pub binomial_se: f64,
    pub mean_f: f64,
    pub se_f: f64,
    pub mu_d: f64,
    pub delta_bound: f64,
    pub delta_vacuous: bool,
    pub samples: Vec<SampleOutcome>,
}

impl MCReport {
    /// `frequency >= 1 - min(1, delta) - 3 SE`
    pub fn consistent_with_bound(&self) -> bool {
        self.frequency >= 1.0 - self.delta_bound.min(1.0) - 3.0 * self.binomial_se
    }
}

/// Ground state against `n_samples` random references, each compared by Frobenius distance.
pub fn run_exceedance_experiment(
    probe: &ProbeSpec,
    bath: &BathSpec,
    mc: &MCConfig,
    grid: Option<&TimeGrid>,
) -> Result<MCReport> {
    mc.validate()?;
    let d = probe.d();
    let l = build_liouvillian(probe, bath)?;
    let spec = numerical_spectrum(&l)?;
    let default_grid;
    let grid = match grid {
        Some(g) => g,
        None => {
            default_grid = TimeGrid::default_for(spec.lambda_min_nonzero)?;
            &default_grid
        }
    };
    let ground = evolve_trajectory(&l, &ProbeState::ground(d), grid, Some(&spec))?;
    let tau = l.gibbs.clone();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(mc.parallel_width)
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    let samples: Vec<SampleOutcome> = pool.install(|| {
        (0..mc.n_samples as u64)
            .into_par_iter()
            .map(|i| {
                let sigma = haar_pure_state(d, mc.seed, i);
                let rho = &tau.scale_real(1.0 - mc.alpha) + &sigma.projector().scale_real(mc.alpha);
                let label = StateLabel::Mixed { alpha: mc.alpha, seed: mc.seed, index: i };
                let reference = ProbeState::new(rho.hermitian_part(), label)?;
                let traj = evolve_trajectory(&l, &reference, grid, Some(&spec))?;
                let rep = detect_exceeding(&ground, &traj)?;
                Ok(SampleOutcome {
                    index: i,
                    status: rep.status,
                    t_prime: rep.t_prime,
                    method: rep.tail_certificate.method.as_str().to_string(),
                    f: f_statistic(&sigma),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let n = samples.len();
    let exceed_count = samples.iter().filter(|s| s.status == ExceedanceStatus::Exceeds).count();
    let inconclusive_count = samples.iter().filter(|s| s.status == ExceedanceStatus::Inconclusive).count();
    let t0 = grid.times()[0];
    let trivial_count = samples
        .iter()
        .filter(|s| s.status == ExceedanceStatus::Exceeds && s.t_prime == Some(t0))
        .count();
    let frequency = exceed_count as f64 / n as f64;
    let fs: Vec<f64> = samples.iter().map(|s| s.f).collect();
    let (mean_f, se_f) = mean_se(&fs);
    let bound = TheoremBoundInputs::from_model(probe, bath, mc.alpha)?;
    Ok(MCReport {
        exceed_count,
        inconclusive_count,
        trivial_count,
        n,
        frequency,
        wilson_ci95: wilson_interval(exceed_count, n, Z95),
        binomial_se: binomial_se(frequency, n),
        mean_f,
        se_f,
        mu_d: bound.mu_d,
        delta_bound: bound.delta_bound,
        delta_vacuous: bound.is_vacuous(),
        samples,
    })
}
