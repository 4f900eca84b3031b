//! Relaxation trajectories toward the Gibbs state, the exceeding predicate, rate fits,
//! the slow-tail convergence bound and the concentration bound on random references.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{devectorize, expm_action, trace_norm, vectorize, CMatrix};
use crate::model::{build_liouvillian, log_rate_slope, BathSpec, Liouvillian, ProbeSpec};
use crate::spectral::{evolve_by_modes, mode_overlaps, numerical_spectrum, SpectralData};
use crate::stats::ols;
use crate::thermometry::{ProbeState, StateLabel};

/// Prefactor of the slow-tail bound.
pub const BOUND_PREFACTOR: f64 = 1.1;

/// Pointwise slack when comparing two distance curves.
pub const CURVE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Validation("a time grid needs at least two points".into()));
        }
        if times[0] < 0.0 || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::Domain("grid times must be finite and non-negative".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("grid times must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    /// `n_points` uniform points on `[0, t_max]`.
    pub fn uniform(t_max: f64, n_points: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) || n_points < 2 {
            return Err(Error::Validation(format!("uniform grid needs t_max > 0 and n_points >= 2, got {t_max}, {n_points}")));
        }
        let h = t_max / (n_points - 1) as f64;
        Self::new((0..n_points).map(|k| if k + 1 == n_points { t_max } else { k as f64 * h }).collect())
    }

    /// `t = 0` followed by `n` log-spaced points on `[t0, t1]`.
    pub fn log_spaced(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if !(t0 > 0.0 && t1 > t0) || n < 2 {
            return Err(Error::Validation("log grid needs 0 < t0 < t1 and n >= 2".into()));
        }
        let (a, b) = (t0.ln(), t1.ln());
        let mut times = vec![0.0];
        times.extend((0..n).map(|k| {
            if k + 1 == n {
                t1
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        }));
        Self::new(times)
    }

    /// `t = 0` plus 200 log-spaced points on `[1e-3, 10] / lambda_min`.
    pub fn default_for(lambda_min: f64) -> Result<Self> {
        if !(lambda_min.is_finite() && lambda_min > 0.0) {
            return Err(Error::Domain(format!("slowest rate must be positive, got {lambda_min}")));
        }
        Self::log_spaced(1e-3 / lambda_min, 10.0 / lambda_min, 200)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().expect("grid is non-empty")
    }
}

/// Decay rates present in a trajectory, grouped by `|Re lambda|`, each with the Frobenius
/// norm of its summed mode component.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailInfo {
    pub rates: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl TailInfo {
    pub fn from_spectrum(spec: &SpectralData, rho0: &CMatrix) -> Result<Self> {
        let c = mode_overlaps(spec, rho0)?;
        let tol = 1e-6 * spec.gamma.max(1e-300);
        let mut rates: Vec<f64> = Vec::new();
        let mut amplitudes = Vec::new();
        let mut i = 1;
        while i < spec.triples.len() {
            let rate = spec.triples[i].lambda.re.abs();
            let mut j = i;
            while j < spec.triples.len() && spec.triples[j].lambda.re.abs() - rate <= tol {
                j += 1;
            }
            // frequencies inside a group are summed in quadrature
            let mut freq: Vec<(f64, CMatrix)> = Vec::new();
            for (t, ck) in spec.triples[i..j].iter().zip(&c[i..j]) {
                let part = t.right_op.scale(*ck);
                match freq.iter_mut().find(|(w, _)| (w - t.lambda.im).abs() <= tol) {
                    Some((_, acc)) => *acc += &part,
                    None => freq.push((t.lambda.im, part)),
                }
            }
            let amp = freq.iter().map(|(_, m)| m.frobenius_norm().powi(2)).sum::<f64>().sqrt();
            rates.push(rate);
            amplitudes.push(amp);
            i = j;
        }
        Ok(Self { rates, amplitudes })
    }

    /// Slowest rate carrying a non-negligible component, with its amplitude.
    pub fn leading(&self) -> Option<(f64, f64)> {
        let scale = self.amplitudes.iter().cloned().fold(0.0, f64::max);
        self.rates
            .iter()
            .zip(&self.amplitudes)
            .find(|(_, &a)| a > 1e-9 * scale && a > 1e-14)
            .map(|(&r, &a)| (r, a))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `|rho_t - tau|_F`
    pub frobenius_dist: Vec<f64>,
    /// `|rho_t - tau|_1 / 2`
    pub trace_dist: Vec<f64>,
    pub label: StateLabel,
    pub tail: Option<TailInfo>,
}

impl Trajectory {
    /// Distances multiplied by `k > 0`; the tail amplitudes scale along.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.frobenius_dist.iter_mut().for_each(|x| *x *= k);
        out.trace_dist.iter_mut().for_each(|x| *x *= k);
        if let Some(t) = out.tail.as_mut() {
            t.amplitudes.iter_mut().for_each(|x| *x *= k);
        }
        out
    }
}

/// Propagates `rho0` along the grid, reusing each step as the start of the next. With a
/// spectrum, the final state is cross-checked against the mode expansion.
pub fn evolve_trajectory(
    l: &Liouvillian,
    rho0: &ProbeState,
    grid: &TimeGrid,
    spectrum: Option<&SpectralData>,
) -> Result<Trajectory> {
    if rho0.dim() != l.dim {
        return Err(Error::Dimension(format!("state dimension {} vs generator dimension {}", rho0.dim(), l.dim)));
    }
    let tau = &l.gibbs;
    let times = grid.times().to_vec();
    let mut v = vectorize(rho0.matrix())?;
    let mut t_prev = 0.0;
    let mut frob = Vec::with_capacity(times.len());
    let mut trace = Vec::with_capacity(times.len());
    let mut last = rho0.matrix().clone();
    for &t in &times {
        if t > t_prev {
            v = expm_action(&l.matrix, &v, t - t_prev)?;
            t_prev = t;
        }
        last = devectorize(&v)?;
        let diff = &last - tau;
        frob.push(diff.frobenius_norm());
        trace.push(0.5 * trace_norm(&diff)?);
    }
    let tail = match spectrum {
        Some(spec) => {
            let by_modes = evolve_by_modes(spec, rho0.matrix(), t_prev)?;
            let residual = (&by_modes - &last).frobenius_norm();
            if residual > 1e-6 {
                return Err(Error::NoConvergence {
                    context: format!("propagation and mode expansion disagree at t = {t_prev}"),
                    worst_residual: residual,
                });
            }
            Some(TailInfo::from_spectrum(spec, rho0.matrix())?)
        }
        None => None,
    };
    Ok(Trajectory { times, frobenius_dist: frob, trace_dist: trace, label: rho0.label().clone(), tail })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExceedanceStatus {
    Exceeds,
    DoesNotExceed,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    Grid,
    ModeCoefficient,
}

impl CertificateMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CertificateMethod::Grid => "grid",
            CertificateMethod::ModeCoefficient => "mode-coefficient",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TailCertificate {
    pub method: CertificateMethod,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExceedanceReport {
    pub status: ExceedanceStatus,
    pub exceeds: bool,
    /// First grid time after which trajectory 1 stays at or below trajectory 2.
    pub t_prime: Option<f64>,
    pub tail_certificate: TailCertificate,
}

enum TailVerdict {
    Holds(String),
    Fails(String),
    Tie(String),
}

fn tail_verdict(a: &TailInfo, b: &TailInfo, gamma_scale: f64) -> TailVerdict {
    let tol = 1e-6 * gamma_scale;
    match (a.leading(), b.leading()) {
        (None, None) => TailVerdict::Tie("both states are stationary".into()),
        (None, Some(_)) => TailVerdict::Holds("first state is stationary".into()),
        (Some(_), None) => TailVerdict::Fails("second state is stationary".into()),
        (Some((ra, aa)), Some((rb, ab))) => {
            if ra > rb + tol {
                TailVerdict::Holds(format!("leading rate {ra:.9e} > {rb:.9e}"))
            } else if ra < rb - tol {
                TailVerdict::Fails(format!("leading rate {ra:.9e} < {rb:.9e}"))
            } else if (aa - ab).abs() <= 1e-9 * aa.max(ab) {
                TailVerdict::Tie(format!("rate {ra:.9e}, amplitudes tie at {aa:.9e}"))
            } else if aa < ab {
                TailVerdict::Holds(format!("rate {ra:.9e}, amplitude {aa:.9e} < {ab:.9e}"))
            } else {
                TailVerdict::Fails(format!("rate {ra:.9e}, amplitude {aa:.9e} > {ab:.9e}"))
            }
        }
    }
}

/// Does trajectory 1 end up, and stay, at or below trajectory 2 in Frobenius distance?
pub fn detect_exceeding(traj1: &Trajectory, traj2: &Trajectory) -> Result<ExceedanceReport> {
    if traj1.times != traj2.times {
        return Err(Error::Validation("trajectories are sampled on different time grids".into()));
    }
    let n = traj1.times.len();
    let d1 = &traj1.frobenius_dist;
    let d2 = &traj2.frobenius_dist;
    let last_violation = (0..n).rev().find(|&k| d1[k] > d2[k] + CURVE_TOL);
    let grid_t_prime = match last_violation {
        None => Some(traj1.times[0]),
        Some(k) if k + 1 < n => Some(traj1.times[k + 1]),
        Some(_) => None,
    };

    let report = |status: ExceedanceStatus, t_prime: Option<f64>, method, detail: String| ExceedanceReport {
        status,
        exceeds: status == ExceedanceStatus::Exceeds,
        t_prime,
        tail_certificate: TailCertificate { method, detail },
    };

    let (Some(t1), Some(t2)) = (&traj1.tail, &traj2.tail) else {
        return Ok(match grid_t_prime {
            Some(t) => report(ExceedanceStatus::Exceeds, Some(t), CertificateMethod::Grid, "grid only, no mode data".into()),
            None => report(ExceedanceStatus::DoesNotExceed, None, CertificateMethod::Grid, "violated at the last grid point".into()),
        });
    };
    let scale = t1.rates.iter().chain(&t2.rates).cloned().fold(0.0, f64::max).max(1e-300);
    Ok(match (tail_verdict(t1, t2, scale), grid_t_prime) {
        (TailVerdict::Fails(why), _) => report(ExceedanceStatus::DoesNotExceed, None, CertificateMethod::ModeCoefficient, why),
        (TailVerdict::Holds(why), Some(t)) => report(ExceedanceStatus::Exceeds, Some(t), CertificateMethod::ModeCoefficient, why),
        (TailVerdict::Holds(why), None) => report(
            ExceedanceStatus::Inconclusive,
            None,
            CertificateMethod::ModeCoefficient,
            format!("{why}, but the grid ends in a violation"),
        ),
        (TailVerdict::Tie(why), Some(t)) if last_violation.is_none() => {
            report(ExceedanceStatus::Exceeds, Some(t), CertificateMethod::Grid, format!("{why}; no violation on the grid"))
        }
        (TailVerdict::Tie(why), _) => report(ExceedanceStatus::Inconclusive, None, CertificateMethod::ModeCoefficient, why),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateFit {
    /// Negated OLS slope of `ln |rho_t - tau|_F` against `t`.
    pub rate: f64,
    pub points_used: usize,
    /// Points in the window were dropped because the distance underflowed.
    pub truncated: bool,
}

pub fn fit_convergence_rate(traj: &Trajectory, window: (f64, f64)) -> Result<RateFit> {
    let (lo, hi) = window;
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(Error::Validation(format!("empty fit window [{lo}, {hi}]")));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut truncated = false;
    for (&t, &d) in traj.times.iter().zip(&traj.frobenius_dist) {
        if t < lo - 1e-12 * hi.abs() || t > hi + 1e-12 * hi.abs() {
            continue;
        }
        if d > 1e-14 {
            x.push(t);
            y.push(d.ln());
        } else {
            truncated = true;
        }
    }
    let (slope, _) = ols(&x, &y)?;
    Ok(RateFit { rate: -slope, points_used: x.len(), truncated })
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma4Report {
    pub t_prime_found: Option<f64>,
    /// Violations on the dense check over `[t_prime, t_end]`.
    pub violations: usize,
    pub checked_points: usize,
    pub lambda_min: f64,
    pub g: f64,
    /// `(t, |rho_t - tau|_F^2, bound)` on the input grid.
    pub margin: Vec<(f64, f64, f64)>,
}

impl Lemma4Report {
    pub fn passed(&self) -> bool {
        self.t_prime_found.is_some() && self.violations == 0
    }
}

/// `1.1 eps^2 exp(-2 lambda_min t) (d - 2)/(d - 1) g^2`
pub fn lemma4_bound(d: usize, epsilon: f64, g: f64, lambda_min: f64, t: f64) -> f64 {
    let df = d as f64;
    BOUND_PREFACTOR * epsilon * epsilon * (-2.0 * lambda_min * t).exp() * (df - 2.0) / (df - 1.0) * g * g
}

/// Relaxes the ground state and tests the slow-tail bound: finds the earliest grid time
/// after which it holds on the grid, then rechecks 1000 uniform points up to the grid end.
pub fn lemma4_bound_check(probe: &ProbeSpec, bath: &BathSpec, grid: &TimeGrid) -> Result<Lemma4Report> {
    let d = probe.d();
    if d < 3 {
        return Err(Error::Precondition("the slow-tail bound needs d >= 3".into()));
    }
    let l = build_liouvillian(probe, bath)?;
    let spec = numerical_spectrum(&l)?;
    let lambda_min = spec.lambda_min_nonzero;
    let g = log_rate_slope(bath, probe.gap())?.abs();
    let eps = probe.epsilon();
    let ground = ProbeState::ground(d);
    let traj = evolve_trajectory(&l, &ground, grid, None)?;
    let holds = |t: f64, dist: f64| dist * dist <= lemma4_bound(d, eps, g, lambda_min, t) + 1e-24;

    let margin: Vec<(f64, f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.frobenius_dist)
        .map(|(&t, &x)| (t, x * x, lemma4_bound(d, eps, g, lambda_min, t)))
        .collect();
    let n = traj.times.len();
    let last_bad = (0..n).rev().find(|&k| !holds(traj.times[k], traj.frobenius_dist[k]));
    let t_prime = match last_bad {
        None => Some(traj.times[0]),
        Some(k) if k + 1 < n => Some(traj.times[k + 1]),
        Some(_) => None,
    };
    let Some(tp) = t_prime else {
        return Ok(Lemma4Report { t_prime_found: None, violations: 0, checked_points: 0, lambda_min, g, margin });
    };

    let t_end = grid.t_max();
    let checked_points = 1000;
    let dense = TimeGrid::uniform(1.0, checked_points)?;
    let mut v = vectorize(ground.matrix())?;
    if tp > 0.0 {
        v = expm_action(&l.matrix, &v, tp)?;
    }
    let mut violations = 0;
    let mut t_prev = tp;
    for &s in dense.times() {
        let t = tp + s * (t_end - tp);
        if t > t_prev {
            v = expm_action(&l.matrix, &v, t - t_prev)?;
            t_prev = t;
        }
        let dist = (&devectorize(&v)? - &l.gibbs).frobenius_norm();
        if !holds(t, dist) {
            violations += 1;
        }
    }
    Ok(Lemma4Report { t_prime_found: Some(tp), violations, checked_points, lambda_min, g, margin })
}

/// Parameters of the concentration bound on the probability that a random reference
/// state is not exceeded by the ground state.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TheoremBoundInputs {
    pub alpha: f64,
    pub epsilon: f64,
    pub g: f64,
    pub d: usize,
    /// `(d - 1)(d - 2) / (d (d + 1))`
    pub mu_d: f64,
    /// `1.1 (eps / alpha)^2 (d - 2)/(d - 1) g^2`
    pub theta: f64,
    pub delta_bound: f64,
}

impl TheoremBoundInputs {
    pub fn new(d: usize, alpha: f64, epsilon: f64, g: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension(format!("d must be at least 2, got {d}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(epsilon >= 0.0 && g >= 0.0 && epsilon.is_finite() && g.is_finite()) {
            return Err(Error::Domain("epsilon and g must be finite and non-negative".into()));
        }
        let df = d as f64;
        let mu_d = (df - 1.0) * (df - 2.0) / (df * (df + 1.0));
        let theta = BOUND_PREFACTOR * (epsilon / alpha).powi(2) * (df - 2.0) / (df - 1.0) * g * g;
        let mut out = Self { alpha, epsilon, g, d, mu_d, theta, delta_bound: 0.0 };
        out.delta_bound = theorem1_delta(&out);
        Ok(out)
    }

    pub fn from_model(probe: &ProbeSpec, bath: &BathSpec, alpha: f64) -> Result<Self> {
        let g = log_rate_slope(bath, probe.gap())?.abs();
        Self::new(probe.d(), alpha, probe.epsilon(), g)
    }

    /// The bound carries no information.
    pub fn is_vacuous(&self) -> bool {
        self.delta_bound >= 1.0
    }
}

/// `min(1, 2 exp(-d / (36 pi^3) [mu_d - theta]_+^2))`, and exactly 0 for `d = 2`.
pub fn theorem1_delta(inputs: &TheoremBoundInputs) -> f64 {
    if inputs.d <= 2 {
        return 0.0;
    }
    let gap = (inputs.mu_d - inputs.theta).max(0.0);
    let pi3 = std::f64::consts::PI.powi(3);
    (2.0 * (-(inputs.d as f64) / (36.0 * pi3) * gap * gap).exp()).min(1.0)
}
