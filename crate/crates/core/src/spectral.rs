//! Eigen-decomposition of the generator: exact triples for degenerate probes,
//! numerical biorthonormal triples otherwise, and mode overlaps of initial states.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{devectorize, eig_general, hs_inner, solve, CMatrix, CVector, ONE, ZERO};
use crate::model::{gibbs_state, log_rate_slope, rate, BathSpec, Liouvillian, ProbeSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subspace {
    Population,
    Coherence,
}

impl Subspace {
    pub fn as_str(self) -> &'static str {
        match self {
            Subspace::Population => "population",
            Subspace::Coherence => "coherence",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenTriple {
    pub lambda: C64,
    /// Frobenius-normalized right eigenoperator.
    pub right_op: CMatrix,
    /// Left eigenoperator with `Tr(left^dagger right) = 1`.
    pub left_op: CMatrix,
    pub subspace: Subspace,
    /// `|L[r] - lambda r|_F`
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct SpectralData {
    /// Sorted by `|Re lambda|`; the stationary mode is first.
    pub triples: Vec<EigenTriple>,
    pub lambda_min_nonzero: f64,
    pub lambda_max: f64,
    pub dim: usize,
    pub gamma: f64,
}

impl SpectralData {
    fn assemble(dim: usize, gamma: f64, mut triples: Vec<EigenTriple>) -> Result<Self> {
        triples.sort_by(|a, b| {
            let ka = (a.lambda.re.abs(), a.subspace != Subspace::Population, a.lambda.im);
            let kb = (b.lambda.re.abs(), b.subspace != Subspace::Population, b.lambda.im);
            ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
        });
        let zeros = triples.iter().filter(|t| t.lambda.norm() <= 1e-9 * gamma.max(1.0)).count();
        if zeros != 1 {
            return Err(Error::Validation(format!("expected exactly one stationary mode, found {zeros}")));
        }
        if triples[0].lambda.norm() > 1e-9 * gamma.max(1.0) {
            return Err(Error::Validation("stationary mode is not the slowest mode".into()));
        }
        let lambda_min_nonzero = triples.get(1).map_or(0.0, |t| t.lambda.re.abs());
        let lambda_max = triples.iter().map(|t| t.lambda.re.abs()).fold(0.0, f64::max);
        Ok(Self { triples, lambda_min_nonzero, lambda_max, dim, gamma })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.triples.iter().map(|t| t.lambda).collect()
    }

    /// Stationary right eigenoperator rescaled to unit trace.
    pub fn steady_state(&self) -> CMatrix {
        let r = &self.triples[0].right_op;
        r.scale(ONE / r.trace())
    }

    /// `max |Tr(l_i^dagger r_j) - delta_ij|`
    pub fn biorthogonality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.triples.iter().enumerate() {
            for (j, b) in self.triples.iter().enumerate() {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((hs_inner(&a.left_op, &b.right_op) - target).norm());
            }
        }
        worst
    }

    /// `sum_i c_i exp(lambda_i t) r_i`
    pub fn reconstruct(&self, coeffs: &[C64], t: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (tr, &c) in self.triples.iter().zip(coeffs) {
            out += &tr.right_op.scale(c * (tr.lambda * t).exp());
        }
        out
    }

    /// The `d - 2` slowest non-stationary population modes: the cluster that splits
    /// off `-Gamma(-Delta)` under detuning.
    pub fn lower_tail(&self) -> Vec<usize> {
        let take = self.dim.saturating_sub(2);
        self.triples
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, t)| t.subspace == Subspace::Population)
            .map(|(i, _)| i)
            .take(take)
            .collect()
    }

    /// Mode indices whose `|Re lambda|` lies within `tol` of `rate`.
    pub fn modes_at_rate(&self, rate: f64, tol: f64) -> Vec<usize> {
        self.triples
            .iter()
            .enumerate()
            .filter(|(_, t)| (t.lambda.re.abs() - rate).abs() <= tol)
            .map(|(i, _)| i)
            .collect()
    }
}

fn phase_fix(r: &mut CVector, l: &mut CVector) {
    let mut best = ZERO;
    for z in r.iter() {
        if z.norm() > best.norm() * (1.0 + 1e-12) {
            best = *z;
        }
    }
    if best.norm() == 0.0 {
        return;
    }
    let ph = best.conj() / best.norm();
    *r = r.scale(ph);
    *l = l.scale(ph);
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Clusters of indices whose values are chained within `tol`.
fn cluster(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}

fn orthonormalize(vs: &mut [CVector]) -> Result<()> {
    for i in 0..vs.len() {
        for _ in 0..2 {
            for j in 0..i {
                let p = vs[j].dot(&vs[i]);
                let vj = vs[j].clone();
                vs[i].axpy(-p, &vj);
            }
        }
        let n = vs[i].norm();
        if n < 1e-8 {
            return Err(Error::Pairing("degenerate eigenvectors are linearly dependent (defective block)".into()));
        }
        vs[i] = vs[i].scale_real(1.0 / n);
    }
    Ok(())
}

/// Biorthonormal eigen-triples `(lambda, r, l)` of a general matrix.
fn biorthonormal_pairs(m: &CMatrix, tol: f64) -> Result<Vec<(C64, CVector, CVector)>> {
    let right = eig_general(m)?;
    let left = eig_general(&m.adjoint())?;
    let n = right.len();
    let mut values: Vec<C64> = right.iter().map(|p| p.0).collect();
    values.extend(left.iter().map(|p| p.0.conj()));
    let tight = tol * 1e-3;
    let mut out = Vec::with_capacity(n);

    for group in cluster(&values, tol) {
        let ri: Vec<usize> = group.iter().copied().filter(|&k| k < n).collect();
        let li: Vec<usize> = group.iter().copied().filter(|&k| k >= n).map(|k| k - n).collect();
        if ri.len() != li.len() {
            let centre = values[group[0]];
            return Err(Error::Pairing(format!(
                "cluster near {:.6e}{:+.6e}i has {} right and {} left vectors",
                centre.re,
                centre.im,
                ri.len(),
                li.len()
            )));
        }
        let k = ri.len();
        let mut rs: Vec<CVector> = Vec::with_capacity(k);
        let mut lambdas: Vec<C64> = Vec::with_capacity(k);
        let values_r: Vec<C64> = ri.iter().map(|&i| right[i].0).collect();
        for sub in cluster(&values_r, tight) {
            let mut block: Vec<CVector> = sub.iter().map(|&s| right[ri[s]].1.clone()).collect();
            if block.len() > 1 {
                orthonormalize(&mut block)?;
            }
            rs.extend(block);
            lambdas.extend(sub.iter().map(|&s| values_r[s]));
        }
        let ls: Vec<CVector> = li.iter().map(|&i| left[i].1.clone()).collect();
        // Gram system G = L^dagger R, then L <- L G^{-dagger}
        let g = CMatrix::from_fn(k, k, |a, b| ls[a].dot(&rs[b]));
        let lh = CMatrix::from_fn(k, n, |a, c| ls[a][c].conj());
        let x = solve(&g, &lh).map_err(|_| Error::Pairing("singular left/right Gram matrix".into()))?;
        for a in 0..k {
            let mut l: CVector = (0..n).map(|c| x[(a, c)].conj()).collect();
            let mut r = rs[a].clone();
            phase_fix(&mut r, &mut l);
            out.push((lambdas[a], r, l));
        }
    }
    Ok(out)
}

fn embed(v: &CVector, idx: &[usize], n: usize) -> CVector {
    let mut out = CVector::zeros(n);
    for (k, &i) in idx.iter().enumerate() {
        out[i] = v[k];
    }
    out
}

/// Numerical triples of an assembled generator.
///
/// Populations and coherences are diagonalized separately whenever the generator
/// does not couple them, which keeps every triple inside one subspace.
pub fn numerical_spectrum(l: &Liouvillian) -> Result<SpectralData> {
    let d = l.dim;
    let n = d * d;
    let tol = 1e-6 * l.gamma;
    let pop: Vec<usize> = (0..d).map(|i| i * d + i).collect();
    let coh: Vec<usize> = (0..n).filter(|k| k / d != k % d).collect();
    let split = l.population_coherence_coupling() <= 1e-12 * l.matrix.max_abs();

    let blocks: Vec<(Option<Subspace>, Vec<usize>)> = if split {
        vec![(Some(Subspace::Population), pop.clone()), (Some(Subspace::Coherence), coh)]
    } else {
        vec![(None, (0..n).collect())]
    };

    let mut triples = Vec::with_capacity(n);
    for (tag, idx) in blocks {
        if idx.is_empty() {
            continue;
        }
        let sub = CMatrix::from_fn(idx.len(), idx.len(), |a, b| l.matrix[(idx[a], idx[b])]);
        for (lambda, r, lv) in biorthonormal_pairs(&sub, tol)? {
            let r = embed(&r, &idx, n);
            let lv = embed(&lv, &idx, n);
            let subspace = tag.unwrap_or_else(|| {
                let w: f64 = pop.iter().map(|&i| r[i].norm_sqr()).sum();
                if w >= 0.5 {
                    Subspace::Population
                } else {
                    Subspace::Coherence
                }
            });
            let mut res = l.matrix.mul_vec(&r);
            res.axpy(-lambda, &r);
            triples.push(EigenTriple {
                lambda,
                right_op: devectorize(&r)?,
                left_op: devectorize(&lv)?,
                subspace,
                residual: res.norm(),
            });
        }
    }
    SpectralData::assemble(d, l.gamma, triples)
}

/// Exact triples at zero detuning, built from the closed-form population
/// eigenvectors and the diagonal coherence block.
pub fn analytic_spectrum_degenerate(probe: &ProbeSpec, bath: &BathSpec) -> Result<SpectralData> {
    if !probe.is_degenerate() {
        return Err(Error::Precondition("closed-form spectrum needs all detunings equal to zero".into()));
    }
    let d = probe.d();
    let gap = probe.gap();
    let up = rate(bath, gap)?;
    let down = rate(bath, -gap)?;
    let nbar = bath.occupation(gap);
    let energies = probe.energies();
    let mut triples = Vec::with_capacity(d * d);

    let tau = gibbs_state(probe, bath);
    let tn = tau.frobenius_norm();
    triples.push(EigenTriple {
        lambda: ZERO,
        right_op: tau.scale_real(1.0 / tn),
        left_op: CMatrix::identity(d).scale_real(tn),
        subspace: Subspace::Population,
        residual: 0.0,
    });

    let df = d as f64;
    let mut r = CMatrix::zeros(d, d);
    let mut lft = CMatrix::zeros(d, d);
    r[(0, 0)] = C64::new(((df - 1.0) / df).sqrt(), 0.0);
    lft[(0, 0)] = C64::new(nbar * (df - 1.0).sqrt(), 0.0);
    for j in 1..d {
        r[(j, j)] = C64::new(-1.0 / (df * (df - 1.0)).sqrt(), 0.0);
        lft[(j, j)] = C64::new(-(1.0 + nbar) / (df - 1.0).sqrt(), 0.0);
    }
    let norm = hs_inner(&lft, &r);
    triples.push(EigenTriple {
        lambda: C64::new(-(down + (df - 1.0) * up), 0.0),
        right_op: r,
        left_op: lft.scale(ONE / norm.conj()),
        subspace: Subspace::Population,
        residual: 0.0,
    });

    for k in 2..d {
        let kf = (k - 1) as f64;
        let s = 1.0 / (kf * (kf + 1.0)).sqrt();
        let mut h = CMatrix::zeros(d, d);
        for j in 1..k {
            h[(j, j)] = C64::new(s, 0.0);
        }
        h[(k, k)] = C64::new(-kf * s, 0.0);
        triples.push(EigenTriple {
            lambda: C64::new(-down, 0.0),
            right_op: h.clone(),
            left_op: h,
            subspace: Subspace::Population,
            residual: 0.0,
        });
    }

    let escape = |level: usize| if level == 0 { (df - 1.0) * up } else { down };
    for p in 0..d {
        for q in 0..d {
            if p == q {
                continue;
            }
            let e = CMatrix::unit(d, p, q);
            triples.push(EigenTriple {
                lambda: C64::new(-0.5 * (escape(p) + escape(q)), -(energies[p] - energies[q])),
                right_op: e.clone(),
                left_op: e,
                subspace: Subspace::Coherence,
                residual: 0.0,
            });
        }
    }
    SpectralData::assemble(d, bath.gamma(), triples)
}

/// `c_i = Tr(l_i^dagger rho0)`
pub fn mode_overlaps(spec: &SpectralData, rho0: &CMatrix) -> Result<Vec<C64>> {
    if rho0.rows() != spec.dim || rho0.cols() != spec.dim {
        return Err(Error::Dimension(format!("state is {}x{}, spectrum has dimension {}", rho0.rows(), rho0.cols(), spec.dim)));
    }
    let tr = rho0.trace();
    if (tr - ONE).norm() > 1e-9 {
        return Err(Error::Validation(format!("initial state has trace {:.12}{:+.3e}i", tr.re, tr.im)));
    }
    if rho0.hermiticity_defect() > 1e-9 {
        return Err(Error::Validation("initial state is not Hermitian".into()));
    }
    Ok(spec.triples.iter().map(|t| hs_inner(&t.left_op, rho0)).collect())
}

/// `eps / sqrt(d - 1) * g`, with `g = |d/dw log(exp(beta w) rate(w))|` at the gap.
pub fn perturbation_overlap_bound(probe: &ProbeSpec, bath: &BathSpec) -> Result<f64> {
    if probe.d() < 3 {
        return Err(Error::NotApplicable("the slow population cluster is empty for d = 2".into()));
    }
    let g = log_rate_slope(bath, probe.gap())?.abs();
    Ok(probe.epsilon() / ((probe.d() - 1) as f64).sqrt() * g)
}

/// Largest `|c_i|` of `rho` over the lower-tail population modes.
pub fn max_slow_overlap(spec: &SpectralData, rho: &CMatrix) -> Result<f64> {
    let c = mode_overlaps(spec, rho)?;
    Ok(spec.lower_tail().into_iter().map(|i| c[i].norm()).fold(0.0, f64::max))
}

/// Ground-excited coherence rate of the assembled generator next to two closed
/// forms that circulate for it.
#[derive(Clone, Debug, Serialize)]
pub struct CoherenceRateComparison {
    pub numerical: f64,
    /// `(2 gamma + gamma n (d + 1)) / 2`
    pub candidate_one: f64,
    /// `(gamma n + (d - 1) gamma (1 + n)) / 2`
    pub candidate_two: f64,
    /// `(gamma + gamma d n) / 2`, half the summed escape rates of the two levels
    pub escape_rate_half_sum: f64,
}

impl CoherenceRateComparison {
    pub fn deviation_one(&self) -> f64 {
        (self.numerical - self.candidate_one).abs()
    }
    pub fn deviation_two(&self) -> f64 {
        (self.numerical - self.candidate_two).abs()
    }
}

pub fn coherence_rate_comparison(probe: &ProbeSpec, bath: &BathSpec, spec: &SpectralData) -> Result<CoherenceRateComparison> {
    let d = probe.d();
    let df = d as f64;
    let gamma = bath.gamma();
    let nbar = bath.occupation(probe.gap());
    // slowest-decaying coherence between ground and an excited level
    let numerical = spec
        .triples
        .iter()
        .filter(|t| t.subspace == Subspace::Coherence)
        .filter(|t| {
            let r = &t.right_op;
            let w: f64 = (1..d).map(|j| r[(0, j)].norm_sqr() + r[(j, 0)].norm_sqr()).sum();
            w > 0.5
        })
        .map(|t| t.lambda.re.abs())
        .fold(f64::INFINITY, f64::min);
    if !numerical.is_finite() {
        return Err(Error::Validation("no ground-excited coherence mode found".into()));
    }
    Ok(CoherenceRateComparison {
        numerical,
        candidate_one: 0.5 * (2.0 * gamma + gamma * nbar * (df + 1.0)),
        candidate_two: 0.5 * (gamma * nbar + (df - 1.0) * gamma * (1.0 + nbar)),
        escape_rate_half_sum: 0.5 * (gamma + gamma * df * nbar),
    })
}

/// `rho_t` from the mode expansion of `rho0`.
pub fn evolve_by_modes(spec: &SpectralData, rho0: &CMatrix, t: f64) -> Result<CMatrix> {
    let c = mode_overlaps(spec, rho0)?;
    Ok(spec.reconstruct(&c, t))
}
