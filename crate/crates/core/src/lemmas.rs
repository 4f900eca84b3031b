//! Trace-norm inequalities for 2x2 block operators, the conditions under which the
//! convex-mixture bound holds, and random instance generators for property runs.

use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{trace_norm, CMatrix, CVector, ZERO};
use crate::model::{build_liouvillian, BathSpec, ProbeSpec};
use crate::rng::{complex_normal, derived_seed, real_normal, substream};
use crate::thermometry::BlockDecomposition;

/// Rejection-sampling budget per instance.
pub const MAX_ATTEMPTS: usize = 100_000;

const BOUND_TOL: f64 = 1e-9;

/// `[[A, c], [c^dagger, b]]`
pub fn assemble_block(a_block: &CMatrix, c: &CVector, b: C64) -> Result<CMatrix> {
    let d = a_block.rows();
    if !a_block.is_square() || c.len() != d {
        return Err(Error::Dimension(format!("block {}x{} with column of length {}", d, a_block.cols(), c.len())));
    }
    let mut m = CMatrix::zeros(d + 1, d + 1);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = a_block[(i, j)];
        }
        m[(i, d)] = c[i];
        m[(d, i)] = c[i].conj();
    }
    m[(d, d)] = b;
    Ok(m)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `|[[A, c], [c^dagger, b]]|_1 <= |A|_1 + sqrt(4 |c|^2 + |b|^2)`
pub fn lemma1_check(a_block: &CMatrix, c: &CVector, b: C64) -> Result<BoundCheck> {
    let lhs = trace_norm(&assemble_block(a_block, c, b)?)?;
    let rhs = trace_norm(a_block)? + (4.0 * c.norm_sqr() + b.norm_sqr()).sqrt();
    Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs + BOUND_TOL })
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockInstance {
    pub a_block: CMatrix,
    pub b_block: CMatrix,
    pub c: CVector,
    pub a: C64,
    pub b: C64,
    pub alpha: f64,
}

impl BlockInstance {
    pub fn validate(&self) -> Result<()> {
        let d = self.a_block.rows();
        if !self.a_block.is_square() || self.b_block.rows() != d || self.b_block.cols() != d || self.c.len() != d {
            return Err(Error::Dimension("block instance dimensions are inconsistent".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }

    /// The mixed block at weight `alpha`.
    pub fn mixture(&self) -> Result<CMatrix> {
        let al = self.alpha;
        let top = &self.a_block.scale_real(al) + &self.b_block.scale_real(1.0 - al);
        let c = self.c.scale_real((al * (1.0 - al)).sqrt());
        assemble_block(&top, &c, self.a * al + self.b * (1.0 - al))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionFlags {
    /// `|a - b| >= 2|c|`, or the critical weight lies outside `[0, 1]`.
    pub cond1: bool,
    /// `(|A|_1 - |B|_1)(|a| - |b|) >= 0`
    pub cond2: bool,
}

impl ConditionFlags {
    pub fn both(self) -> bool {
        self.cond1 && self.cond2
    }
}

/// Stationary point of `|alpha a + (1 - alpha) b|^2 + 4 alpha (1 - alpha) |c|^2`, or
/// `None` when its quadratic coefficient vanishes.
pub fn critical_alpha(a: C64, b: C64, c_norm_sqr: f64) -> Option<f64> {
    let diff = a - b;
    let denom = 4.0 * c_norm_sqr - diff.norm_sqr();
    if denom.abs() <= 1e-12 {
        return None;
    }
    Some((2.0 * c_norm_sqr + (diff * b.conj()).re) / denom)
}

pub fn condition_flags(inst: &BlockInstance) -> Result<ConditionFlags> {
    let c2 = inst.c.norm_sqr();
    let first = (inst.a - inst.b).norm() >= 2.0 * c2.sqrt();
    let cond1 = first || critical_alpha(inst.a, inst.b, c2).is_some_and(|s| !(0.0..=1.0).contains(&s));
    let na = trace_norm(&inst.a_block)?;
    let nb = trace_norm(&inst.b_block)?;
    let cond2 = (na - nb) * (inst.a.norm() - inst.b.norm()) >= 0.0;
    Ok(ConditionFlags { cond1, cond2 })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Lemma2Result {
    pub flags: ConditionFlags,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Lemma2Result {
    /// The inequality failed although both conditions held.
    pub fn is_violation(&self) -> bool {
        self.flags.both() && !self.holds
    }
}

/// Mixed block against `max(|A (+) a|_1, |B (+) b|_1)`.
pub fn lemma2_check(inst: &BlockInstance) -> Result<Lemma2Result> {
    inst.validate()?;
    let flags = condition_flags(inst)?;
    let lhs = trace_norm(&inst.mixture()?)?;
    let ra = trace_norm(&inst.a_block)? + inst.a.norm();
    let rb = trace_norm(&inst.b_block)? + inst.b.norm();
    let rhs = ra.max(rb);
    Ok(Lemma2Result { flags, lhs, rhs, holds: lhs <= rhs + BOUND_TOL })
}

fn gaussian_matrix<R: Rng + ?Sized>(d: usize, hermitian: bool, rng: &mut R) -> CMatrix {
    let m = CMatrix::from_fn(d, d, |_, _| complex_normal(rng));
    if hermitian {
        m.hermitian_part()
    } else {
        m
    }
}

/// Gaussian instance; in the Hermitian regime `a`, `b` are real. The coupling column is
/// rescaled by a log-uniform factor in `[1e-2, 10^0.5]` so both branches of the first
/// condition are exercised.
pub fn random_instance<R: Rng + ?Sized>(d: usize, hermitian: bool, rng: &mut R) -> BlockInstance {
    let a_block = gaussian_matrix(d, hermitian, rng);
    let b_block = gaussian_matrix(d, hermitian, rng);
    let scale = 10f64.powf(-2.0 + 2.5 * rng.random::<f64>());
    let c: CVector = (0..d).map(|_| complex_normal(rng) * scale).collect();
    let (a, b) = if hermitian {
        (C64::new(real_normal(rng), 0.0), C64::new(real_normal(rng), 0.0))
    } else {
        (complex_normal(rng), complex_normal(rng))
    };
    BlockInstance { a_block, b_block, c, a, b, alpha: rng.random::<f64>() }
}

/// First random instance whose condition flags match `want_both`.
pub fn conditioned_instance<R: Rng + ?Sized>(d: usize, hermitian: bool, want_both: bool, rng: &mut R) -> Result<BlockInstance> {
    for _ in 0..MAX_ATTEMPTS {
        let inst = random_instance(d, hermitian, rng);
        if condition_flags(&inst)?.both() == want_both {
            return Ok(inst);
        }
    }
    Err(Error::NoConvergence {
        context: format!("no instance with the requested conditions after {MAX_ATTEMPTS} draws (d = {d})"),
        worst_residual: f64::NAN,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaKind {
    BlockBound,
    MixtureBound,
    /// Mixture bound on instances that break a condition; violations are expected.
    Gallery,
}

impl LemmaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LemmaKind::BlockBound => "block_bound",
            LemmaKind::MixtureBound => "mixture_bound",
            LemmaKind::Gallery => "gallery",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaRecord {
    pub lemma: LemmaKind,
    pub d: usize,
    pub instance_id: u64,
    pub hermitian: bool,
    pub cond1: bool,
    pub cond2: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl LemmaRecord {
    pub fn is_violation(&self) -> bool {
        match self.lemma {
            LemmaKind::BlockBound => !self.holds,
            LemmaKind::MixtureBound => self.cond1 && self.cond2 && !self.holds,
            LemmaKind::Gallery => false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaTally {
    pub lemma: LemmaKind,
    pub d: usize,
    pub instances: usize,
    pub violations: usize,
    /// Smallest `rhs - lhs` seen.
    pub min_slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaSummary {
    pub tallies: Vec<LemmaTally>,
    pub records: Vec<LemmaRecord>,
}

impl LemmaSummary {
    pub fn violations(&self) -> usize {
        self.records.iter().filter(|r| r.is_violation()).count()
    }

    pub fn gallery_breaks(&self) -> usize {
        self.records.iter().filter(|r| r.lemma == LemmaKind::Gallery && !r.holds).count()
    }
}

/// `n` instances per lemma per dimension, alternating Hermitian and general draws, plus
/// `n_gallery` condition-breaking instances per dimension.
pub fn run_lemma_suite(dims: &[usize], n: usize, n_gallery: usize, seed: u64) -> Result<LemmaSummary> {
    if n == 0 {
        return Err(Error::Validation("instance count must be at least 1".into()));
    }
    if dims.contains(&0) {
        return Err(Error::Dimension("block dimension must be positive".into()));
    }
    let mut records = Vec::new();
    let mut tallies = Vec::new();
    for (kind_ix, kind) in [LemmaKind::BlockBound, LemmaKind::MixtureBound, LemmaKind::Gallery].into_iter().enumerate() {
        let count = if kind == LemmaKind::Gallery { n_gallery } else { n };
        for &d in dims {
            let key = derived_seed(seed, ((kind_ix as u64) << 32) | d as u64);
            let batch: Vec<LemmaRecord> = (0..count as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = substream(key, i);
                    let hermitian = i % 2 == 0;
                    let (flags, check) = match kind {
                        LemmaKind::BlockBound => {
                            let inst = random_instance(d, hermitian, &mut rng);
                            let r = lemma1_check(&inst.a_block, &inst.c, inst.b)?;
                            (ConditionFlags { cond1: true, cond2: true }, r)
                        }
                        LemmaKind::MixtureBound | LemmaKind::Gallery => {
                            let inst = conditioned_instance(d, hermitian, kind == LemmaKind::MixtureBound, &mut rng)?;
                            let r = lemma2_check(&inst)?;
                            (r.flags, BoundCheck { lhs: r.lhs, rhs: r.rhs, holds: r.holds })
                        }
                    };
                    Ok(LemmaRecord {
                        lemma: kind,
                        d,
                        instance_id: i,
                        hermitian,
                        cond1: flags.cond1,
                        cond2: flags.cond2,
                        lhs: check.lhs,
                        rhs: check.rhs,
                        holds: check.holds,
                    })
                })
                .collect::<Result<_>>()?;
            if count > 0 {
                tallies.push(LemmaTally {
                    lemma: kind,
                    d,
                    instances: batch.len(),
                    violations: batch.iter().filter(|r| r.is_violation()).count(),
                    min_slack: batch.iter().map(|r| r.rhs - r.lhs).fold(f64::INFINITY, f64::min),
                });
            }
            records.extend(batch);
        }
    }
    Ok(LemmaSummary { tallies, records })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ThermometryConditions {
    pub a: f64,
    pub b: f64,
    pub c_norm: f64,
    pub a_trace_norm: f64,
    pub b_trace_norm: f64,
    /// `|b| >= |a|`
    pub cond_i: bool,
    /// `(a - b)^2 <= 4 |c|^2`
    pub cond_ii: bool,
    /// `b (a - b) + 2 |c|^2 <= 0`
    pub cond_iii: bool,
    /// `|A|_1 <= |B|_1`
    pub cond_iv: bool,
}

impl ThermometryConditions {
    pub fn all_hold(&self) -> bool {
        self.cond_i && self.cond_ii && self.cond_iii && self.cond_iv
    }
}

/// The four block conditions for `d_beta L` evaluated on an excited-manifold state `psi`
/// (amplitudes on levels `1..d`).
pub fn thermometry_conditions_check(probe: &ProbeSpec, bath: &BathSpec, psi: &CVector) -> Result<ThermometryConditions> {
    let d = probe.d();
    if psi.len() + 1 != d {
        return Err(Error::Dimension(format!("excited amplitudes have length {}, expected {}", psi.len(), d - 1)));
    }
    if (psi.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!("excited amplitudes have norm {}", psi.norm())));
    }
    let l = build_liouvillian(probe, bath)?;
    let full: CVector = std::iter::once(ZERO).chain(psi.iter().copied()).collect();
    let blocks = BlockDecomposition::new(&l, &full)?;
    let (a, b) = (blocks.a, blocks.b);
    let c2 = blocks.c.norm_sqr();
    let a_trace_norm = trace_norm(&blocks.a_block)?;
    let b_trace_norm = trace_norm(&blocks.b_block)?;
    // equalities are attained in the degenerate model, so compare with a relative slack
    let scale = a.abs().max(b.abs()).max(1e-300);
    let tol = 1e-10 * scale * scale;
    Ok(ThermometryConditions {
        a,
        b,
        c_norm: c2.sqrt(),
        a_trace_norm,
        b_trace_norm,
        cond_i: b.abs() >= a.abs() - 1e-10 * scale,
        cond_ii: (a - b).powi(2) <= 4.0 * c2 + tol,
        cond_iii: b * (a - b) + 2.0 * c2 <= tol,
        cond_iv: a_trace_norm <= b_trace_norm + 1e-10 * scale,
    })
}
