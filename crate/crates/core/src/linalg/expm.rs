use super::{solve, CMatrix, CVector, ZERO};
use crate::error::{Error, Result};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Taylor substep radius for the action routine.
const ACTION_THETA: f64 = 2.0;
const ACTION_MAX_TERMS: usize = 60;

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("evolution time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// `exp(t m)` by Padé-13 scaling and squaring.
pub fn expm(m: &CMatrix, t: f64) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension("expm needs a square matrix".into()));
    }
    check_time(t)?;
    let n = m.rows();
    let a = m.scale_real(t);
    let norm = a.one_norm();
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.scale_real(0.5f64.powi(s));
    let b = &PADE13;
    let id = CMatrix::identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| {
        let mut out = a6.scale_real(c6);
        out += &a4.scale_real(c4);
        out += &a2.scale_real(c2);
        if c0 != 0.0 {
            out += &id.scale_real(c0);
        }
        out
    };
    let u_inner = &a6 * &lin(b[13], b[11], b[9], 0.0);
    let mut u_inner = u_inner;
    u_inner += &lin(b[7], b[5], b[3], b[1]);
    let u = &a * &u_inner;
    let mut v = &a6 * &lin(b[12], b[10], b[8], 0.0);
    v += &lin(b[6], b[4], b[2], b[0]);
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// `exp(t m) v` by a shifted, substepped truncated Taylor series.
///
/// The shift `mu = tr(m)/n` is pulled out as a scalar factor; the remaining
/// norm sets the number of substeps so each one has radius at most 2.
pub fn expm_action(m: &CMatrix, v: &CVector, t: f64) -> Result<CVector> {
    if !m.is_square() || m.cols() != v.len() {
        return Err(Error::Dimension(format!(
            "expm_action: {}x{} matrix with vector of length {}",
            m.rows(),
            m.cols(),
            v.len()
        )));
    }
    check_time(t)?;
    if t == 0.0 || v.max_abs() == 0.0 {
        return Ok(v.clone());
    }
    let n = m.rows();
    let mu = m.trace() / n as f64;
    let mut b = m.clone();
    for i in 0..n {
        b[(i, i)] -= mu;
    }
    let norm = t * b.one_norm();
    let steps = ((norm / ACTION_THETA).ceil() as usize).max(1);
    let h = t / steps as f64;
    let eta = (mu * h).exp();

    let mut f = v.as_slice().to_vec();
    let mut term = vec![ZERO; n];
    let mut next = vec![ZERO; n];
    for _ in 0..steps {
        term.copy_from_slice(&f);
        let mut prev = f64::INFINITY;
        for k in 1..=ACTION_MAX_TERMS {
            b.mul_vec_into(&term, &mut next);
            let c = h / k as f64;
            let mut tn = 0.0f64;
            let mut fn_ = 0.0f64;
            for ((x, y), acc) in term.iter_mut().zip(&next).zip(f.iter_mut()) {
                *x = y * c;
                *acc += *x;
                tn = tn.max(x.norm());
                fn_ = fn_.max(acc.norm());
            }
            if tn + prev <= f64::EPSILON * 0.5 * fn_ {
                break;
            }
            prev = tn;
        }
        for x in f.iter_mut() {
            *x *= eta;
        }
    }
    Ok(CVector::from_vec(f))
}
