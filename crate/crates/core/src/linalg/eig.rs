use num_complex::Complex64 as C64;

use super::{CMatrix, CVector, ONE, ZERO};
use crate::error::{Error, Result};

const MAX_DIM: usize = 400;
const RESIDUAL_TOL: f64 = 1e-9;

/// Complex Schur form `m = q * t * q^dagger` with `t` upper triangular.
#[derive(Clone, Debug)]
pub struct Schur {
    pub q: CMatrix,
    pub t: CMatrix,
}

pub fn schur(m: &CMatrix) -> Result<Schur> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("eigensolver needs a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    if m.rows() > MAX_DIM {
        return Err(Error::Dimension(format!("dimension {} exceeds {MAX_DIM}", m.rows())));
    }
    if !m.is_finite() {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let mut t = m.clone();
    let mut q = CMatrix::identity(m.rows());
    hessenberg(&mut t, &mut q);
    shifted_qr(&mut t, &mut q)?;
    Ok(Schur { q, t })
}

pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    Ok(schur(m)?.t.diagonal())
}

/// Eigenpairs of a general square matrix, one per eigenvalue counted with multiplicity.
///
/// Vectors are unit 2-norm. Every pair satisfies
/// `|m v - lambda v| <= 1e-9 |m|_F |v|`, otherwise a `NoConvergence` error carries the worst residual.
pub fn eig_general(m: &CMatrix) -> Result<Vec<(C64, CVector)>> {
    let Schur { q, t } = schur(m)?;
    let n = t.rows();
    let scale = t.frobenius_norm().max(f64::MIN_POSITIVE);
    let small = 1e-10 * scale;
    let mut pairs = Vec::with_capacity(n);
    let mut worst = 0.0f64;

    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = vec![ZERO; k + 1];
        y[k] = ONE;
        for i in (0..k).rev() {
            let mut s = ZERO;
            for j in i + 1..=k {
                s += t[(i, j)] * y[j];
            }
            let denom = t[(i, i)] - lambda;
            let ymax = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
            y[i] = if denom.norm() >= small {
                -s / denom
            } else if s.norm() <= 1e-8 * scale * ymax {
                // same eigenvalue, decoupled direction
                ZERO
            } else {
                // defective cluster: perturb the pivot
                -s / C64::new(small, 0.0)
            };
            let ymax = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if ymax > 1e150 {
                for z in y.iter_mut() {
                    *z /= ymax;
                }
            }
        }
        let mut x = CVector::zeros(n);
        for r in 0..n {
            let row = q.row(r);
            let mut acc = ZERO;
            for (a, b) in row[..=k].iter().zip(&y) {
                acc += a * b;
            }
            x[r] = acc;
        }
        let x = x.normalized();
        let mut res = m.mul_vec(&x);
        res.axpy(-lambda, &x);
        worst = worst.max(res.norm() / scale);
        pairs.push((lambda, x));
    }

    if worst > RESIDUAL_TOL {
        return Err(Error::NoConvergence { context: "eigenvector residual check".into(), worst_residual: worst });
    }
    Ok(pairs)
}

fn hessenberg(a: &mut CMatrix, q: &mut CMatrix) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    let mut v = vec![ZERO; n];
    for k in 0..n - 2 {
        let len = n - k - 1;
        let xnorm = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * xnorm;
        for i in 0..len {
            v[i] = a[(k + 1 + i, k)];
        }
        v[0] -= alpha;
        let vn2: f64 = v[..len].iter().map(C64::norm_sqr).sum();
        if vn2 == 0.0 {
            continue;
        }
        let f = 2.0 / vn2;
        for j in k..n {
            let mut s = ZERO;
            for i in 0..len {
                s += v[i].conj() * a[(k + 1 + i, j)];
            }
            s *= f;
            for i in 0..len {
                a[(k + 1 + i, j)] -= v[i] * s;
            }
        }
        for mat in [&mut *a, &mut *q] {
            for r in 0..n {
                let mut s = ZERO;
                for i in 0..len {
                    s += mat[(r, k + 1 + i)] * v[i];
                }
                s *= f;
                for i in 0..len {
                    mat[(r, k + 1 + i)] -= s * v[i].conj();
                }
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = ZERO;
        }
    }
}

/// Rotation `[[c, s], [-conj(s), c]]` mapping `(x, y)` to `(r, 0)`.
#[inline]
fn givens(x: C64, y: C64) -> (f64, C64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, ZERO);
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let rho = ax.hypot(ay);
    (ax / rho, (x / ax) * y.conj() / rho)
}

fn wilkinson(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let p = (a - d) * 0.5;
    let disc = (p * p + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let l1 = mid + disc;
    let l2 = mid - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn shifted_qr(t: &mut CMatrix, q: &mut CMatrix) -> Result<()> {
    let n = t.rows();
    if n < 2 {
        return Ok(());
    }
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return Ok(());
    }
    let max_total = 60 * n.max(8);
    let mut total = 0usize;
    let mut iter = 0usize;
    let mut hi = n - 1;
    let mut rots: Vec<(f64, C64)> = Vec::with_capacity(n);

    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let mut s = t[(l - 1, l - 1)].norm() + t[(l, l)].norm();
            if s == 0.0 {
                s = norm;
            }
            if t[(l, l - 1)].norm() <= f64::EPSILON * s {
                t[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_total {
            let worst = (1..n).map(|i| t[(i, i - 1)].norm()).fold(0.0, f64::max) / norm;
            return Err(Error::NoConvergence { context: "shifted QR iteration".into(), worst_residual: worst });
        }

        let mu = if iter % 10 == 0 {
            t[(hi, hi)] + C64::new(0.75 * t[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson(t[(hi - 1, hi - 1)], t[(hi - 1, hi)], t[(hi, hi - 1)], t[(hi, hi)])
        };

        for i in l..=hi {
            t[(i, i)] -= mu;
        }
        rots.clear();
        for k in l..hi {
            let (c, s) = givens(t[(k, k)], t[(k + 1, k)]);
            for j in k..n {
                let x = t[(k, j)];
                let y = t[(k + 1, j)];
                t[(k, j)] = x * c + s * y;
                t[(k + 1, j)] = -s.conj() * x + y * c;
            }
            t[(k + 1, k)] = ZERO;
            rots.push((c, s));
        }
        for (idx, k) in (l..hi).enumerate() {
            let (c, s) = rots[idx];
            for r in 0..=(k + 1) {
                let x = t[(r, k)];
                let y = t[(r, k + 1)];
                t[(r, k)] = x * c + s.conj() * y;
                t[(r, k + 1)] = -s * x + y * c;
            }
            for r in 0..n {
                let x = q[(r, k)];
                let y = q[(r, k + 1)];
                q[(r, k)] = x * c + s.conj() * y;
                q[(r, k + 1)] = -s * x + y * c;
            }
        }
        for i in l..=hi {
            t[(i, i)] += mu;
        }
    }
    for i in 1..n {
        for j in 0..i {
            t[(i, j)] = ZERO;
        }
    }
    Ok(())
}
