use num_complex::Complex64 as C64;

use super::{CMatrix, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Singular values by one-sided (Hestenes) Jacobi, sorted descending.
///
/// Works on the columns of `m` directly, so zero singular values come out at
/// roundoff level rather than at the square root of it.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<C64>> = (0..cols).map(|j| (0..rows).map(|i| m[(i, j)]).collect()).collect();
    let mut norms: Vec<f64> = a.iter().map(|c| c.iter().map(C64::norm_sqr).sum()).collect();
    let tol = f64::EPSILON * (rows.max(1) as f64);
    // columns at roundoff level of the whole matrix count as zero; otherwise their
    // direction is noise and the relative test below never settles
    let floor = (f64::EPSILON * (rows.max(cols).max(1) as f64)).powi(2) * norms.iter().sum::<f64>();

    let mut converged = cols < 2;
    let mut worst = 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        worst = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha <= floor || beta <= floor {
                    continue;
                }
                let mut g = ZERO;
                for (x, y) in a[p].iter().zip(&a[q]) {
                    g += x.conj() * y;
                }
                let gabs = g.norm();
                let rel = gabs / (alpha * beta).sqrt();
                worst = worst.max(rel);
                if rel <= tol {
                    continue;
                }
                rotated = true;
                let phase = g / gabs;
                let zeta = (beta - alpha) / (2.0 * gabs);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = a.split_at_mut(q);
                let (ap, aq) = (&mut left[p], &mut right[0]);
                for (x, y) in ap.iter_mut().zip(aq.iter_mut()) {
                    let yq = *y * phase.conj();
                    let xp = *x;
                    *x = xp * c - yq * s;
                    *y = xp * s + yq * c;
                }
                norms[p] = ap.iter().map(C64::norm_sqr).sum();
                norms[q] = aq.iter().map(C64::norm_sqr).sum();
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence { context: "one-sided Jacobi SVD".into(), worst_residual: worst });
    }
    let mut sv: Vec<f64> = norms.into_iter().map(f64::sqrt).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    Ok(sv)
}

/// Sum of singular values of a square matrix.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("trace norm needs a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    Ok(singular_values(m)?.iter().sum())
}
