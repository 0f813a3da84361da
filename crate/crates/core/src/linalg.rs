//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `Xᵀ diag(w) X`, accumulated row by row in index order.
pub fn weighted_crossprod(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let p = x.ncols();
    let mut out = DMatrix::zeros(p, p);
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for a in 0..p {
            let xa = wi * x[(i, a)];
            if xa == 0.0 {
                continue;
            }
            for b in 0..=a {
                out[(a, b)] += xa * x[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            out[(b, a)] = out[(a, b)];
        }
    }
    out
}

/// `Xᵀ v`.
pub fn xt_vec(x: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
    let p = x.ncols();
    let mut out = DVector::zeros(p);
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        for a in 0..p {
            out[a] += vi * x[(i, a)];
        }
    }
    out
}

/// Checks that the columns of `X` restricted to rows with positive weight are
/// linearly independent, naming the first dependent column otherwise.
///
/// Modified Gram-Schmidt on `sqrt(w) X`; a column whose residual norm falls
/// below `1e-9` of its original norm counts as dependent.
pub fn check_full_rank(x: &DMatrix<f64>, w: &[f64]) -> Result<()> {
    let n = x.nrows();
    let p = x.ncols();
    let rows: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
    let sw: Vec<f64> = rows.iter().map(|&i| w[i].sqrt()).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut col: Vec<f64> = rows
            .iter()
            .zip(&sw)
            .map(|(&i, &s)| s * x[(i, j)])
            .collect();
        let orig = norm(&col);
        if orig == 0.0 {
            return Err(Error::SingularDesign { column: j });
        }
        for q in &basis {
            let d: f64 = col.iter().zip(q).map(|(a, b)| a * b).sum();
            for (c, qv) in col.iter_mut().zip(q) {
                *c -= d * qv;
            }
        }
        let rn = norm(&col);
        if rn <= 1e-9 * orig {
            return Err(Error::SingularDesign { column: j });
        }
        for c in col.iter_mut() {
            *c /= rn;
        }
        basis.push(col);
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().cholesky().map(|c| c.solve(b))
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().cholesky().map(|c| c.inverse())
}

/// `ln |A|` for symmetric positive definite `A`, via Cholesky.
pub fn log_det_spd(a: &DMatrix<f64>) -> Option<f64> {
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    Some((0..a.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// `[A B]` for matrices with equal row counts.
pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (b.nrows(), b.ncols()))
        .copy_from(b);
    out
}

/// Symmetrises in place by averaging with the transpose.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for a in 0..p {
        for b in 0..a {
            let v = 0.5 * (m[(a, b)] + m[(b, a)]);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
}
