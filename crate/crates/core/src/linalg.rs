//! Householder least squares with column-rank detection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A column whose Householder pivot falls below this fraction of its own
/// norm is treated as linearly dependent on the preceding columns.
pub(crate) const RANK_TOL: f64 = 1e-10;

pub(crate) struct LeastSquares {
    pub coef: DVector<f64>,
    /// Squared norm of the residual that is orthogonal to the column space.
    pub rss: f64,
}

/// Minimises `||b - a x||` through a QR factorisation of `a`.
///
/// `col_norms` optionally overrides the reference norms used for rank
/// detection (needed when `a` is itself a reduced factor of a larger system).
pub(crate) fn least_squares(
    a: DMatrix<f64>,
    b: &DVector<f64>,
    col_norms: Option<&[f64]>,
) -> Result<LeastSquares> {
    let (rows, cols) = a.shape();
    debug_assert_eq!(rows, b.len());
    if cols == 0 {
        return Ok(LeastSquares {
            coef: DVector::zeros(0),
            rss: b.norm_squared(),
        });
    }
    let norms: Vec<f64> = match col_norms {
        Some(n) => n.to_vec(),
        None => a.column_iter().map(|c| c.norm()).collect(),
    };
    if cols > rows {
        return Err(Error::RankDeficient { column: rows });
    }
    let qr = a.qr();
    let r = qr.r();
    for j in 0..cols {
        if norms[j] == 0.0 || r[(j, j)].abs() <= RANK_TOL * norms[j] {
            return Err(Error::RankDeficient { column: j });
        }
    }
    let mut qtb = b.clone();
    qr.q_tr_mul(&mut qtb);
    let head = qtb.rows(0, cols).into_owned();
    let rss = qtb.rows(cols, rows - cols).norm_squared();
    let coef = r
        .solve_upper_triangular(&head)
        .ok_or(Error::RankDeficient { column: cols - 1 })?;
    Ok(LeastSquares { coef, rss })
}
