//! Dense least-squares helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot threshold below which a column is treated as collinear.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: DVector<f64>,
    /// `(X'X)^-1`, in the original column order.
    pub xtx_inv: DMatrix<f64>,
}

/// Least squares via Householder QR with column pivoting.
///
/// A design whose `k`-th pivot falls below `PIVOT_TOLERANCE` times the first
/// pivot is rejected; the error names every column that was not selected
/// before the breakdown.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<LeastSquares> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::domain(format!(
            "response has {} rows, design has {n}",
            y.len()
        )));
    }
    if k == 0 {
        return Ok(LeastSquares {
            coef: DVector::zeros(0),
            xtx_inv: DMatrix::zeros(0, 0),
        });
    }
    if n < k {
        return Err(Error::RankDeficient {
            columns: names.to_vec(),
        });
    }
    let mut a = x.clone();
    let mut qty = y.clone();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut first_pivot = 0.0;

    for j in 0..k {
        let (best, best_norm) = (j..k)
            .map(|c| (c, a.view((j, c), (n - j, 1)).norm()))
            .fold((j, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if j == 0 {
            first_pivot = best_norm;
        }
        if best_norm <= PIVOT_TOLERANCE * first_pivot || best_norm == 0.0 {
            let mut columns: Vec<String> = perm[j..].iter().map(|&c| names[c].clone()).collect();
            columns.sort();
            return Err(Error::RankDeficient { columns });
        }
        if best != j {
            a.swap_columns(j, best);
            perm.swap(j, best);
        }
        // Householder reflector zeroing a[j+1.., j].
        let alpha = -a[(j, j)].signum() * best_norm;
        let alpha = if alpha == 0.0 { -best_norm } else { alpha };
        let mut v = a.view((j, j), (n - j, 1)).clone_owned();
        v[0] -= alpha;
        let v_norm_sq = v.norm_squared();
        if v_norm_sq > 0.0 {
            for c in j..k {
                let dot = v.dot(&a.view((j, c), (n - j, 1)));
                let scale = 2.0 * dot / v_norm_sq;
                let mut col = a.view_mut((j, c), (n - j, 1));
                col -= &v * scale;
            }
            let dot = v.dot(&qty.rows(j, n - j));
            let scale = 2.0 * dot / v_norm_sq;
            let mut tail = qty.rows_mut(j, n - j);
            tail -= &v * scale;
        }
    }

    let r = a.view((0, 0), (k, k)).upper_triangle();
    let rhs = qty.rows(0, k).clone_owned();
    let coef_perm = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Singular("triangular factor".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Singular("triangular factor".into()))?;
    let inv_perm = &r_inv * r_inv.transpose();

    let mut coef = DVector::zeros(k);
    let mut xtx_inv = DMatrix::zeros(k, k);
    for (i, &pi) in perm.iter().enumerate() {
        coef[pi] = coef_perm[i];
        for (j, &pj) in perm.iter().enumerate() {
            xtx_inv[(pi, pj)] = inv_perm[(i, j)];
        }
    }
    Ok(LeastSquares { coef, xtx_inv })
}

/// Indices of a maximal linearly independent subset of the columns of `x`,
/// chosen greedily by column-pivoted Gram-Schmidt, in ascending order.
pub fn independent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let k = x.ncols();
    let mut work = x.clone();
    let original: Vec<f64> = (0..k).map(|c| x.column(c).norm()).collect();
    let mut remaining: Vec<usize> = (0..k).filter(|&c| original[c] > 0.0).collect();
    let mut chosen = Vec::new();
    while !remaining.is_empty() {
        let (pos, &best) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| {
                let ra = work.column(*a.1).norm() / original[*a.1];
                let rb = work.column(*b.1).norm() / original[*b.1];
                ra.total_cmp(&rb)
            })
            .expect("nonempty");
        let norm = work.column(best).norm();
        if norm <= 1e-9 * original[best] {
            break;
        }
        remaining.swap_remove(pos);
        chosen.push(best);
        let q = work.column(best) / norm;
        for &c in &remaining {
            let proj = q.dot(&work.column(c));
            let mut col = work.column_mut(c);
            col.axpy(-proj, &q, 1.0);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Inverse of a symmetric positive-definite matrix via Cholesky of its
/// unit-diagonal rescaling.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = symmetrize(m);
    let k = sym.nrows();
    let scale: Vec<f64> = (0..k).map(|i| sym[(i, i)]).collect();
    if scale.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::Singular(format!("{what} is not positive definite")));
    }
    let scale: Vec<f64> = scale.iter().map(|d| 1.0 / d.sqrt()).collect();
    let unit = DMatrix::from_fn(k, k, |r, c| sym[(r, c)] * scale[r] * scale[c]);
    let inv = unit
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))?;
    Ok(symmetrize(&DMatrix::from_fn(k, k, |r, c| {
        inv[(r, c)] * scale[r] * scale[c]
    })))
}

/// `(M + M') / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Ratio of extreme eigenvalue magnitudes of a symmetric matrix.
pub fn condition_number_sym(m: &DMatrix<f64>) -> f64 {
    let eig = symmetrize(m).symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
