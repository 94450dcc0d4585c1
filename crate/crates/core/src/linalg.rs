//! Small dense linear algebra helpers built on nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

pub(crate) const RANK_TOL: f64 = 1e-10;

/// Singular values sorted in decreasing order together with the matching
/// left and right singular vectors (as columns).
pub struct SortedSvd {
    pub values: Vec<f64>,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

/// Full SVD of a matrix; `right` is square (n × n) even when the matrix is wide.
pub fn sorted_svd(a: &DMatrix<f64>) -> SortedSvd {
    let (r, c) = a.shape();
    // wide input: factor the transpose padded with zero columns, then swap the factors
    let (work, wide) = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (c, r)).copy_from(&a.transpose());
        (p, true)
    } else {
        (a.clone(), false)
    };
    let svd = work.svd(true, true);
    let (u, v) = {
        let u = svd.u.expect("svd u");
        let v = svd.v_t.expect("svd v_t").transpose();
        if wide { (v, u) } else { (u, v) }
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let left_full = DMatrix::from_fn(u.nrows(), order.len(), |row, k| u[(row, order[k])]);
    let left = left_full.rows(0, r).into_owned();
    let right = DMatrix::from_fn(c, order.len(), |row, k| v[(row, order[k])]);
    SortedSvd { values, left, right }
}

fn cutoff(values: &[f64], tol: f64) -> f64 {
    tol * values.first().copied().unwrap_or(0.0).max(1.0)
}

/// Orthonormal basis (columns) of the null space of `a` (which has n columns).
pub fn null_space(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let svd = sorted_svd(a);
    let cut = cutoff(&svd.values, tol);
    let keep: Vec<usize> = (0..n).filter(|&k| svd.values.get(k).copied().unwrap_or(0.0) <= cut).collect();
    DMatrix::from_fn(n, keep.len(), |i, k| svd.right[(i, keep[k])])
}

/// Orthonormal basis (columns) of the column space of `a`.
pub fn range_basis(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let m = a.nrows();
    if a.ncols() == 0 || m == 0 {
        return DMatrix::zeros(m, 0);
    }
    let svd = sorted_svd(&a.transpose());
    // columns of `right` for the transpose span the row space of aᵀ = range of a
    let cut = cutoff(&svd.values, tol);
    let keep: Vec<usize> = (0..svd.values.len().min(m)).filter(|&k| svd.values[k] > cut).collect();
    DMatrix::from_fn(m, keep.len(), |i, k| svd.right[(i, keep[k])])
}

pub fn rank(a: &DMatrix<f64>, tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let svd = sorted_svd(a);
    let cut = cutoff(&svd.values, tol);
    svd.values.iter().filter(|&&s| s > cut).count().min(a.nrows().min(a.ncols()))
}

/// Smallest singular value σ_min (over min(m, n) values) with its left and right vectors.
pub fn min_singular_triplet(a: &DMatrix<f64>) -> (f64, DVector<f64>, DVector<f64>) {
    let k = a.nrows().min(a.ncols());
    let svd = sorted_svd(a);
    let idx = k - 1;
    let sigma = svd.values[idx];
    let right = svd.right.column(idx).into_owned();
    let left = if sigma > 0.0 {
        (a * &right) / sigma
    } else {
        svd.left.column(idx.min(svd.left.ncols() - 1)).into_owned()
    };
    (sigma, left, right)
}

/// Minimum-norm least squares solution of `a x ≈ b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DVector::zeros(n);
    }
    let svd = sorted_svd(a);
    let cut = cutoff(&svd.values, RANK_TOL);
    let mut x = DVector::zeros(n);
    for k in 0..svd.values.len().min(a.nrows()) {
        let s = svd.values[k];
        if s <= cut {
            continue;
        }
        let uk = svd.left.column(k);
        let coef = uk.dot(b) / s;
        x += svd.right.column(k) * coef;
    }
    x
}

/// Stack matrices with equal column counts vertically.
pub fn vstack(blocks: &[&DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut r = 0;
    for b in blocks {
        if b.nrows() > 0 {
            out.view_mut((r, 0), (b.nrows(), ncols)).copy_from(*b);
        }
        r += b.nrows();
    }
    out
}

pub fn rows_matrix(rows: &[DVector<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..m.nrows()).map(|i| m.row(i).transpose()).collect()
}
