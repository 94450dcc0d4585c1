//! Matrices `B` with `B u = v` and `Bᵀ v* = u*` for compatible witness tuples.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SubradError};
use crate::linalg::null_space;
use crate::lp::{Cmp, Lp};
use crate::norms::{dual_attainer, frobenius_norm, norm, operator_norm, NormSpec};

pub const UNIT_TOL: f64 = 1e-9;
pub const COMPAT_TOL: f64 = 1e-9;
const ELIM_TOL: f64 = 1e-10;

/// A tuple `(u, v, u*, v*)` with `‖u‖ = ‖v*‖_* = 1`, optionally with a matrix `B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub ustar: Vec<f64>,
    pub vstar: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
}

fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(x)
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    for r in rows {
        if r.len() != ncols {
            return Err(SubradError::DimensionMismatch { expected: ncols, got: r.len() });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl Witness {
    pub fn new(u: DVector<f64>, v: DVector<f64>, ustar: DVector<f64>, vstar: DVector<f64>) -> Self {
        let c = |x: DVector<f64>| x.iter().copied().collect();
        Witness { u: c(u), v: c(v), ustar: c(ustar), vstar: c(vstar), b: None }
    }

    pub fn u(&self) -> DVector<f64> {
        dv(&self.u)
    }

    pub fn v(&self) -> DVector<f64> {
        dv(&self.v)
    }

    pub fn ustar(&self) -> DVector<f64> {
        dv(&self.ustar)
    }

    pub fn vstar(&self) -> DVector<f64> {
        dv(&self.vstar)
    }

    pub fn matrix(&self) -> Result<Option<DMatrix<f64>>> {
        self.b.as_ref().map(|rows| rows_to_matrix(rows, self.u.len())).transpose()
    }

    /// `u*ᵀu - v*ᵀv`; zero for compatible tuples.
    pub fn coupling_gap(&self) -> f64 {
        self.ustar().dot(&self.u()) - self.vstar().dot(&self.v())
    }

    pub fn is_compatible(&self, tol: f64) -> bool {
        let scale = 1.0 + norm(&self.ustar(), NormSpec::L2) + norm(&self.v(), NormSpec::L2);
        self.coupling_gap().abs() <= tol * scale
    }

    /// `max(‖v‖, ‖u*‖_*)`, a lower bound for the norm of any admissible matrix.
    pub fn lower_bound(&self, p: NormSpec) -> f64 {
        norm(&self.v(), p).max(norm(&self.ustar(), p.dual()))
    }

    pub fn with_matrix(mut self, b: &DMatrix<f64>) -> Self {
        self.b = Some(matrix_to_rows(b));
        self
    }

    fn check(&self, p: NormSpec) -> Result<()> {
        if self.ustar.len() != self.u.len() {
            return Err(SubradError::DimensionMismatch { expected: self.u.len(), got: self.ustar.len() });
        }
        if self.vstar.len() != self.v.len() {
            return Err(SubradError::DimensionMismatch { expected: self.v.len(), got: self.vstar.len() });
        }
        if (norm(&self.u(), p) - 1.0).abs() > UNIT_TOL {
            return Err(SubradError::Precondition(format!("‖u‖_{p} must be 1")));
        }
        if (norm(&self.vstar(), p.dual()) - 1.0).abs() > UNIT_TOL {
            return Err(SubradError::Precondition("‖v*‖ in the dual norm must be 1".into()));
        }
        if !self.is_compatible(COMPAT_TOL) {
            return Err(SubradError::Precondition(format!(
                "witness is not compatible: u*ᵀu - v*ᵀv = {:e}",
                self.coupling_gap()
            )));
        }
        Ok(())
    }

    /// Max violation of `B u = v` and `Bᵀ v* = u*`.
    pub fn residual_of(&self, b: &DMatrix<f64>) -> f64 {
        let r1 = (b * self.u() - self.v()).amax();
        let r2 = (b.transpose() * self.vstar() - self.ustar()).amax();
        r1.max(r2)
    }
}

/// `B = v z*ᵀ + w u*ᵀ - (u*ᵀu) w z*ᵀ` with `z*` a dual attainer of `u` and `w` a dual attainer of `v*`.
pub fn compatible_matrix(w: &Witness, p: NormSpec) -> Result<DMatrix<f64>> {
    w.check(p)?;
    let (u, v, us, vs) = (w.u(), w.v(), w.ustar(), w.vstar());
    let z = dual_attainer(&u, p)?;
    let ww = dual_attainer(&vs, p.dual())?;
    let c = us.dot(&u);
    Ok(&v * z.transpose() + &ww * us.transpose() - (&ww * z.transpose()) * c)
}

/// Minimum Frobenius norm solution `B̄ = v* u*ᵀ + v uᵀ - (u*ᵀu) v* uᵀ` and its norm.
pub fn frobenius_min_matrix(w: &Witness) -> Result<(DMatrix<f64>, f64)> {
    w.check(NormSpec::L2)?;
    let (u, v, us, vs) = (w.u(), w.v(), w.ustar(), w.vstar());
    let c = us.dot(&u);
    let b = &vs * us.transpose() + &v * u.transpose() - (&vs * u.transpose()) * c;
    let f = frobenius_norm(&b);
    Ok((b, f))
}

/// Closed form `‖u*‖² + ‖v‖² - (u*ᵀu)²` for the squared Frobenius minimum.
pub fn frobenius_min_value(w: &Witness) -> f64 {
    let (u, v, us) = (w.u(), w.v(), w.ustar());
    let c = us.dot(&u);
    (us.norm_squared() + v.norm_squared() - c * c).max(0.0).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinOpnorm {
    pub matrix: Vec<Vec<f64>>,
    /// Operator norm of `matrix`.
    pub upper: f64,
    /// `max(‖v‖, ‖u*‖_*)`.
    pub lower: f64,
    pub exact: bool,
}

#[derive(Clone, Debug)]
pub struct OpnormConfig {
    pub starts: usize,
    pub seed: u64,
    pub max_evals: usize,
}

impl Default for OpnormConfig {
    fn default() -> Self {
        OpnormConfig { starts: 8, seed: 0, max_evals: 200_000 }
    }
}

/// Linear constraints on `vec(B)` (row major) with one dependent row removed.
fn constraint_system(w: &Witness) -> (DMatrix<f64>, DVector<f64>) {
    let (u, v, us, vs) = (w.u(), w.v(), w.ustar(), w.vstar());
    let n = u.len();
    let m = v.len();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::with_capacity(n + m);
    for i in 0..m {
        let mut r = DVector::zeros(m * n);
        for j in 0..n {
            r[i * n + j] = u[j];
        }
        rows.push((r, v[i]));
    }
    for j in 0..n {
        let mut r = DVector::zeros(m * n);
        for i in 0..m {
            r[i * n + j] = vs[i];
        }
        rows.push((r, us[j]));
    }
    // pivoted elimination only decides which rows to keep
    let mut work: Vec<DVector<f64>> = rows.iter().map(|(r, _)| r.clone()).collect();
    let mut keep = Vec::new();
    let scale = work.iter().map(|r| r.amax()).fold(0.0, f64::max).max(1.0);
    for idx in 0..work.len() {
        let r = work[idx].clone();
        let (piv, val) = r.iter().enumerate().fold((0, 0.0f64), |acc, (j, &x)| if x.abs() > acc.1.abs() { (j, x) } else { acc });
        if val.abs() <= ELIM_TOL * scale {
            continue;
        }
        keep.push(idx);
        for later in work.iter_mut().skip(idx + 1) {
            let f = later[piv] / val;
            if f != 0.0 {
                *later -= &r * f;
            }
        }
    }
    let a = DMatrix::from_fn(keep.len(), m * n, |i, j| rows[keep[i]].0[j]);
    let b = DVector::from_fn(keep.len(), |i, _| rows[keep[i]].1);
    (a, b)
}

/// Minimum operator-norm matrix with `B u = v`, `Bᵀ v* = u*`. Exact LP for p ∈ {1, ∞};
/// multi-start pattern search over the affine solution set for p = 2.
pub fn min_opnorm_matrix(w: &Witness, p: NormSpec, cfg: &OpnormConfig) -> Result<MinOpnorm> {
    w.check(p)?;
    let lower = w.lower_bound(p);
    let n = w.u.len();
    let m = w.v.len();
    match p {
        NormSpec::L1 | NormSpec::LInf => {
            let (a, rhs) = constraint_system(w);
            let mut lp = Lp::minimize();
            let b: Vec<usize> = (0..m * n).map(|_| lp.free_var(0.0)).collect();
            let s: Vec<usize> = (0..m * n).map(|_| lp.var(0.0, 0.0, f64::INFINITY)).collect();
            let t = lp.var(1.0, 0.0, f64::INFINITY);
            for k in 0..m * n {
                lp.constraint(&[(b[k], 1.0), (s[k], -1.0)], Cmp::Le, 0.0);
                lp.constraint(&[(b[k], 1.0), (s[k], 1.0)], Cmp::Ge, 0.0);
            }
            for i in 0..a.nrows() {
                let terms: Vec<(usize, f64)> = (0..m * n).filter(|&k| a[(i, k)] != 0.0).map(|k| (b[k], a[(i, k)])).collect();
                lp.constraint(&terms, Cmp::Eq, rhs[i]);
            }
            if p == NormSpec::LInf {
                for i in 0..m {
                    let mut terms: Vec<(usize, f64)> = (0..n).map(|j| (s[i * n + j], 1.0)).collect();
                    terms.push((t, -1.0));
                    lp.constraint(&terms, Cmp::Le, 0.0);
                }
            } else {
                for j in 0..n {
                    let mut terms: Vec<(usize, f64)> = (0..m).map(|i| (s[i * n + j], 1.0)).collect();
                    terms.push((t, -1.0));
                    lp.constraint(&terms, Cmp::Le, 0.0);
                }
            }
            let (_, x) = lp
                .solve()?
                .optimal()
                .ok_or_else(|| SubradError::Lp("matrix LP has no optimum".into()))?;
            let bm = DMatrix::from_fn(m, n, |i, j| x[b[i * n + j]]);
            let upper = operator_norm(&bm, p);
            Ok(MinOpnorm { matrix: matrix_to_rows(&bm), upper, lower, exact: true })
        }
        NormSpec::L2 => spectral_search(w, lower, cfg),
    }
}

fn spectral(b: &DMatrix<f64>) -> f64 {
    b.singular_values().iter().fold(0.0, |m: f64, &s| m.max(s))
}

fn spectral_search(w: &Witness, lower: f64, cfg: &OpnormConfig) -> Result<MinOpnorm> {
    let n = w.u.len();
    let m = w.v.len();
    let (bbar, _) = frobenius_min_matrix(w)?;
    let (a, _) = constraint_system(w);
    let basis = null_space(&a, 1e-12);
    let k = basis.ncols();
    let to_mat = |theta: &DVector<f64>| -> DMatrix<f64> {
        let flat = &basis * theta;
        DMatrix::from_fn(m, n, |i, j| bbar[(i, j)] + flat[i * n + j])
    };
    let eval = |theta: &DVector<f64>| spectral(&to_mat(theta));
    let mut best_theta = DVector::zeros(k);
    let mut best = eval(&best_theta);
    if k == 0 || best <= lower * (1.0 + 1e-12) + 1e-15 {
        return Ok(MinOpnorm { matrix: matrix_to_rows(&to_mat(&best_theta)), upper: best, lower, exact: true });
    }
    let vec_of = |b: &DMatrix<f64>| DVector::from_fn(m * n, |r, _| b[(r / n, r % n)] - bbar[(r / n, r % n)]);
    let mut starts = vec![DVector::zeros(k)];
    if let Ok(bc) = compatible_matrix(w, NormSpec::L2) {
        starts.push(basis.transpose() * vec_of(&bc));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = frobenius_norm(&bbar).max(1e-3);
    for _ in 0..cfg.starts {
        starts.push(DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0) * scale));
    }
    let budget = cfg.max_evals / starts.len().max(1);
    for start in starts {
        let (theta, val) = pattern_search(&start, &eval, &to_mat, &basis, n, scale, budget, &mut rng, lower);
        if val < best {
            best = val;
            best_theta = theta;
        }
        if best <= lower * (1.0 + 1e-12) + 1e-15 {
            break;
        }
    }
    let bm = to_mat(&best_theta);
    Ok(MinOpnorm { matrix: matrix_to_rows(&bm), upper: spectral(&bm), lower, exact: false })
}

#[allow(clippy::too_many_arguments)]
fn pattern_search(
    start: &DVector<f64>,
    eval: &dyn Fn(&DVector<f64>) -> f64,
    to_mat: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    basis: &DMatrix<f64>,
    ncols: usize,
    scale: f64,
    budget: usize,
    rng: &mut ChaCha8Rng,
    lower: f64,
) -> (DVector<f64>, f64) {
    let k = start.len();
    let mut theta = start.clone();
    let mut val = eval(&theta);
    let mut step = scale;
    let mut evals = 1;
    let mut checkpoint = (val, 0usize);
    while step > 1e-13 * scale && evals < budget {
        if evals >= checkpoint.1 + 2000 {
            if val > checkpoint.0 * (1.0 - 1e-10) {
                break;
            }
            checkpoint = (val, evals);
        }
        let mut dirs: Vec<DVector<f64>> = Vec::new();
        // steepest descent direction at a simple top singular value
        let b = to_mat(&theta);
        let svd = b.clone().svd(true, true);
        if let (Some(uu), Some(vt)) = (svd.u.as_ref(), svd.v_t.as_ref()) {
            let top = (0..svd.singular_values.len())
                .max_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
                .unwrap_or(0);
            let grad = DVector::from_fn(basis.nrows(), |r, _| uu[(r / ncols, top)] * vt[(top, r % ncols)]);
            let g = basis.transpose() * grad;
            if g.norm() > 0.0 {
                dirs.push(-g.normalize());
            }
        }
        for i in 0..k {
            let mut e = DVector::zeros(k);
            e[i] = 1.0;
            dirs.push(e.clone());
            dirs.push(-e);
        }
        for _ in 0..k.max(2) {
            let d = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
            if d.norm() > 0.0 {
                let d = d.normalize();
                dirs.push(-&d);
                dirs.push(d);
            }
        }
        let mut improved = false;
        for d in &dirs {
            let cand = &theta + d * step;
            let cv = eval(&cand);
            evals += 1;
            if cv < val - 1e-15 * val.max(1.0) {
                theta = cand;
                val = cv;
                improved = true;
                break;
            }
        }
        if val <= lower * (1.0 + 1e-12) + 1e-15 {
            break;
        }
        if !improved {
            step *= 0.5;
        } else {
            step *= 1.5;
        }
    }
    (theta, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn cone_witness(p: NormSpec) -> Witness {
        let a = 2f64.powf(-1.0 / p.exponent());
        Witness::new(v(&[a, a]), v(&[0.0, -a]), v(&[-0.5, -0.5]), v(&[0.0, 1.0]))
    }

    #[test]
    fn compatible_matrix_example() {
        let (al, be, de) = (0.3, -0.7, 1.1);
        let w = Witness::new(v(&[1.0, 0.0]), v(&[al, de]), v(&[al, be]), v(&[1.0, 0.0]));
        for p in NormSpec::ALL {
            let b = compatible_matrix(&w, p).unwrap();
            let expected = DMatrix::from_row_slice(2, 2, &[al, be, de, 0.0]);
            assert!((b - expected).amax() < 1e-15);
        }
    }

    #[test]
    fn compatible_matrix_rejects_incompatible() {
        let w = Witness::new(v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 0.0]), v(&[1.0, 0.0]));
        assert!(compatible_matrix(&w, NormSpec::L2).is_err());
    }

    #[test]
    fn cone_witness_matrices() {
        for p in NormSpec::ALL {
            let w = cone_witness(p);
            assert!(w.is_compatible(1e-12));
            let b = compatible_matrix(&w, p).unwrap();
            assert!(w.residual_of(&b) < 1e-12);
            let r = min_opnorm_matrix(&w, p, &OpnormConfig::default()).unwrap();
            let target = 2f64.powf(-1.0 / p.exponent());
            assert!((r.upper - target).abs() < 1e-6, "{p}: {}", r.upper);
            assert!((r.lower - target).abs() < 1e-12);
            let bm = rows_to_matrix(&r.matrix, 2).unwrap();
            assert!(w.residual_of(&bm) < 1e-9);
        }
    }

    #[test]
    fn frobenius_formula() {
        let w = cone_witness(NormSpec::L2);
        let (b, f) = frobenius_min_matrix(&w).unwrap();
        assert!((f - frobenius_min_value(&w)).abs() < 1e-12);
        assert!(w.residual_of(&b) < 1e-12);
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, -0.5, -0.5]);
        assert!((b - expected).amax() < 1e-12);
    }

    #[test]
    fn spectral_search_reaches_lower_bound() {
        let c = 0.6f64;
        let s = 0.8f64;
        let u = v(&[c, s, 0.0]);
        let vstar = v(&[0.0, 1.0]);
        let ustar = v(&[0.2, -0.4, 0.5]);
        let mut vv = v(&[0.3, 0.0]);
        vv[1] = ustar.dot(&u);
        let w = Witness::new(u, vv, ustar, vstar);
        let r = min_opnorm_matrix(&w, NormSpec::L2, &OpnormConfig::default()).unwrap();
        assert!(r.upper >= r.lower - 1e-12);
        assert!(r.upper - r.lower < 1e-6, "{} {}", r.upper, r.lower);
    }
}
