use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::lstsq;
use crate::lp::{Cmp, Lp};
use crate::norms::{norm, NormSpec};
use crate::polyhedral::cone::subsets_up_to;

/// `{x : aᵢᵀx ≤ bᵢ, eⱼᵀx = dⱼ}`.
#[derive(Clone, Debug)]
pub(crate) struct Halfspaces {
    pub dim: usize,
    pub a: Vec<DVector<f64>>,
    pub b: Vec<f64>,
    pub e: Vec<DVector<f64>>,
    pub d: Vec<f64>,
}

fn feas_tol(h: &Halfspaces, z: &DVector<f64>) -> f64 {
    let scale = h.b.iter().chain(h.d.iter()).fold(z.amax(), |m, v| m.max(v.abs()));
    1e-9 * (1.0 + scale)
}

/// Nearest point and distance, or `None` when the set is empty.
pub(crate) fn distance_to_polyhedron(
    h: &Halfspaces,
    z: &DVector<f64>,
    p: NormSpec,
) -> Result<Option<(f64, DVector<f64>)>> {
    match p {
        NormSpec::L2 => Ok(project_l2(h, z).map(|x| (norm(&(&x - z), p), x))),
        _ => distance_lp(h, z, p),
    }
}

fn project_l2(h: &Halfspaces, z: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.dim;
    let tol = feas_tol(h, z);
    let m = h.a.len();
    let mut found: Option<DVector<f64>> = None;
    let mut fallback: Option<(f64, DVector<f64>)> = None;
    subsets_up_to(m, n, |s| {
        let rows = s.len() + h.e.len();
        let c = DMatrix::from_fn(rows, n, |i, j| if i < s.len() { h.a[s[i]][j] } else { h.e[i - s.len()][j] });
        let rhs = DVector::from_fn(rows, |i, _| if i < s.len() { h.b[s[i]] } else { h.d[i - s.len()] });
        let x = if rows == 0 { z.clone() } else { z + lstsq(&c, &(&rhs - &c * z)) };
        if rows > 0 && (&c * &x - &rhs).amax() > tol {
            return false;
        }
        if h.a.iter().zip(&h.b).any(|(a, b)| a.dot(&x) > b + tol) {
            return false;
        }
        let lam = if rows == 0 { DVector::zeros(0) } else { lstsq(&c.transpose(), &(z - &x)) };
        if (0..s.len()).all(|i| lam[i] >= -1e-10 * (1.0 + lam.amax())) {
            found = Some(x);
            return true;
        }
        let dist = (&x - z).norm();
        if fallback.as_ref().is_none_or(|(d, _)| dist < *d) {
            fallback = Some((dist, x));
        }
        false
    });
    found.or(fallback.map(|f| f.1))
}

fn distance_lp(h: &Halfspaces, z: &DVector<f64>, p: NormSpec) -> Result<Option<(f64, DVector<f64>)>> {
    let n = h.dim;
    let mut lp = Lp::minimize();
    let x: Vec<usize> = (0..n).map(|_| lp.free_var(0.0)).collect();
    let t: Vec<usize> = match p {
        NormSpec::LInf => {
            let t = lp.var(1.0, 0.0, f64::INFINITY);
            vec![t; n]
        }
        _ => (0..n).map(|_| lp.var(1.0, 0.0, f64::INFINITY)).collect(),
    };
    for i in 0..n {
        lp.constraint(&[(x[i], 1.0), (t[i], -1.0)], Cmp::Le, z[i]);
        lp.constraint(&[(x[i], 1.0), (t[i], 1.0)], Cmp::Ge, z[i]);
    }
    for (a, b) in h.a.iter().zip(&h.b) {
        let terms: Vec<(usize, f64)> = (0..n).map(|j| (x[j], a[j])).collect();
        lp.constraint(&terms, Cmp::Le, *b);
    }
    for (e, d) in h.e.iter().zip(&h.d) {
        let terms: Vec<(usize, f64)> = (0..n).map(|j| (x[j], e[j])).collect();
        lp.constraint(&terms, Cmp::Eq, *d);
    }
    Ok(lp.solve()?.optimal().map(|(_, sol)| {
        let xs = DVector::from_fn(n, |i, _| sol[x[i]]);
        (norm(&(&xs - z), p), xs)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn projection_onto_box_corner() {
        let h = Halfspaces {
            dim: 2,
            a: vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])],
            b: vec![1.0, 1.0],
            e: vec![],
            d: vec![],
        };
        let (d, x) = distance_to_polyhedron(&h, &v(&[2.0, 3.0]), NormSpec::L2).unwrap().unwrap();
        assert!((x - v(&[1.0, 1.0])).amax() < 1e-12);
        assert!((d - 5f64.sqrt()).abs() < 1e-12);
        let (d1, _) = distance_to_polyhedron(&h, &v(&[2.0, 3.0]), NormSpec::L1).unwrap().unwrap();
        assert!((d1 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn empty_polyhedron() {
        let h = Halfspaces { dim: 1, a: vec![v(&[1.0]), v(&[-1.0])], b: vec![-1.0, -1.0], e: vec![], d: vec![] };
        assert!(distance_to_polyhedron(&h, &v(&[0.0]), NormSpec::L2).unwrap().is_none());
        assert!(distance_to_polyhedron(&h, &v(&[0.0]), NormSpec::LInf).unwrap().is_none());
    }

    #[test]
    fn projection_with_equality() {
        let h = Halfspaces { dim: 2, a: vec![v(&[-1.0, 0.0])], b: vec![0.0], e: vec![v(&[0.0, 1.0])], d: vec![0.0] };
        let (d, x) = distance_to_polyhedron(&h, &v(&[-1.0, 1.0]), NormSpec::L2).unwrap().unwrap();
        assert!(x.amax() < 1e-12);
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }
}
