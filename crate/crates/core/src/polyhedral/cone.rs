use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SubradError};
use crate::linalg::{null_space, rows_matrix, vstack, RANK_TOL};
use crate::norms::{norm, NormSpec};
use crate::polyhedral::project::{distance_to_polyhedron, Halfspaces};

pub(crate) const CONE_TOL: f64 = 1e-9;
const MAX_SUBSETS: u128 = 2_000_000;

/// Extreme rays and a lineality basis of a convex cone.
#[derive(Clone, Debug, PartialEq)]
pub struct Generators {
    pub rays: Vec<DVector<f64>>,
    pub lines: Vec<DVector<f64>>,
}

/// Polyhedral convex cone `{x : rᵀx ≤ 0 for r in ineq, eᵀx = 0 for e in eq}`.
#[derive(Clone, Debug)]
pub struct ConvexCone {
    dim: usize,
    ineq: Vec<DVector<f64>>,
    eq: Vec<DVector<f64>>,
    gens: OnceLock<std::result::Result<Generators, SubradError>>,
}

fn clean_rows(dim: usize, rows: Vec<DVector<f64>>) -> Result<Vec<DVector<f64>>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for r in rows {
        if r.len() != dim {
            return Err(SubradError::DimensionMismatch { expected: dim, got: r.len() });
        }
        let n = r.norm();
        if n <= 1e-14 {
            continue;
        }
        let u = r / n;
        if !out.iter().any(|o| (o - &u).amax() <= 1e-12) {
            out.push(u);
        }
    }
    Ok(out)
}

impl ConvexCone {
    pub fn new(dim: usize, ineq: Vec<DVector<f64>>, eq: Vec<DVector<f64>>) -> Result<Self> {
        Ok(ConvexCone { dim, ineq: clean_rows(dim, ineq)?, eq: clean_rows(dim, eq)?, gens: OnceLock::new() })
    }

    pub fn from_matrices(ineq: &DMatrix<f64>, eq: &DMatrix<f64>) -> Result<Self> {
        let dim = ineq.ncols().max(eq.ncols());
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).transpose()).collect();
        Self::new(dim, rows(ineq), rows(eq))
    }

    pub fn whole(dim: usize) -> Self {
        ConvexCone::new(dim, vec![], vec![]).expect("whole space")
    }

    pub fn zero(dim: usize) -> Self {
        let eq = (0..dim).map(|i| DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
        ConvexCone::new(dim, vec![], eq).expect("zero cone")
    }

    /// Cone generated by `rays` plus the span of `lines`.
    pub fn from_generators(dim: usize, rays: Vec<DVector<f64>>, lines: Vec<DVector<f64>>) -> Result<Self> {
        ConvexCone::new(dim, rays, lines)?.polar()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ineq_rows(&self) -> &[DVector<f64>] {
        &self.ineq
    }

    pub fn eq_rows(&self) -> &[DVector<f64>] {
        &self.eq
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        let scale = tol * x.norm().max(1.0);
        self.ineq.iter().all(|r| r.dot(x) <= scale) && self.eq.iter().all(|e| e.dot(x).abs() <= scale)
    }

    /// Extreme rays (unit ℓ2) and an orthonormal lineality basis.
    pub fn generators(&self) -> Result<&Generators> {
        self.gens
            .get_or_init(|| compute_generators(self.dim, &self.ineq, &self.eq))
            .as_ref()
            .map_err(|e| e.clone())
    }

    /// Polar cone `{y : yᵀx ≤ 0 for all x in the cone}`.
    pub fn polar(&self) -> Result<ConvexCone> {
        let g = self.generators()?;
        let polar = ConvexCone::new(self.dim, g.rays.clone(), g.lines.clone())?;
        let seeded = Generators { rays: self.ineq.clone(), lines: self.eq.clone() };
        let _ = polar.gens.set(Ok(seeded));
        Ok(polar)
    }

    pub fn intersect(&self, other: &ConvexCone) -> Result<ConvexCone> {
        if other.dim != self.dim {
            return Err(SubradError::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut ineq = self.ineq.clone();
        ineq.extend(other.ineq.iter().cloned());
        let mut eq = self.eq.clone();
        eq.extend(other.eq.iter().cloned());
        ConvexCone::new(self.dim, ineq, eq)
    }

    pub fn is_subspace(&self) -> Result<bool> {
        Ok(self.generators()?.rays.is_empty())
    }

    pub fn is_zero(&self) -> Result<bool> {
        let g = self.generators()?;
        Ok(g.rays.is_empty() && g.lines.is_empty())
    }

    /// Orthonormal basis (columns) of the linear span of the cone.
    pub fn span_basis(&self) -> Result<DMatrix<f64>> {
        let g = self.generators()?;
        let mut cols: Vec<DVector<f64>> = g.rays.clone();
        cols.extend(g.lines.iter().cloned());
        if cols.is_empty() {
            return Ok(DMatrix::zeros(self.dim, 0));
        }
        let m = rows_matrix(&cols, self.dim);
        Ok(crate::linalg::range_basis(&m.transpose(), RANK_TOL))
    }

    /// Whether every point of `other` lies in this cone.
    pub fn contains_cone(&self, other: &ConvexCone, tol: f64) -> Result<bool> {
        let g = other.generators()?;
        Ok(g.rays.iter().all(|r| self.contains(r, tol))
            && g.lines.iter().all(|l| self.contains(l, tol) && self.contains(&-l, tol)))
    }

    pub fn same_set(&self, other: &ConvexCone, tol: f64) -> Result<bool> {
        Ok(self.contains_cone(other, tol)? && other.contains_cone(self, tol)?)
    }

    /// Whether every vector of `other` is orthogonal to every vector of this cone.
    pub fn orthogonal_to(&self, other: &ConvexCone, tol: f64) -> Result<bool> {
        let a = self.generators()?;
        let b = other.generators()?;
        let xs: Vec<&DVector<f64>> = a.rays.iter().chain(a.lines.iter()).collect();
        let ys: Vec<&DVector<f64>> = b.rays.iter().chain(b.lines.iter()).collect();
        Ok(xs.iter().all(|x| ys.iter().all(|y| x.dot(y).abs() <= tol)))
    }

    pub(crate) fn halfspaces(&self) -> Halfspaces {
        Halfspaces {
            dim: self.dim,
            a: self.ineq.clone(),
            b: vec![0.0; self.ineq.len()],
            e: self.eq.clone(),
            d: vec![0.0; self.eq.len()],
        }
    }

    /// Nearest point of the cone to `z` in ‖·‖_p and the distance.
    pub fn nearest(&self, z: &DVector<f64>, p: NormSpec) -> Result<(f64, DVector<f64>)> {
        distance_to_polyhedron(&self.halfspaces(), z, p)?
            .ok_or_else(|| SubradError::Lp("cone reported empty".into()))
    }
}

fn combinations(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * (n as u128 - i) / (i + 1);
    }
    c
}

fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return;
            }
        }
    }
}

pub(crate) fn subsets_up_to(n: usize, kmax: usize, mut f: impl FnMut(&[usize]) -> bool) {
    for k in 0..=kmax.min(n) {
        let mut stop = false;
        if k == 0 {
            stop = f(&[]);
        } else {
            for_each_subset(n, k, |s| {
                if !stop {
                    stop = f(s);
                }
            });
        }
        if stop {
            return;
        }
    }
}

fn compute_generators(dim: usize, ineq: &[DVector<f64>], eq: &[DVector<f64>]) -> Result<Generators> {
    let ineq_m = rows_matrix(ineq, dim);
    let eq_m = rows_matrix(eq, dim);
    let lineality = null_space(&vstack(&[&ineq_m, &eq_m], dim), RANK_TOL);
    let lines: Vec<DVector<f64>> = (0..lineality.ncols()).map(|j| lineality.column(j).into_owned()).collect();
    let lt = lineality.transpose();
    let q = null_space(&vstack(&[&eq_m, &lt], dim), RANK_TOL);
    let k = q.ncols();
    let mut rays: Vec<DVector<f64>> = Vec::new();
    if k == 0 {
        return Ok(Generators { rays, lines });
    }
    let reduced: Vec<DVector<f64>> = ineq
        .iter()
        .map(|r| q.transpose() * r)
        .filter(|r| r.norm() > 1e-12)
        .map(|r| r.normalize())
        .collect();
    let feasible = |y: &DVector<f64>| reduced.iter().all(|r| r.dot(y) <= CONE_TOL);
    let push = |y: DVector<f64>, rays: &mut Vec<DVector<f64>>| {
        let x = (&q * y).normalize();
        if !rays.iter().any(|r| (r - &x).amax() <= 1e-9) {
            rays.push(x);
        }
    };
    if k == 1 {
        for s in [1.0, -1.0] {
            let y = DVector::from_element(1, s);
            if feasible(&y) {
                push(y, &mut rays);
            }
        }
        return Ok(Generators { rays, lines });
    }
    let m = reduced.len();
    if combinations(m, k - 1) > MAX_SUBSETS {
        return Err(SubradError::TooLarge(format!(
            "extreme ray search over {m} rows in dimension {k}"
        )));
    }
    for_each_subset(m, k - 1, |s| {
        let sub = DMatrix::from_fn(s.len(), k, |i, j| reduced[s[i]][j]);
        let ns = null_space(&sub, 1e-9);
        if ns.ncols() != 1 {
            return;
        }
        let y = ns.column(0).into_owned();
        for sign in [1.0, -1.0] {
            let ys = &y * sign;
            if feasible(&ys) {
                push(ys, &mut rays);
            }
        }
    });
    Ok(Generators { rays, lines })
}

/// Finite union of polyhedral convex cones. No pieces means the empty set.
#[derive(Clone, Debug)]
pub struct Cone {
    dim: usize,
    pieces: Vec<ConvexCone>,
}

impl Cone {
    pub fn empty(dim: usize) -> Self {
        Cone { dim, pieces: vec![] }
    }

    pub fn convex(c: ConvexCone) -> Self {
        Cone { dim: c.dim, pieces: vec![c] }
    }

    pub fn union(dim: usize, pieces: Vec<ConvexCone>) -> Result<Self> {
        for p in &pieces {
            if p.dim != dim {
                return Err(SubradError::DimensionMismatch { expected: dim, got: p.dim });
            }
        }
        Ok(Cone { dim, pieces })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[ConvexCone] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn as_convex(&self) -> Result<&ConvexCone> {
        match self.pieces.as_slice() {
            [c] => Ok(c),
            ps => Err(SubradError::NonConvex(ps.len())),
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.pieces.iter().any(|p| p.contains(x, tol))
    }

    /// Polar of a convex cone; unions are rejected.
    pub fn polar(&self) -> Result<Cone> {
        Ok(Cone::convex(self.as_convex()?.polar()?))
    }

    /// Piecewise set comparison: each piece of one side is contained in some piece of the other.
    pub fn same_set(&self, other: &Cone, tol: f64) -> Result<bool> {
        let covered = |a: &Cone, b: &Cone| -> Result<bool> {
            for p in &a.pieces {
                let mut hit = false;
                for q in &b.pieces {
                    if q.contains_cone(p, tol)? {
                        hit = true;
                        break;
                    }
                }
                if !hit {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        Ok(covered(self, other)? && covered(other, self)?)
    }

    /// Distance from `z` to the union in ‖·‖_p (+∞ for the empty set) and a nearest point.
    pub fn nearest(&self, z: &DVector<f64>, p: NormSpec) -> Result<(f64, Option<DVector<f64>>)> {
        let mut best = (f64::INFINITY, None);
        for piece in &self.pieces {
            let (d, x) = piece.nearest(z, p)?;
            if d < best.0 {
                best = (d, Some(x));
            }
        }
        Ok(best)
    }

    pub fn distance(&self, z: &DVector<f64>, p: NormSpec) -> Result<f64> {
        Ok(self.nearest(z, p)?.0)
    }
}

/// ‖·‖_p distance from `z` to the ray `{t w : t ≥ 0}`, by direct one-dimensional minimisation.
pub fn distance_to_ray(z: &DVector<f64>, w: &DVector<f64>, p: NormSpec) -> f64 {
    let ww = w.dot(w);
    if ww == 0.0 {
        return norm(z, p);
    }
    match p {
        NormSpec::L2 => {
            let t = (z.dot(w) / ww).max(0.0);
            norm(&(z - w * t), p)
        }
        _ => {
            // convex piecewise linear in t: the minimum sits at t = 0 or a breakpoint
            let mut best = norm(z, p);
            let mut cands: Vec<f64> = (0..w.len()).filter(|&i| w[i] != 0.0).map(|i| z[i] / w[i]).collect();
            if p == NormSpec::LInf {
                for i in 0..w.len() {
                    for j in 0..w.len() {
                        let den = w[i] - w[j];
                        if i < j && den != 0.0 {
                            cands.push((z[i] - z[j]) / den);
                        }
                        let den = w[i] + w[j];
                        if i < j && den != 0.0 {
                            cands.push((z[i] + z[j]) / den);
                        }
                    }
                }
            }
            for t in cands {
                if t > 0.0 {
                    best = best.min(norm(&(z - w * t), p));
                }
            }
            best
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn angle_d() -> ConvexCone {
        ConvexCone::new(2, vec![v(&[-1.0, 1.0]), v(&[-1.0, -1.0])], vec![]).unwrap()
    }

    #[test]
    fn generators_of_angle() {
        let g = angle_d().generators().unwrap().clone();
        assert_eq!(g.rays.len(), 2);
        assert!(g.lines.is_empty());
        let s = 0.5f64.sqrt();
        assert!(g.rays.iter().any(|r| (r - v(&[s, s])).amax() < 1e-12));
        assert!(g.rays.iter().any(|r| (r - v(&[s, -s])).amax() < 1e-12));
    }

    #[test]
    fn polar_of_angle() {
        let p = angle_d().polar().unwrap();
        let expected = ConvexCone::new(2, vec![v(&[1.0, 1.0]), v(&[1.0, -1.0])], vec![]).unwrap();
        assert!(p.same_set(&expected, 1e-9).unwrap());
        assert!(p.contains(&v(&[-2.0, 1.0]), 1e-12));
        assert!(!p.contains(&v(&[-1.0, 2.0]), 1e-12));
    }

    #[test]
    fn polar_of_ray_and_space() {
        let ray = ConvexCone::from_generators(2, vec![v(&[1.0, 0.0])], vec![]).unwrap();
        let p = ray.polar().unwrap();
        let half = ConvexCone::new(2, vec![v(&[1.0, 0.0])], vec![]).unwrap();
        assert!(p.same_set(&half, 1e-9).unwrap());
        assert!(ConvexCone::whole(2).polar().unwrap().is_zero().unwrap());
        assert!(ConvexCone::zero(3).polar().unwrap().same_set(&ConvexCone::whole(3), 1e-9).unwrap());
    }

    #[test]
    fn generators_with_lineality() {
        let c = ConvexCone::new(3, vec![v(&[0.0, 0.0, 1.0])], vec![v(&[1.0, 0.0, 0.0])]).unwrap();
        let g = c.generators().unwrap();
        assert_eq!(g.lines.len(), 1);
        assert_eq!(g.rays.len(), 1);
        assert!((&g.rays[0] - v(&[0.0, 0.0, -1.0])).amax() < 1e-12);
    }

    #[test]
    fn generators_of_three_dim_pyramid() {
        let rows = vec![v(&[-1.0, 0.0, 0.0]), v(&[0.0, -1.0, 0.0]), v(&[0.0, 0.0, -1.0]), v(&[-1.0, -1.0, -1.0])];
        let c = ConvexCone::new(3, rows, vec![]).unwrap();
        assert_eq!(c.generators().unwrap().rays.len(), 3);
    }

    #[test]
    fn nearest_points() {
        let d = angle_d();
        let (dist, x) = d.nearest(&v(&[0.0, 1.0]), NormSpec::L2).unwrap();
        assert!((dist - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((x - v(&[0.5, 0.5])).amax() < 1e-12);
        let (dist1, _) = d.nearest(&v(&[0.0, 1.0]), NormSpec::L1).unwrap();
        assert!((dist1 - 1.0).abs() < 1e-9);
        let (dinf, _) = d.nearest(&v(&[0.0, 1.0]), NormSpec::LInf).unwrap();
        assert!((dinf - 0.5).abs() < 1e-9);
    }

    #[test]
    fn union_distance_and_empty() {
        let e = Cone::empty(2);
        assert_eq!(e.distance(&v(&[1.0, 0.0]), NormSpec::L2).unwrap(), f64::INFINITY);
        let k = Cone::union(
            2,
            vec![
                ConvexCone::from_generators(2, vec![v(&[1.0, 0.0])], vec![]).unwrap(),
                ConvexCone::from_generators(2, vec![v(&[0.0, 1.0])], vec![]).unwrap(),
            ],
        )
        .unwrap();
        assert!((k.distance(&v(&[1.0, 2.0]), NormSpec::L2).unwrap() - 1.0).abs() < 1e-12);
        assert!(k.polar().is_err());
    }

    #[test]
    fn ray_distance_matches_lp() {
        let w = v(&[1.0, -2.0, 0.5]);
        let ray = ConvexCone::from_generators(3, vec![w.clone()], vec![]).unwrap();
        for z in [v(&[1.0, 1.0, 1.0]), v(&[3.0, -1.0, 0.0]), v(&[-1.0, 0.0, 2.0])] {
            for p in NormSpec::ALL {
                let a = distance_to_ray(&z, &w, p);
                let b = ray.nearest(&z, p).unwrap().0;
                assert!((a - b).abs() < 1e-9, "{p} {a} {b}");
            }
        }
    }
}
