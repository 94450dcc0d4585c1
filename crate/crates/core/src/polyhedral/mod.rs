//! Polyhedral sets, polyhedral cones and their variational geometry.

mod cone;
mod local;
mod project;

pub use cone::{distance_to_ray, Cone, ConvexCone, Generators};
pub use local::{
    dir_limiting_normal_cone, frechet_normal_cone, limiting_normal_cone, tangent_cone, Cell, LocalArrangement,
    MAX_HYPERPLANES,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SubradError};
use crate::norms::NormSpec;
use project::{distance_to_polyhedron, Halfspaces};

pub const MEMBER_TOL: f64 = 1e-9;

/// Convex polyhedron `{x : A x ≤ b, E x = d}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexPoly {
    dim: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    e: Vec<Vec<f64>>,
    d: Vec<f64>,
}

impl ConvexPoly {
    pub fn new(dim: usize, a: Vec<Vec<f64>>, b: Vec<f64>, e: Vec<Vec<f64>>, d: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(SubradError::DimensionMismatch { expected: a.len(), got: b.len() });
        }
        if e.len() != d.len() {
            return Err(SubradError::DimensionMismatch { expected: e.len(), got: d.len() });
        }
        for row in a.iter().chain(e.iter()) {
            if row.len() != dim {
                return Err(SubradError::DimensionMismatch { expected: dim, got: row.len() });
            }
        }
        if a.iter().chain(e.iter()).flatten().chain(b.iter()).chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(SubradError::Invalid("polyhedron data must be finite".into()));
        }
        Ok(ConvexPoly { dim, a, b, e, d })
    }

    pub fn whole(dim: usize) -> Self {
        ConvexPoly { dim, a: vec![], b: vec![], e: vec![], d: vec![] }
    }

    /// The single point `{p}`.
    pub fn point(p: &[f64]) -> Self {
        let dim = p.len();
        let e = (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        ConvexPoly { dim, a: vec![], b: vec![], e, d: p.to_vec() }
    }

    /// The polyhedral cone `{x : A (x - apex) ≤ 0, E (x - apex) = 0}`.
    pub fn cone_at(apex: &[f64], a: Vec<Vec<f64>>, e: Vec<Vec<f64>>) -> Result<Self> {
        let dot = |r: &Vec<f64>| r.iter().zip(apex).map(|(x, y)| x * y).sum::<f64>();
        let b = a.iter().map(dot).collect();
        let d = e.iter().map(dot).collect();
        ConvexPoly::new(apex.len(), a, b, e, d)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ineq(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.a, &self.b)
    }

    pub fn eq(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.e, &self.d)
    }

    fn row_dot(row: &[f64], x: &DVector<f64>) -> f64 {
        row.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        let scale = tol * (1.0 + x.amax());
        self.a.iter().zip(&self.b).all(|(r, b)| Self::row_dot(r, x) <= b + scale * (1.0 + b.abs()))
            && self.e.iter().zip(&self.d).all(|(r, d)| (Self::row_dot(r, x) - d).abs() <= scale * (1.0 + d.abs()))
    }

    /// Indices of inequality rows active at `x`.
    pub fn active_rows(&self, x: &DVector<f64>, tol: f64) -> Vec<usize> {
        let scale = tol * (1.0 + x.amax());
        (0..self.a.len())
            .filter(|&i| (Self::row_dot(&self.a[i], x) - self.b[i]).abs() <= scale * (1.0 + self.b[i].abs()))
            .collect()
    }

    pub(crate) fn halfspaces(&self) -> Halfspaces {
        let vecs = |rows: &[Vec<f64>]| rows.iter().map(|r| DVector::from_row_slice(r)).collect();
        Halfspaces { dim: self.dim, a: vecs(&self.a), b: self.b.clone(), e: vecs(&self.e), d: self.d.clone() }
    }

    /// Adds rows `a x ≤ b`.
    pub fn with_ineq(mut self, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        self.a.extend(rows);
        self.b.extend(rhs);
        ConvexPoly::new(self.dim, self.a, self.b, self.e, self.d)
    }

    /// Adds rows `e x = d`.
    pub fn with_eq(mut self, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        self.e.extend(rows);
        self.d.extend(rhs);
        ConvexPoly::new(self.dim, self.a, self.b, self.e, self.d)
    }

    pub fn nearest(&self, z: &DVector<f64>, p: NormSpec) -> Result<Option<(f64, DVector<f64>)>> {
        distance_to_polyhedron(&self.halfspaces(), z, p)
    }

    /// Preimage `{x : M x + c ∈ self}`.
    pub fn preimage(&self, m: &DMatrix<f64>, c: &DVector<f64>) -> Result<ConvexPoly> {
        if m.nrows() != self.dim {
            return Err(SubradError::DimensionMismatch { expected: self.dim, got: m.nrows() });
        }
        let map_rows = |rows: &[Vec<f64>], rhs: &[f64]| {
            let mut out_rows = Vec::new();
            let mut out_rhs = Vec::new();
            for (r, b) in rows.iter().zip(rhs) {
                let rv = DVector::from_row_slice(r);
                let new_row = m.transpose() * &rv;
                out_rows.push(new_row.iter().copied().collect::<Vec<f64>>());
                out_rhs.push(b - rv.dot(c));
            }
            (out_rows, out_rhs)
        };
        let (a, b) = map_rows(&self.a, &self.b);
        let (e, d) = map_rows(&self.e, &self.d);
        ConvexPoly::new(m.ncols(), a, b, e, d)
    }

    /// Intersection with another polyhedron of the same dimension.
    pub fn intersect(&self, other: &ConvexPoly) -> Result<ConvexPoly> {
        self.clone()
            .with_ineq(other.a.clone(), other.b.clone())?
            .with_eq(other.e.clone(), other.d.clone())
    }
}

/// Finite union of convex polyhedra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyUnion {
    dim: usize,
    pieces: Vec<ConvexPoly>,
}

impl PolyUnion {
    pub fn new(dim: usize, pieces: Vec<ConvexPoly>) -> Result<Self> {
        for p in &pieces {
            if p.dim != dim {
                return Err(SubradError::DimensionMismatch { expected: dim, got: p.dim });
            }
        }
        Ok(PolyUnion { dim, pieces })
    }

    pub fn single(p: ConvexPoly) -> Self {
        PolyUnion { dim: p.dim, pieces: vec![p] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[ConvexPoly] {
        &self.pieces
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.pieces.iter().any(|p| p.contains(x, tol))
    }

    /// Distance in ‖·‖_p and a nearest point; `(+∞, None)` for an empty union.
    pub fn nearest(&self, z: &DVector<f64>, p: NormSpec) -> Result<(f64, Option<DVector<f64>>)> {
        let mut best = (f64::INFINITY, None);
        for piece in &self.pieces {
            if let Some((d, x)) = piece.nearest(z, p)? {
                if d < best.0 {
                    best = (d, Some(x));
                }
            }
        }
        Ok(best)
    }

    pub fn distance(&self, z: &DVector<f64>, p: NormSpec) -> Result<f64> {
        Ok(self.nearest(z, p)?.0)
    }

    /// For one-dimensional unions: the pieces as closed intervals `[lo, hi]`
    /// (infinite ends allowed), skipping empty pieces.
    pub fn intervals(&self) -> Result<Vec<(f64, f64)>> {
        if self.dim != 1 {
            return Err(SubradError::UnsupportedDimension { dim: self.dim, what: "interval view needs dimension 1" });
        }
        let mut out = Vec::new();
        for p in &self.pieces {
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for (r, b) in p.a.iter().zip(&p.b) {
                let c = r[0];
                if c > 0.0 {
                    hi = hi.min(b / c);
                } else if c < 0.0 {
                    lo = lo.max(b / c);
                } else if *b < 0.0 {
                    lo = f64::INFINITY;
                }
            }
            for (r, d) in p.e.iter().zip(&p.d) {
                let c = r[0];
                if c != 0.0 {
                    lo = lo.max(d / c);
                    hi = hi.min(d / c);
                } else if *d != 0.0 {
                    lo = f64::INFINITY;
                }
            }
            if lo <= hi {
                out.push((lo, hi));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_and_distance() {
        let d = ConvexPoly::cone_at(&[0.0, 0.0], vec![vec![-1.0, 1.0], vec![-1.0, -1.0]], vec![]).unwrap();
        let u = PolyUnion::single(d);
        assert!(u.contains(&DVector::from_row_slice(&[1.0, 0.5]), MEMBER_TOL));
        assert!(!u.contains(&DVector::from_row_slice(&[-1.0, 0.0]), MEMBER_TOL));
        let dist = u.distance(&DVector::from_row_slice(&[-1.0, 0.0]), NormSpec::L2).unwrap();
        assert!((dist - 1.0).abs() < 1e-12);
        assert_eq!(PolyUnion::new(2, vec![]).unwrap().distance(&DVector::zeros(2), NormSpec::L1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn intervals_of_line() {
        let u = PolyUnion::new(
            1,
            vec![
                ConvexPoly::new(1, vec![vec![1.0], vec![-1.0]], vec![2.0, 1.0], vec![], vec![]).unwrap(),
                ConvexPoly::point(&[5.0]),
                ConvexPoly::new(1, vec![vec![1.0], vec![-1.0]], vec![0.0, -1.0], vec![], vec![]).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(u.intervals().unwrap(), vec![(-1.0, 2.0), (5.0, 5.0)]);
    }

    #[test]
    fn preimage_of_point() {
        let k = ConvexPoly::point(&[1.0]);
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let pre = k.preimage(&m, &DVector::from_row_slice(&[0.5])).unwrap();
        assert!(pre.contains(&DVector::from_row_slice(&[0.25, 0.25]), 1e-12));
        assert!(!pre.contains(&DVector::from_row_slice(&[0.5, 0.25]), 1e-12));
    }
}
