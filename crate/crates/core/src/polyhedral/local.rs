use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use nalgebra::DVector;

use crate::error::{Result, SubradError};
use crate::lp::{Cmp, Lp};
use crate::polyhedral::cone::{Cone, ConvexCone, CONE_TOL};
use crate::polyhedral::{PolyUnion, MEMBER_TOL};

pub const MAX_HYPERPLANES: usize = 12;
const MARGIN_TOL: f64 = 1e-9;

/// A relatively open cone of the local sign arrangement that lies inside the set.
#[derive(Clone, Debug)]
pub struct Cell {
    /// Sign of `cₕᵀd` for each hyperplane normal `cₕ` on the cell.
    pub signs: Vec<i8>,
    /// A point in the relative interior of the cell.
    pub point: DVector<f64>,
    pub closure: ConvexCone,
    /// Regular normal cone of the set at `x̄ + t·d` for small `t > 0` and any `d` in the cell.
    pub normal: ConvexCone,
    /// Indices (into the union) of the pieces whose local cone contains the cell.
    pub pieces: Vec<usize>,
}

#[derive(Clone, Debug)]
struct LocalPiece {
    piece: usize,
    ineq: Vec<(usize, f64)>,
    eq: Vec<usize>,
    allowed: Vec<[bool; 3]>,
}

impl LocalPiece {
    fn admits(&self, signs: &[i8]) -> bool {
        signs.iter().enumerate().all(|(h, &s)| self.allowed[h][(s + 1) as usize])
    }
}

/// The local conic model of a polyhedral union at a point.
#[derive(Clone, Debug)]
pub struct LocalArrangement {
    dim: usize,
    hyperplanes: Vec<DVector<f64>>,
    local: Vec<LocalPiece>,
    cells: OnceLock<std::result::Result<Vec<Cell>, SubradError>>,
}

fn canonical(row: &[f64]) -> Option<(DVector<f64>, f64)> {
    let v = DVector::from_row_slice(row);
    let n = v.norm();
    if n <= 1e-14 {
        return None;
    }
    let u = v / n;
    let first = u.iter().find(|x| x.abs() > 1e-12).copied().unwrap_or(1.0);
    let s = first.signum();
    Some((u * s, s))
}

impl LocalArrangement {
    pub fn at(set: &PolyUnion, x: &DVector<f64>) -> Result<Self> {
        let dim = set.dim();
        if x.len() != dim {
            return Err(SubradError::DimensionMismatch { expected: dim, got: x.len() });
        }
        let mut hyperplanes: Vec<DVector<f64>> = Vec::new();
        let mut index_of = |c: DVector<f64>| -> usize {
            if let Some(i) = hyperplanes.iter().position(|h| (h - &c).amax() <= 1e-9) {
                i
            } else {
                hyperplanes.push(c);
                hyperplanes.len() - 1
            }
        };
        let mut local = Vec::new();
        for (pi, piece) in set.pieces().iter().enumerate() {
            if !piece.contains(x, MEMBER_TOL) {
                continue;
            }
            let (a, _) = piece.ineq();
            let mut ineq = Vec::new();
            for i in piece.active_rows(x, MEMBER_TOL) {
                if let Some((c, s)) = canonical(&a[i]) {
                    ineq.push((index_of(c), s));
                }
            }
            let mut eq = Vec::new();
            for row in piece.eq().0 {
                if let Some((c, _)) = canonical(row) {
                    eq.push(index_of(c));
                }
            }
            local.push(LocalPiece { piece: pi, ineq, eq, allowed: vec![] });
        }
        let h = hyperplanes.len();
        for lp in &mut local {
            let mut allowed = vec![[true; 3]; h];
            for &(i, s) in &lp.ineq {
                // s·cᵀd ≤ 0
                if s > 0.0 {
                    allowed[i][2] = false;
                } else {
                    allowed[i][0] = false;
                }
            }
            for &i in &lp.eq {
                allowed[i][0] = false;
                allowed[i][2] = false;
            }
            lp.allowed = allowed;
        }
        Ok(LocalArrangement { dim, hyperplanes, local, cells: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether the base point lies in the set.
    pub fn is_active(&self) -> bool {
        !self.local.is_empty()
    }

    pub fn hyperplanes(&self) -> &[DVector<f64>] {
        &self.hyperplanes
    }

    fn piece_cone(&self, lp: &LocalPiece, only_zero: Option<&[i8]>) -> Result<ConvexCone> {
        let keep = |h: usize| only_zero.is_none_or(|s| s[h] == 0);
        let ineq = lp.ineq.iter().filter(|(h, _)| keep(*h)).map(|&(h, s)| &self.hyperplanes[h] * s).collect();
        let eq = lp.eq.iter().map(|&h| self.hyperplanes[h].clone()).collect();
        ConvexCone::new(self.dim, ineq, eq)
    }

    /// Tangent cone of the set at the base point (union of the local piece cones).
    pub fn tangent_cone(&self) -> Result<Cone> {
        let pieces = self.local.iter().map(|lp| self.piece_cone(lp, None)).collect::<Result<Vec<_>>>()?;
        Cone::union(self.dim, pieces)
    }

    /// Regular normal cone at the base point.
    pub fn frechet_normal_cone(&self) -> Result<Cone> {
        if self.local.is_empty() {
            return Ok(Cone::empty(self.dim));
        }
        Ok(Cone::convex(self.normal_for(&self.local.iter().collect::<Vec<_>>(), None)?))
    }

    fn normal_for(&self, pieces: &[&LocalPiece], signs: Option<&[i8]>) -> Result<ConvexCone> {
        let mut ineq = Vec::new();
        let mut eq = Vec::new();
        for lp in pieces {
            let t = self.piece_cone(lp, signs)?;
            let g = t.generators()?;
            ineq.extend(g.rays.iter().cloned());
            eq.extend(g.lines.iter().cloned());
        }
        ConvexCone::new(self.dim, ineq, eq)
    }

    pub fn cells(&self) -> Result<&[Cell]> {
        self.cells
            .get_or_init(|| self.enumerate_cells())
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(|e| e.clone())
    }

    fn enumerate_cells(&self) -> Result<Vec<Cell>> {
        let h = self.hyperplanes.len();
        if h > MAX_HYPERPLANES {
            return Err(SubradError::HyperplaneCap { count: h, cap: MAX_HYPERPLANES });
        }
        let mut memo: HashMap<Vec<i8>, Option<DVector<f64>>> = HashMap::new();
        let mut found: BTreeMap<Vec<i8>, DVector<f64>> = BTreeMap::new();
        for lp in &self.local {
            let mut partial: Vec<Vec<i8>> = vec![vec![]];
            for k in 0..h {
                let mut next = Vec::new();
                for p in &partial {
                    for s in [-1i8, 0, 1] {
                        if !lp.allowed[k][(s + 1) as usize] {
                            continue;
                        }
                        let mut q = p.clone();
                        q.push(s);
                        let pt = match memo.get(&q) {
                            Some(r) => r.clone(),
                            None => {
                                let r = self.interior_point(&q)?;
                                memo.insert(q.clone(), r.clone());
                                r
                            }
                        };
                        if pt.is_some() {
                            next.push(q);
                        }
                    }
                }
                partial = next;
            }
            for q in partial {
                let pt = memo.get(&q).cloned().flatten().unwrap_or_else(|| DVector::zeros(self.dim));
                found.entry(q).or_insert(pt);
            }
        }
        let mut cells = Vec::with_capacity(found.len());
        for (signs, point) in found {
            let owners: Vec<&LocalPiece> = self.local.iter().filter(|lp| lp.admits(&signs)).collect();
            let mut ineq = Vec::new();
            let mut eq = Vec::new();
            for (k, &s) in signs.iter().enumerate() {
                let c = &self.hyperplanes[k];
                match s {
                    1 => ineq.push(-c),
                    -1 => ineq.push(c.clone()),
                    _ => eq.push(c.clone()),
                }
            }
            let closure = ConvexCone::new(self.dim, ineq, eq)?;
            let normal = self.normal_for(&owners, Some(&signs))?;
            cells.push(Cell { pieces: owners.iter().map(|lp| lp.piece).collect(), signs, point, closure, normal });
        }
        Ok(cells)
    }

    /// Max-margin point of a (partial) sign vector, or `None` when the sign cell is empty.
    fn interior_point(&self, signs: &[i8]) -> Result<Option<DVector<f64>>> {
        if signs.iter().all(|&s| s == 0) {
            return Ok(Some(DVector::zeros(self.dim)));
        }
        let n = self.dim;
        let mut lp = Lp::maximize();
        let d: Vec<usize> = (0..n).map(|_| lp.var(0.0, -1.0, 1.0)).collect();
        let s = lp.var(1.0, 0.0, 1.0);
        for (k, &sg) in signs.iter().enumerate() {
            let c = &self.hyperplanes[k];
            let mut terms: Vec<(usize, f64)> = (0..n).map(|j| (d[j], c[j])).collect();
            match sg {
                1 => {
                    terms.push((s, -1.0));
                    lp.constraint(&terms, Cmp::Ge, 0.0);
                }
                -1 => {
                    terms.push((s, 1.0));
                    lp.constraint(&terms, Cmp::Le, 0.0);
                }
                _ => lp.constraint(&terms, Cmp::Eq, 0.0),
            }
        }
        Ok(match lp.solve()?.optimal() {
            Some((obj, x)) if obj > MARGIN_TOL => Some(DVector::from_fn(n, |i, _| x[d[i]])),
            _ => None,
        })
    }

    /// Union of the cell normal cones over cells whose closure contains `dir`.
    pub fn directional_normal_cone(&self, dir: &DVector<f64>) -> Result<Cone> {
        if dir.len() != self.dim {
            return Err(SubradError::DimensionMismatch { expected: self.dim, got: dir.len() });
        }
        let pieces = self
            .cells()?
            .iter()
            .filter(|c| c.closure.contains(dir, CONE_TOL))
            .map(|c| c.normal.clone())
            .collect();
        Cone::union(self.dim, pieces)
    }

    pub fn limiting_normal_cone(&self) -> Result<Cone> {
        Cone::union(self.dim, self.cells()?.iter().map(|c| c.normal.clone()).collect())
    }
}

pub fn tangent_cone(set: &PolyUnion, x: &DVector<f64>) -> Result<Cone> {
    LocalArrangement::at(set, x)?.tangent_cone()
}

pub fn frechet_normal_cone(set: &PolyUnion, x: &DVector<f64>) -> Result<Cone> {
    LocalArrangement::at(set, x)?.frechet_normal_cone()
}

pub fn limiting_normal_cone(set: &PolyUnion, x: &DVector<f64>) -> Result<Cone> {
    LocalArrangement::at(set, x)?.limiting_normal_cone()
}

/// Directional limiting normal cone at `x` in direction `dir`. Empty when `x` is
/// outside the set or `dir` is not tangent; `dir = 0` gives the limiting normal cone.
pub fn dir_limiting_normal_cone(set: &PolyUnion, x: &DVector<f64>, dir: &DVector<f64>) -> Result<Cone> {
    LocalArrangement::at(set, x)?.directional_normal_cone(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyhedral::ConvexPoly;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn angle() -> PolyUnion {
        PolyUnion::single(ConvexPoly::cone_at(&[0.0, 0.0], vec![vec![-1.0, 1.0], vec![-1.0, -1.0]], vec![]).unwrap())
    }

    fn corner() -> PolyUnion {
        PolyUnion::new(
            2,
            vec![
                ConvexPoly::cone_at(&[0.0, 0.0], vec![vec![-1.0, 0.0]], vec![vec![0.0, 1.0]]).unwrap(),
                ConvexPoly::cone_at(&[0.0, 0.0], vec![vec![0.0, -1.0]], vec![vec![1.0, 0.0]]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn cell_counts() {
        let a = LocalArrangement::at(&angle(), &v(&[0.0, 0.0])).unwrap();
        assert_eq!(a.cells().unwrap().len(), 4);
        let k = LocalArrangement::at(&corner(), &v(&[0.0, 0.0])).unwrap();
        assert_eq!(k.cells().unwrap().len(), 3);
    }

    #[test]
    fn tangent_cones() {
        let t = tangent_cone(&angle(), &v(&[1.0, 1.0])).unwrap();
        let half = Cone::convex(ConvexCone::new(2, vec![v(&[-1.0, 1.0])], vec![]).unwrap());
        assert!(t.same_set(&half, 1e-9).unwrap());
        let tk = tangent_cone(&corner(), &v(&[2.0, 0.0])).unwrap();
        let line = Cone::convex(ConvexCone::new(2, vec![], vec![v(&[0.0, 1.0])]).unwrap());
        assert!(tk.same_set(&line, 1e-9).unwrap());
        assert!(tangent_cone(&angle(), &v(&[-1.0, 0.0])).unwrap().is_empty());
    }

    #[test]
    fn directional_normals_of_corner() {
        let k = corner();
        let o = v(&[0.0, 0.0]);
        let at_zero = dir_limiting_normal_cone(&k, &o, &v(&[0.0, 0.0])).unwrap();
        assert!(at_zero.contains(&v(&[-1.0, -1.0]), 1e-9));
        assert!(at_zero.contains(&v(&[0.0, 5.0]), 1e-9));
        assert!(at_zero.contains(&v(&[-3.0, 0.0]), 1e-9));
        assert!(!at_zero.contains(&v(&[1.0, 1.0]), 1e-9));
        let along = dir_limiting_normal_cone(&k, &o, &v(&[1.0, 0.0])).unwrap();
        assert!(along.contains(&v(&[0.0, -2.0]), 1e-9));
        assert!(!along.contains(&v(&[-1.0, 0.0]), 1e-9));
        assert!(dir_limiting_normal_cone(&k, &o, &v(&[1.0, 1.0])).unwrap().is_empty());
    }

    #[test]
    fn frechet_normal_of_angle() {
        let n = frechet_normal_cone(&angle(), &v(&[0.0, 0.0])).unwrap();
        assert!(n.contains(&v(&[-1.0, 0.5]), 1e-9));
        assert!(!n.contains(&v(&[-1.0, 1.5]), 1e-9));
        assert!(frechet_normal_cone(&angle(), &v(&[-1.0, 0.0])).unwrap().is_empty());
    }

    #[test]
    fn cells_are_orthogonal_to_their_normals() {
        for set in [angle(), corner()] {
            let a = LocalArrangement::at(&set, &v(&[0.0, 0.0])).unwrap();
            for c in a.cells().unwrap() {
                assert!(c.closure.orthogonal_to(&c.normal, 1e-9).unwrap());
            }
        }
    }

    #[test]
    fn hyperplane_cap() {
        let rows: Vec<Vec<f64>> = (0..13)
            .map(|k| {
                let t = k as f64 * 0.1;
                vec![t.cos(), t.sin(), 1.0]
            })
            .collect();
        let set = PolyUnion::single(ConvexPoly::cone_at(&[0.0, 0.0, 0.0], rows, vec![]).unwrap());
        let a = LocalArrangement::at(&set, &v(&[0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(a.cells(), Err(SubradError::HyperplaneCap { .. })));
    }
}
