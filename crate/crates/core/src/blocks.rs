//! `min { d_p(M x, T) : x ∈ C, ‖x‖_p = 1 }` for polyhedral convex cones `C`, `T`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SubradError};
use crate::linalg::sorted_svd;
use crate::lp::{Cmp, Lp};
use crate::norms::{norm, sphere_points, NormSpec};
use crate::polyhedral::ConvexCone;

const MEMBER: f64 = 1e-9;
const MAX_L1_FACES: usize = 1 << 12;

#[derive(Clone, Debug)]
pub(crate) struct BlockPoint {
    pub value: f64,
    pub x: DVector<f64>,
    /// Nearest point of `T` to `M x`.
    pub y: DVector<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct BlockResult {
    /// Candidates sorted by value; the first is the minimiser.
    pub points: Vec<BlockPoint>,
    pub method: &'static str,
}

impl BlockResult {
    pub fn best(&self) -> &BlockPoint {
        &self.points[0]
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GridConfig {
    pub resolution: usize,
    pub refine_tol: f64,
    pub keep: usize,
}

pub(crate) fn solve_block(
    dom: &ConvexCone,
    map: &DMatrix<f64>,
    target: &ConvexCone,
    p: NormSpec,
    cfg: &GridConfig,
) -> Result<Option<BlockResult>> {
    if dom.is_zero()? {
        return Ok(None);
    }
    let mut res = match p {
        NormSpec::L1 | NormSpec::LInf => lp_faces(dom, map, target, p)?,
        NormSpec::L2 => {
            if dom.is_subspace()? && target.is_subspace()? {
                Some(subspace_block(dom, map, target)?)
            } else {
                grid_block(dom, map, target, cfg)?
            }
        }
    };
    if let Some(r) = res.as_mut() {
        r.points.sort_by(|a, b| a.value.total_cmp(&b.value));
        r.points.truncate(cfg.keep.max(1));
    }
    Ok(res)
}

/// Exact minimisation over the faces of the ℓ1 or ℓ∞ unit sphere, one LP per face.
fn lp_faces(dom: &ConvexCone, map: &DMatrix<f64>, target: &ConvexCone, p: NormSpec) -> Result<Option<BlockResult>> {
    let k = dom.dim();
    let r = target.dim();
    let faces: Vec<Vec<f64>> = match p {
        NormSpec::LInf => (0..k)
            .flat_map(|i| [1.0, -1.0].map(|s| (0..k).map(|j| if i == j { s } else { 0.0 }).collect()))
            .collect(),
        _ => {
            if k > 12 || (1usize << k) > MAX_L1_FACES {
                return Err(SubradError::UnsupportedDimension { dim: k, what: "too many ℓ1 sphere faces" });
            }
            (0..1usize << k)
                .map(|mask| (0..k).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect())
                .collect()
        }
    };
    let mut points = Vec::new();
    for face in faces {
        let mut lp = Lp::minimize();
        let bound = if p == NormSpec::LInf { 1.0 } else { f64::INFINITY };
        let x: Vec<usize> = (0..k).map(|_| lp.var(0.0, -bound, bound)).collect();
        let y: Vec<usize> = (0..r).map(|_| lp.free_var(0.0)).collect();
        let t: Vec<usize> = if p == NormSpec::LInf {
            vec![lp.var(1.0, 0.0, f64::INFINITY); r]
        } else {
            (0..r).map(|_| lp.var(1.0, 0.0, f64::INFINITY)).collect()
        };
        if p == NormSpec::LInf {
            let i = face.iter().position(|&s| s != 0.0).unwrap_or(0);
            lp.constraint(&[(x[i], face[i])], Cmp::Eq, 1.0);
        } else {
            let terms: Vec<(usize, f64)> = (0..k).map(|j| (x[j], face[j])).collect();
            lp.constraint(&terms, Cmp::Eq, 1.0);
            for j in 0..k {
                lp.constraint(&[(x[j], face[j])], Cmp::Ge, 0.0);
            }
        }
        for row in dom.ineq_rows() {
            let terms: Vec<(usize, f64)> = (0..k).map(|j| (x[j], row[j])).collect();
            lp.constraint(&terms, Cmp::Le, 0.0);
        }
        for row in dom.eq_rows() {
            let terms: Vec<(usize, f64)> = (0..k).map(|j| (x[j], row[j])).collect();
            lp.constraint(&terms, Cmp::Eq, 0.0);
        }
        for row in target.ineq_rows() {
            let terms: Vec<(usize, f64)> = (0..r).map(|j| (y[j], row[j])).collect();
            lp.constraint(&terms, Cmp::Le, 0.0);
        }
        for row in target.eq_rows() {
            let terms: Vec<(usize, f64)> = (0..r).map(|j| (y[j], row[j])).collect();
            lp.constraint(&terms, Cmp::Eq, 0.0);
        }
        // -t ≤ y - M x ≤ t
        for i in 0..r {
            let mut terms: Vec<(usize, f64)> = (0..k).map(|j| (x[j], -map[(i, j)])).collect();
            terms.push((y[i], 1.0));
            let mut up = terms.clone();
            up.push((t[i], -1.0));
            lp.constraint(&up, Cmp::Le, 0.0);
            terms.push((t[i], 1.0));
            lp.constraint(&terms, Cmp::Ge, 0.0);
        }
        if let Some((_, sol)) = lp.solve()?.optimal() {
            let xv = DVector::from_fn(k, |i, _| sol[x[i]]);
            let yv = DVector::from_fn(r, |i, _| sol[y[i]]);
            let xv = &xv / norm(&xv, p);
            let value = norm(&(&yv - map * &xv), p);
            points.push(BlockPoint { value, x: xv, y: yv });
        }
    }
    if points.is_empty() {
        return Ok(None);
    }
    Ok(Some(BlockResult { points, method: "lp" }))
}

/// Both cones are subspaces: the answer is the smallest singular value of `P_{T⊥} M Q`.
fn subspace_block(dom: &ConvexCone, map: &DMatrix<f64>, target: &ConvexCone) -> Result<BlockResult> {
    let q = dom.span_basis()?;
    let t = target.span_basis()?;
    let r = map.nrows();
    let proj_perp = DMatrix::identity(r, r) - &t * t.transpose();
    let a = &proj_perp * map * &q;
    let s = q.ncols();
    let svd = sorted_svd(&a);
    let value = svd.values.get(s - 1).copied().unwrap_or(0.0).max(0.0);
    let coeff = svd.right.column(s - 1).into_owned();
    let mut points = Vec::new();
    for sign in [1.0, -1.0] {
        let x = (&q * &coeff * sign).normalize();
        let mx = map * &x;
        let y = &t * (t.transpose() * &mx);
        points.push(BlockPoint { value, x, y });
    }
    Ok(BlockResult { points, method: "svd" })
}

/// Unit ℓ2 sample points of `C` together with boundary rays and face arcs.
pub(crate) fn cone_sphere_samples(dom: &ConvexCone, resolution: usize) -> Result<Vec<DVector<f64>>> {
    let q = dom.span_basis()?;
    let s = q.ncols();
    if s == 0 {
        return Ok(vec![]);
    }
    if s > 3 {
        return Err(SubradError::UnsupportedDimension { dim: s, what: "sphere grids over cones need span dimension ≤ 3" });
    }
    let mut out: Vec<DVector<f64>> = Vec::new();
    for y in sphere_points(NormSpec::L2, s, resolution)? {
        let x = &q * y;
        if dom.contains(&x, MEMBER) {
            out.push(x.normalize());
        }
    }
    let g = dom.generators()?;
    out.extend(g.rays.iter().cloned());
    if s == 3 {
        for row in dom.ineq_rows() {
            let face = ConvexCone::new(dom.dim(), dom.ineq_rows().to_vec(), {
                let mut e = dom.eq_rows().to_vec();
                e.push(row.clone());
                e
            })?;
            let fq = face.span_basis()?;
            if fq.ncols() == 2 {
                for y in sphere_points(NormSpec::L2, 2, resolution)? {
                    let x = &fq * y;
                    if face.contains(&x, MEMBER) {
                        out.push(x.normalize());
                    }
                }
            }
        }
    }
    Ok(out)
}

fn grid_block(dom: &ConvexCone, map: &DMatrix<f64>, target: &ConvexCone, cfg: &GridConfig) -> Result<Option<BlockResult>> {
    let samples = cone_sphere_samples(dom, cfg.resolution)?;
    if samples.is_empty() {
        return Ok(None);
    }
    let eval = |x: &DVector<f64>| -> Result<BlockPoint> {
        let mx = map * x;
        let (value, y) = target.nearest(&mx, NormSpec::L2)?;
        Ok(BlockPoint { value, x: x.clone(), y })
    };
    let mut pts = samples.iter().map(&eval).collect::<Result<Vec<_>>>()?;
    pts.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut seeds: Vec<BlockPoint> = Vec::new();
    for pt in pts {
        if seeds.len() >= cfg.keep.max(1) {
            break;
        }
        if seeds.iter().all(|s| (&s.x - &pt.x).norm() > 1e-6) {
            seeds.push(pt);
        }
    }
    let step0 = 4.0 * std::f64::consts::PI / cfg.resolution as f64;
    let mut points = Vec::new();
    for s in seeds {
        let x = refine_on_cone(&s.x, dom, step0, cfg.refine_tol, &|x| eval(x).map(|b| b.value))?;
        points.push(eval(&x)?);
    }
    Ok(Some(BlockResult { points, method: "grid" }))
}

/// Pattern search on `C ∩ S²`: moves are projected back onto the cone and renormalised.
/// Stops once the step drops below `tol²`.
pub(crate) fn refine_on_cone(
    x0: &DVector<f64>,
    dom: &ConvexCone,
    step0: f64,
    tol: f64,
    f: &dyn Fn(&DVector<f64>) -> Result<f64>,
) -> Result<DVector<f64>> {
    let q = dom.span_basis()?;
    let mut x = x0.clone();
    let mut fx = f(&x)?;
    let mut step = step0;
    let stop = (tol * tol).max(1e-14);
    let mut iters = 0;
    while step > stop && iters < 10_000 {
        iters += 1;
        let mut improved = false;
        for j in 0..q.ncols() {
            for s in [1.0, -1.0] {
                let trial = &x + q.column(j) * (s * step);
                let (_, proj) = dom.nearest(&trial, NormSpec::L2)?;
                let nrm = proj.norm();
                if nrm < 1e-12 {
                    continue;
                }
                let cand = proj / nrm;
                let fc = f(&cand)?;
                if fc < fx - 1e-16 {
                    x = cand;
                    fx = fc;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn cfg() -> GridConfig {
        GridConfig { resolution: 720, refine_tol: 1e-4, keep: 4 }
    }

    #[test]
    fn subspace_path_gives_smallest_singular_value() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let r = solve_block(&ConvexCone::whole(2), &a, &ConvexCone::zero(2), NormSpec::L2, &cfg()).unwrap().unwrap();
        assert!((r.best().value - 0.5).abs() < 1e-14);
        assert_eq!(r.method, "svd");
    }

    #[test]
    fn lp_faces_match_hand_values() {
        let ray = ConvexCone::from_generators(2, vec![v(&[1.0, 1.0])], vec![]).unwrap();
        let target = ConvexCone::from_generators(2, vec![v(&[1.0, 0.0])], vec![]).unwrap();
        let id = DMatrix::identity(2, 2);
        let r1 = solve_block(&ray, &id, &target, NormSpec::L1, &cfg()).unwrap().unwrap();
        assert!((r1.best().value - 0.5).abs() < 1e-9);
        let ri = solve_block(&ray, &id, &target, NormSpec::LInf, &cfg()).unwrap().unwrap();
        assert!((ri.best().value - 1.0).abs() < 1e-9);
        let r2 = solve_block(&ray, &id, &target, NormSpec::L2, &cfg()).unwrap().unwrap();
        assert!((r2.best().value - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn grid_on_sector() {
        // angle {|x2| ≤ x1} mapped by the identity onto the ray (0,1): minimum at the ray (1,1)/√2
        let dom = ConvexCone::new(2, vec![v(&[-1.0, 1.0]), v(&[-1.0, -1.0])], vec![]).unwrap();
        let target = ConvexCone::from_generators(2, vec![v(&[0.0, 1.0])], vec![]).unwrap();
        let id = DMatrix::identity(2, 2);
        let r = solve_block(&dom, &id, &target, NormSpec::L2, &cfg()).unwrap().unwrap();
        assert!((r.best().value - 0.5f64.sqrt()).abs() < 1e-12);
        let l1 = solve_block(&dom, &id, &target, NormSpec::L1, &cfg()).unwrap().unwrap();
        assert!((l1.best().value - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_domain_has_no_points() {
        let id = DMatrix::identity(2, 2);
        assert!(solve_block(&ConvexCone::zero(2), &id, &ConvexCone::whole(2), NormSpec::L2, &cfg()).unwrap().is_none());
    }

    #[test]
    fn three_dim_samples_cover_faces() {
        let rows = vec![v(&[-1.0, 0.0, 0.0]), v(&[0.0, -1.0, 0.0]), v(&[0.0, 0.0, -1.0])];
        let orthant = ConvexCone::new(3, rows, vec![]).unwrap();
        let pts = cone_sphere_samples(&orthant, 40).unwrap();
        assert!(pts.iter().all(|p| orthant.contains(p, 1e-9)));
        assert!(pts.iter().any(|p| p[2].abs() < 1e-12 && p[0] > 0.1 && p[1] > 0.1));
    }
}
