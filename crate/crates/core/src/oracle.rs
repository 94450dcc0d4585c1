//! Brute-force sampling of the regularity constants straight from the definitions of the
//! directional normal cones. Shares no code with the cell/piece enumeration of the solver.

use std::collections::HashMap;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SubradError};
use crate::norms::{norm, operator_norm, sphere_points, sphere_spacing, NormSpec};
use crate::polyhedral::{distance_to_ray, Cone, ConvexCone, ConvexPoly, PolyUnion};
use crate::serde_ext::ext_f64;
use crate::system::ConstraintSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub resolution: usize,
    /// Size of the perturbations used to reach neighbouring regions of a tangent cone.
    pub nudge: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { resolution: 720, nudge: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    #[serde(with = "ext_f64")]
    pub rg: f64,
    #[serde(with = "ext_f64")]
    pub rg_over: f64,
    #[serde(with = "ext_f64")]
    pub mr_bound: f64,
    #[serde(with = "ext_f64")]
    pub ssr_bound: f64,
    /// Sampling error scale `(‖∇g(x̄)‖ + 1) · spacing`.
    pub grid_error: f64,
    pub resolution: usize,
    pub pairs: usize,
}

const ACTIVE_TOL: f64 = 1e-7;

/// Tangent cone of a union at `x`, as a union of polyhedral cones through the origin.
fn tangent_union(set: &PolyUnion, x: &DVector<f64>) -> Result<PolyUnion> {
    let mut pieces = Vec::new();
    for piece in set.pieces() {
        if !piece.contains(x, 1e-9) {
            continue;
        }
        let (rows, _) = piece.ineq();
        let act = piece.active_rows(x, 1e-9);
        let a: Vec<Vec<f64>> = act.iter().map(|&i| rows[i].clone()).collect();
        let e = piece.eq().0.to_vec();
        pieces.push(ConvexPoly::cone_at(&vec![0.0; set.dim()], a, e)?);
    }
    PolyUnion::new(set.dim(), pieces)
}

type Key = Vec<(usize, Vec<usize>)>;

fn region_key(t: &PolyUnion, y: &DVector<f64>) -> Key {
    t.pieces()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.contains(y, ACTIVE_TOL))
        .map(|(i, p)| (i, p.active_rows(y, ACTIVE_TOL)))
        .collect()
}

/// Fréchet normal cone of the conic union `t` at a point with the given key: the intersection
/// over the pieces containing it of the cones spanned by their active rows.
fn frechet_from_key(t: &PolyUnion, key: &Key) -> Result<ConvexCone> {
    let dim = t.dim();
    let mut acc = ConvexCone::whole(dim);
    for (i, rows) in key {
        let piece = &t.pieces()[*i];
        let rays = rows.iter().map(|&r| DVector::from_row_slice(&piece.ineq().0[r])).collect();
        let lines = piece.eq().0.iter().map(|r| DVector::from_row_slice(r)).collect();
        acc = acc.intersect(&ConvexCone::from_generators(dim, rays, lines)?)?;
    }
    Ok(acc)
}

/// Keys of all regions of `t` met arbitrarily close to `y` (`y` itself and small nudges).
fn nearby_keys(t: &PolyUnion, y: &DVector<f64>, nudges: &[DVector<f64>], delta: f64) -> Vec<Key> {
    let mut keys: Vec<Key> = Vec::new();
    let scale = y.amax().max(1.0);
    for cand in std::iter::once(y.clone()).chain(nudges.iter().map(|e| y + e * (delta * scale))) {
        if !t.contains(&cand, 1e-12) {
            continue;
        }
        let k = region_key(t, &cand);
        if !k.is_empty() && !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.sort();
    keys
}

/// Unit directions of `t` near the sampled sphere, snapped onto `t` when within `spacing`.
fn directions_in(t: &PolyUnion, p: NormSpec, res: usize, spacing: f64) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::new();
    for s in sphere_points(p, t.dim(), res)? {
        let y = if t.contains(&s, 1e-12) {
            s
        } else {
            match t.nearest(&s, NormSpec::L2)? {
                (d, Some(y)) if d <= spacing && norm(&y, p) > 0.5 => {
                    let ny = norm(&y, p);
                    y / ny
                }
                _ => continue,
            }
        };
        out.push(y);
    }
    Ok(out)
}

struct Classes {
    keys: Vec<Vec<Key>>,
    cones: Vec<Cone>,
}

fn classify(t: &PolyUnion, dirs: &[DVector<f64>], nudges: &[DVector<f64>], delta: f64) -> Result<(Classes, Vec<usize>)> {
    let mut index: HashMap<Vec<Key>, usize> = HashMap::new();
    let mut classes = Classes { keys: vec![], cones: vec![] };
    let mut of = Vec::with_capacity(dirs.len());
    for y in dirs {
        let ks = nearby_keys(t, y, nudges, delta);
        let id = match index.get(&ks) {
            Some(&i) => i,
            None => {
                let mut cones = Vec::new();
                for k in &ks {
                    cones.push(frechet_from_key(t, k)?);
                }
                let i = classes.cones.len();
                classes.cones.push(Cone::union(t.dim(), cones)?);
                classes.keys.push(ks.clone());
                index.insert(ks, i);
                i
            }
        };
        of.push(id);
    }
    Ok((classes, of))
}

/// Sampled `rg`, `rg_over`, `mr_bound`, `ssr_bound` for systems with `n, m ≤ 3`.
pub fn brute_force_oracle(sys: &ConstraintSystem, cfg: &OracleConfig) -> Result<OracleReport> {
    let (n, m) = (sys.n(), sys.m());
    if n > 3 || m > 3 {
        return Err(SubradError::UnsupportedDimension { dim: n.max(m), what: "brute-force oracle" });
    }
    let p = sys.norm();
    let q = p.dual();
    let g = sys.jacobian();
    let res = cfg.resolution;
    let spacing = sphere_spacing(p, n, res)?.max(sphere_spacing(q, m, res)?).max(sphere_spacing(p, m, res)?);
    let grid_error = (operator_norm(g, p).max(operator_norm(g, q)) + 1.0) * spacing;

    let td = tangent_union(sys.d(), sys.xbar())?;
    let tk = tangent_union(sys.k(), sys.g0())?;
    let nudges_n = sphere_points(NormSpec::L2, n, 8)?;
    let nudges_m = sphere_points(NormSpec::L2, m, 8)?;

    // u: unit directions in T_D(x̄) with the classes of N̄_D(x̄; u)
    let us = directions_in(&td, p, res, spacing)?;
    let (d_classes, u_class) = classify(&td, &us, &nudges_n, cfg.nudge)?;

    // ŵ: directions in T_K(g0), plus ŵ = 0 carrying the whole limiting cone
    let mut ws = directions_in(&tk, p, res, spacing)?;
    let (mut k_classes, mut w_class) = classify(&tk, &ws, &nudges_m, cfg.nudge)?;
    {
        let zero = DVector::zeros(m);
        let mut cones: Vec<ConvexCone> = frechet_from_key(&tk, &region_key(&tk, &zero)).into_iter().collect();
        for c in &k_classes.cones {
            cones.extend(c.pieces().iter().cloned());
        }
        k_classes.cones.push(Cone::union(m, cones)?);
        k_classes.keys.push(vec![]);
        w_class.push(k_classes.cones.len() - 1);
        ws.push(zero);
    }

    let vstars = sphere_points(q, m, res)?;

    // admissible ŵ-classes for each v*: -v* within `spacing` of N̄_K(g0; ŵ)
    let admissible: Vec<Vec<usize>> = vstars
        .par_iter()
        .map(|vs| -> Result<Vec<usize>> {
            let neg = -vs;
            let mut ok = Vec::new();
            for (c, cone) in k_classes.cones.iter().enumerate() {
                if cone.distance(&neg, q)? <= spacing {
                    ok.push(c);
                }
            }
            Ok(ok)
        })
        .collect::<Result<_>>()?;

    // A[class][v*] = d_q(Gᵀv*, N̄_D(x̄; u))
    let a_tab: Vec<Vec<f64>> = d_classes
        .cones
        .par_iter()
        .map(|cone| vstars.iter().map(|vs| cone.distance(&(g.transpose() * vs), q)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;

    // ray[u][k-class] = min over ŵ in the class of d_p(Gu, ℝ₊ŵ)
    let nk = k_classes.cones.len();
    let ray_tab: Vec<Vec<f64>> = us
        .par_iter()
        .map(|u| {
            let gu = g * u;
            let mut row = vec![f64::INFINITY; nk];
            for (w, &c) in ws.iter().zip(&w_class) {
                let d = distance_to_ray(&gu, w, p);
                if d < row[c] {
                    row[c] = d;
                }
            }
            row
        })
        .collect();

    let mut rg = f64::INFINITY;
    let mut rg_over = f64::INFINITY;
    let mut mr = f64::INFINITY;
    let mut ssr = f64::INFINITY;
    for (ui, &dc) in u_class.iter().enumerate() {
        ssr = ssr.min(ray_tab[ui].iter().copied().fold(f64::INFINITY, f64::min));
        for (vi, adm) in admissible.iter().enumerate() {
            let b = adm.iter().map(|&c| ray_tab[ui][c]).fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                continue;
            }
            let a = a_tab[dc][vi];
            rg = rg.min(a.max(b));
            rg_over = rg_over.min(a + b);
        }
    }
    // undirected: any admissible v* against the limiting normal cone of D, which also
    // holds the Fréchet normal cone at x̄ itself
    let at_base = frechet_from_key(&td, &region_key(&td, &DVector::zeros(n)))?;
    for (vi, adm) in admissible.iter().enumerate() {
        if !adm.is_empty() {
            let gv = g.transpose() * &vstars[vi];
            mr = a_tab.iter().map(|row| row[vi]).fold(mr, f64::min).min(at_base.nearest(&gv, q)?.0);
        }
    }
    Ok(OracleReport {
        rg,
        rg_over,
        mr_bound: mr,
        ssr_bound: ssr,
        grid_error,
        resolution: res,
        pairs: us.len() * vstars.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn oracle_on_cone_example() {
        for (p, want) in [(NormSpec::L1, 0.5), (NormSpec::L2, 0.5f64.sqrt()), (NormSpec::LInf, 1.0)] {
            let r = brute_force_oracle(&fixtures::cone(p), &OracleConfig { resolution: 360, ..Default::default() }).unwrap();
            assert!((r.rg - want).abs() <= 2.0 * r.grid_error, "{p}: {} vs {want}", r.rg);
            assert_eq!(r.ssr_bound, 0.0);
        }
    }

    #[test]
    fn oracle_on_zero_map() {
        let r = brute_force_oracle(&fixtures::zero_map(NormSpec::L2), &OracleConfig::default()).unwrap();
        assert_eq!((r.rg, r.rg_over, r.mr_bound, r.ssr_bound), (0.0, 0.0, 0.0, 0.0));
    }
}
