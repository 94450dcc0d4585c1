//! Constraint systems `x ∈ D, g(x) ∈ K` and their derivative objects at a reference point.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SubradError};
use crate::norms::{norm, NormSpec};
use crate::polyhedral::{Cone, ConvexCone, LocalArrangement, PolyUnion, MEMBER_TOL};

/// First-order data of `g` at `x̄`: `g(x̄)` and the Jacobian `G`. When `affine`
/// is set, `g(x) = g(x̄) + G (x - x̄)` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalMap {
    value: DVector<f64>,
    jacobian: DMatrix<f64>,
    affine: bool,
}

impl LocalMap {
    pub fn new(value: DVector<f64>, jacobian: DMatrix<f64>, affine: bool) -> Result<Self> {
        if jacobian.nrows() != value.len() {
            return Err(SubradError::DimensionMismatch { expected: value.len(), got: jacobian.nrows() });
        }
        Ok(LocalMap { value, jacobian, affine })
    }

    pub fn affine(value: DVector<f64>, jacobian: DMatrix<f64>) -> Result<Self> {
        Self::new(value, jacobian, true)
    }

    pub fn value(&self) -> &DVector<f64> {
        &self.value
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    pub fn is_affine(&self) -> bool {
        self.affine
    }

    pub fn evaluate(&self, x: &DVector<f64>, xbar: &DVector<f64>) -> Result<DVector<f64>> {
        if !self.affine {
            return Err(SubradError::NotAffine);
        }
        Ok(&self.value + &self.jacobian * (x - xbar))
    }
}

/// The set `D ∩ g⁻¹(K)` near `x̄`, with `x̄ ∈ D` and `g(x̄) ∈ K`.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    d: PolyUnion,
    k: PolyUnion,
    g: LocalMap,
    xbar: DVector<f64>,
    norm: NormSpec,
    d_local: Arc<OnceLock<std::result::Result<LocalArrangement, SubradError>>>,
    k_local: Arc<OnceLock<std::result::Result<LocalArrangement, SubradError>>>,
}

/// One pair of local sign cells: a cell of `D` at `x̄` and a cell of `K` at `g(x̄)`.
#[derive(Clone, Debug)]
pub struct Piece {
    pub d_index: usize,
    pub k_index: usize,
    pub d_signs: Vec<i8>,
    pub k_signs: Vec<i8>,
    pub d_closure: ConvexCone,
    pub d_normal: ConvexCone,
    pub k_closure: ConvexCone,
    pub k_normal: ConvexCone,
}

/// A translated cone `offset + base`.
#[derive(Clone, Debug)]
pub struct AffineCone {
    pub base: Cone,
    pub offset: DVector<f64>,
}

impl AffineCone {
    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.base.contains(&(x - &self.offset), tol)
    }
}

impl ConstraintSystem {
    pub fn new(d: PolyUnion, k: PolyUnion, g: LocalMap, xbar: DVector<f64>, norm: NormSpec) -> Result<Self> {
        let n = d.dim();
        let m = k.dim();
        if xbar.len() != n {
            return Err(SubradError::DimensionMismatch { expected: n, got: xbar.len() });
        }
        if g.jacobian.ncols() != n {
            return Err(SubradError::DimensionMismatch { expected: n, got: g.jacobian.ncols() });
        }
        if g.value.len() != m {
            return Err(SubradError::DimensionMismatch { expected: m, got: g.value.len() });
        }
        if !d.contains(&xbar, MEMBER_TOL) {
            return Err(SubradError::Infeasible("reference point is not in D".into()));
        }
        if !k.contains(&g.value, MEMBER_TOL) {
            return Err(SubradError::Infeasible("g(x̄) is not in K".into()));
        }
        Ok(ConstraintSystem {
            d,
            k,
            g,
            xbar,
            norm,
            d_local: Arc::new(OnceLock::new()),
            k_local: Arc::new(OnceLock::new()),
        })
    }

    pub fn n(&self) -> usize {
        self.d.dim()
    }

    pub fn m(&self) -> usize {
        self.k.dim()
    }

    pub fn norm(&self) -> NormSpec {
        self.norm
    }

    pub fn d(&self) -> &PolyUnion {
        &self.d
    }

    pub fn k(&self) -> &PolyUnion {
        &self.k
    }

    pub fn map(&self) -> &LocalMap {
        &self.g
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.g.jacobian
    }

    pub fn g0(&self) -> &DVector<f64> {
        &self.g.value
    }

    pub fn xbar(&self) -> &DVector<f64> {
        &self.xbar
    }

    pub fn with_norm(&self, norm: NormSpec) -> Self {
        let mut s = self.clone();
        s.norm = norm;
        s
    }

    /// Same sets, same `g(x̄)`, Jacobian replaced.
    pub fn with_jacobian(&self, jacobian: DMatrix<f64>) -> Result<Self> {
        let g = LocalMap::new(self.g.value.clone(), jacobian, self.g.affine)?;
        let mut s = ConstraintSystem::new(self.d.clone(), self.k.clone(), g, self.xbar.clone(), self.norm)?;
        s.d_local = self.d_local.clone();
        s.k_local = self.k_local.clone();
        Ok(s)
    }

    pub fn d_local(&self) -> Result<&LocalArrangement> {
        self.d_local
            .get_or_init(|| LocalArrangement::at(&self.d, &self.xbar))
            .as_ref()
            .map_err(|e| e.clone())
    }

    pub fn k_local(&self) -> Result<&LocalArrangement> {
        self.k_local
            .get_or_init(|| LocalArrangement::at(&self.k, &self.g.value))
            .as_ref()
            .map_err(|e| e.clone())
    }

    fn check_len(&self, x: &DVector<f64>, expected: usize) -> Result<()> {
        if x.len() != expected {
            return Err(SubradError::DimensionMismatch { expected, got: x.len() });
        }
        Ok(())
    }

    /// `d(g(x), K)` for `x ∈ D`, `+∞` outside `D`. Needs an affine map.
    pub fn residual(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_len(x, self.n())?;
        if !self.d.contains(x, MEMBER_TOL) {
            return Ok(f64::INFINITY);
        }
        let gx = self.g.evaluate(x, &self.xbar)?;
        self.k.distance(&gx, self.norm)
    }

    /// `D ∩ g⁻¹(K)` as a union of polyhedra. Needs an affine map.
    pub fn solution_set(&self) -> Result<PolyUnion> {
        if !self.g.affine {
            return Err(SubradError::NotAffine);
        }
        let shift = &self.g.value - &self.g.jacobian * &self.xbar;
        let mut pieces = Vec::new();
        for dp in self.d.pieces() {
            for kp in self.k.pieces() {
                pieces.push(dp.intersect(&kp.preimage(&self.g.jacobian, &shift)?)?);
            }
        }
        PolyUnion::new(self.n(), pieces)
    }

    /// Whether `v ∈ DF(x̄|0)(u)`, i.e. `u ∈ T_D(x̄)` and `v + G u ∈ T_K(g(x̄))`.
    pub fn graphical_derivative_contains(&self, u: &DVector<f64>, v: &DVector<f64>, tol: f64) -> Result<bool> {
        self.check_len(u, self.n())?;
        self.check_len(v, self.m())?;
        let w = v + self.jacobian() * u;
        Ok(self.d_local()?.tangent_cone()?.contains(u, tol) && self.k_local()?.tangent_cone()?.contains(&w, tol))
    }

    /// Directional limiting coderivative `D*F((x̄,0);(u,v))(v*)` as a translated cone.
    pub fn dir_coderivative(&self, u: &DVector<f64>, v: &DVector<f64>, vstar: &DVector<f64>) -> Result<AffineCone> {
        self.check_len(u, self.n())?;
        self.check_len(v, self.m())?;
        self.check_len(vstar, self.m())?;
        let w = v + self.jacobian() * u;
        let nk = self.k_local()?.directional_normal_cone(&w)?;
        let offset = -(self.jacobian().transpose() * vstar);
        if !nk.contains(&-vstar, MEMBER_TOL) {
            return Ok(AffineCone { base: Cone::empty(self.n()), offset });
        }
        Ok(AffineCone { base: self.d_local()?.directional_normal_cone(u)?, offset })
    }

    /// Whether `(u, v*, u*, v)` lies in the primal-dual derivative: `v ∈ DF(u)` and
    /// `u* ∈ D*F((x̄,0);(u,v))(v*)`.
    pub fn pdd_contains(
        &self,
        u: &DVector<f64>,
        vstar: &DVector<f64>,
        ustar: &DVector<f64>,
        v: &DVector<f64>,
        tol: f64,
    ) -> Result<bool> {
        self.check_len(ustar, self.n())?;
        if !self.graphical_derivative_contains(u, v, tol)? {
            return Ok(false);
        }
        let w = v + self.jacobian() * u;
        if !self.k_local()?.directional_normal_cone(&w)?.contains(&-vstar, tol) {
            return Ok(false);
        }
        let shifted = ustar + self.jacobian().transpose() * vstar;
        Ok(self.d_local()?.directional_normal_cone(u)?.contains(&shifted, tol))
    }

    /// Whether `u* ∈ D*F(x̄|0)(v*)` for the (undirected) limiting coderivative.
    pub fn limiting_coderivative_contains(&self, vstar: &DVector<f64>, ustar: &DVector<f64>, tol: f64) -> Result<bool> {
        self.check_len(vstar, self.m())?;
        self.check_len(ustar, self.n())?;
        if !self.k_local()?.limiting_normal_cone()?.contains(&-vstar, tol) {
            return Ok(false);
        }
        let shifted = ustar + self.jacobian().transpose() * vstar;
        Ok(self.d_local()?.limiting_normal_cone()?.contains(&shifted, tol))
    }

    /// All pairs (cell of `D` at `x̄`, cell of `K` at `g(x̄)`).
    pub fn pieces(&self) -> Result<Vec<Piece>> {
        let dc = self.d_local()?.cells()?;
        let kc = self.k_local()?.cells()?;
        let mut out = Vec::with_capacity(dc.len() * kc.len());
        for (i, a) in dc.iter().enumerate() {
            for (j, b) in kc.iter().enumerate() {
                out.push(Piece {
                    d_index: i,
                    k_index: j,
                    d_signs: a.signs.clone(),
                    k_signs: b.signs.clone(),
                    d_closure: a.closure.clone(),
                    d_normal: a.normal.clone(),
                    k_closure: b.closure.clone(),
                    k_normal: b.normal.clone(),
                });
            }
        }
        Ok(out)
    }
}

/// A feasibility problem near a base point whose residual and distance to the
/// solution set can be evaluated.
pub trait FeasibilityModel: Sync {
    fn dim(&self) -> usize;
    fn base_point(&self) -> &DVector<f64>;
    fn norm(&self) -> NormSpec;
    fn residual(&self, x: &DVector<f64>) -> Result<f64>;
    fn distance_to_solutions(&self, x: &DVector<f64>) -> Result<f64>;
}

impl FeasibilityModel for ConstraintSystem {
    fn dim(&self) -> usize {
        self.n()
    }

    fn base_point(&self) -> &DVector<f64> {
        &self.xbar
    }

    fn norm(&self) -> NormSpec {
        self.norm
    }

    fn residual(&self, x: &DVector<f64>) -> Result<f64> {
        ConstraintSystem::residual(self, x)
    }

    fn distance_to_solutions(&self, x: &DVector<f64>) -> Result<f64> {
        self.solution_set()?.distance(x, self.norm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubregEstimate {
    pub radius: f64,
    pub samples: usize,
    /// Largest sampled `d(x, S) / residual(x)`.
    pub ratio: f64,
    pub argmax: Option<Vec<f64>>,
}

/// Seeded offsets `ξ` in the closed unit ball of ‖·‖_p. The same seed gives the
/// same offsets for every radius.
pub fn ball_offsets(dim: usize, p: NormSpec, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let xi = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0));
        if norm(&xi, p) <= 1.0 {
            out.push(xi);
        }
    }
    out
}

/// Sampled sup of `d(x, S)/residual(x)` over `x = x̄ + r ξ`.
pub fn subreg_ratio(model: &dyn FeasibilityModel, radius: f64, n_samples: usize, seed: u64) -> Result<SubregEstimate> {
    if !(radius > 0.0) || n_samples == 0 {
        return Err(SubradError::Precondition("radius must be positive and samples nonzero".into()));
    }
    let xbar = model.base_point().clone();
    let mut ratio: f64 = 0.0;
    let mut argmax = None;
    for xi in ball_offsets(model.dim(), model.norm(), n_samples, seed) {
        let x = &xbar + xi * radius;
        let res = model.residual(&x)?;
        if res.is_infinite() {
            continue;
        }
        let dist = model.distance_to_solutions(&x)?;
        if dist <= 0.0 {
            continue;
        }
        let r = if res > 0.0 { dist / res } else { f64::INFINITY };
        if r > ratio {
            ratio = r;
            argmax = Some(x.iter().copied().collect());
        }
    }
    Ok(SubregEstimate { radius, samples: n_samples, ratio, argmax })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyhedral::ConvexPoly;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    pub(crate) fn cone_example(p: NormSpec) -> ConstraintSystem {
        let d = PolyUnion::single(ConvexPoly::cone_at(&[0.0, 0.0], vec![vec![-1.0, 1.0], vec![-1.0, -1.0]], vec![]).unwrap());
        let k = PolyUnion::new(
            2,
            vec![
                ConvexPoly::cone_at(&[0.0, 0.0], vec![vec![-1.0, 0.0]], vec![vec![0.0, 1.0]]).unwrap(),
                ConvexPoly::cone_at(&[0.0, 0.0], vec![vec![0.0, -1.0]], vec![vec![1.0, 0.0]]).unwrap(),
            ],
        )
        .unwrap();
        let g = LocalMap::affine(v(&[0.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        ConstraintSystem::new(d, k, g, v(&[0.0, 0.0]), p).unwrap()
    }

    #[test]
    fn piece_count_of_cone_example() {
        let s = cone_example(NormSpec::L2);
        assert_eq!(s.pieces().unwrap().len(), 12);
    }

    #[test]
    fn coderivative_of_cone_example() {
        let s = cone_example(NormSpec::L2);
        let c = 0.5f64.sqrt();
        let u = v(&[c, c]);
        let vv = v(&[0.0, -c]);
        let vstar = v(&[0.0, 1.0]);
        let set = s.dir_coderivative(&u, &vv, &vstar).unwrap();
        assert!(set.contains(&v(&[-0.5, -0.5]), 1e-9));
        assert!(set.contains(&v(&[0.0, -1.0]), 1e-9));
        assert!(!set.contains(&v(&[0.5, -1.5]), 1e-9));
        assert!(s.pdd_contains(&u, &vstar, &v(&[-0.5, -0.5]), &vv, 1e-9).unwrap());
        assert!(s.dir_coderivative(&u, &vv, &v(&[1.0, 0.0])).unwrap().is_empty());
    }

    #[test]
    fn graphical_derivative_of_cone_example() {
        let s = cone_example(NormSpec::L2);
        assert!(s.graphical_derivative_contains(&v(&[1.0, 0.5]), &v(&[0.0, -0.5]), 1e-9).unwrap());
        assert!(!s.graphical_derivative_contains(&v(&[1.0, 0.5]), &v(&[0.0, 0.0]), 1e-9).unwrap());
        assert!(!s.graphical_derivative_contains(&v(&[-1.0, 0.0]), &v(&[1.0, 0.0]), 1e-9).unwrap());
    }

    #[test]
    fn rejects_infeasible_reference() {
        let s = cone_example(NormSpec::L2);
        let err = ConstraintSystem::new(s.d().clone(), s.k().clone(), s.map().clone(), v(&[-1.0, 0.0]), NormSpec::L2);
        assert!(matches!(err, Err(SubradError::Infeasible(_))));
    }

    #[test]
    fn residual_and_solution_set() {
        let s = cone_example(NormSpec::L2);
        let x = v(&[1.0, 0.5]);
        assert!((s.residual(&x).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(s.residual(&v(&[-1.0, 0.0])).unwrap(), f64::INFINITY);
        let sol = s.solution_set().unwrap();
        assert!(sol.contains(&v(&[2.0, 0.0]), 1e-12));
        assert!(!sol.contains(&v(&[0.0, 2.0]), 1e-12));
        assert!((sol.distance(&x, NormSpec::L2).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn subreg_ratio_is_scale_free_for_cones() {
        let s = cone_example(NormSpec::L2);
        let a = subreg_ratio(&s, 0.1, 200, 7).unwrap();
        let b = subreg_ratio(&s, 0.001, 200, 7).unwrap();
        assert!(a.ratio > 0.0 && a.ratio.is_finite());
        assert!((a.ratio - b.ratio).abs() < 1e-9 * a.ratio);
    }
}
