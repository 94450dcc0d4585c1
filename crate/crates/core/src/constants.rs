//! Primal-dual constants of a constraint system and bounds for the subregularity radii.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{cone_sphere_samples, refine_on_cone, solve_block, BlockResult, GridConfig};
use crate::error::{Result, SubradError};
use crate::matrices::{frobenius_min_matrix, min_opnorm_matrix, rows_to_matrix, OpnormConfig, Witness};
use crate::norms::{norm, NormSpec};
use crate::polyhedral::ConvexCone;
use crate::serde_ext::ext_f64;
use crate::system::{ConstraintSystem, Piece};

const ORTHO_TOL: f64 = 1e-8;
const DAGGER_MAX_PAIRS: usize = 4_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Angular grid resolution for Euclidean searches.
    pub resolution: usize,
    pub refine_tol: f64,
    /// Number of near-optimal witnesses fed to the matrix search.
    pub pool: usize,
    pub seed: u64,
    /// Random restarts of the spectral-norm matrix search.
    pub starts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { resolution: 720, refine_tol: 1e-4, pool: 32, seed: 0, starts: 8 }
    }
}

impl SolverConfig {
    fn grid(&self) -> GridConfig {
        GridConfig { resolution: self.resolution, refine_tol: self.refine_tol, keep: 4 }
    }

    fn opnorm(&self) -> OpnormConfig {
        OpnormConfig { starts: self.starts, seed: self.seed, ..OpnormConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub norm: NormSpec,
    #[serde(with = "ext_f64")]
    pub rg: f64,
    #[serde(with = "ext_f64")]
    pub rg_over: f64,
    #[serde(with = "ext_f64")]
    pub rg_diamond: f64,
    #[serde(with = "ext_f64::option")]
    pub rg_dagger: Option<f64>,
    #[serde(with = "ext_f64")]
    pub rg_circ_lower: f64,
    #[serde(with = "ext_f64")]
    pub rg_circ_upper: f64,
    #[serde(with = "ext_f64")]
    pub mr_bound: f64,
    #[serde(with = "ext_f64")]
    pub ssr_bound: f64,
    /// Minimising tuple for `rg` with the best matrix found for it.
    pub witness: Option<Witness>,
    /// Minimising tuple for `rg†` with its Frobenius-minimal matrix.
    pub dagger_witness: Option<Witness>,
    pub pieces: usize,
    pub method: String,
    /// Whether cell normal cones were verified orthogonal to their cells, which makes
    /// the coupling constraint of `rg◇` automatic.
    pub coupling_automatic: bool,
}

/// Per-piece block minima.
#[derive(Clone, Debug)]
pub(crate) struct PieceBlocks {
    pub piece: Piece,
    /// `min d(G u, cl σ_K)` over unit `u ∈ cl σ_D`.
    pub primal: Option<BlockResult>,
    /// `min d(Gᵀ v*, N_D^σ)` over unit `v* ∈ -N_K^σ` (dual norm).
    pub dual: Option<BlockResult>,
}

impl PieceBlocks {
    fn a(&self) -> f64 {
        self.dual.as_ref().map_or(f64::INFINITY, |b| b.best().value)
    }

    fn b(&self) -> f64 {
        self.primal.as_ref().map_or(f64::INFINITY, |b| b.best().value)
    }
}

pub(crate) fn negated(c: &ConvexCone) -> Result<ConvexCone> {
    ConvexCone::new(c.dim(), c.ineq_rows().iter().map(|r| -r).collect(), c.eq_rows().to_vec())
}

pub(crate) fn piece_blocks(sys: &ConstraintSystem, cfg: &SolverConfig) -> Result<Vec<PieceBlocks>> {
    let pieces = sys.pieces()?;
    let g = sys.jacobian().clone();
    let gt = g.transpose();
    let p = sys.norm();
    let grid = cfg.grid();
    pieces
        .into_par_iter()
        .map(|piece| {
            let primal = solve_block(&piece.d_closure, &g, &piece.k_closure, p, &grid)?;
            let dom = negated(&piece.k_normal)?;
            let dual = solve_block(&dom, &gt, &piece.d_normal, p.dual(), &grid)?;
            Ok(PieceBlocks { piece, primal, dual })
        })
        .collect()
}

fn witness_from(sys: &ConstraintSystem, u: &DVector<f64>, y: &DVector<f64>, vstar: &DVector<f64>, n: &DVector<f64>) -> Witness {
    let g = sys.jacobian();
    let v = y - g * u;
    let ustar = n - g.transpose() * vstar;
    Witness::new(u.clone(), v, ustar, vstar.clone())
}

/// `rg`: min over pieces of `max(A, B)`.
pub fn compute_rg(sys: &ConstraintSystem, cfg: &SolverConfig) -> Result<f64> {
    let blocks = piece_blocks(sys, cfg)?;
    Ok(blocks.iter().map(|b| b.a().max(b.b())).fold(f64::INFINITY, f64::min))
}

/// Whether the reference point is critical: `rg` vanishes.
pub fn critical_zero(sys: &ConstraintSystem, cfg: &SolverConfig, tol: f64) -> Result<bool> {
    Ok(compute_rg(sys, cfg)? <= tol)
}

/// Lower bounds: `mr_bound` over all cell pairs for the dual block, `ssr_bound` for the primal block.
pub fn compute_mr_ssr_bounds(sys: &ConstraintSystem, cfg: &SolverConfig) -> Result<(f64, f64)> {
    let blocks = piece_blocks(sys, cfg)?;
    Ok(mr_ssr(&blocks))
}

fn mr_ssr(blocks: &[PieceBlocks]) -> (f64, f64) {
    let mr = blocks.iter().map(|b| b.a()).fold(f64::INFINITY, f64::min);
    let ssr = blocks.iter().map(|b| b.b()).fold(f64::INFINITY, f64::min);
    (mr, ssr)
}

fn coupling_automatic(blocks: &[PieceBlocks]) -> Result<bool> {
    for b in blocks {
        if !b.piece.d_closure.orthogonal_to(&b.piece.d_normal, ORTHO_TOL)?
            || !b.piece.k_closure.orthogonal_to(&b.piece.k_normal, ORTHO_TOL)?
        {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Candidate tuples ranked by `max(‖v‖, ‖u*‖_*)`.
fn witness_pool(sys: &ConstraintSystem, blocks: &[PieceBlocks], size: usize, require_compat: bool) -> Vec<(f64, Witness)> {
    let p = sys.norm();
    let mut pool: Vec<(f64, Witness)> = Vec::new();
    for b in blocks {
        let (Some(pr), Some(du)) = (&b.primal, &b.dual) else { continue };
        for x in &pr.points {
            for y in &du.points {
                let w = witness_from(sys, &x.x, &x.y, &y.x, &y.y);
                if require_compat && !w.is_compatible(1e-7) {
                    continue;
                }
                let score = norm(&w.v(), p).max(norm(&w.ustar(), p.dual()));
                pool.push((score, w));
            }
        }
    }
    pool.sort_by(|a, b| a.0.total_cmp(&b.0));
    pool.truncate(size.max(1));
    pool
}

/// `rg◇`: like `rg` with the coupling `u*ᵀu = v*ᵀv` imposed.
pub fn compute_rg_diamond(sys: &ConstraintSystem, cfg: &SolverConfig) -> Result<f64> {
    let blocks = piece_blocks(sys, cfg)?;
    rg_diamond_from(sys, &blocks).map(|(v, _)| v)
}

fn rg_diamond_from(sys: &ConstraintSystem, blocks: &[PieceBlocks]) -> Result<(f64, bool)> {
    if coupling_automatic(blocks)? {
        // cell normals annihilate their cells, so u*ᵀu = -v*ᵀGu = v*ᵀv on every piece
        return Ok((blocks.iter().map(|b| b.a().max(b.b())).fold(f64::INFINITY, f64::min), true));
    }
    let pool = witness_pool(sys, blocks, usize::MAX, true);
    Ok((pool.first().map_or(f64::INFINITY, |(s, _)| *s), false))
}

/// `rg°` bracket `(lower, upper)` and the best matrix witness.
pub fn compute_rg_circ(sys: &ConstraintSystem, cfg: &SolverConfig) -> Result<(f64, f64, Option<Witness>)> {
    let blocks = piece_blocks(sys, cfg)?;
    let (diamond, automatic) = rg_diamond_from(sys, &blocks)?;
    let extra = if sys.norm().is_euclidean() { dagger_from(sys, &blocks, cfg, diamond)?.map(|d| d.1) } else { None };
    rg_circ_from(sys, &blocks, cfg, diamond, automatic, extra)
}

fn rg_circ_from(
    sys: &ConstraintSystem,
    blocks: &[PieceBlocks],
    cfg: &SolverConfig,
    diamond: f64,
    automatic: bool,
    extra: Option<Witness>,
) -> Result<(f64, f64, Option<Witness>)> {
    let mut pool: Vec<Witness> = witness_pool(sys, blocks, cfg.pool, !automatic).into_iter().map(|(_, w)| w).collect();
    if let Some(w) = extra {
        pool.push(w);
    }
    let p = sys.norm();
    let opcfg = cfg.opnorm();
    let mut pool: Vec<(f64, Witness)> = pool
        .into_iter()
        .filter_map(|mut w| {
            w.b = None;
            let nu = norm(&w.u(), p);
            let nv = norm(&w.vstar(), p.dual());
            if (nu - 1.0).abs() > 1e-9 || (nv - 1.0).abs() > 1e-9 || !w.is_compatible(1e-9) {
                return None;
            }
            Some((w.lower_bound(p), w))
        })
        .collect();
    pool.sort_by(|a, b| a.0.total_cmp(&b.0));
    // a witness whose own lower bound is no better than the best matrix found cannot improve it
    let mut best: Option<(f64, Witness)> = None;
    for (lb, w) in pool {
        if best.as_ref().is_some_and(|b| lb >= b.0 - 1e-12) {
            break;
        }
        let r = min_opnorm_matrix(&w, p, &opcfg)?;
        if best.as_ref().is_none_or(|b| r.upper < b.0) {
            let bm = rows_to_matrix(&r.matrix, sys.n())?;
            best = Some((r.upper, w.with_matrix(&bm)));
        }
    }
    let upper = best.as_ref().map_or(f64::INFINITY, |b| b.0).max(diamond);
    Ok((diamond, upper, best.map(|b| b.1)))
}

/// `rg†` (Euclidean only): min over compatible tuples of `√(‖u*‖² + ‖v‖² - (u*ᵀu)²)`.
pub fn compute_rg_dagger(sys: &ConstraintSystem, cfg: &SolverConfig) -> Result<(f64, Option<Witness>)> {
    if !sys.norm().is_euclidean() {
        return Err(SubradError::NonEuclidean);
    }
    let blocks = piece_blocks(sys, cfg)?;
    let (diamond, _) = rg_diamond_from(sys, &blocks)?;
    Ok(dagger_from(sys, &blocks, cfg, diamond)?.map_or((f64::INFINITY, None), |(v, w)| (v, Some(w))))
}

struct DaggerPiece<'a> {
    sys: &'a ConstraintSystem,
    d_closure: &'a ConvexCone,
    d_normal: &'a ConvexCone,
    k_closure: &'a ConvexCone,
    vdom: ConvexCone,
}

impl DaggerPiece<'_> {
    /// Squared objective with the optimal inner points for fixed `(u, v*)`.
    fn objective(&self, u: &DVector<f64>, vstar: &DVector<f64>) -> Result<(f64, Witness)> {
        let g = self.sys.jacobian();
        let gu = g * u;
        let (_, y) = self.k_closure.nearest(&gu, NormSpec::L2)?;
        let gtv = g.transpose() * vstar;
        let (_, nn) = self.d_normal.nearest(&gtv, NormSpec::L2)?;
        let w = witness_from(self.sys, u, &y, vstar, &nn);
        let c = w.ustar().dot(u);
        let val = w.ustar().norm_squared() + w.v().norm_squared() - c * c;
        Ok((val, w))
    }
}

/// `floor` is a known lower bound (`rg◇`); a candidate reaching it ends the search on its piece.
fn dagger_from(
    sys: &ConstraintSystem,
    blocks: &[PieceBlocks],
    cfg: &SolverConfig,
    floor: f64,
) -> Result<Option<(f64, Witness)>> {
    let floor2 = if floor.is_finite() { floor * floor * (1.0 + 1e-12) + 1e-300 } else { 0.0 };
    let results = blocks
        .par_iter()
        .filter(|b| b.primal.is_some() && b.dual.is_some())
        .map(|b| dagger_piece(sys, b, cfg, floor2))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, Witness)> = None;
    for r in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| r.0 < b.0) {
            best = Some(r);
        }
    }
    Ok(best.map(|(v, w)| {
        let (bm, _) = frobenius_min_matrix(&w).map_or((None, 0.0), |(m, f)| (Some(m), f));
        let w = match bm {
            Some(m) => w.with_matrix(&m),
            None => w,
        };
        (v.max(0.0).sqrt(), w)
    }))
}

fn dagger_piece(sys: &ConstraintSystem, b: &PieceBlocks, cfg: &SolverConfig, floor2: f64) -> Result<Option<(f64, Witness)>> {
    let dp = DaggerPiece {
        sys,
        d_closure: &b.piece.d_closure,
        d_normal: &b.piece.d_normal,
        k_closure: &b.piece.k_closure,
        vdom: negated(&b.piece.k_normal)?,
    };
    let pr = b.primal.as_ref().expect("filtered");
    let du = b.dual.as_ref().expect("filtered");
    let mut cands: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    for x in &pr.points {
        for y in &du.points {
            cands.push((x.x.clone(), y.x.clone()));
        }
    }
    // product grid when both spans are small enough
    let g = sys.jacobian();
    let mut res = cfg.resolution;
    let grids = loop {
        let us = cone_sphere_samples(dp.d_closure, res);
        let vs = cone_sphere_samples(&dp.vdom, res);
        match (us, vs) {
            (Ok(us), Ok(vs)) => {
                if us.len().saturating_mul(vs.len()) <= DAGGER_MAX_PAIRS || res <= 8 {
                    break Some((us, vs));
                }
                res /= 2;
            }
            _ => break None,
        }
    };
    if let Some((us, vs)) = grids {
        let ub: Vec<(f64, DVector<f64>)> = us
            .iter()
            .map(|u| {
                let gu = g * u;
                let d = dp.k_closure.nearest(&gu, NormSpec::L2)?.0;
                Ok((d * d, gu))
            })
            .collect::<Result<_>>()?;
        let va: Vec<f64> = vs
            .iter()
            .map(|v| {
                let d = dp.d_normal.nearest(&(g.transpose() * v), NormSpec::L2)?.0;
                Ok(d * d)
            })
            .collect::<Result<_>>()?;
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for (i, (b2, gu)) in ub.iter().enumerate() {
            for (j, v) in vs.iter().enumerate() {
                let c = v.dot(gu);
                let val = va[j] + b2 - c * c;
                if val < best.0 {
                    best = (val, i, j);
                }
            }
        }
        if best.0.is_finite() {
            cands.push((us[best.1].clone(), vs[best.2].clone()));
        }
    }
    let step0 = 4.0 * std::f64::consts::PI / cfg.resolution as f64;
    let mut best: Option<(f64, Witness)> = None;
    for (u0, v0) in cands {
        let (val0, w0) = dp.objective(&u0, &v0)?;
        if val0 <= floor2 {
            return Ok(Some((val0, w0)));
        }
        let (u, v) = refine_pair(&dp, u0, v0, step0, cfg.refine_tol)?;
        let (val, w) = dp.objective(&u, &v)?;
        if best.as_ref().is_none_or(|b| val < b.0) {
            best = Some((val, w));
        }
    }
    Ok(best)
}

/// Alternating projected pattern search over `(u, v*)`.
fn refine_pair(
    dp: &DaggerPiece,
    mut u: DVector<f64>,
    mut v: DVector<f64>,
    step0: f64,
    tol: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let mut cur = dp.objective(&u, &v)?.0;
    for _ in 0..20 {
        let vv = v.clone();
        let nu = refine_on_cone(&u, dp.d_closure, step0, tol, &|x| dp.objective(x, &vv).map(|r| r.0))?;
        let uu = nu.clone();
        let nv = refine_on_cone(&v, &dp.vdom, step0, tol, &|y| dp.objective(&uu, y).map(|r| r.0))?;
        let next = dp.objective(&nu, &nv)?.0;
        u = nu;
        v = nv;
        if next >= cur - 1e-15 {
            break;
        }
        cur = next;
    }
    Ok((u, v))
}

/// All constants in one pass.
pub fn compute_constants(sys: &ConstraintSystem, cfg: &SolverConfig) -> Result<ConstantsReport> {
    let blocks = piece_blocks(sys, cfg)?;
    let rg = blocks.iter().map(|b| b.a().max(b.b())).fold(f64::INFINITY, f64::min);
    let rg_over = blocks.iter().map(|b| b.a() + b.b()).fold(f64::INFINITY, f64::min);
    let (mr_bound, ssr_bound) = mr_ssr(&blocks);
    let (diamond, automatic) = rg_diamond_from(sys, &blocks)?;
    let dagger = if sys.norm().is_euclidean() { dagger_from(sys, &blocks, cfg, diamond)? } else { None };
    let (lower, upper, circ_w) = rg_circ_from(sys, &blocks, cfg, diamond, automatic, dagger.as_ref().map(|d| d.1.clone()))?;
    let witness = circ_w.or_else(|| witness_pool(sys, &blocks, 1, false).into_iter().next().map(|x| x.1));
    let mut methods: Vec<&str> = blocks
        .iter()
        .flat_map(|b| b.primal.iter().chain(b.dual.iter()).map(|r| r.method))
        .collect();
    methods.sort();
    methods.dedup();
    Ok(ConstantsReport {
        norm: sys.norm(),
        rg,
        rg_over,
        rg_diamond: diamond,
        rg_dagger: dagger.as_ref().map(|d| d.0),
        rg_circ_lower: lower,
        rg_circ_upper: upper,
        mr_bound,
        ssr_bound,
        witness,
        dagger_witness: dagger.map(|d| d.1),
        pieces: blocks.len(),
        method: methods.join("+"),
        coupling_automatic: automatic,
    })
}
