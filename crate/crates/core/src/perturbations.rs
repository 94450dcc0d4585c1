//! Perturbation families, the zigzag and staircase constructions, and perturbed models.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SubradError};
use crate::matrices::{rows_to_matrix, Witness};
use crate::norms::{dual_attainer, norm, NormSpec};
use crate::polyhedral::{ConvexPoly, PolyUnion, MEMBER_TOL};
use crate::system::{ball_offsets, ConstraintSystem, FeasibilityModel};

/// Breakpoints `τ₁ > τ₂ > … > 0` of a zigzag function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZigzagSpec {
    pub tau: Vec<f64>,
}

impl Default for ZigzagSpec {
    fn default() -> Self {
        ZigzagSpec::geometric(0.5, 0.5, 60)
    }
}

impl ZigzagSpec {
    pub fn geometric(first: f64, ratio: f64, terms: usize) -> Self {
        ZigzagSpec { tau: (0..terms).map(|k| first * ratio.powi(k as i32)).collect() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        ZigzagSpec { tau: self.tau.iter().map(|t| t * s).collect() }
    }

    fn validate(&self) -> Result<()> {
        if self.tau.len() < 2 {
            return Err(SubradError::Precondition("zigzag needs at least two breakpoints".into()));
        }
        if self.tau.iter().any(|t| !(*t > 0.0) || !t.is_finite()) || self.tau.windows(2).any(|w| w[1] >= w[0]) {
            return Err(SubradError::Precondition("zigzag breakpoints must be positive and strictly decreasing".into()));
        }
        Ok(())
    }
}

/// Odd 1-Lipschitz function, flat around each `τ_k` and of slope one between flats,
/// with `τ_k > χ(τ_k) > τ_k (1 - 1/(k+1))`.
#[derive(Clone, Debug)]
pub struct Zigzag {
    tau: Vec<f64>,
    /// `a[k-1] = a_k`; `a_1 = τ_1`.
    a: Vec<f64>,
    /// `b[k-1] = b_k` for `k < K`.
    b: Vec<f64>,
    /// `χ(a_k)`.
    chi_a: Vec<f64>,
    core_slope: f64,
}

impl Zigzag {
    pub fn new(spec: &ZigzagSpec) -> Result<Self> {
        spec.validate()?;
        let tau = spec.tau.clone();
        let kk = tau.len();
        let mut a = vec![0.0; kk];
        let mut b = vec![0.0; kk - 1];
        a[0] = tau[0];
        for k in 1..kk {
            // index k ↦ vector index k-1
            let delta = (tau[k - 1] - tau[k]) / (2.0 * (k as f64 + 1.0));
            a[k] = tau[k] + delta;
            b[k - 1] = tau[k - 1] - delta;
        }
        let core_slope = 1.0 - 1.0 / (kk as f64 + 1.0);
        let mut chi_a = vec![0.0; kk];
        chi_a[kk - 1] = core_slope * a[kk - 1];
        for k in (0..kk - 1).rev() {
            let chi_b = chi_a[k + 1] + (b[k] - a[k + 1]);
            chi_a[k] = chi_b;
        }
        Ok(Zigzag { tau, a, b, chi_a, core_slope })
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn breakpoints(&self) -> (&[f64], &[f64]) {
        (&self.a, &self.b)
    }

    fn eval_pos(&self, t: f64) -> f64 {
        let kk = self.tau.len();
        if t <= self.a[kk - 1] {
            return self.core_slope * t;
        }
        if t >= self.a[0] {
            return self.chi_a[0];
        }
        // a is decreasing: find k with a[k+1] < t ≤ a[k]
        let mut lo = 0;
        let mut hi = kk - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.a[mid] >= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k = lo;
        if t > self.b[k] {
            self.chi_a[k]
        } else {
            self.chi_a[k + 1] + (t - self.a[k + 1])
        }
    }

    /// `χ(t)` for `|t| ≤ τ₁`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t.abs() > self.tau[0] * (1.0 + 1e-15) {
            return Err(SubradError::Precondition(format!("zigzag argument {t} outside [-τ₁, τ₁]")));
        }
        Ok(self.eval_extended(t))
    }

    /// `χ(t)` continued as a constant beyond `±τ₁`.
    pub fn eval_extended(&self, t: f64) -> f64 {
        t.signum() * self.eval_pos(t.abs())
    }
}

pub fn zigzag_eval(t: f64, spec: &ZigzagSpec) -> Result<f64> {
    Zigzag::new(spec)?.eval(t)
}

/// `f(x) = ∫₀^{|x|} φ` for a staircase-type `φ`: on `[a_{k+1}, b_k)` `φ(t) = t - a_{k+1}`,
/// on `[b_k, a_k)` `φ = 1`. `f` is C¹ but not subregular at the points `±a_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaircaseSpec {
    pub a1: f64,
    pub ratio: f64,
    pub levels: usize,
}

impl Default for StaircaseSpec {
    fn default() -> Self {
        StaircaseSpec { a1: 0.5, ratio: 0.5, levels: 40 }
    }
}

#[derive(Clone, Debug)]
pub struct Staircase {
    /// `a[k] = a_k` for `k = 0..=K`, with `a_0 = a_1 / ratio`.
    a: Vec<f64>,
    /// `b[k] = b_k = a_{k+1} + (a_k - a_{k+1})/(k+2)`.
    b: Vec<f64>,
    /// `f(a_k)`.
    fa: Vec<f64>,
    core_slope: f64,
}

impl Staircase {
    pub fn new(spec: &StaircaseSpec) -> Result<Self> {
        if !(spec.a1 > 0.0) || !(spec.ratio > 0.0 && spec.ratio < 1.0) || spec.levels < 2 {
            return Err(SubradError::Precondition("staircase needs a1 > 0, 0 < ratio < 1, levels ≥ 2".into()));
        }
        let kk = spec.levels;
        let a: Vec<f64> = (0..=kk).map(|k| spec.a1 * spec.ratio.powi(k as i32 - 1)).collect();
        let b: Vec<f64> = (0..kk).map(|k| a[k + 1] + (a[k] - a[k + 1]) / (k as f64 + 2.0)).collect();
        let core_slope = 1.0 - 1.0 / (kk as f64 + 1.0);
        let mut fa = vec![0.0; kk + 1];
        fa[kk] = core_slope * a[kk];
        for k in (0..kk).rev() {
            let q = b[k] - a[k + 1];
            let fb = fa[k + 1] + 0.5 * q * q;
            fa[k] = fb + (a[k] - b[k]);
        }
        Ok(Staircase { a, b, fa, core_slope })
    }

    /// `a_k` for `k ≥ 0`.
    pub fn a(&self, k: usize) -> f64 {
        self.a[k]
    }

    pub fn levels(&self) -> usize {
        self.a.len() - 1
    }

    /// `ε_n = max_{k ≥ n} (b_k - a_{k+1})/(a_k - b_k) = 1/(n+1)`.
    pub fn epsilon(&self, n: usize) -> f64 {
        1.0 / (n as f64 + 1.0)
    }

    /// `f(x)` for `|x| < a_0`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let t = x.abs();
        if !(t < self.a[0]) {
            return Err(SubradError::Precondition(format!("staircase argument {x} outside (-a₀, a₀)")));
        }
        let kk = self.a.len() - 1;
        if t <= self.a[kk] {
            return Ok(self.core_slope * t);
        }
        let mut k = 0;
        while self.a[k + 1] >= t {
            k += 1;
        }
        // a_{k+1} < t ≤ a_k
        Ok(if t < self.b[k] {
            let q = t - self.a[k + 1];
            self.fa[k + 1] + 0.5 * q * q
        } else {
            let q = self.b[k] - self.a[k + 1];
            self.fa[k + 1] + 0.5 * q * q + (t - self.b[k])
        })
    }
}

/// A perturbation `h` of the constraint map: the perturbed system is `g(x) - h(x) ∈ K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationSpec {
    None,
    /// `h(x) = B (x - x̄)`.
    Linear { b: Vec<Vec<f64>> },
    /// `h(x) = coeff · (x - x̄)²` for scalar systems.
    Quadratic { coeff: f64 },
    /// `h(x) = χ_τ(ẑᵀ(x-x̄)) v + ζ(x-x̄) ŵ` built from a witness.
    Zigzag { witness: Witness, #[serde(default)] tau: ZigzagSpec },
    /// `h(x) = Σ_j w_j |a_jᵀ(x - x̄)|` with seeded random data.
    PiecewiseRandom { lip: f64, seed: u64, #[serde(default = "default_terms")] terms: usize },
}

fn default_terms() -> usize {
    2
}

/// Explicit data of a piecewise-linear perturbation `Σ_j w_j |a_jᵀ d|`.
#[derive(Clone, Debug)]
pub struct AbsSum {
    pub a: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
}

impl AbsSum {
    pub fn random(n: usize, m: usize, p: NormSpec, lip: f64, seed: u64, terms: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Vec::new();
        let mut w = Vec::new();
        for _ in 0..terms.max(1) {
            let av = loop {
                let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                if norm(&x, p.dual()) > 1e-3 {
                    break x.clone() / norm(&x, p.dual());
                }
            };
            let wv = loop {
                let x = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
                if norm(&x, p) > 1e-3 {
                    break x.clone() / norm(&x, p) * (lip / terms.max(1) as f64);
                }
            };
            a.push(av);
            w.push(wv);
        }
        AbsSum { a, w }
    }

    pub fn eval(&self, d: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.w[0].len());
        for (a, w) in self.a.iter().zip(&self.w) {
            out += w * a.dot(d).abs();
        }
        out
    }

    /// `Σ_j ‖w_j‖ ‖a_j‖_*`.
    pub fn modulus(&self, p: NormSpec) -> f64 {
        self.a.iter().zip(&self.w).map(|(a, w)| norm(w, p) * norm(a, p.dual())).sum()
    }

    /// Linear piece `Σ_j s_j w_j a_jᵀ` for a sign pattern.
    fn linear_piece(&self, signs: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.w[0].len(), self.a[0].len());
        for ((a, w), s) in self.a.iter().zip(&self.w).zip(signs) {
            h += w * a.transpose() * *s;
        }
        h
    }
}

/// `h(x) = χ_τ(ẑᵀd) v + ζ(d) ŵ` with `d = x - x̄`, `ẑ` a dual attainer of `u`, `ŵ` one of `v*`,
/// and `ζ(d) = u*ᵀd - χ_{|c|τ}(u*ᵀd)` for `c = u*ᵀu ≠ 0`, else `ζ(d) = u*ᵀd`.
#[derive(Clone, Debug)]
pub struct Step2 {
    zhat: DVector<f64>,
    v: DVector<f64>,
    what: DVector<f64>,
    ustar: DVector<f64>,
    chi: Zigzag,
    chi_c: Option<Zigzag>,
    certificate: f64,
}

impl Step2 {
    pub fn eval(&self, d: &DVector<f64>) -> DVector<f64> {
        let s = self.ustar.dot(d);
        let zeta = match &self.chi_c {
            Some(z) => s - z.eval_extended(s),
            None => s,
        };
        &self.v * self.chi.eval_extended(self.zhat.dot(d)) + &self.what * zeta
    }

    /// `‖v‖ + ‖u*‖_*`.
    pub fn lipschitz_certificate(&self) -> f64 {
        self.certificate
    }
}

pub fn step2_h(w: &Witness, tau: &ZigzagSpec, p: NormSpec) -> Result<Step2> {
    let (u, v, us, vs) = (w.u(), w.v(), w.ustar(), w.vstar());
    let zhat = dual_attainer(&u, p)?;
    let what = dual_attainer(&vs, p.dual())?;
    let c = us.dot(&u);
    let chi = Zigzag::new(tau)?;
    let chi_c = if c != 0.0 { Some(Zigzag::new(&tau.scaled(c.abs()))?) } else { None };
    let certificate = norm(&v, p) + norm(&us, p.dual());
    Ok(Step2 { zhat, v, what, ustar: us, chi, chi_c, certificate })
}

/// `h(x) = -B (x - x̄)`, so the perturbed Jacobian is `G + B`.
pub fn step4_linear(w: &Witness) -> Result<PerturbationSpec> {
    let b = w.matrix()?.ok_or_else(|| SubradError::Precondition("witness carries no matrix".into()))?;
    Ok(PerturbationSpec::Linear { b: crate::matrices::matrix_to_rows(&(-b)) })
}

/// Sampled Lipschitz constant of `f` on the ball of radius `radius` around `xbar`.
pub fn lip_estimate(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    xbar: &DVector<f64>,
    radius: f64,
    p: NormSpec,
    n_samples: usize,
    seed: u64,
) -> f64 {
    let xs = ball_offsets(xbar.len(), p, 2 * n_samples, seed);
    let mut best: f64 = 0.0;
    for pair in xs.chunks(2) {
        let x1 = xbar + &pair[0] * radius;
        let x2 = xbar + &pair[1] * radius;
        let dx = norm(&(&x1 - &x2), p);
        if dx <= 0.0 {
            continue;
        }
        best = best.max(norm(&(f(&x1) - f(&x2)), p) / dx);
    }
    best
}

pub type VectorFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Declared Lipschitz modulus of a perturbation (for the linear family, its operator norm).
pub fn declared_modulus(spec: &PerturbationSpec, sys: &ConstraintSystem) -> Result<f64> {
    let p = sys.norm();
    Ok(match spec {
        PerturbationSpec::None => 0.0,
        PerturbationSpec::Linear { b } => crate::norms::operator_norm(&rows_to_matrix(b, sys.n())?, p),
        PerturbationSpec::Quadratic { .. } => f64::INFINITY,
        PerturbationSpec::Zigzag { witness, tau } => step2_h(witness, tau, p)?.lipschitz_certificate(),
        PerturbationSpec::PiecewiseRandom { lip, seed, terms } => {
            AbsSum::random(sys.n(), sys.m(), p, *lip, *seed, *terms).modulus(p)
        }
    })
}

/// Evaluator `x ↦ h(x)` for any perturbation family.
pub fn perturbation_fn(spec: &PerturbationSpec, sys: &ConstraintSystem) -> Result<VectorFn> {
    let xbar = sys.xbar().clone();
    let m = sys.m();
    Ok(match spec {
        PerturbationSpec::None => Box::new(move |_| DVector::zeros(m)),
        PerturbationSpec::Linear { b } => {
            let bm = rows_to_matrix(b, sys.n())?;
            Box::new(move |x| &bm * (x - &xbar))
        }
        PerturbationSpec::Quadratic { coeff } => {
            let c = *coeff;
            Box::new(move |x| DVector::from_element(m, c * (x - &xbar).norm_squared()))
        }
        PerturbationSpec::Zigzag { witness, tau } => {
            let s = step2_h(witness, tau, sys.norm())?;
            Box::new(move |x| s.eval(&(x - &xbar)))
        }
        PerturbationSpec::PiecewiseRandom { lip, seed, terms } => {
            let h = AbsSum::random(sys.n(), m, sys.norm(), *lip, *seed, *terms);
            Box::new(move |x| h.eval(&(x - &xbar)))
        }
    })
}

/// Polyhedral perturbed system `x ∈ D, g(x) - h(x) ∈ K` for piecewise-linear `h`.
pub struct PerturbedSystem {
    sys: ConstraintSystem,
    h: VectorFn,
    solutions: PolyUnion,
}

impl PerturbedSystem {
    pub fn new(sys: &ConstraintSystem, spec: &PerturbationSpec) -> Result<Self> {
        if !sys.map().is_affine() {
            return Err(SubradError::NotAffine);
        }
        let h = perturbation_fn(spec, sys)?;
        let solutions = match spec {
            PerturbationSpec::None => sys.solution_set()?,
            PerturbationSpec::Linear { b } => {
                let bm = rows_to_matrix(b, sys.n())?;
                sys.with_jacobian(sys.jacobian() - bm)?.solution_set()?
            }
            PerturbationSpec::PiecewiseRandom { lip, seed, terms } => {
                let abs = AbsSum::random(sys.n(), sys.m(), sys.norm(), *lip, *seed, *terms);
                piecewise_solutions(sys, &abs)?
            }
            PerturbationSpec::Quadratic { .. } => {
                return Err(SubradError::NotEvaluable("quadratic perturbations use the scalar model".into()))
            }
            PerturbationSpec::Zigzag { .. } => {
                return Err(SubradError::NotEvaluable(
                    "zigzag perturbations have infinitely many pieces near the reference point".into(),
                ))
            }
        };
        Ok(PerturbedSystem { sys: sys.clone(), h, solutions })
    }

    pub fn solution_set(&self) -> &PolyUnion {
        &self.solutions
    }
}

fn piecewise_solutions(sys: &ConstraintSystem, abs: &AbsSum) -> Result<PolyUnion> {
    let j = abs.a.len();
    let xbar = sys.xbar();
    let mut pieces = Vec::new();
    for mask in 0..(1usize << j) {
        let signs: Vec<f64> = (0..j).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let hs = abs.linear_piece(&signs);
        // region: s_i a_iᵀ(x - x̄) ≥ 0
        let rows: Vec<Vec<f64>> = abs.a.iter().zip(&signs).map(|(a, s)| (a * -*s).iter().copied().collect()).collect();
        let rhs: Vec<f64> = abs.a.iter().zip(&signs).map(|(a, s)| -*s * a.dot(xbar)).collect();
        let region = ConvexPoly::new(sys.n(), rows, rhs, vec![], vec![])?;
        let local = sys.with_jacobian(sys.jacobian() - hs)?.solution_set()?;
        for piece in local.pieces() {
            pieces.push(piece.intersect(&region)?);
        }
    }
    PolyUnion::new(sys.n(), pieces)
}

impl FeasibilityModel for PerturbedSystem {
    fn dim(&self) -> usize {
        self.sys.n()
    }

    fn base_point(&self) -> &DVector<f64> {
        self.sys.xbar()
    }

    fn norm(&self) -> NormSpec {
        self.sys.norm()
    }

    fn residual(&self, x: &DVector<f64>) -> Result<f64> {
        if !self.sys.d().contains(x, MEMBER_TOL) {
            return Ok(f64::INFINITY);
        }
        let gx = self.sys.map().evaluate(x, self.sys.xbar())? - (self.h)(x);
        self.sys.k().distance(&gx, self.sys.norm())
    }

    fn distance_to_solutions(&self, x: &DVector<f64>) -> Result<f64> {
        self.solutions.distance(x, self.sys.norm())
    }
}

/// Scalar model `x ∈ dom, f(x) ∈ target` with the solution set given as intervals.
pub struct ScalarModel {
    xbar: DVector<f64>,
    f: Box<dyn Fn(f64) -> Result<f64> + Send + Sync>,
    domain: Vec<(f64, f64)>,
    target: Vec<(f64, f64)>,
    solutions: Vec<(f64, f64)>,
}

fn interval_distance(x: f64, ivs: &[(f64, f64)]) -> f64 {
    ivs.iter()
        .map(|&(lo, hi)| if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
}

impl ScalarModel {
    /// `f` near a point `a_k` of the staircase, with target `{f(a_k)}`.
    pub fn staircase(spec: &StaircaseSpec, k: usize) -> Result<Self> {
        let st = Staircase::new(spec)?;
        if k == 0 || k > st.levels() {
            return Err(SubradError::Precondition(format!("staircase level {k} out of range")));
        }
        let ak = st.a(k);
        let fk = st.eval(ak)?;
        let a0 = st.a(0);
        Ok(ScalarModel {
            xbar: DVector::from_element(1, ak),
            domain: vec![(-a0 * (1.0 - 1e-12), a0 * (1.0 - 1e-12))],
            target: vec![(fk, fk)],
            solutions: vec![(-ak, -ak), (ak, ak)],
            f: Box::new(move |x| st.eval(x)),
        })
    }

    /// Scalar polyhedral system perturbed by `h(x) = c (x - x̄)²`.
    pub fn quadratic(sys: &ConstraintSystem, coeff: f64) -> Result<Self> {
        if sys.n() != 1 || sys.m() != 1 {
            return Err(SubradError::UnsupportedDimension { dim: sys.n().max(sys.m()), what: "quadratic perturbations need n = m = 1" });
        }
        let xb = sys.xbar()[0];
        let g0 = sys.g0()[0];
        let gl = sys.jacobian()[(0, 0)];
        let domain = sys.d().intervals()?;
        let target = sys.k().intervals()?;
        // t = x - x̄; φ(t) = g0 + gl t - c t²
        let mut solutions = Vec::new();
        for &(lo, hi) in &target {
            let ge = quad_ge(-coeff, gl, g0 - lo);
            let le = quad_ge(coeff, -gl, hi - g0);
            for a in &ge {
                for b in &le {
                    let l = a.0.max(b.0);
                    let h = a.1.min(b.1);
                    if l <= h {
                        for d in &domain {
                            let l2 = l.max(d.0 - xb);
                            let h2 = h.min(d.1 - xb);
                            if l2 <= h2 {
                                solutions.push((l2 + xb, h2 + xb));
                            }
                        }
                    }
                }
            }
        }
        Ok(ScalarModel {
            xbar: sys.xbar().clone(),
            f: Box::new(move |x| {
                let t = x - xb;
                Ok(g0 + gl * t - coeff * t * t)
            }),
            domain,
            target,
            solutions,
        })
    }

    pub fn solutions(&self) -> &[(f64, f64)] {
        &self.solutions
    }
}

/// `{t : c2 t² + c1 t + c0 ≥ 0}` as closed intervals.
fn quad_ge(c2: f64, c1: f64, c0: f64) -> Vec<(f64, f64)> {
    let inf = f64::INFINITY;
    if c2 == 0.0 {
        if c1 == 0.0 {
            return if c0 >= 0.0 { vec![(-inf, inf)] } else { vec![] };
        }
        let r = -c0 / c1;
        return if c1 > 0.0 { vec![(r, inf)] } else { vec![(-inf, r)] };
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return if c2 > 0.0 { vec![(-inf, inf)] } else { vec![] };
    }
    let sq = disc.sqrt();
    // numerically stable roots
    let q = -0.5 * (c1 + c1.signum().max(0.0).mul_add(2.0, -1.0) * sq);
    let (mut r1, mut r2) = if q != 0.0 { (q / c2, c0 / q) } else { (0.0, 0.0) };
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    if c2 > 0.0 {
        vec![(-inf, r1), (r2, inf)]
    } else {
        vec![(r1, r2)]
    }
}

impl FeasibilityModel for ScalarModel {
    fn dim(&self) -> usize {
        1
    }

    fn base_point(&self) -> &DVector<f64> {
        &self.xbar
    }

    fn norm(&self) -> NormSpec {
        NormSpec::L2
    }

    fn residual(&self, x: &DVector<f64>) -> Result<f64> {
        let t = x[0];
        if interval_distance(t, &self.domain) > 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(interval_distance((self.f)(t)?, &self.target))
    }

    fn distance_to_solutions(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(interval_distance(x[0], &self.solutions))
    }
}

/// Feasibility model for a system under a perturbation.
pub fn perturbed_model(sys: &ConstraintSystem, spec: &PerturbationSpec) -> Result<Box<dyn FeasibilityModel>> {
    match spec {
        PerturbationSpec::Quadratic { coeff } => Ok(Box::new(ScalarModel::quadratic(sys, *coeff)?)),
        _ => Ok(Box::new(PerturbedSystem::new(sys, spec)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zigzag_values_at_breakpoints() {
        let z = Zigzag::new(&ZigzagSpec::default()).unwrap();
        for (i, &t) in z.tau().iter().enumerate().take(59) {
            let k = i as f64 + 1.0;
            let c = z.eval(t).unwrap();
            assert!(c < t && c > t * (1.0 - 1.0 / (k + 1.0)), "k={k}: {c} vs {t}");
            let h = 1e-9 * t;
            let slope = (z.eval_extended(t + h) - z.eval_extended(t - h)) / (2.0 * h);
            assert!(slope.abs() < 1e-6);
        }
        assert_eq!(z.eval(0.0).unwrap(), 0.0);
        assert_eq!(z.eval(-0.3).unwrap(), -z.eval(0.3).unwrap());
        assert!(z.eval(0.6).is_err());
    }

    #[test]
    fn zigzag_is_one_lipschitz_and_continuous() {
        let z = Zigzag::new(&ZigzagSpec::geometric(0.5, 0.5, 12)).unwrap();
        let n = 20000;
        let mut prev = z.eval(0.0).unwrap();
        for i in 1..=n {
            let t = 0.5 * i as f64 / n as f64;
            let c = z.eval(t).unwrap();
            let dt = 0.5 / n as f64;
            assert!((c - prev).abs() <= dt * (1.0 + 1e-9) && c >= prev - 1e-15);
            prev = c;
        }
    }

    #[test]
    fn staircase_shape() {
        let s = Staircase::new(&StaircaseSpec::default()).unwrap();
        for n in 1..8 {
            let an = s.a(n);
            let f = s.eval(an).unwrap();
            assert!(f / an >= 1.0 - s.epsilon(n) - 1e-12, "n={n}");
            assert!(f < an);
            // quadratic contact to the right of a_n
            let h = 1e-4 * (s.a(n - 1) - an);
            let r = s.eval(an + h).unwrap() - f;
            assert!((r - 0.5 * h * h).abs() < 1e-12);
        }
        // continuity at b_k
        let st = Staircase::new(&StaircaseSpec { a1: 0.5, ratio: 0.5, levels: 6 }).unwrap();
        for k in 0..6 {
            let b = st.b[k];
            let l = st.eval(b * (1.0 - 1e-12)).unwrap();
            let r = st.eval(b).unwrap();
            assert!((l - r).abs() < 1e-10);
        }
    }

    #[test]
    fn quadratic_intervals() {
        assert_eq!(quad_ge(0.0, 1.0, -2.0), vec![(2.0, f64::INFINITY)]);
        let r = quad_ge(-1.0, 0.0, 4.0);
        assert_eq!(r.len(), 1);
        assert!((r[0].0 + 2.0).abs() < 1e-12 && (r[0].1 - 2.0).abs() < 1e-12);
        let r = quad_ge(1.0, 0.0, -1.0);
        assert_eq!(r.len(), 2);
        assert!((r[0].1 + 1.0).abs() < 1e-12 && (r[1].0 - 1.0).abs() < 1e-12);
        assert!(quad_ge(-1.0, 0.0, -1.0).is_empty());
    }

    #[test]
    fn step2_certificate_bounds_sampled_slope() {
        let c = 0.5f64.sqrt();
        let w = Witness::new(
            DVector::from_row_slice(&[c, c]),
            DVector::from_row_slice(&[0.0, -c]),
            DVector::from_row_slice(&[-0.5, -0.5]),
            DVector::from_row_slice(&[0.0, 1.0]),
        );
        let h = step2_h(&w, &ZigzagSpec::default(), NormSpec::L2).unwrap();
        let f = |x: &DVector<f64>| h.eval(x);
        let est = lip_estimate(&f, &DVector::zeros(2), 0.1, NormSpec::L2, 5000, 3);
        assert!(est <= h.lipschitz_certificate() * (1.0 + 1e-12));
        assert!((h.lipschitz_certificate() - (c + c)).abs() < 1e-12);
    }
}
