//! ℓp norms for p in {1, 2, ∞}, their duals, operator norms and sphere grids.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SubradError};

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormSpec {
    L1,
    L2,
    LInf,
}

impl NormSpec {
    pub const ALL: [NormSpec; 3] = [NormSpec::L1, NormSpec::L2, NormSpec::LInf];

    pub fn dual(self) -> NormSpec {
        match self {
            NormSpec::L1 => NormSpec::LInf,
            NormSpec::L2 => NormSpec::L2,
            NormSpec::LInf => NormSpec::L1,
        }
    }

    pub fn is_euclidean(self) -> bool {
        self == NormSpec::L2
    }

    /// The exponent p as a float (∞ for `LInf`).
    pub fn exponent(self) -> f64 {
        match self {
            NormSpec::L1 => 1.0,
            NormSpec::L2 => 2.0,
            NormSpec::LInf => f64::INFINITY,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NormSpec::L1 => "1",
            NormSpec::L2 => "2",
            NormSpec::LInf => "inf",
        }
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for NormSpec {
    type Err = SubradError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" | "1.0" => Ok(NormSpec::L1),
            "2" | "l2" | "2.0" => Ok(NormSpec::L2),
            "inf" | "infinity" | "linf" | "∞" => Ok(NormSpec::LInf),
            other => Err(SubradError::Invalid(format!(
                "norm exponent must be 1, 2 or inf, got {other:?}"
            ))),
        }
    }
}

impl Serialize for NormSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for NormSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(1.0) => Ok(NormSpec::L1),
            Raw::Num(2.0) => Ok(NormSpec::L2),
            Raw::Num(x) => Err(serde::de::Error::custom(format!(
                "norm exponent must be 1, 2 or \"inf\", got {x}"
            ))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

pub fn norm_slice(x: &[f64], p: NormSpec) -> f64 {
    match p {
        NormSpec::L1 => x.iter().map(|v| v.abs()).sum(),
        NormSpec::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormSpec::LInf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

pub fn norm(x: &DVector<f64>, p: NormSpec) -> f64 {
    norm_slice(x.as_slice(), p)
}

pub fn dual_norm(x: &DVector<f64>, p: NormSpec) -> f64 {
    norm(x, p.dual())
}

/// A vector `x*` with `‖x*‖_{p*} = 1` and `⟨x*, x⟩ = ‖x‖_p`. Ties go to the lowest index.
pub fn dual_attainer(x: &DVector<f64>, p: NormSpec) -> Result<DVector<f64>> {
    let nx = norm(x, p);
    if nx == 0.0 {
        return Err(SubradError::Precondition(
            "dual attainer of the zero vector".into(),
        ));
    }
    Ok(match p {
        NormSpec::L2 => x / nx,
        NormSpec::L1 => x.map(|v| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        }),
        NormSpec::LInf => {
            let mut best = 0;
            for i in 1..x.len() {
                if x[i].abs() > x[best].abs() {
                    best = i;
                }
            }
            let mut e = DVector::zeros(x.len());
            e[best] = x[best].signum();
            e
        }
    })
}

/// Operator norm of `m` viewed as a map (ℝⁿ, ‖·‖_p) → (ℝᵐ, ‖·‖_p).
pub fn operator_norm(m: &DMatrix<f64>, p: NormSpec) -> f64 {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return 0.0;
    }
    match p {
        NormSpec::L1 => (0..c)
            .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormSpec::LInf => (0..r)
            .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormSpec::L2 => spectral_norm(m),
    }
}

pub fn frobenius_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    let n = gram.nrows();
    let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut best = power_iteration(&gram, ones);
    // second start guards against an all-ones vector orthogonal to the top eigenvector
    let col = (0..n)
        .max_by(|&a, &b| gram.column(a).norm().total_cmp(&gram.column(b).norm()))
        .unwrap_or(0);
    let c = gram.column(col).into_owned();
    if c.norm() > 0.0 {
        best = best.max(power_iteration(&gram, c.normalize()));
    }
    best.max(0.0).sqrt()
}

fn power_iteration(a: &DMatrix<f64>, start: DVector<f64>) -> f64 {
    let mut x = start;
    let mut lambda: f64 = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let y = a * &x;
        let ny = y.norm();
        if ny == 0.0 {
            return lambda.max(0.0);
        }
        let next = x.dot(&y);
        x = y / ny;
        let done = (next - lambda).abs() <= POWER_TOL * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    x.dot(&(a * &x))
}

/// Deterministic points on the unit sphere of ‖·‖_p in ℝ^dim, dim ≤ 3.
///
/// Coordinate vectors ±eᵢ are always included. In two dimensions `resolution`
/// is the number of points around the circle (rounded up to a multiple of 4);
/// in three dimensions it controls the number of points along a great circle.
pub fn sphere_points(p: NormSpec, dim: usize, resolution: usize) -> Result<Vec<DVector<f64>>> {
    if resolution < 4 {
        return Err(SubradError::Precondition(format!(
            "sphere resolution must be at least 4, got {resolution}"
        )));
    }
    match dim {
        1 => Ok(vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)]),
        2 => Ok(circle_points(p, resolution)),
        3 => Ok(sphere3_points(p, resolution)),
        _ => Err(SubradError::UnsupportedDimension {
            dim,
            what: "sphere grids exist for dimensions 1 to 3",
        }),
    }
}

fn circle_points(p: NormSpec, resolution: usize) -> Vec<DVector<f64>> {
    let q = resolution.div_ceil(4);
    let axes = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
    let mut out = Vec::with_capacity(4 * q);
    for k in 0..4 {
        let s = axes[k];
        let e = axes[(k + 1) % 4];
        for j in 0..q {
            let t = j as f64 / q as f64;
            let pt = if j == 0 {
                s
            } else {
                match p {
                    NormSpec::L2 => {
                        let th = (k as f64 + t) * std::f64::consts::FRAC_PI_2;
                        [th.cos(), th.sin()]
                    }
                    NormSpec::L1 => [(1.0 - t) * s[0] + t * e[0], (1.0 - t) * s[1] + t * e[1]],
                    NormSpec::LInf => {
                        if t <= 0.5 {
                            [s[0] + 2.0 * t * e[0], s[1] + 2.0 * t * e[1]]
                        } else {
                            let w = 2.0 * (1.0 - t);
                            [e[0] + w * s[0], e[1] + w * s[1]]
                        }
                    }
                }
            };
            out.push(DVector::from_row_slice(&pt));
        }
    }
    out
}

fn sphere3_points(p: NormSpec, resolution: usize) -> Vec<DVector<f64>> {
    let mut n = resolution / 4 + 1;
    if n.is_multiple_of(2) {
        n += 1;
    }
    let last = (n - 1) as i64;
    let mut keys = BTreeSet::new();
    for axis in 0..3 {
        for side in [0, last] {
            for a in 0..=last {
                for b in 0..=last {
                    let mut k = [0i64; 3];
                    k[axis] = side;
                    k[(axis + 1) % 3] = a;
                    k[(axis + 2) % 3] = b;
                    keys.insert(k);
                }
            }
        }
    }
    let h = 2.0 / last as f64;
    keys.into_iter()
        .map(|k| {
            let x = DVector::from_iterator(3, k.iter().map(|&i| {
                if 2 * i == last {
                    0.0
                } else if i == last {
                    1.0
                } else {
                    -1.0 + h * i as f64
                }
            }));
            let nx = norm(&x, p);
            x / nx
        })
        .collect()
}

/// Upper bound on the ‖·‖_p distance from any point of the unit sphere to the grid
/// returned by [`sphere_points`] with the same arguments.
pub fn sphere_spacing(p: NormSpec, dim: usize, resolution: usize) -> Result<f64> {
    let pts = sphere_points(p, dim, resolution)?;
    Ok(match dim {
        1 => 0.0,
        2 => {
            let mut worst: f64 = 0.0;
            for i in 0..pts.len() {
                let j = (i + 1) % pts.len();
                worst = worst.max(norm(&(&pts[i] - &pts[j]), p));
            }
            worst
        }
        _ => {
            let mut n = resolution / 4 + 1;
            if n.is_multiple_of(2) {
                n += 1;
            }
            // cube cell diagonal, stretched by at most √3 under normalisation
            let h = 2.0 / (n - 1) as f64;
            h * 2f64.sqrt() * 3f64.sqrt() * 3f64.sqrt()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn vector_norms() {
        let x = v(&[3.0, -4.0]);
        assert_eq!(norm(&x, NormSpec::L1), 7.0);
        assert_eq!(norm(&x, NormSpec::L2), 5.0);
        assert_eq!(norm(&x, NormSpec::LInf), 4.0);
        assert_eq!(dual_norm(&x, NormSpec::L1), 4.0);
    }

    #[test]
    fn operator_norms_of_small_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(operator_norm(&m, NormSpec::L1), 6.0);
        assert_eq!(operator_norm(&m, NormSpec::LInf), 7.0);
        assert!((operator_norm(&m, NormSpec::L2) - 5.464985704219043).abs() < 1e-10);
    }

    #[test]
    fn spectral_norm_when_ones_is_in_kernel() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!((operator_norm(&m, NormSpec::L2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn parse_and_serialize() {
        assert_eq!("inf".parse::<NormSpec>().unwrap(), NormSpec::LInf);
        assert!("3".parse::<NormSpec>().is_err());
        let s = serde_json::to_string(&NormSpec::LInf).unwrap();
        assert_eq!(s, "\"inf\"");
        let n: NormSpec = serde_json::from_str("2").unwrap();
        assert_eq!(n, NormSpec::L2);
    }

    #[test]
    fn sphere_points_contain_axes() {
        for p in NormSpec::ALL {
            for dim in 1..=3 {
                let pts = sphere_points(p, dim, 16).unwrap();
                for i in 0..dim {
                    for s in [1.0, -1.0] {
                        let mut e = DVector::zeros(dim);
                        e[i] = s;
                        assert!(pts.iter().any(|q| (q - &e).amax() < 1e-15), "{p} {dim}");
                    }
                }
                for q in &pts {
                    assert!((norm(q, p) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sphere_points_reject_bad_input() {
        assert!(sphere_points(NormSpec::L2, 4, 16).is_err());
        assert!(sphere_points(NormSpec::L2, 2, 3).is_err());
    }

    #[test]
    fn dual_attainers() {
        let x = v(&[0.5, -2.0, 2.0]);
        for p in NormSpec::ALL {
            let z = dual_attainer(&x, p).unwrap();
            assert!((norm(&z, p.dual()) - 1.0).abs() < 1e-14);
            assert!((z.dot(&x) - norm(&x, p)).abs() < 1e-14);
        }
        assert_eq!(dual_attainer(&x, NormSpec::LInf).unwrap(), v(&[0.0, -1.0, 0.0]));
    }
}
