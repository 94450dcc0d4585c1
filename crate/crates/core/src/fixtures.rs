//! Ready-made constraint systems used by tests, the CLI and the examples.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::norms::NormSpec;
use crate::polyhedral::{ConvexPoly, PolyUnion};
use crate::system::{ConstraintSystem, LocalMap};

/// `D = {|x₂| ≤ x₁}`, `K = (ℝ₊×{0}) ∪ ({0}×ℝ₊)`, `g = id`, `x̄ = 0`.
pub fn cone(p: NormSpec) -> ConstraintSystem {
    let d = PolyUnion::single(ConvexPoly::cone_at(&[0.0, 0.0], vec![vec![-1.0, 1.0], vec![-1.0, -1.0]], vec![]).unwrap());
    let k = PolyUnion::new(
        2,
        vec![
            ConvexPoly::cone_at(&[0.0, 0.0], vec![vec![-1.0, 0.0]], vec![vec![0.0, 1.0]]).unwrap(),
            ConvexPoly::cone_at(&[0.0, 0.0], vec![vec![0.0, -1.0]], vec![vec![1.0, 0.0]]).unwrap(),
        ],
    )
    .unwrap();
    let g = LocalMap::affine(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
    ConstraintSystem::new(d, k, g, DVector::zeros(2), p).unwrap()
}

/// `D = ℝ`, `K = {0}`, `g ≡ 0`.
pub fn zero_map(p: NormSpec) -> ConstraintSystem {
    let g = LocalMap::affine(DVector::zeros(1), DMatrix::zeros(1, 1)).unwrap();
    ConstraintSystem::new(
        PolyUnion::single(ConvexPoly::whole(1)),
        PolyUnion::single(ConvexPoly::point(&[0.0])),
        g,
        DVector::zeros(1),
        p,
    )
    .unwrap()
}

/// `D = ℝⁿ`, `K = {0}`, `g(x) = A x`.
pub fn linear(a: &DMatrix<f64>, p: NormSpec) -> Result<ConstraintSystem> {
    let (m, n) = a.shape();
    let g = LocalMap::affine(DVector::zeros(m), a.clone())?;
    ConstraintSystem::new(
        PolyUnion::single(ConvexPoly::whole(n)),
        PolyUnion::single(ConvexPoly::point(&vec![0.0; m])),
        g,
        DVector::zeros(n),
        p,
    )
}

/// First-order model of the staircase function at the origin: `D = ℝ`, `K = {0}`, `g(x) = x`.
/// The graphical derivative of the staircase at 0 is `u ↦ |u|`, of the same size as this one.
pub fn staircase_linearized() -> ConstraintSystem {
    linear(&DMatrix::identity(1, 1), NormSpec::L2).unwrap()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    vec![t.cos(), t.sin()]
}

/// A random cone in the plane: a sector, a halfplane, a ray, a line or the whole plane.
fn random_cone_piece(rng: &mut ChaCha8Rng) -> ConvexPoly {
    let apex = [0.0, 0.0];
    match rng.random_range(0..6u32) {
        0 => ConvexPoly::whole(2),
        1 => ConvexPoly::cone_at(&apex, vec![random_unit(rng)], vec![]).unwrap(),
        2 => {
            let r = random_unit(rng);
            ConvexPoly::cone_at(&apex, vec![], vec![r]).unwrap()
        }
        3 => {
            let r = random_unit(rng);
            ConvexPoly::cone_at(&apex, vec![vec![-r[0], -r[1]]], vec![vec![-r[1], r[0]]]).unwrap()
        }
        _ => {
            // sector between two directions at angle < π
            let t0: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let w: f64 = rng.random_range(0.3..2.8);
            let (t1, t2) = (t0, t0 + w);
            let n1 = vec![t1.sin(), -t1.cos()];
            let n2 = vec![-t2.sin(), t2.cos()];
            ConvexPoly::cone_at(&apex, vec![n1, n2], vec![]).unwrap()
        }
    }
}

/// Random 2×2 polyhedral system with conic `D` and `K` (one or two pieces each) at the origin.
pub fn random_system(seed: u64, p: NormSpec) -> ConstraintSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_pieces = (0..rng.random_range(1..=2usize)).map(|_| random_cone_piece(&mut rng)).collect();
    let k_pieces = (0..rng.random_range(1..=2usize)).map(|_| random_cone_piece(&mut rng)).collect();
    let g = DMatrix::from_fn(2, 2, |_, _| (rng.random_range(-20..=20i32) as f64) / 10.0);
    ConstraintSystem::new(
        PolyUnion::new(2, d_pieces).unwrap(),
        PolyUnion::new(2, k_pieces).unwrap(),
        LocalMap::affine(DVector::zeros(2), g).unwrap(),
        DVector::zeros(2),
        p,
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_feasible() {
        for p in NormSpec::ALL {
            assert_eq!(cone(p).pieces().unwrap().len(), 12);
            zero_map(p);
        }
        for s in 0..50 {
            let sys = random_system(s, NormSpec::L2);
            assert!(sys.pieces().is_ok());
        }
    }
}
