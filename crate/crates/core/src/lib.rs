//! Bounds on the radius of metric subregularity of polyhedral constraint systems
//! `x ∈ D, g(x) ∈ K` under Lipschitz, calm and linear perturbations.

pub(crate) mod blocks;
pub mod constants;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod lp;
pub mod matrices;
pub mod norms;
pub mod oracle;
pub mod perturbations;
pub mod polyhedral;
pub mod problem;
pub mod radii;
pub mod serde_ext;
pub mod system;
pub mod verify;

pub use error::{Result, SubradError};
pub use norms::NormSpec;
