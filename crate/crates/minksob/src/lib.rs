//! Numerical verification of Michael–Simon-type Sobolev inequalities for
//! compact spacelike submanifolds of Minkowski space `R^{n,1}`.
//!
//! The crate builds triangulated spacelike surfaces, solves the weighted
//! Neumann problem `div(f ∇u) = m f^{m/(m-1)} - S(f)` on them, realizes the
//! associated transport map `Φ_r(x, y) = X(x) + r(∇u(x) + y)` together with
//! its domain and codomain sets, and checks the resulting inequalities
//!
//! ```text
//!   ∫_Σ S(f) dμ + ∫_{∂Σ} f dμ  ≥  C · (∫_Σ f^{m/(m-1)} dμ)^{(m-1)/m}
//! ```
//!
//! at desk scale, where `S(f)` is `|∇f|`, `√(|∇f|² + f²‖H‖²)`, or the
//! higher-codimension analogue depending on the variant.
//!
//! Module map:
//! - [`lorentz`]: Minkowski inner product, causal classification, unit-ball
//!   volumes, Lorentz transforms.
//! - [`mesh`]: simplicial spacelike meshes, normal frames, discrete curvature.
//! - [`generators`]: parametric surface and density builders.
//! - [`pde`]: the weighted Neumann solve.
//! - [`abp`]: regions `Λ_r`, `A_r`, `B_r`, the transport map, volume
//!   estimation, sharp constants.
//! - [`verify`]: inequality evaluation, constants, fuzzing.
//! - [`cli`]: batch front-end used by the `minksob` binary.

pub mod abp;
pub mod cli;
mod error;
pub mod generators;
pub mod lorentz;
pub mod mesh;
pub mod pde;
pub mod verify;

pub use error::Error;

use serde::{Deserialize, Serialize};

/// Which of the three inequality variants is being exercised.
///
/// - `Thm11`: mean-convex hypersurfaces (`m = n`), gradient source `|∇f|`.
/// - `Thm12`: arbitrary hypersurfaces (`m = n`), source `√(|∇f|² + f²‖H‖²)`,
///   halved constant and halved slab regions.
/// - `Thm13`: higher codimension (`m < n`), source built from the splitting
///   of the mean curvature into its spacelike and timelike normal parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "thm1.1")]
    Thm11,
    #[serde(rename = "thm1.2")]
    Thm12,
    #[serde(rename = "thm1.3")]
    Thm13,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Thm11, Variant::Thm12, Variant::Thm13];

    /// Checks that the (intrinsic dimension, ambient spatial dimension) pair
    /// is admissible for this variant.
    pub fn check_dims(self, m: usize, n: usize) -> Result<(), Error> {
        if m < 2 {
            return Err(Error::DimensionMismatch(format!(
                "variant {self} needs intrinsic dimension m >= 2, got m = {m}"
            )));
        }
        match self {
            Variant::Thm11 | Variant::Thm12 if m != n => Err(Error::WrongCodimension {
                expected: n,
                got: m,
            }),
            Variant::Thm13 if m >= n => Err(Error::WrongCodimension {
                expected: n.saturating_sub(1),
                got: m,
            }),
            _ => Ok(()),
        }
    }

    /// Half-width factor of the slab and tangential constraints: 1 for the
    /// mean-convex variant, 1/2 for the other two.
    pub fn region_scale(self) -> f64 {
        match self {
            Variant::Thm11 => 1.0,
            Variant::Thm12 | Variant::Thm13 => 0.5,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Thm11 => write!(f, "thm1.1"),
            Variant::Thm12 => write!(f, "thm1.2"),
            Variant::Thm13 => write!(f, "thm1.3"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "thm1.1" | "thm11" | "1.1" => Ok(Variant::Thm11),
            "thm1.2" | "thm12" | "1.2" => Ok(Variant::Thm12),
            "thm1.3" | "thm13" | "1.3" => Ok(Variant::Thm13),
            other => Err(Error::Parse(format!(
                "unknown variant {other:?}; expected thm1.1, thm1.2 or thm1.3"
            ))),
        }
    }
}
