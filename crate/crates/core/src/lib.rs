//! Facial reduction and Hölderian error bounds for linear conic feasibility
//! problems `find x ∈ (L + a) ∩ K` where `K` is a product of PSD cones,
//! second-order cones and nonnegative orthants.
//!
//! The crate is organised bottom-up:
//!
//! * [`algebra`]: the Euclidean Jordan algebra whose cone of squares is `K`.
//! * [`conegeom`]: projections, distances and faces of `K`.
//! * [`affine`]: the affine set `L + a` and the reducing subspace `W`.
//! * [`reduction`]: reducing directions and facial reduction chains.
//! * [`bounds`]: facial residual functions and error-bound certificates.
//! * [`harness`]: a Dykstra projection oracle, instance generators and the
//!   empirical checks that validate certificates.

pub mod affine;
pub mod algebra;
pub mod bounds;
pub mod conegeom;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod reduction;

pub use affine::AffineSet;
pub use algebra::{AlgebraSpec, BlockKind, Element, FaceDescriptor, SpectralDecomposition};
pub use conegeom::ConeHandle;
pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/coordinates.md")]
    mod coordinates {}
    #[doc = include_str!("../../../book/src/faces.md")]
    mod faces {}
    #[doc = include_str!("../../../book/src/reduction.md")]
    mod reduction {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
