//! Resolvent-based decay certificates for shear-flow drift-diffusion
//! operators `-∂²ᵧ + iu(y)` on the torus, with Weierstrass-type shears.

pub mod banded;
pub mod bench;
pub mod error;
pub mod expm;
pub mod geometry;
pub mod lanczos;
pub mod par;
pub mod profile;
pub mod quadrature;
pub mod search;
pub mod semigroup;
pub mod spectral;

pub use bench::{FitResult, SweepRecord};
pub use error::{Error, Result};
pub use geometry::{Order, PhiBound, WindowFit};
pub use profile::{ProfileMode, ProfileSpec, ShearProfile};
pub use spectral::{OperatorDisc, SpectralResult};
pub use semigroup::{DecayCurve, EvolutionOperator, Variant};
