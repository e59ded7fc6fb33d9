//! Band theory of tight-binding crystals whose translation group is a
//! closed surface group, together with the spectral-curve side of the
//! rank-2 parabolic Higgs toy model on the projective line.

// `!(x <= tol)` is used on purpose so that NaN fails tolerance checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod covers_quivers;
pub mod error;
pub mod euclidean;
pub mod higgs_toy;
pub mod momenta;
pub mod poly;
pub mod sampling;
pub mod spectra;
pub mod spectral_curve;
pub mod surface_group;
pub mod tight_binding;
pub mod wire;

pub use error::{Error, ErrorClass, Result};
