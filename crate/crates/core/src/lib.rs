//! Pseudo-spectral workbench for the incompressible Hall-MHD system written
//! in the extended `(u, B, J)` unknowns.
//!
//! The crate realizes the mild-solution (Duhamel/Picard) construction on a
//! periodic torus and measures the Besov-Morrey norms in which that
//! construction contracts.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod fft;
pub mod field;
pub mod grid;
pub mod hall;
pub mod io;
pub mod lp;
pub mod ops;
pub mod random;
pub mod solver;
pub mod trajectory;
pub mod verification;

#[cfg(test)]
#[global_allocator]
static TEST_ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

pub use error::{Error, Result};
pub use field::{ScalarField, VectorField};
pub use grid::GridSpec;
