//! Dense matrices and deterministic random streams.

mod matrix;
mod rng;

pub use matrix::{axpy, matmul, seeded_gaussian, Matrix};
pub use rng::RngState;
