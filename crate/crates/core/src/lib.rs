//! Multi-head low-rank adaptation (shared down-projection, several gated
//! up-projection heads) applied to a small latent-diffusion denoiser.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense row-major `f64` matrices and a counter-based RNG.
//! - [`adapter`]: LoRA / multi-head adapters, gating, merging, analytic
//!   gradients and the binary adapter blob format.
//! - [`diffusion`]: noise schedules, forward noising, the toy denoiser and
//!   the synthetic latent dataset.
//! - [`train`]: AdamW, the frozen-base training loop and checkpoints.
//! - [`curation`]: clip segmentation, proxy scorers, the weighted selection
//!   rule and manifest I/O.
//! - [`eval`]: metric aggregation, comparison tables and the head-count
//!   ablation driver.
//! - [`gradcheck`]: finite-difference verification used by the CLI.

pub mod adapter;
pub mod curation;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
