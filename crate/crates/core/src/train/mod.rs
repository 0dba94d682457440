//! Frozen-base adapter training.
//!
//! Each step samples a timestep per sample and Gaussian noise, noises the
//! clean latents, predicts the noise, and applies AdamW to adapter tensors
//! only. Base weights never receive optimiser state.

mod adamw;
mod checkpoint;
mod config;
mod trainer;

pub use adamw::{adamw_update, AdamWParams};
pub use checkpoint::{read_log, write_log, Checkpoint, LogRecord, CHECKPOINT_FORMAT};
pub use config::{DataConfig, RunConfig, TrainConfig};
pub use trainer::{
    build_adapter, freeze_audit, pretrained_stand_in, train, train_step, TrainOutcome, TrainState,
};
