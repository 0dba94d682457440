//! Noise schedules, forward noising, the toy denoiser and its training data.

mod data;
mod denoiser;
mod schedule;

pub use data::{class_separation, make_toy_dataset, LatentBatch};
pub use denoiser::{
    denoise_predict, ldm_loss, ldm_loss_grad, Block, DenoiserConfig, DenoiserParams, ForwardCache,
    Frozen, Linear, NetworkGrads, DEFAULT_PLACEMENT,
};
pub use schedule::{
    build_schedule, forward_noise, forward_noise_columns, noise_with_alpha_bar, NoiseSchedule,
    ScheduleKind,
};
