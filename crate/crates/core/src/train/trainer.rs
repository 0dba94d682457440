use crate::adapter::{Adapter, AdapterKind, HydraAdapter, LoraAdapter};
use crate::diffusion::{
    build_schedule, forward_noise_columns, ldm_loss, ldm_loss_grad, DenoiserConfig, DenoiserParams, LatentBatch,
    NoiseSchedule,
};
use crate::error::{Error, Result};
use crate::tensor::{seeded_gaussian, Matrix, RngState};
use crate::train::checkpoint::{Checkpoint, LogRecord};
use crate::train::{adamw_update, RunConfig, TrainConfig};

// Independent random streams derived from the run seed.
const STREAM_BASE_INIT: u64 = 1;
const STREAM_ADAPTER_INIT: u64 = 2;
const STREAM_TIMESTEPS: u64 = 3;
const STREAM_NOISE: u64 = 4;
const STREAM_SHUFFLE: u64 = 1 << 32;

/// Deterministic random base network standing in for pretrained weights.
pub fn pretrained_stand_in(config: DenoiserConfig, seed: u64) -> Result<DenoiserParams> {
    DenoiserParams::new(config, &mut RngState::with_stream(seed, STREAM_BASE_INIT))
}

/// A freshly initialised adapter for a `d × k` host as described by `config`.
pub fn build_adapter(config: &TrainConfig, d: usize, k: usize, rng: &mut RngState) -> Result<Adapter> {
    Ok(match config.adapter {
        AdapterKind::Lora => Adapter::Lora(LoraAdapter::new(d, k, config.rank, config.alpha, rng)?),
        AdapterKind::Hydra => Adapter::Hydra(HydraAdapter::new(
            d,
            k,
            config.rank,
            config.heads,
            config.alpha,
            config.gate,
            rng,
        )?),
    })
}

/// Live training state: frozen base plus adapters, AdamW moments for adapter
/// tensors only, the step counter and the sampling streams.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: DenoiserParams,
    moments: Vec<(Matrix, Matrix)>,
    pub step: u64,
    timestep_rng: RngState,
    noise_rng: RngState,
}

impl TrainState {
    /// Attaches fresh adapters to `base` per `config.placement`.
    pub fn new(base: &DenoiserParams, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut params = base.without_adapters();
        let mut rng = RngState::with_stream(config.seed, STREAM_ADAPTER_INIT);
        params.attach_adapters(&config.placement, |d, k| build_adapter(config, d, k, &mut rng))?;
        let moments = params
            .trainable_params()
            .iter()
            .map(|p| (Matrix::zeros(p.rows(), p.cols()), Matrix::zeros(p.rows(), p.cols())))
            .collect();
        Ok(Self {
            params,
            moments,
            step: 0,
            timestep_rng: RngState::with_stream(config.seed, STREAM_TIMESTEPS),
            noise_rng: RngState::with_stream(config.seed, STREAM_NOISE),
        })
    }

    /// Number of tensors carrying optimiser moments.
    pub fn moment_count(&self) -> usize {
        self.moments.len()
    }

    pub fn checkpoint(&self, config: &RunConfig) -> Checkpoint {
        Checkpoint::from_params(&self.params, config)
    }
}

/// One optimisation step on `batch`; returns the batch loss before the update.
pub fn train_step(
    batch: &LatentBatch,
    state: &mut TrainState,
    sched: &NoiseSchedule,
    config: &TrainConfig,
) -> Result<f64> {
    let step = state.step + 1;
    let n = batch.len();
    let ts: Vec<usize> = (0..n)
        .map(|_| state.timestep_rng.int_inclusive(1, sched.timesteps()))
        .collect();
    let eps = seeded_gaussian(batch.z.rows(), n, 0.0, 1.0, &mut state.noise_rng)?;
    let z_t = forward_noise_columns(&batch.z, &ts, &eps, sched)?;
    let (eps_hat, cache) = state.params.forward_cached(&z_t, &ts, &batch.classes)?;
    let loss = ldm_loss(&eps, &eps_hat)?;
    if !loss.is_finite() {
        return Err(Error::Training {
            step,
            msg: format!("non-finite loss {loss}"),
        });
    }
    let mut grads = state
        .params
        .backward(&cache, &ldm_loss_grad(&eps, &eps_hat)?)?
        .into_flat();

    if let Some(max_norm) = config.max_grad_norm {
        let norm = grads.iter().map(|g| g.frobenius().powi(2)).sum::<f64>().sqrt();
        if norm > max_norm {
            let factor = max_norm / norm;
            for g in &mut grads {
                *g = g.scale(factor);
            }
        }
    }

    let hp = config.adamw();
    let params = state.params.trainable_params_mut();
    for ((param, grad), (m, v)) in params.into_iter().zip(&grads).zip(&mut state.moments) {
        adamw_update(param, grad, m, v, step, &hp)?;
    }
    state.step = step;
    Ok(loss)
}

pub struct TrainOutcome {
    pub initial: TrainState,
    pub state: TrainState,
    pub log: Vec<LogRecord>,
}

impl TrainOutcome {
    pub fn losses(&self) -> Vec<f64> {
        self.log.iter().map(|r| r.loss).collect()
    }
}

/// Runs `config.train.epochs` passes over `dataset` starting from `base`.
///
/// Each epoch visits samples in a permutation drawn from `(seed, epoch)` and
/// groups them into batches of `batch_size`; a short final batch is kept.
pub fn train(base: &DenoiserParams, config: &RunConfig, dataset: &[LatentBatch]) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    config.validate()?;
    let tc = &config.train;
    let sched = build_schedule(tc.schedule, tc.timesteps)?;
    let initial = TrainState::new(base, tc)?;
    let mut state = initial.clone();
    let mut log = Vec::new();
    for epoch in 0..tc.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        RngState::with_stream(tc.seed, STREAM_SHUFFLE + epoch as u64).shuffle(&mut order);
        for chunk in order.chunks(tc.batch_size) {
            let parts: Vec<&LatentBatch> = chunk.iter().map(|&i| &dataset[i]).collect();
            let batch = LatentBatch::collate(&parts)?;
            let loss = train_step(&batch, &mut state, &sched, tc)?;
            log.push(LogRecord {
                step: state.step,
                loss,
                epoch: epoch + 1,
            });
        }
    }
    Ok(TrainOutcome {
        initial,
        state,
        log,
    })
}

/// `true` iff every base tensor of `after` is bitwise identical to `before`.
pub fn freeze_audit(before: &DenoiserParams, after: &DenoiserParams) -> Result<bool> {
    let a = before.base_tensors();
    let b = after.base_tensors();
    if a.len() != b.len() {
        return Err(Error::Audit(format!(
            "topology mismatch: {} vs {} base tensors",
            a.len(),
            b.len()
        )));
    }
    let mut identical = true;
    for ((na, ta), (nb, tb)) in a.iter().zip(&b) {
        if na != nb || ta.shape() != tb.shape() {
            return Err(Error::Audit(format!(
                "topology mismatch: {na} {:?} vs {nb} {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        identical &= ta.to_le_bytes() == tb.to_le_bytes();
    }
    Ok(identical)
}
