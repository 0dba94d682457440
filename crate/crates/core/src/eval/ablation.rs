use rayon::prelude::*;

use crate::diffusion::{
    build_schedule, denoise_predict, forward_noise_columns, ldm_loss, make_toy_dataset, LatentBatch,
};
use crate::error::{Error, Result};
use crate::eval::{Column, ReportTable};
use crate::tensor::{Matrix, RngState};
use crate::train::{pretrained_stand_in, train, RunConfig, TrainOutcome};

// Fixed streams so every row is scored on the same noisy inputs.
const STREAM_EVAL_TIMESTEPS: u64 = 5;
const STREAM_EVAL_NOISE: u64 = 6;
// Offsets the held-out seed away from the training set's seed.
const HELDOUT_SEED_OFFSET: u64 = 0x4845_4c44;
const HELDOUT_SAMPLES_PER_CLASS: usize = 8;

/// Held-out samples drawn from the same class patterns as the training set
/// with independent jitter.
pub fn heldout_set(cfg: &RunConfig) -> Result<LatentBatch> {
    let items = make_toy_dataset(
        cfg.model.num_classes,
        HELDOUT_SAMPLES_PER_CLASS,
        cfg.model.frames,
        cfg.model.channels,
        cfg.data.jitter,
        cfg.train.seed.wrapping_add(HELDOUT_SEED_OFFSET),
    )?;
    let parts: Vec<&LatentBatch> = items.iter().collect();
    LatentBatch::collate(&parts)
}

/// Desk-scale quality metrics for an ablation row: the mean training loss
/// over the last tenth of steps and the denoising error on held-out data.
#[derive(Clone, Debug)]
pub struct DenoisingMetric {
    pub heldout: LatentBatch,
}

impl DenoisingMetric {
    pub fn columns() -> Vec<Column> {
        vec![Column::lower("final_loss"), Column::lower("heldout_mse")]
    }

    pub fn evaluate(&self, cfg: &RunConfig, outcome: &TrainOutcome) -> Result<Vec<f64>> {
        let losses = outcome.losses();
        if losses.is_empty() {
            return Err(Error::Report("no training steps were run".into()));
        }
        let window = (losses.len() / 10).max(1);
        let tail = &losses[losses.len() - window..];
        let final_loss = tail.iter().sum::<f64>() / window as f64;

        let sched = build_schedule(cfg.train.schedule, cfg.train.timesteps)?;
        let z0 = &self.heldout.z;
        let mut t_rng = RngState::with_stream(cfg.train.seed, STREAM_EVAL_TIMESTEPS);
        let ts: Vec<usize> = (0..z0.cols())
            .map(|_| t_rng.int_inclusive(1, cfg.train.timesteps))
            .collect();
        let mut n_rng = RngState::with_stream(cfg.train.seed, STREAM_EVAL_NOISE);
        let eps = Matrix::new(z0.rows(), z0.cols(), (0..z0.len()).map(|_| n_rng.standard_normal()).collect())?;
        let z_t = forward_noise_columns(z0, &ts, &eps, &sched)?;
        let eps_hat = denoise_predict(&z_t, &ts, &self.heldout.classes, &outcome.state.params)?;
        Ok(vec![final_loss, ldm_loss(&eps, &eps_hat)?])
    }
}

/// Trains one adapter per head count with everything else held fixed and
/// scores each with `metric`. A failing row is recorded and the rest still
/// run; rows keep the order of `heads`.
pub fn ablation_run<F>(
    base_cfg: &RunConfig,
    heads: &[usize],
    dataset: &[LatentBatch],
    columns: Vec<Column>,
    metric: F,
) -> Result<ReportTable>
where
    F: Fn(&RunConfig, &TrainOutcome) -> Result<Vec<f64>> + Sync,
{
    if heads.is_empty() {
        return Err(Error::param("ablation needs at least one head count"));
    }
    if let Some(&n) = heads.iter().find(|&&n| n == 0) {
        return Err(Error::param(format!("head count must be >= 1, got {n}")));
    }
    let base = pretrained_stand_in(base_cfg.model.clone(), base_cfg.train.seed)?;
    let results: Vec<Result<Vec<f64>>> = heads
        .par_iter()
        .map(|&n| {
            let mut cfg = base_cfg.clone();
            cfg.train.heads = n;
            let outcome = train(&base, &cfg, dataset)?;
            metric(&cfg, &outcome)
        })
        .collect();
    let mut table = ReportTable::new("heads", columns);
    for (&n, res) in heads.iter().zip(results) {
        let label = format!("N={n}");
        match res.and_then(|values| table.push_row(&label, values)) {
            Ok(()) => {}
            Err(e) => table.push_failed(&label, &e.to_string()),
        }
    }
    Ok(table)
}

/// Ablation over `heads` on the dataset and held-out split described by `cfg`.
pub fn default_ablation(cfg: &RunConfig, heads: &[usize]) -> Result<ReportTable> {
    let dataset = cfg.dataset()?;
    let metric = DenoisingMetric { heldout: heldout_set(cfg)? };
    ablation_run(cfg, heads, &dataset, DenoisingMetric::columns(), |c, o| metric.evaluate(c, o))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::{AdapterKind, GateMode};
    use crate::eval::ReportFormat;

    fn small_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.data.samples_per_class = 8;
        cfg.train.batch_size = 8;
        cfg.train.rank = 4;
        cfg.train.alpha = 4.0;
        cfg.train.learning_rate = 1e-3;
        cfg
    }

    #[test]
    fn rows_follow_requested_order_and_repeat_exactly() {
        let cfg = small_cfg();
        let a = default_ablation(&cfg, &[4, 2]).unwrap();
        let labels: Vec<_> = a.rows().iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["N=4", "N=2"]);
        assert!(a.failed_rows().is_empty());
        let b = default_ablation(&cfg, &[4, 2]).unwrap();
        assert_eq!(a.render(ReportFormat::Csv), b.render(ReportFormat::Csv));
    }

    #[test]
    fn single_fixed_head_matches_plain_lora() {
        let mut cfg = small_cfg();
        cfg.train.gate = GateMode::FixedUniform;
        let hydra = default_ablation(&cfg, &[1]).unwrap();
        cfg.train.adapter = AdapterKind::Lora;
        let lora = default_ablation(&cfg, &[1]).unwrap();
        assert_eq!(hydra.rows()[0].values, lora.rows()[0].values);
    }

    #[test]
    fn failing_row_does_not_stop_others() {
        let cfg = small_cfg();
        let dataset = cfg.dataset().unwrap();
        let t = ablation_run(&cfg, &[1, 2, 3], &dataset, vec![Column::lower("x")], |c, o| {
            if c.train.heads == 2 {
                Err(Error::Report("boom".into()))
            } else {
                Ok(vec![o.losses()[0]])
            }
        })
        .unwrap();
        assert_eq!(t.failed_rows().len(), 1);
        assert_eq!(t.failed_rows()[0].label, "N=2");
        assert_eq!(t.rows().len(), 3);
    }

    #[test]
    fn bad_head_lists() {
        let cfg = small_cfg();
        assert!(default_ablation(&cfg, &[]).is_err());
        assert!(default_ablation(&cfg, &[2, 0]).is_err());
    }
}
