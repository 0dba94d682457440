//! Central-difference verification of the hand-written adapter and network
//! gradients.

use std::fmt;

use crate::adapter::{adapted_forward, adapter_backward, Adapter, GateMode, HydraAdapter, LoraAdapter};
use crate::diffusion::{ldm_loss, ldm_loss_grad, DenoiserConfig, DenoiserParams};
use crate::error::{Error, Result};
use crate::tensor::{seeded_gaussian, Matrix, RngState};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
// Relative error denominator floor, for entries whose gradient is ~0.
const REL_FLOOR: f64 = 1e-6;

/// Deliberate gradient bugs, used to confirm the check can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Shared-matrix gradient that ignores the gate weights.
    UngatedSharedGrad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GradCheckSizes {
    pub d: usize,
    pub k: usize,
    pub rank: usize,
    pub heads: usize,
    pub model_dim: usize,
}

impl Default for GradCheckSizes {
    fn default() -> Self {
        Self { d: 4, k: 4, rank: 2, heads: 3, model_dim: 8 }
    }
}

impl std::str::FromStr for GradCheckSizes {
    type Err = Error;

    /// `d,k,rank,heads,model_dim`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("sizes must be five integers d,k,rank,heads,model_dim, got '{s}'")))?;
        match parts[..] {
            [d, k, rank, heads, model_dim] => Ok(Self { d, k, rank, heads, model_dim }),
            _ => Err(Error::Config(format!("sizes must be five integers d,k,rank,heads,model_dim, got '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub seed: u64,
    pub instances: usize,
    pub sizes: GradCheckSizes,
    pub step: f64,
    pub tolerance: f64,
    pub fault: Option<Fault>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 10,
            sizes: GradCheckSizes::default(),
            step: DEFAULT_STEP,
            tolerance: DEFAULT_TOLERANCE,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassReport {
    pub class: String,
    pub checked: usize,
    pub max_rel: f64,
    pub worst: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub classes: Vec<ClassReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.classes.iter().all(|c| c.max_rel <= self.tolerance)
    }

    pub fn worst(&self) -> Option<&ClassReport> {
        self.classes.iter().max_by(|a, b| a.max_rel.total_cmp(&b.max_rel))
    }

    fn record(&mut self, class: &str, rel: f64, location: impl FnOnce() -> String) {
        let idx = match self.classes.iter().position(|c| c.class == class) {
            Some(i) => i,
            None => {
                self.classes.push(ClassReport { class: class.into(), checked: 0, max_rel: 0.0, worst: String::new() });
                self.classes.len() - 1
            }
        };
        let entry = &mut self.classes[idx];
        entry.checked += 1;
        // NaN compares false, so route it through explicitly.
        if rel > entry.max_rel || rel.is_nan() || entry.worst.is_empty() {
            entry.max_rel = if rel.is_nan() { f64::INFINITY } else { rel.max(entry.max_rel) };
            entry.worst = location();
        }
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.classes {
            let status = if c.max_rel <= self.tolerance { "ok" } else { "FAIL" };
            writeln!(
                f,
                "{:<14} {:>5} entries  max_rel={:.3e}  worst={}  {status}",
                c.class, c.checked, c.max_rel, c.worst
            )?;
        }
        Ok(())
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn class_of(param_name: &str) -> &'static str {
    match param_name {
        "A" => "A",
        "logits" => "gate",
        _ => "B",
    }
}

fn random_adapter(i: usize, s: &GradCheckSizes, rng: &mut RngState) -> Result<Adapter> {
    let alpha = 1.5 * s.rank as f64;
    // Every third instance is a plain single-matrix adapter.
    if i % 3 == 2 {
        let mut l = LoraAdapter::new(s.d, s.k, s.rank, alpha, rng)?;
        l.b = seeded_gaussian(s.d, s.rank, 0.0, 1.0, rng)?;
        return Ok(Adapter::Lora(l));
    }
    let mut h = HydraAdapter::new(s.d, s.k, s.rank, s.heads, alpha, GateMode::Learnable, rng)?;
    for b in &mut h.heads {
        *b = seeded_gaussian(s.d, s.rank, 0.0, 1.0, rng)?;
    }
    h.gate.logits = seeded_gaussian(1, s.heads, 0.0, 1.0, rng)?;
    Ok(Adapter::Hydra(h))
}

fn ungated_shared_grad(adapter: &Adapter, x: &Matrix, g: &Matrix) -> Result<Matrix> {
    let (d, _) = adapter.host_shape();
    let mut sum = Matrix::zeros(d, adapter.rank());
    match adapter {
        Adapter::Lora(l) => sum.add_assign(&l.b)?,
        Adapter::Hydra(h) => {
            for b in &h.heads {
                sum.add_assign(b)?;
            }
        }
    }
    Ok(sum.t_matmul(g)?.matmul_t(x)?.scale(adapter.scale()))
}

fn check_adapters(cfg: &GradCheckConfig, report: &mut GradCheckReport) -> Result<()> {
    let s = &cfg.sizes;
    let mut rng = RngState::with_stream(cfg.seed, 1);
    for i in 0..cfg.instances {
        let adapter = random_adapter(i, s, &mut rng)?;
        let x = seeded_gaussian(s.k, 3, 0.0, 1.0, &mut rng)?;
        let w0 = seeded_gaussian(s.d, s.k, 0.0, 1.0, &mut rng)?;
        let g = seeded_gaussian(s.d, 3, 0.0, 1.0, &mut rng)?;
        let mut grads = adapter_backward(&x, &w0, &adapter, &g)?;
        if cfg.fault == Some(Fault::UngatedSharedGrad) {
            grads.a = ungated_shared_grad(&adapter, &x, &g)?;
        }
        let analytic = grads.into_param_grads();
        let probe = |a: &Adapter| -> Result<f64> { adapted_forward(&x, &w0, a)?.dot(&g) };
        let names = adapter.param_names();
        for (p, name) in names.iter().enumerate() {
            for e in 0..adapter.params()[p].len() {
                let mut plus = adapter.clone();
                plus.params_mut()[p].data_mut()[e] += cfg.step;
                let mut minus = adapter.clone();
                minus.params_mut()[p].data_mut()[e] -= cfg.step;
                let numeric = (probe(&plus)? - probe(&minus)?) / (2.0 * cfg.step);
                let rel = relative_error(analytic[p].data()[e], numeric);
                report.record(class_of(name), rel, || format!("instance {i} {name}[{e}]"));
            }
        }
    }
    Ok(())
}

fn check_network(cfg: &GradCheckConfig, report: &mut GradCheckReport) -> Result<()> {
    let s = &cfg.sizes;
    let net_cfg = DenoiserConfig {
        frames: 2,
        channels: 2,
        model_dim: s.model_dim,
        mlp_dim: s.model_dim,
        blocks: 2,
        num_classes: 3,
    };
    let mut rng = RngState::with_stream(cfg.seed, 2);
    let mut params = DenoiserParams::new(net_cfg.clone(), &mut rng)?;
    params.attach_adapters(&["all"], |d, k| {
        let r = s.rank.min(d).min(k);
        let mut h = HydraAdapter::new(d, k, r, s.heads, 1.5 * r as f64, GateMode::Learnable, &mut rng)?;
        for b in &mut h.heads {
            *b = seeded_gaussian(d, r, 0.0, 0.3, &mut rng)?;
        }
        h.gate.logits = seeded_gaussian(1, s.heads, 0.0, 0.5, &mut rng)?;
        Ok(Adapter::Hydra(h))
    })?;

    let batch = 2;
    let z = seeded_gaussian(net_cfg.latent_dim(), batch, 0.0, 1.0, &mut rng)?;
    let ts: Vec<usize> = (0..batch).map(|_| rng.int_inclusive(1, 1000)).collect();
    let classes: Vec<usize> = (0..batch).map(|_| rng.int_inclusive(0, net_cfg.num_classes - 1)).collect();
    let target = seeded_gaussian(z.rows(), z.cols(), 0.0, 1.0, &mut rng)?;
    let loss = |p: &DenoiserParams| -> Result<f64> { ldm_loss(&target, &p.forward(&z, &ts, &classes)?) };

    let (out, cache) = params.forward_cached(&z, &ts, &classes)?;
    let analytic = params.backward(&cache, &ldm_loss_grad(&target, &out)?)?.into_flat();
    let labels = params.trainable_labels();
    for (p, label) in labels.iter().enumerate() {
        let short = label.rsplit('.').next().unwrap_or(label);
        let class = format!("network.{}", class_of(short));
        for e in 0..analytic[p].len() {
            let mut plus = params.clone();
            plus.trainable_params_mut()[p].data_mut()[e] += cfg.step;
            let mut minus = params.clone();
            minus.trainable_params_mut()[p].data_mut()[e] -= cfg.step;
            let numeric = (loss(&plus)? - loss(&minus)?) / (2.0 * cfg.step);
            let rel = relative_error(analytic[p].data()[e], numeric);
            report.record(&class, rel, || format!("{label}[{e}]"));
        }
    }
    Ok(())
}

/// Checks `instances` random adapters of the configured sizes, then every
/// adapter parameter of a 2-block denoiser.
pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let s = &cfg.sizes;
    if [s.d, s.k, s.rank, s.heads, s.model_dim].contains(&0) {
        return Err(Error::param(format!("gradient check sizes must be >= 1, got {s:?}")));
    }
    if s.rank > s.d.min(s.k) {
        return Err(Error::param(format!("rank {} exceeds min(d, k) = {}", s.rank, s.d.min(s.k))));
    }
    if !(cfg.step > 0.0) {
        return Err(Error::param(format!("finite-difference step must be > 0, got {}", cfg.step)));
    }
    let mut report = GradCheckReport { classes: Vec::new(), tolerance: cfg.tolerance };
    check_adapters(cfg, &mut report)?;
    check_network(cfg, &mut report)?;
    Ok(report)
}
