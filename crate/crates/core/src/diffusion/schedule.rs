use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    /// β linearly spaced from 1e-4 to 0.02 inclusive.
    Linear,
    /// Squared-cosine ᾱ curve with offset s = 0.008, β capped at 0.999.
    Cosine,
}

impl ScheduleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::Linear => "linear",
            ScheduleKind::Cosine => "cosine",
        }
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScheduleKind::Linear),
            "cosine" => Ok(ScheduleKind::Cosine),
            other => Err(Error::Config(format!(
                "unknown schedule '{other}' (expected linear|cosine)"
            ))),
        }
    }
}

const LINEAR_BETA_START: f64 = 1e-4;
const LINEAR_BETA_END: f64 = 0.02;
const COSINE_OFFSET: f64 = 0.008;
const COSINE_MAX_BETA: f64 = 0.999;

/// Per-timestep `β_t` and `ᾱ_t = Π_{s≤t} (1 − β_s)`. Timesteps are 1-based
/// in the public API; index `t − 1` in the vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn from_betas(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::param("schedule needs at least one timestep"));
        }
        if let Some((i, b)) = beta.iter().enumerate().find(|(_, &b)| !(b > 0.0 && b < 1.0)) {
            return Err(Error::param(format!("beta[{i}] = {b} outside (0, 1)")));
        }
        let mut alpha_bar = Vec::with_capacity(beta.len());
        let mut acc = 1.0;
        for b in &beta {
            acc *= 1.0 - b;
            alpha_bar.push(acc);
        }
        Ok(Self { beta, alpha_bar })
    }

    pub fn timesteps(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// `ᾱ_t` for `1 ≤ t ≤ T`.
    pub fn alpha_bar_at(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.timesteps() {
            return Err(Error::param(format!(
                "timestep {t} outside 1..={}",
                self.timesteps()
            )));
        }
        Ok(self.alpha_bar[t - 1])
    }
}

pub fn build_schedule(kind: ScheduleKind, timesteps: usize) -> Result<NoiseSchedule> {
    if timesteps == 0 {
        return Err(Error::param("schedule needs T >= 1"));
    }
    let beta = match kind {
        ScheduleKind::Linear if timesteps == 1 => vec![LINEAR_BETA_START],
        ScheduleKind::Linear => (0..timesteps)
            .map(|i| {
                let frac = i as f64 / (timesteps - 1) as f64;
                LINEAR_BETA_START + frac * (LINEAR_BETA_END - LINEAR_BETA_START)
            })
            .collect(),
        ScheduleKind::Cosine => {
            let f = |t: usize| {
                let x = (t as f64 / timesteps as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET);
                (x * PI / 2.0).cos().powi(2)
            };
            (1..=timesteps)
                .map(|t| (1.0 - f(t) / f(t - 1)).min(COSINE_MAX_BETA))
                .collect()
        }
    };
    NoiseSchedule::from_betas(beta)
}

/// `√ᾱ·z₀ + √(1−ᾱ)·ε`.
pub fn noise_with_alpha_bar(z0: &Matrix, alpha_bar: f64, eps: &Matrix) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&alpha_bar) {
        return Err(Error::param(format!("alpha_bar {alpha_bar} outside [0, 1]")));
    }
    let (signal, noise) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    z0.zip_map(eps, "forward_noise", |z, e| signal * z + noise * e)
}

/// Noises every column of `z0` at timestep `t`.
pub fn forward_noise(z0: &Matrix, t: usize, eps: &Matrix, sched: &NoiseSchedule) -> Result<Matrix> {
    noise_with_alpha_bar(z0, sched.alpha_bar_at(t)?, eps)
}

/// Per-column timesteps: column `j` is noised at `ts[j]`.
pub fn forward_noise_columns(
    z0: &Matrix,
    ts: &[usize],
    eps: &Matrix,
    sched: &NoiseSchedule,
) -> Result<Matrix> {
    if z0.shape() != eps.shape() {
        return Err(Error::Shape {
            op: "forward_noise",
            lhs: z0.shape(),
            rhs: eps.shape(),
        });
    }
    if ts.len() != z0.cols() {
        return Err(Error::param(format!(
            "{} timesteps for {} columns",
            ts.len(),
            z0.cols()
        )));
    }
    let coeffs = ts
        .iter()
        .map(|&t| sched.alpha_bar_at(t).map(|a| (a.sqrt(), (1.0 - a).sqrt())))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Matrix::zeros(z0.rows(), z0.cols());
    for r in 0..z0.rows() {
        for (c, (s, n)) in coeffs.iter().enumerate() {
            out.set(r, c, s * z0.get(r, c) + n * eps.get(r, c));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_single_step() {
        let s = build_schedule(ScheduleKind::Linear, 1).unwrap();
        assert_eq!(s.beta(), &[1e-4]);
        assert_eq!(s.alpha_bar(), &[0.9999]);
    }

    #[test]
    fn linear_endpoints_and_tail() {
        let s = build_schedule(ScheduleKind::Linear, 1000).unwrap();
        assert_eq!(s.beta()[0], 1e-4);
        assert!((s.beta()[999] - 0.02).abs() < 1e-15);
        let last = s.alpha_bar()[999];
        assert!(last > 0.0 && last < 0.01, "{last}");
        assert!(s.alpha_bar().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn cosine_monotone() {
        let s = build_schedule(ScheduleKind::Cosine, 10).unwrap();
        let ab = s.alpha_bar();
        assert!(ab[0] > ab[9] && ab[9] > 0.0);
        assert!(ab.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn zero_timesteps_rejected() {
        assert!(build_schedule(ScheduleKind::Linear, 0).is_err());
        assert!(build_schedule(ScheduleKind::Cosine, 0).is_err());
    }

    #[test]
    fn noising_limits_and_value() {
        let z0 = Matrix::from_rows(&[[2.0]]);
        let eps = Matrix::from_rows(&[[4.0]]);
        assert_eq!(noise_with_alpha_bar(&z0, 1.0, &eps).unwrap(), z0);
        assert_eq!(noise_with_alpha_bar(&z0, 0.0, &eps).unwrap(), eps);
        let v = noise_with_alpha_bar(&z0, 0.25, &eps).unwrap().get(0, 0);
        assert!((v - (1.0 + 0.75f64.sqrt() * 4.0)).abs() < 1e-15);
        assert!((v - 4.464_101_615_137_754).abs() < 1e-12);
    }

    #[test]
    fn timestep_range_checked() {
        let s = build_schedule(ScheduleKind::Linear, 10).unwrap();
        let z = Matrix::zeros(2, 2);
        assert!(forward_noise(&z, 0, &z, &s).is_err());
        assert!(forward_noise(&z, 11, &z, &s).is_err());
        assert!(forward_noise(&z, 10, &z, &s).is_ok());
    }

    #[test]
    fn per_column_matches_scalar() {
        let s = build_schedule(ScheduleKind::Linear, 50).unwrap();
        let z0 = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]);
        let eps = Matrix::from_rows(&[[0.5, -0.5], [0.25, 2.0]]);
        let both = forward_noise_columns(&z0, &[7, 42], &eps, &s).unwrap();
        let c0 = forward_noise(&z0.column_block(0, 1), 7, &eps.column_block(0, 1), &s).unwrap();
        let c1 = forward_noise(&z0.column_block(1, 2), 42, &eps.column_block(1, 2), &s).unwrap();
        assert_eq!(both, Matrix::hstack(&[&c0, &c1]).unwrap());
    }
}
