use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::{Matrix, RngState};

/// A batch of flattened latents, one sample per column.
///
/// Each column holds `frames × channels` values laid out frame-major
/// (`index = frame * channels + channel`).
#[derive(Clone, Debug, PartialEq)]
pub struct LatentBatch {
    pub z: Matrix,
    pub classes: Vec<usize>,
    pub frames: usize,
    pub channels: usize,
}

impl LatentBatch {
    pub fn new(z: Matrix, classes: Vec<usize>, frames: usize, channels: usize) -> Result<Self> {
        if z.rows() != frames * channels {
            return Err(Error::param(format!(
                "latent has {} rows, expected {frames}x{channels}",
                z.rows()
            )));
        }
        if classes.len() != z.cols() {
            return Err(Error::param(format!(
                "{} labels for {} samples",
                classes.len(),
                z.cols()
            )));
        }
        if !z.is_finite() {
            return Err(Error::Validation("latent batch contains non-finite values".into()));
        }
        Ok(Self {
            z,
            classes,
            frames,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.z.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.z.cols() == 0
    }

    /// Concatenates batches column-wise.
    pub fn collate(parts: &[&LatentBatch]) -> Result<LatentBatch> {
        let first = parts
            .first()
            .ok_or_else(|| Error::param("cannot collate zero batches"))?;
        for p in parts {
            if (p.frames, p.channels) != (first.frames, first.channels) {
                return Err(Error::param("collating batches with different latent layouts"));
            }
        }
        let zs: Vec<&Matrix> = parts.iter().map(|p| &p.z).collect();
        let classes = parts.iter().flat_map(|p| p.classes.iter().copied()).collect();
        Ok(LatentBatch {
            z: Matrix::hstack(&zs)?,
            classes,
            frames: first.frames,
            channels: first.channels,
        })
    }
}

/// Noise-free latent for one class: a sinusoid over frames whose phase is
/// set by the class, with a quarter-period shift per channel.
fn class_pattern(class: usize, num_classes: usize, frames: usize, channels: usize) -> Vec<f64> {
    let phase = 2.0 * PI * class as f64 / num_classes as f64;
    let mut out = Vec::with_capacity(frames * channels);
    for f in 0..frames {
        for c in 0..channels {
            let x = 2.0 * PI * f as f64 / frames as f64 + phase + c as f64 * PI / 2.0;
            out.push(x.sin());
        }
    }
    out
}

/// Synthetic stand-in for an encoded video dataset: one single-sample batch
/// per item, ordered sample-major (`class` cycles fastest).
pub fn make_toy_dataset(
    num_classes: usize,
    samples_per_class: usize,
    frames: usize,
    channels: usize,
    jitter: f64,
    seed: u64,
) -> Result<Vec<LatentBatch>> {
    if num_classes == 0 || samples_per_class == 0 || frames == 0 || channels == 0 {
        return Err(Error::param("toy dataset counts must all be >= 1"));
    }
    if !(jitter >= 0.0) {
        return Err(Error::param(format!("jitter must be >= 0, got {jitter}")));
    }
    let patterns: Vec<Vec<f64>> = (0..num_classes)
        .map(|c| class_pattern(c, num_classes, frames, channels))
        .collect();
    let mut rng = RngState::with_stream(seed, 0x7079);
    let mut out = Vec::with_capacity(num_classes * samples_per_class);
    for _ in 0..samples_per_class {
        for (class, pattern) in patterns.iter().enumerate() {
            let values = pattern
                .iter()
                .map(|v| v + jitter * rng.standard_normal())
                .collect();
            let z = Matrix::new(frames * channels, 1, values)?;
            out.push(LatentBatch::new(z, vec![class], frames, channels)?);
        }
    }
    Ok(out)
}

/// Smallest RMS distance between the empirical means of any two classes.
/// `None` with fewer than two classes present.
pub fn class_separation(dataset: &[LatentBatch]) -> Option<f64> {
    let dim = dataset.first()?.z.rows();
    let num_classes = dataset.iter().flat_map(|b| b.classes.iter()).max()? + 1;
    let mut sums = vec![vec![0.0; dim]; num_classes];
    let mut counts = vec![0usize; num_classes];
    for batch in dataset {
        for (j, &class) in batch.classes.iter().enumerate() {
            counts[class] += 1;
            for (r, s) in sums[class].iter_mut().enumerate() {
                *s += batch.z.get(r, j);
            }
        }
    }
    let means: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0)
        .map(|(s, &n)| s.into_iter().map(|v| v / n as f64).collect())
        .collect();
    let mut best: Option<f64> = None;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            let ms = means[i]
                .iter()
                .zip(&means[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / dim as f64;
            let d = ms.sqrt();
            best = Some(best.map_or(d, |b| b.min(d)));
        }
    }
    best
}
