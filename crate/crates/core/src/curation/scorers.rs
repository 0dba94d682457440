use std::collections::BTreeMap;
use std::sync::Arc;

use crate::curation::Frame;
use crate::error::{Error, Result};

pub const DEFAULT_OPTICAL_SCORER: &str = "luma-diff";
pub const DEFAULT_AESTHETIC_SCORER: &str = "contrast-color";

/// Largest population std-dev of three values in [0, 255], e.g. (255, 0, 0).
const MAX_CHANNEL_STD: f64 = 255.0 * std::f64::consts::SQRT_2 / 3.0;

fn luma(p: [u8; 3]) -> f64 {
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

/// A named per-clip scorer. Implementations must be deterministic; the
/// selection threshold assumes scores on [0, 100].
pub trait ClipScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, frames: &[Frame]) -> Result<f64>;
}

/// Mean absolute luminance change between consecutive frames, on [0, 100].
pub fn optical_score(frames: &[Frame]) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::param(format!(
            "motion score needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    let mut total = 0.0;
    for pair in frames.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if (a.width, a.height) != (b.width, b.height) {
            return Err(Error::Validation("frames differ in size".into()));
        }
        let diff: f64 = a.pixels().zip(b.pixels()).map(|(p, q)| (luma(p) - luma(q)).abs()).sum();
        total += diff / a.pixel_count().max(1) as f64;
    }
    let mean = total / (frames.len() - 1) as f64;
    Ok((mean * 100.0 / 255.0).clamp(0.0, 100.0))
}

fn frame_appeal(frame: &Frame) -> f64 {
    let n = frame.pixel_count().max(1) as f64;
    let lumas: Vec<f64> = frame.pixels().map(luma).collect();
    let mean = lumas.iter().sum::<f64>() / n;
    let contrast = (lumas.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt() / 127.5;

    let colorfulness = frame
        .pixels()
        .map(|p| {
            let m = (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0;
            let var = p.iter().map(|&c| (c as f64 - m).powi(2)).sum::<f64>() / 3.0;
            var.sqrt()
        })
        .sum::<f64>()
        / n
        / MAX_CHANNEL_STD;

    50.0 * contrast.min(1.0) + 50.0 * colorfulness.min(1.0)
}

/// Luminance contrast plus channel-spread colorfulness, averaged over frames,
/// on [0, 100].
pub fn aesthetic_score(frames: &[Frame]) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::param("appearance score needs at least 1 frame"));
    }
    let total: f64 = frames.iter().map(frame_appeal).sum();
    Ok((total / frames.len() as f64).clamp(0.0, 100.0))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LumaDifferenceScorer;

impl ClipScorer for LumaDifferenceScorer {
    fn name(&self) -> &str {
        DEFAULT_OPTICAL_SCORER
    }
    fn score(&self, frames: &[Frame]) -> Result<f64> {
        optical_score(frames)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ContrastColorScorer;

impl ClipScorer for ContrastColorScorer {
    fn name(&self) -> &str {
        DEFAULT_AESTHETIC_SCORER
    }
    fn score(&self, frames: &[Frame]) -> Result<f64> {
        aesthetic_score(frames)
    }
}

#[derive(Clone, Default)]
pub struct ScorerRegistry {
    scorers: BTreeMap<String, Arc<dyn ClipScorer>>,
}

impl ScorerRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_defaults() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(LumaDifferenceScorer));
        reg.register(Arc::new(ContrastColorScorer));
        reg
    }

    /// Replaces any scorer already registered under the same name.
    pub fn register(&mut self, scorer: Arc<dyn ClipScorer>) {
        self.scorers.insert(scorer.name().to_string(), scorer);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ClipScorer>> {
        self.scorers.get(name).cloned().ok_or_else(|| {
            Error::Config(format!(
                "unknown scorer '{name}' (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.scorers.keys().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(v: u8) -> Frame {
        Frame::solid(4, 4, [v, v, v])
    }

    fn checkerboard() -> Frame {
        let mut rgb = Vec::new();
        for y in 0..4 {
            for x in 0..4 {
                let v = if (x + y) % 2 == 0 { 0 } else { 255 };
                rgb.extend_from_slice(&[v, v, v]);
            }
        }
        Frame::new(4, 4, rgb).unwrap()
    }

    #[test]
    fn optical_examples() {
        assert_eq!(optical_score(&[gray(90), gray(90), gray(90)]).unwrap(), 0.0);
        let flicker: Vec<_> = (0..6).map(|i| gray(if i % 2 == 0 { 0 } else { 255 })).collect();
        assert!((optical_score(&flicker).unwrap() - 100.0).abs() < 1e-9);
        assert!((optical_score(&[gray(100), gray(151)]).unwrap() - 20.0).abs() < 1e-9);
        assert!(optical_score(&[gray(1)]).is_err());
    }

    #[test]
    fn aesthetic_examples() {
        assert_eq!(aesthetic_score(&[gray(128), gray(128)]).unwrap(), 0.0);
        assert!((aesthetic_score(&[checkerboard()]).unwrap() - 50.0).abs() < 1e-9);
        // Pure red: luma is flat, channel spread is maximal.
        let red = Frame::solid(3, 3, [255, 0, 0]);
        assert!((aesthetic_score(&[red]).unwrap() - 50.0).abs() < 1e-9);
        assert!(aesthetic_score(&[]).is_err());
    }

    #[test]
    fn registry_lookup() {
        let reg = ScorerRegistry::with_defaults();
        assert_eq!(reg.get("luma-diff").unwrap().name(), "luma-diff");
        assert!(matches!(reg.get("raft-flow"), Err(Error::Config(_))));
    }

    fn frame_strategy() -> impl Strategy<Value = Frame> {
        proptest::collection::vec(any::<u8>(), 3 * 3 * 3).prop_map(|rgb| Frame::new(3, 3, rgb).unwrap())
    }

    proptest! {
        #[test]
        fn scores_stay_in_range(frames in proptest::collection::vec(frame_strategy(), 2..6)) {
            let o = optical_score(&frames).unwrap();
            let a = aesthetic_score(&frames).unwrap();
            prop_assert!((0.0..=100.0).contains(&o));
            prop_assert!((0.0..=100.0).contains(&a));
        }
    }
}
