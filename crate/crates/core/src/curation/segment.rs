use crate::curation::FrameSequence;
use crate::error::{Error, Result};

pub const MIN_CLIP_SECONDS: f64 = 3.0;
pub const MAX_CLIP_SECONDS: f64 = 5.0;

// Absorbs float error in seconds×fps products such as 2.9 * 10.
const FRAME_SLACK: f64 = 1e-9;

/// Greedy partition of `n_frames` into consecutive clips of `max_s` seconds;
/// a trailing remainder is kept only if it lasts at least `min_s`.
/// Returns half-open `(start, end)` frame ranges.
pub fn segment_frames(n_frames: usize, fps: f64, min_s: f64, max_s: f64) -> Result<Vec<(usize, usize)>> {
    if !(fps > 0.0) || !fps.is_finite() {
        return Err(Error::param(format!("fps must be > 0, got {fps}")));
    }
    if !(min_s > 0.0 && min_s <= max_s) {
        return Err(Error::param(format!(
            "clip bounds must satisfy 0 < min ({min_s}) <= max ({max_s})"
        )));
    }
    let max_frames = (max_s * fps + FRAME_SLACK).floor() as usize;
    let min_frames = ((min_s * fps - FRAME_SLACK).ceil() as usize).max(1);
    if max_frames < min_frames {
        return Ok(Vec::new());
    }
    let mut clips = Vec::new();
    let mut start = 0;
    while n_frames - start >= max_frames {
        clips.push((start, start + max_frames));
        start += max_frames;
    }
    if n_frames - start >= min_frames {
        clips.push((start, n_frames));
    }
    Ok(clips)
}

pub fn segment(seq: &FrameSequence, min_s: f64, max_s: f64) -> Result<Vec<(usize, usize)>> {
    if seq.is_empty() {
        return Err(Error::param("cannot segment an empty frame sequence"));
    }
    segment_frames(seq.len(), seq.fps, min_s, max_s)
}
