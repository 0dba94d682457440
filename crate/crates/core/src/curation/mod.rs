//! Clip curation: segment source videos into fixed-length clips, score each
//! clip for motion and visual appeal, keep clips whose weighted score clears
//! a threshold, and write a line-delimited manifest.

mod frames;
mod manifest;
mod pipeline;
mod scorers;
mod segment;

pub use frames::{load_source, write_ppm, Frame, FrameSequence};
pub use manifest::{build_manifest, read_manifest, select, validate_records, ClipRecord, DEFAULT_ALPHA, DEFAULT_THETA};
pub use pipeline::{curate_dir, CurationConfig, CurationReport};
pub use scorers::{
    aesthetic_score, optical_score, ClipScorer, ContrastColorScorer, LumaDifferenceScorer,
    ScorerRegistry, DEFAULT_AESTHETIC_SCORER, DEFAULT_OPTICAL_SCORER,
};
pub use segment::{segment, segment_frames, MAX_CLIP_SECONDS, MIN_CLIP_SECONDS};
