use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::curation::{
    build_manifest, load_source, segment, ClipRecord, FrameSequence, ScorerRegistry,
    DEFAULT_AESTHETIC_SCORER, DEFAULT_ALPHA, DEFAULT_OPTICAL_SCORER, DEFAULT_THETA,
    MAX_CLIP_SECONDS, MIN_CLIP_SECONDS,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CurationConfig {
    pub alpha: f64,
    pub theta: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub optical_scorer: String,
    pub aesthetic_scorer: String,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            theta: DEFAULT_THETA,
            min_s: MIN_CLIP_SECONDS,
            max_s: MAX_CLIP_SECONDS,
            optical_scorer: DEFAULT_OPTICAL_SCORER.into(),
            aesthetic_scorer: DEFAULT_AESTHETIC_SCORER.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurationReport {
    pub records: Vec<ClipRecord>,
    pub sources: usize,
}

impl CurationReport {
    pub fn selected(&self) -> usize {
        self.records.iter().filter(|r| r.selected).count()
    }
}

struct PendingClip<'a> {
    id: String,
    source_id: String,
    range: (usize, usize),
    seq: &'a FrameSequence,
}

/// Curates every source subdirectory of `input` (sorted by name) and writes
/// the manifest when `manifest_out` is given.
pub fn curate_dir(
    input: &Path,
    manifest_out: Option<&Path>,
    cfg: &CurationConfig,
    registry: &ScorerRegistry,
) -> Result<CurationReport> {
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", cfg.alpha)));
    }
    let optical = registry.get(&cfg.optical_scorer)?;
    let aesthetic = registry.get(&cfg.aesthetic_scorer)?;

    let mut source_dirs = Vec::new();
    for entry in fs::read_dir(input).map_err(|e| Error::io(input, e))? {
        let entry = entry.map_err(|e| Error::io(input, e))?;
        if entry.path().join("meta").is_file() {
            source_dirs.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    if source_dirs.is_empty() {
        return Err(Error::Validation(format!("no sources found in {}", input.display())));
    }
    source_dirs.sort();

    let sequences = source_dirs
        .iter()
        .map(|(name, dir)| {
            load_source(dir).map_err(|e| Error::Validation(format!("source {name}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pending = Vec::new();
    for ((name, _), seq) in source_dirs.iter().zip(&sequences) {
        if seq.is_empty() {
            continue;
        }
        for (i, range) in segment(seq, cfg.min_s, cfg.max_s)?.into_iter().enumerate() {
            pending.push(PendingClip {
                id: format!("{name}/{i:04}"),
                source_id: name.clone(),
                range,
                seq,
            });
        }
    }

    let records = pending
        .par_iter()
        .map(|clip| {
            let frames = &clip.seq.frames[clip.range.0..clip.range.1];
            let named = |e: Error| Error::Validation(format!("clip {}: {e}", clip.id));
            let s_opt = optical.score(frames).map_err(named)?;
            let s_aes = aesthetic.score(frames).map_err(named)?;
            Ok(ClipRecord::scored(
                clip.id.clone(),
                clip.source_id.clone(),
                clip.range,
                clip.seq.fps,
                s_opt,
                s_aes,
                cfg.alpha,
                cfg.theta,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(out) = manifest_out {
        build_manifest(&records, out)?;
    }
    Ok(CurationReport { records, sources: source_dirs.len() })
}
