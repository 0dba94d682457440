use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::curation::{MAX_CLIP_SECONDS, MIN_CLIP_SECONDS};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.7;
pub const DEFAULT_THETA: f64 = 10.0;

/// Weighted score and the keep decision. The boundary `score == theta` keeps.
pub fn select(s_opt: f64, s_aes: f64, alpha: f64, theta: f64) -> (f64, bool) {
    let s = alpha * s_opt + (1.0 - alpha) * s_aes;
    (s, s >= theta)
}

fn q6(v: f64) -> f64 {
    format!("{v:.6}").parse().expect("formatted float parses")
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub source_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub duration_s: f64,
    pub s_optical: f64,
    pub s_aesthetic: f64,
    pub s: f64,
    pub selected: bool,
    pub caption: Option<String>,
}

impl ClipRecord {
    /// Builds a record at manifest precision: component scores are rounded to
    /// 6 decimals first so the combined score can be recomputed from the
    /// stored values.
    #[allow(clippy::too_many_arguments)]
    pub fn scored(
        clip_id: String,
        source_id: String,
        (start_frame, end_frame): (usize, usize),
        fps: f64,
        s_optical: f64,
        s_aesthetic: f64,
        alpha: f64,
        theta: f64,
    ) -> Self {
        let s_optical = q6(s_optical);
        let s_aesthetic = q6(s_aesthetic);
        let (s, _) = select(s_optical, s_aesthetic, alpha, theta);
        let s = q6(s);
        Self {
            clip_id,
            source_id,
            start_frame,
            end_frame,
            duration_s: q6((end_frame - start_frame) as f64 / fps),
            s_optical,
            s_aesthetic,
            s,
            selected: s >= theta,
            caption: None,
        }
    }

    pub fn to_line(&self) -> String {
        let caption = match &self.caption {
            Some(c) => serde_json::to_string(c).expect("string serializes"),
            None => "null".into(),
        };
        format!(
            "{{\"clip_id\":{},\"source_id\":{},\"start_frame\":{},\"end_frame\":{},\"duration_s\":{:.6},\"s_optical\":{:.6},\"s_aesthetic\":{:.6},\"s\":{:.6},\"selected\":{},\"caption\":{}}}",
            serde_json::to_string(&self.clip_id).expect("string serializes"),
            serde_json::to_string(&self.source_id).expect("string serializes"),
            self.start_frame,
            self.end_frame,
            self.duration_s,
            self.s_optical,
            self.s_aesthetic,
            self.s,
            self.selected,
            caption
        )
    }
}

fn duration_ok(d: f64) -> bool {
    d.is_finite() && (MIN_CLIP_SECONDS - 1e-9..=MAX_CLIP_SECONDS + 1e-9).contains(&d)
}

/// Full record check, including recomputing the weighted score and the keep
/// decision for the given weight and threshold.
pub fn validate_records(records: &[ClipRecord], alpha: f64, theta: f64) -> Result<()> {
    let mut bad = Vec::new();
    for r in records {
        let (s, _) = select(r.s_optical, r.s_aesthetic, alpha, theta);
        if !duration_ok(r.duration_s) || q6(s) != r.s || r.selected != (r.s >= theta) {
            bad.push(r.clip_id.as_str());
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(format!("invalid clip records: {}", bad.join(", "))))
    }
}

/// Writes one JSON object per line and returns the number of records.
pub fn build_manifest(records: &[ClipRecord], out: &Path) -> Result<usize> {
    let bad: Vec<&str> = records
        .iter()
        .filter(|r| !duration_ok(r.duration_s))
        .map(|r| r.clip_id.as_str())
        .collect();
    if !bad.is_empty() {
        return Err(Error::Validation(format!(
            "clip duration outside [{MIN_CLIP_SECONDS}, {MAX_CLIP_SECONDS}] s: {}",
            bad.join(", ")
        )));
    }
    let mut text = String::new();
    for r in records {
        writeln!(text, "{}", r.to_line()).expect("write to string");
    }
    fs::write(out, text).map_err(|e| Error::io(out, e))?;
    Ok(records.len())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ClipRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}
