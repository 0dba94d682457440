use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Column, ReportTable};

pub const METRIC_NAMES: [&str; 4] = ["VSVQ", "VSTC", "VSDD", "VSTVA"];

/// Per-video scores from an external video quality model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub method: String,
    pub prompt_id: u32,
    pub sample_id: u32,
    pub vsvq: f64,
    pub vstc: f64,
    pub vsdd: f64,
    pub vstva: f64,
}

impl MetricsRecord {
    pub fn values(&self) -> [f64; 4] {
        [self.vsvq, self.vstc, self.vsdd, self.vstva]
    }
}

/// Parses line-delimited records; blank lines are skipped and errors cite the
/// 1-based line number.
pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Format(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_metrics(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        writeln!(text, "{}", serde_json::to_string(r).expect("record serializes")).expect("write to string");
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

// Sorting first makes the result independent of record order.
fn order_free_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Flat per-method mean over every (prompt, sample) record. Rows follow the
/// order in which methods first appear.
pub fn aggregate(records: &[MetricsRecord]) -> Result<ReportTable> {
    if records.is_empty() {
        return Err(Error::Report("no metric records to aggregate".into()));
    }
    let mut methods: Vec<(&str, Vec<Vec<f64>>)> = Vec::new();
    for r in records {
        if let Some(i) = r.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "record method={} prompt={} sample={} has non-finite {}",
                r.method, r.prompt_id, r.sample_id, METRIC_NAMES[i]
            )));
        }
        let slot = match methods.iter().position(|(m, _)| *m == r.method) {
            Some(i) => i,
            None => {
                methods.push((&r.method, vec![Vec::new(); METRIC_NAMES.len()]));
                methods.len() - 1
            }
        };
        for (col, v) in methods[slot].1.iter_mut().zip(r.values()) {
            col.push(v);
        }
    }
    let mut table = ReportTable::new("method", METRIC_NAMES.iter().map(|n| Column::higher(n)).collect());
    for (method, cols) in methods {
        table.push_row(method, cols.into_iter().map(order_free_mean).collect())?;
    }
    Ok(table)
}

/// Expands per-method target means into `prompts × samples` records whose
/// sample offsets cancel within each prompt, so the per-method means equal
/// the targets up to rounding.
pub fn synthetic_records(rows: &[(&str, [f64; 4])], prompts: u32, samples: u32) -> Vec<MetricsRecord> {
    let centre = (samples as f64 - 1.0) / 2.0;
    let mut out = Vec::new();
    for &(method, means) in rows {
        for p in 0..prompts {
            for s in 0..samples {
                let off = (s as f64 - centre) * 0.01;
                out.push(MetricsRecord {
                    method: method.to_string(),
                    prompt_id: p,
                    sample_id: s,
                    vsvq: means[0] + off,
                    vstc: means[1] - off,
                    vsdd: means[2] + off,
                    vstva: means[3] - off,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(method: &str, v: f64) -> MetricsRecord {
        MetricsRecord { method: method.into(), prompt_id: 0, sample_id: 0, vsvq: v, vstc: v, vsdd: v, vstva: v }
    }

    #[test]
    fn two_records_average() {
        let t = aggregate(&[rec("m", 2.0), rec("m", 4.0)]).unwrap();
        assert_eq!(t.rows()[0].values, vec![3.0; 4]);
    }

    #[test]
    fn first_appearance_order() {
        let t = aggregate(&[rec("b", 1.0), rec("a", 2.0), rec("b", 3.0)]).unwrap();
        let labels: Vec<_> = t.rows().iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["b", "a"]);
    }

    #[test]
    fn errors() {
        assert!(matches!(aggregate(&[]), Err(Error::Report(_))));
        let err = aggregate(&[rec("m", 1.0), rec("bad", f64::NAN)]).unwrap_err();
        assert!(matches!(&err, Error::Validation(m) if m.contains("bad")), "{err}");
        let err = parse_metrics("{\"method\":\"m\"}\n").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let recs = synthetic_records(&[("x", [1.0, 2.0, 3.0, 4.0])], 2, 3);
        write_metrics(&path, &recs).unwrap();
        assert_eq!(read_metrics(&path).unwrap(), recs);
    }

    fn two_pass_mean(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let rough = xs.iter().sum::<f64>() / n;
        rough + xs.iter().map(|x| x - rough).sum::<f64>() / n
    }

    proptest! {
        #[test]
        fn means_match_oracle_and_ignore_order(
            vals in proptest::collection::vec((0usize..3, -10.0f64..10.0), 1..60),
            seed in any::<u64>(),
        ) {
            let recs: Vec<_> = vals.iter().map(|&(m, v)| rec(&format!("m{m}"), v)).collect();
            let table = aggregate(&recs).unwrap();
            for row in table.rows() {
                let xs: Vec<f64> = recs.iter().filter(|r| r.method == row.label).map(|r| r.vsvq).collect();
                prop_assert!((row.values[0] - two_pass_mean(&xs)).abs() <= 1e-12);
            }
            let mut shuffled = recs.clone();
            crate::tensor::RngState::new(seed).shuffle(&mut shuffled);
            let other = aggregate(&shuffled).unwrap();
            for row in table.rows() {
                let twin = other.rows().iter().find(|r| r.label == row.label).unwrap();
                prop_assert_eq!(&twin.values, &row.values);
            }
            for c in 0..4 {
                let mut a = table.best_labels(c);
                let mut b = other.best_labels(c);
                a.sort();
                b.sort();
                prop_assert_eq!(a, b);
            }
        }
    }
}
