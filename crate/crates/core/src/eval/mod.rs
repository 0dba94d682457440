//! Metric aggregation, report tables and the adapter head-count ablation.

mod ablation;
mod records;
mod table;

pub use ablation::{ablation_run, default_ablation, heldout_set, DenoisingMetric};
pub use records::{aggregate, parse_metrics, read_metrics, synthetic_records, write_metrics, MetricsRecord, METRIC_NAMES};
pub use table::{Column, Direction, ReportFormat, ReportTable, Row};
