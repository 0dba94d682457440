use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

// Header suffix that marks a lower-is-better column in csv output.
const LOWER_SUFFIX: &str = ":lower";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub direction: Direction,
}

impl Column {
    pub fn higher(name: &str) -> Self {
        Self { name: name.into(), direction: Direction::HigherIsBetter }
    }

    pub fn lower(name: &str) -> Self {
        Self { name: name.into(), direction: Direction::LowerIsBetter }
    }

    fn csv_header(&self) -> String {
        match self.direction {
            Direction::HigherIsBetter => self.name.clone(),
            Direction::LowerIsBetter => format!("{}{LOWER_SUFFIX}", self.name),
        }
    }
}

/// A failed row keeps its label and error and has no values.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub label: String,
    pub values: Vec<f64>,
    pub error: Option<String>,
}

impl Row {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "txt" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!("unknown report format '{other}' (expected text or csv)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportTable {
    label_header: String,
    columns: Vec<Column>,
    rows: Vec<Row>,
}

fn q6(v: f64) -> f64 {
    format!("{v:.6}").parse().expect("formatted float parses")
}

impl ReportTable {
    pub fn new(label_header: &str, columns: Vec<Column>) -> Self {
        Self { label_header: label_header.into(), columns, rows: Vec::new() }
    }

    pub fn label_header(&self) -> &str {
        &self.label_header
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn push_row(&mut self, label: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::Report(format!(
                "row '{label}' has {} values for {} columns",
                values.len(),
                self.columns.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("row '{label}' has a non-finite value")));
        }
        self.rows.push(Row { label: label.into(), values, error: None });
        Ok(())
    }

    pub fn push_failed(&mut self, label: &str, error: &str) {
        self.rows.push(Row { label: label.into(), values: Vec::new(), error: Some(error.into()) });
    }

    /// Per-row flags for column `col`: set on every successful row whose value
    /// equals the column optimum, so ties are all marked. Values are compared
    /// at the 6-decimal reporting precision, so rendered ties are real ties.
    pub fn best_rows(&self, col: usize) -> Vec<bool> {
        let dir = self.columns[col].direction;
        let best = self
            .rows
            .iter()
            .filter(|r| !r.failed())
            .map(|r| q6(r.values[col]))
            .reduce(|a, b| match dir {
                Direction::HigherIsBetter => a.max(b),
                Direction::LowerIsBetter => a.min(b),
            });
        self.rows
            .iter()
            .map(|r| !r.failed() && Some(q6(r.values[col])) == best)
            .collect()
    }

    pub fn best_labels(&self, col: usize) -> Vec<&str> {
        self.rows
            .iter()
            .zip(self.best_rows(col))
            .filter(|(_, b)| *b)
            .map(|(r, _)| r.label.as_str())
            .collect()
    }

    pub fn failed_rows(&self) -> Vec<&Row> {
        self.rows.iter().filter(|r| r.failed()).collect()
    }

    /// The table as it reads back from rendered output: values rounded to 6
    /// decimals.
    pub fn quantized(&self) -> Self {
        let mut out = self.clone();
        for row in &mut out.rows {
            for v in &mut row.values {
                *v = q6(*v);
            }
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Text => self.render_text(),
            ReportFormat::Csv => self.render_csv(),
        }
    }

    fn render_text(&self) -> String {
        let label_w = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .chain([self.label_header.len()])
            .max()
            .unwrap_or(0);
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.values.iter().map(|v| format!("{v:.6}")).collect()).collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|c| {
                cells
                    .iter()
                    .filter_map(|row| row.get(c).map(String::len))
                    .chain([self.columns[c].name.len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let best: Vec<Vec<bool>> = (0..self.columns.len()).map(|c| self.best_rows(c)).collect();

        let mut out = String::new();
        let mut line = format!("{:<label_w$}", self.label_header);
        for (col, w) in self.columns.iter().zip(&widths) {
            write!(line, "  {:>w$} ", col.name).unwrap();
        }
        out.push_str(line.trim_end());
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let mut line = format!("{:<label_w$}", row.label);
            match &row.error {
                Some(err) => write!(line, "  failed: {err}").unwrap(),
                None => {
                    for (c, w) in widths.iter().enumerate() {
                        let mark = if best[c][i] { '*' } else { ' ' };
                        write!(line, "  {:>w$}{mark}", cells[i][c]).unwrap();
                    }
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        if !self.rows.is_empty() {
            out.push_str("* best in column");
            let lower: Vec<&str> = self
                .columns
                .iter()
                .filter(|c| c.direction == Direction::LowerIsBetter)
                .map(|c| c.name.as_str())
                .collect();
            if !lower.is_empty() {
                write!(out, "; lower is better for {}", lower.join(", ")).unwrap();
            }
            out.push('\n');
        }
        out
    }

    fn render_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.label_header.clone()];
        header.extend(self.columns.iter().map(Column::csv_header));
        header.extend(self.columns.iter().map(|c| format!("best_{}", c.name)));
        header.push("error".into());
        w.write_record(&header).expect("in-memory csv write");
        let best: Vec<Vec<bool>> = (0..self.columns.len()).map(|c| self.best_rows(c)).collect();
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![row.label.clone()];
            if row.failed() {
                rec.extend(std::iter::repeat_n(String::new(), self.columns.len()));
            } else {
                rec.extend(row.values.iter().map(|v| format!("{v:.6}")));
            }
            rec.extend(best.iter().map(|b| b[i].to_string()));
            rec.push(row.error.clone().unwrap_or_default());
            w.write_record(&rec).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
    }

    /// Parses csv produced by `render`. Stored best flags must agree with the
    /// values.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Format(format!("report csv: {msg}"));
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.len() < 2 || header.last().map(String::as_str) != Some("error") {
            return Err(bad("expected a label column first and an error column last".into()));
        }
        let metric_cells = &header[1..header.len() - 1];
        if !metric_cells.len().is_multiple_of(2) {
            return Err(bad("metric and best_ columns must pair up".into()));
        }
        let k = metric_cells.len() / 2;
        let columns: Vec<Column> = metric_cells[..k]
            .iter()
            .map(|h| match h.strip_suffix(LOWER_SUFFIX) {
                Some(name) => Column::lower(name),
                None => Column::higher(h),
            })
            .collect();
        for (col, best) in columns.iter().zip(&metric_cells[k..]) {
            if *best != format!("best_{}", col.name) {
                return Err(bad(format!("expected best_{}, found {best}", col.name)));
            }
        }
        let mut table = Self::new(&header[0], columns);
        let mut flags = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| bad(format!("line {line}: {e}")))?;
            let label = &rec[0];
            let error = &rec[header.len() - 1];
            if error.is_empty() {
                let values = (1..=k)
                    .map(|c| rec[c].parse::<f64>().map_err(|_| bad(format!("line {line}: bad number '{}'", &rec[c]))))
                    .collect::<Result<Vec<_>>>()?;
                table.push_row(label, values)?;
            } else {
                table.push_failed(label, error);
            }
            let row_flags = (k + 1..=2 * k)
                .map(|c| rec[c].parse::<bool>().map_err(|_| bad(format!("line {line}: bad flag '{}'", &rec[c]))))
                .collect::<Result<Vec<_>>>()?;
            flags.push(row_flags);
        }
        for c in 0..k {
            let recomputed = table.best_rows(c);
            if flags.iter().map(|f| f[c]).ne(recomputed.iter().copied()) {
                return Err(bad(format!("best_{} flags disagree with values", table.columns[c].name)));
            }
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> ReportTable {
        let mut t = ReportTable::new("heads", vec![Column::higher("score"), Column::lower("loss")]);
        t.push_row("N=1", vec![1.5, 0.25]).unwrap();
        t.push_row("N=2", vec![2.0, 0.5]).unwrap();
        t.push_failed("N=3", "diverged at step 4");
        t.push_row("N=4", vec![2.0, 0.125]).unwrap();
        t
    }

    #[test]
    fn ties_and_directions() {
        let t = sample();
        assert_eq!(t.best_labels(0), ["N=2", "N=4"]);
        assert_eq!(t.best_labels(1), ["N=4"]);
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ReportTable::new("method", vec![Column::higher("a")]);
        assert_eq!(t.render(ReportFormat::Text), "method  a\n");
        assert_eq!(t.render(ReportFormat::Csv), "method,a,best_a,error\n");
        assert_eq!(ReportTable::from_csv(&t.render(ReportFormat::Csv)).unwrap(), t);
    }

    #[test]
    fn text_layout() {
        let text = sample().render(ReportFormat::Text);
        let expected = "\
heads     score       loss
N=1    1.500000   0.250000
N=2    2.000000*  0.500000
N=3    failed: diverged at step 4
N=4    2.000000*  0.125000*
* best in column; lower is better for loss
";
        assert_eq!(text, expected);
    }

    #[test]
    fn ties_are_judged_at_reporting_precision() {
        let mut t = ReportTable::new("m", vec![Column::lower("loss")]);
        t.push_row("a", vec![1.2345670001]).unwrap();
        t.push_row("b", vec![1.2345670002]).unwrap();
        assert_eq!(t.best_labels(0), ["a", "b"]);
        assert_eq!(ReportTable::from_csv(&t.render(ReportFormat::Csv)).unwrap(), t.quantized());
    }

    #[test]
    fn csv_roundtrip_with_failures() {
        let t = sample();
        let csv = t.render(ReportFormat::Csv);
        assert!(csv.starts_with("heads,score,loss:lower,best_score,best_loss,error\n"));
        assert_eq!(ReportTable::from_csv(&csv).unwrap(), t.quantized());
    }

    #[test]
    fn tampered_flags_rejected() {
        let csv = sample().render(ReportFormat::Csv).replace("N=1,1.500000,0.250000,false", "N=1,1.500000,0.250000,true");
        assert!(ReportTable::from_csv(&csv).is_err());
    }

    proptest! {
        #[test]
        fn marked_rows_hold_the_column_optimum(vals in proptest::collection::vec(proptest::collection::vec(-5i32..5, 3), 1..8)) {
            let mut t = ReportTable::new("m", vec![Column::higher("a"), Column::lower("b"), Column::higher("c")]);
            for (i, v) in vals.iter().enumerate() {
                t.push_row(&format!("r{i}"), v.iter().map(|&x| x as f64 * 0.5).collect()).unwrap();
            }
            for c in 0..3 {
                let col: Vec<f64> = t.rows().iter().map(|r| r.values[c]).collect();
                let opt = if c == 1 { col.iter().cloned().fold(f64::INFINITY, f64::min) } else { col.iter().cloned().fold(f64::NEG_INFINITY, f64::max) };
                for (v, b) in col.iter().zip(t.best_rows(c)) {
                    prop_assert_eq!(b, *v == opt);
                }
            }
            let csv = t.render(ReportFormat::Csv);
            prop_assert_eq!(ReportTable::from_csv(&csv).unwrap(), t.quantized());
        }
    }
}
