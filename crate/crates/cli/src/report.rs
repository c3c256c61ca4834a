//! Versioned CSV reports with per-point rows and `#`-prefixed summary lines.

use crate::error::{CliError, CliResult};

pub const SCHEMA_LINE: &str = "# relu-regions-attack v1";

/// Columns whose values depend on the machine and are excluded from
/// reproducibility comparisons.
pub const TIMING_COLUMNS: &[&str] = &["wall_ms"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub command: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Lines `# key,v1,v2,...` after the rows.
    pub summary: Vec<(String, Vec<String>)>,
}

impl Report {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one column, in row order.
    pub fn values(&self, name: &str) -> Option<Vec<&str>> {
        let k = self.column(name)?;
        Some(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    pub fn summary_line(&self, key: &str) -> Option<&[String]> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_slice())
    }

    pub fn push_summary(&mut self, key: &str, values: Vec<String>) {
        self.summary.push((key.to_string(), values));
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut out = format!("{SCHEMA_LINE}\n# command,{}\n", self.command);
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let body = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
        out.push_str(&String::from_utf8(body).expect("csv output is UTF-8"));
        for (key, values) in &self.summary {
            out.push_str("# ");
            out.push_str(key);
            for v in values {
                out.push(',');
                out.push_str(v);
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(SCHEMA_LINE) {
            return Err(CliError::Usage(
                "not a relu-regions-attack v1 report".into(),
            ));
        }
        let mut report = Report::default();
        let mut table = String::new();
        for line in lines {
            if let Some(rest) = line.strip_prefix("# ") {
                let mut parts = rest.split(',').map(str::to_string);
                let key = parts.next().unwrap_or_default();
                let values: Vec<String> = parts.collect();
                if key == "command" {
                    report.command = values.join(",");
                } else {
                    report.summary.push((key, values));
                }
            } else {
                table.push_str(line);
                table.push('\n');
            }
        }
        let mut reader = csv::ReaderBuilder::new().from_reader(table.as_bytes());
        report.columns = reader.headers()?.iter().map(str::to_string).collect();
        for record in reader.records() {
            report
                .rows
                .push(record?.iter().map(str::to_string).collect());
        }
        Ok(report)
    }

    /// Copy with the timing columns removed.
    pub fn without_timing(&self) -> Report {
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|&k| !TIMING_COLUMNS.contains(&self.columns[k].as_str()))
            .collect();
        Report {
            command: self.command.clone(),
            columns: keep.iter().map(|&k| self.columns[k].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&k| r[k].clone()).collect())
                .collect(),
            summary: self.summary.clone(),
        }
    }
}

/// Shortest round-trip text for a float; empty for missing values.
pub fn num(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn parse_num(s: &str) -> Option<f64> {
    if s.is_empty() {
        None
    } else {
        s.parse().ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSummary {
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub count: usize,
    /// Points without a ratio because the method failed.
    pub failures: usize,
}

/// Mean, min and max over the present ratios; absent ones are counted as
/// failures and otherwise ignored.
pub fn summarize(ratios: &[Option<f64>]) -> RatioSummary {
    let present: Vec<f64> = ratios.iter().flatten().copied().collect();
    let count = present.len();
    let (mean, min, max) = if count == 0 {
        (None, None, None)
    } else {
        (
            Some(present.iter().sum::<f64>() / count as f64),
            present.iter().copied().reduce(f64::min),
            present.iter().copied().reduce(f64::max),
        )
    };
    RatioSummary {
        mean,
        min,
        max,
        count,
        failures: ratios.len() - count,
    }
}

impl RatioSummary {
    pub fn to_values(&self, method: &str) -> Vec<String> {
        vec![
            method.to_string(),
            "mean".into(),
            num(self.mean),
            "min".into(),
            num(self.min),
            "max".into(),
            num(self.max),
            "n".into(),
            self.count.to_string(),
            "failures".into(),
            self.failures.to_string(),
        ]
    }
}

/// Percentage of points, among those where both norms exist, on which the
/// first norm is strictly smaller than the second.
pub fn improvement_rate(pairs: &[(Option<f64>, Option<f64>)]) -> Option<f64> {
    let both: Vec<(f64, f64)> = pairs.iter().filter_map(|&(a, b)| Some((a?, b?))).collect();
    if both.is_empty() {
        return None;
    }
    let better = both.iter().filter(|(a, b)| a < b).count();
    Some(100.0 * better as f64 / both.len() as f64)
}
