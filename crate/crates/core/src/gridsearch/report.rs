use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::analysis::{EffectRow, StudyRow, TimeRow, TopRow};
use super::results::csv_writer;

/// A report as a header plus string cells, written as CSV or aligned text.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv_writer(file);
        let fail = |e: csv::Error| Error::format(path, e.to_string());
        w.write_record(&self.header).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row).map_err(fail)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Columns padded to their widest cell, numbers right-aligned.
    pub fn render(&self) -> String {
        let n = self.header.len();
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let numeric: Vec<bool> = (0..n)
            .map(|i| {
                !self.rows.is_empty()
                    && self.rows.iter().all(|r| r[i].is_empty() || r[i].parse::<f64>().is_ok())
            })
            .collect();
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if numeric[i] {
                        format!("{c:>w$}", w = widths[i])
                    } else {
                        format!("{c:<w$}", w = widths[i])
                    }
                })
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = line(&self.header);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

pub fn effect_table(rows: &[EffectRow]) -> Table {
    let mut t = Table::new(&["dimension", "level", "epoch", "mean_error", "runs", "diverged"]);
    for r in rows {
        t.rows.push(vec![
            r.dimension.to_string(),
            r.level.clone(),
            r.epoch.to_string(),
            r.mean_error.to_string(),
            r.runs.to_string(),
            r.diverged.to_string(),
        ]);
    }
    t
}

pub fn top_k_table(rows: &[TopRow]) -> Table {
    let mut t = Table::new(&[
        "rank",
        "combo_id",
        "epoch",
        "test_error",
        "encoding_dim",
        "form",
        "accuracy",
        "embedding",
        "operator",
        "auxiliary",
        "lambda",
    ]);
    for r in rows {
        let c = &r.combination;
        t.rows.push(vec![
            r.rank.to_string(),
            c.id.to_string(),
            r.epoch.to_string(),
            r.test_error.to_string(),
            c.encoding_dim.to_string(),
            c.form.to_string(),
            c.accuracy.name().to_string(),
            c.embedding.to_string(),
            c.operator.to_string(),
            c.auxiliary.to_string(),
            c.accuracy.lambda().map(|l| l.to_string()).unwrap_or_default(),
        ]);
    }
    t
}

pub fn times_table(rows: &[TimeRow]) -> Table {
    let mut t = Table::new(&["dimension", "level", "relative_time", "runs"]);
    for r in rows {
        t.rows.push(vec![
            r.dimension.to_string(),
            r.level.clone(),
            r.relative_time.to_string(),
            r.runs.to_string(),
        ]);
    }
    t
}

pub fn study_table(rows: &[StudyRow]) -> Table {
    let mut t = Table::new(&["error", "operator_form", "operator_loss"]);
    for r in rows {
        t.rows.push(vec![r.error.to_string(), r.form.to_string(), r.operator.to_string()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_rendering() {
        let mut t = Table::new(&["level", "x"]);
        t.rows.push(vec!["full".into(), "1.5".into()]);
        t.rows.push(vec!["discounted".into(), "10".into()]);
        assert_eq!(t.render(), "level         x\nfull        1.5\ndiscounted   10\n");
    }
}
