use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dynamics::EquationName;
use crate::error::{Error, Result};
use crate::losses::Accuracy;

use super::space::Combination;

pub const RESULTS_HEADER: [&str; 13] = [
    "combo_id",
    "equation",
    "encoding_dim",
    "form",
    "accuracy",
    "embedding",
    "operator",
    "auxiliary",
    "lambda",
    "epoch",
    "test_error",
    "wall_time_s",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunState {
    Ok,
    Diverged,
}

impl RunState {
    pub fn as_str(self) -> &'static str {
        match self {
            RunState::Ok => "ok",
            RunState::Diverged => "diverged",
        }
    }
}

/// Test error and cumulative wall time at one evaluation epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub epoch: usize,
    pub test_error: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub equation: EquationName,
    pub combination: Combination,
    pub curve: Vec<CurvePoint>,
    pub status: RunState,
}

impl RunResult {
    pub fn error_at(&self, epoch: usize) -> Option<f64> {
        self.curve.iter().find(|p| p.epoch == epoch).map(|p| p.test_error)
    }

    /// Cumulative wall time of the whole run.
    pub fn wall_time(&self) -> f64 {
        self.curve.iter().map(|p| p.wall_time_s).fold(0.0, f64::max)
    }
}

fn lambda_field(a: Accuracy) -> String {
    a.lambda().map(|l| l.to_string()).unwrap_or_default()
}

/// CSV lines (without header) for one run, one per evaluation epoch.
pub fn result_rows(result: &RunResult) -> Vec<[String; 13]> {
    let c = &result.combination;
    result
        .curve
        .iter()
        .map(|p| {
            [
                c.id.to_string(),
                result.equation.to_string(),
                c.encoding_dim.to_string(),
                c.form.to_string(),
                c.accuracy.name().to_string(),
                c.embedding.to_string(),
                c.operator.to_string(),
                c.auxiliary.to_string(),
                lambda_field(c.accuracy),
                p.epoch.to_string(),
                p.test_error.to_string(),
                p.wall_time_s.to_string(),
                result.status.as_str().to_string(),
            ]
        })
        .collect()
}

pub(crate) fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

pub(crate) fn append_rows<W: Write>(w: &mut csv::Writer<W>, result: &RunResult, path: &Path) -> Result<()> {
    for row in result_rows(result) {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `results` sorted by combination id, replacing `path` atomically.
pub fn write_results(path: &Path, results: &[RunResult]) -> Result<()> {
    let mut sorted: Vec<&RunResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.combination.id);
    let tmp = path.with_extension("csv.tmp");
    {
        let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = csv_writer(file);
        w.write_record(RESULTS_HEADER).map_err(|e| csv_error(&tmp, e))?;
        for r in sorted {
            append_rows(&mut w, r, &tmp)?;
        }
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn parse<T: std::str::FromStr>(field: &str, name: &str, path: &Path, line: u64) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::format(path, format!("line {line}: bad {name} `{field}`")))
}

/// Reads a results file, grouping rows by combination id (ascending).
/// A final row truncated mid-write is dropped.
pub fn read_results(path: &Path) -> Result<Vec<RunResult>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let mut reader = csv::ReaderBuilder::new().from_reader(complete.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if !header.is_empty() && header.iter().ne(RESULTS_HEADER) {
        return Err(Error::format(path, "unexpected results header"));
    }
    let mut runs: BTreeMap<usize, RunResult> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != RESULTS_HEADER.len() {
            return Err(Error::format(path, format!("line {line}: expected 13 fields")));
        }
        let f = |i: usize| &rec[i];
        let lambda = if f(8).is_empty() {
            None
        } else {
            Some(parse::<f64>(f(8), "lambda", path, line)?)
        };
        let to_format = |e: Error| Error::format(path, format!("line {line}: {e}"));
        let combination = Combination {
            id: parse(f(0), "combo_id", path, line)?,
            encoding_dim: parse(f(2), "encoding_dim", path, line)?,
            form: f(3).parse().map_err(to_format)?,
            accuracy: Accuracy::from_name(f(4), lambda).map_err(to_format)?,
            embedding: f(5).parse().map_err(to_format)?,
            operator: f(6).parse().map_err(to_format)?,
            auxiliary: f(7).parse().map_err(to_format)?,
        };
        let equation: EquationName = f(1).parse().map_err(to_format)?;
        let status = match f(12) {
            "ok" => RunState::Ok,
            "diverged" => RunState::Diverged,
            s => return Err(Error::format(path, format!("line {line}: bad status `{s}`"))),
        };
        let point = CurvePoint {
            epoch: parse(f(9), "epoch", path, line)?,
            test_error: parse(f(10), "test_error", path, line)?,
            wall_time_s: parse(f(11), "wall_time_s", path, line)?,
        };
        let entry = runs.entry(combination.id).or_insert_with(|| RunResult {
            equation,
            combination,
            curve: Vec::new(),
            status,
        });
        if !entry.combination.same_options(&combination) || entry.equation != equation {
            return Err(Error::format(
                path,
                format!("line {line}: rows of combination {} disagree", combination.id),
            ));
        }
        if status == RunState::Diverged {
            entry.status = RunState::Diverged;
        }
        entry.curve.push(point);
    }
    Ok(runs.into_values().collect())
}
