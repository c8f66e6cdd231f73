use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::koopman::FormKind;
use crate::losses::OperatorLoss;

use super::results::{RunResult, RunState};
use super::space::Combination;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    EncodingDim,
    Form,
    Accuracy,
    Embedding,
    Operator,
    Auxiliary,
    Lambda,
}

impl Dimension {
    pub const ALL: [Dimension; 7] = [
        Dimension::EncodingDim,
        Dimension::Form,
        Dimension::Accuracy,
        Dimension::Embedding,
        Dimension::Operator,
        Dimension::Auxiliary,
        Dimension::Lambda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::EncodingDim => "encoding_dim",
            Dimension::Form => "form",
            Dimension::Accuracy => "accuracy",
            Dimension::Embedding => "embedding",
            Dimension::Operator => "operator",
            Dimension::Auxiliary => "auxiliary",
            Dimension::Lambda => "lambda",
        }
    }

    /// The level of `c` in this dimension; `None` for λ of a non-discounted run.
    pub fn level(self, c: &Combination) -> Option<String> {
        match self {
            Dimension::EncodingDim => Some(c.encoding_dim.to_string()),
            Dimension::Form => Some(c.form.to_string()),
            Dimension::Accuracy => Some(c.accuracy.name().to_string()),
            Dimension::Embedding => Some(c.embedding.to_string()),
            Dimension::Operator => Some(c.operator.to_string()),
            Dimension::Auxiliary => Some(c.auxiliary.to_string()),
            Dimension::Lambda => c.accuracy.lambda().map(|l| l.to_string()),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown option dimension `{s}`")))
    }
}

/// Levels in order of first appearance over runs sorted by id.
fn levels(results: &[RunResult], dim: Dimension) -> Vec<String> {
    let mut sorted: Vec<&RunResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.combination.id);
    let mut out: Vec<String> = Vec::new();
    for r in sorted {
        if let Some(l) = dim.level(&r.combination) {
            if !out.contains(&l) {
                out.push(l);
            }
        }
    }
    out
}

fn epochs(results: &[RunResult]) -> Vec<usize> {
    let mut out: Vec<usize> = results.iter().flat_map(|r| r.curve.iter().map(|p| p.epoch)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectRow {
    pub dimension: Dimension,
    pub level: String,
    pub epoch: usize,
    /// Mean over non-diverged runs; NaN when every run diverged.
    pub mean_error: f64,
    pub runs: usize,
    pub diverged: usize,
}

/// Mean test error per level and evaluation epoch. Diverged runs are left
/// out of the mean and counted separately.
pub fn mean_effect(results: &[RunResult], dim: Dimension) -> Vec<EffectRow> {
    let mut out = Vec::new();
    for level in levels(results, dim) {
        let members: Vec<&RunResult> = results
            .iter()
            .filter(|r| dim.level(&r.combination).as_deref() == Some(level.as_str()))
            .collect();
        for epoch in epochs(results) {
            let (mut sum, mut runs, mut diverged) = (0.0, 0, 0);
            for r in &members {
                if r.status == RunState::Diverged {
                    diverged += 1;
                } else if let Some(e) = r.error_at(epoch) {
                    sum += e;
                    runs += 1;
                }
            }
            out.push(EffectRow {
                dimension: dim,
                level: level.clone(),
                epoch,
                mean_error: if runs > 0 { sum / runs as f64 } else { f64::NAN },
                runs,
                diverged,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopRow {
    pub rank: usize,
    pub combination: Combination,
    pub epoch: usize,
    pub test_error: f64,
}

/// The `k` lowest errors at `epoch`, ascending, ties broken by id. Diverged
/// runs sort last.
pub fn top_k(results: &[RunResult], epoch: usize, k: usize) -> Result<Vec<TopRow>> {
    let mut scored = Vec::with_capacity(results.len());
    for r in results {
        let e = r.error_at(epoch).ok_or_else(|| {
            Error::Config(format!(
                "combination {} has no evaluation at epoch {epoch}",
                r.combination.id
            ))
        })?;
        let e = if r.status == RunState::Diverged { f64::INFINITY } else { e };
        scored.push((e, r.combination));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
    Ok(scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (test_error, combination))| TopRow {
            rank: i + 1,
            combination,
            epoch,
            test_error,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeRow {
    pub dimension: Dimension,
    pub level: String,
    pub relative_time: f64,
    pub runs: usize,
}

/// Mean wall time of the runs at each level divided by the mean over all runs.
pub fn mean_relative_times(results: &[RunResult], dim: Dimension) -> Result<Vec<TimeRow>> {
    if results.is_empty() {
        return Err(Error::Domain("no runs to time".into()));
    }
    let overall = results.iter().map(RunResult::wall_time).sum::<f64>() / results.len() as f64;
    if !(overall > 0.0) {
        return Err(Error::Domain(
            "runs carry no wall time (searched with timing disabled?)".into(),
        ));
    }
    Ok(levels(results, dim)
        .into_iter()
        .map(|level| {
            let times: Vec<f64> = results
                .iter()
                .filter(|r| dim.level(&r.combination).as_deref() == Some(level.as_str()))
                .map(RunResult::wall_time)
                .collect();
            let mean = times.iter().sum::<f64>() / times.len() as f64;
            TimeRow {
                dimension: dim,
                level,
                relative_time: mean / overall,
                runs: times.len(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub error: f64,
    pub form: FormKind,
    pub operator: OperatorLoss,
}

/// One row per run at `epoch` in combination order: error, operator form,
/// operator loss.
pub fn operator_study_table(results: &[RunResult], epoch: usize) -> Result<Vec<StudyRow>> {
    let mut sorted: Vec<&RunResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.combination.id);
    sorted
        .into_iter()
        .map(|r| {
            let error = r.error_at(epoch).ok_or_else(|| {
                Error::Config(format!(
                    "combination {} has no evaluation at epoch {epoch}",
                    r.combination.id
                ))
            })?;
            Ok(StudyRow {
                error,
                form: r.combination.form,
                operator: r.combination.operator,
            })
        })
        .collect()
}
