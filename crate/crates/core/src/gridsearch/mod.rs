//! Grid searches over loss terms and operator forms, and their reports.

mod analysis;
mod report;
mod results;
mod run;
mod space;

pub use analysis::{
    mean_effect, mean_relative_times, operator_study_table, top_k, Dimension, EffectRow, StudyRow,
    TimeRow, TopRow,
};
pub use report::{effect_table, study_table, times_table, top_k_table, Table};
pub use results::{read_results, result_rows, write_results, CurvePoint, RunResult, RunState, RESULTS_HEADER};
pub use run::{run_combination, run_search, SearchOutcome, SearchSettings};
pub use space::{default_epochs, AccuracyKind, Combination, Constraint, SearchSpace};

use std::path::Path;

use crate::dynamics::Dataset;
use crate::error::Result;

/// Runs the 14-combination operator-form study and tabulates the final epoch.
pub fn operator_study(
    train: &Dataset,
    test: &Dataset,
    encoding_dim: usize,
    settings: &SearchSettings,
    results_path: &Path,
    resume: bool,
) -> Result<(SearchOutcome, Vec<StudyRow>)> {
    let space = SearchSpace::operator_study(train.equation, encoding_dim);
    let outcome = run_search(&space, train, test, settings, results_path, resume)?;
    let table = operator_study_table(&outcome.results, settings.train.epochs)?;
    Ok((outcome, table))
}
