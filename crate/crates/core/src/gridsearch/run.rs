use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use crate::dynamics::Dataset;
use crate::error::{Error, Result};
use crate::koopman::{Activation, KoopmanModel, ModelConfig};
use crate::seeding;
use crate::training::{fit, TrainConfig};

use super::results::{append_rows, csv_writer, read_results, write_results, CurvePoint, RunResult, RunState};
use super::space::{Combination, SearchSpace};

/// Settings shared by every run of a search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSettings {
    /// Template for every run; its loss terms and seed are replaced per combination.
    pub train: TrainConfig,
    pub hidden: Option<Vec<usize>>,
    pub activation: Activation,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            hidden: None,
            activation: Activation::Tanh,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Every run of the space, ascending by combination id.
    pub results: Vec<RunResult>,
    /// Ids trained by this call (the rest were loaded from the results file).
    pub computed: Vec<usize>,
}

fn combo_seed(seed: u64, id: usize) -> u64 {
    seed ^ id as u64
}

fn model_config(state_dim: usize, c: &Combination, s: &SearchSettings) -> ModelConfig {
    ModelConfig {
        state_dim,
        encoding_dim: c.encoding_dim,
        form: c.form,
        hidden: s.hidden.clone(),
        activation: s.activation,
        seed: combo_seed(s.seed, c.id),
    }
}

fn train_config(c: &Combination, s: &SearchSettings) -> TrainConfig {
    TrainConfig {
        seed: seeding::derive(combo_seed(s.seed, c.id), 0x74_7261_696e),
        loss: c.loss_config(&s.train.loss),
        ..s.train.clone()
    }
}

/// Trains one combination. Divergence is recorded in the result.
pub fn run_combination(
    space: &SearchSpace,
    combination: &Combination,
    train: &Dataset,
    test: &Dataset,
    settings: &SearchSettings,
) -> Result<RunResult> {
    let mut model = KoopmanModel::new(model_config(train.state_dim, combination, settings))?;
    let cfg = train_config(combination, settings);
    let history = fit(&mut model, train, test, &cfg)?;
    Ok(RunResult {
        equation: space.equation,
        combination: *combination,
        curve: history
            .records
            .iter()
            .map(|r| CurvePoint {
                epoch: r.epoch,
                test_error: r.test_error,
                wall_time_s: r.wall_time_s,
            })
            .collect(),
        status: if history.status.is_diverged() {
            RunState::Diverged
        } else {
            RunState::Ok
        },
    })
}

fn validate(space: &SearchSpace, combos: &[Combination], train: &Dataset, test: &Dataset, s: &SearchSettings) -> Result<()> {
    if s.workers == 0 {
        return Err(Error::Config("workers must be positive".into()));
    }
    if train.equation != space.equation || test.equation != space.equation {
        return Err(Error::Config(format!(
            "datasets hold {} / {}, the search is over {}",
            train.equation, test.equation, space.equation
        )));
    }
    s.train.validate()?;
    for c in combos {
        model_config(train.state_dim, c, s).validate()?;
        c.loss_config(&s.train.loss).validate(c.form, space.equation)?;
    }
    Ok(())
}

/// Runs every combination of `space`, writing rows to `results_path` as runs
/// finish and rewriting it sorted by id at the end. With `resume`, runs whose
/// rows are all present in an existing file are kept and skipped.
pub fn run_search(
    space: &SearchSpace,
    train: &Dataset,
    test: &Dataset,
    settings: &SearchSettings,
    results_path: &Path,
    resume: bool,
) -> Result<SearchOutcome> {
    let combos = space.enumerate()?;
    validate(space, &combos, train, test, settings)?;
    let expected = settings.train.eval_epochs();

    let mut done: BTreeMap<usize, RunResult> = BTreeMap::new();
    if resume && results_path.exists() {
        for r in read_results(results_path)? {
            let id = r.combination.id;
            let matches = combos
                .get(id)
                .is_some_and(|c| c.same_options(&r.combination) && r.equation == space.equation);
            if !matches {
                return Err(Error::Config(format!(
                    "{}: combination {id} does not belong to this search space",
                    results_path.display()
                )));
            }
            let epochs: Vec<usize> = r.curve.iter().map(|p| p.epoch).collect();
            if epochs == expected {
                done.insert(id, r);
            }
        }
    }
    let kept: Vec<RunResult> = done.values().cloned().collect();
    write_results(results_path, &kept)?;

    let pending: Vec<&Combination> = combos.iter().filter(|c| !done.contains_key(&c.id)).collect();
    let computed: Vec<usize> = pending.iter().map(|c| c.id).collect();
    if !pending.is_empty() {
        let next = AtomicUsize::new(0);
        let stop = AtomicBool::new(false);
        let (tx, rx) = mpsc::channel::<Result<RunResult>>();
        let file = fs::OpenOptions::new()
            .append(true)
            .open(results_path)
            .map_err(|e| Error::io(results_path, e))?;
        let mut writer = csv_writer(file);
        let mut failure = None;
        std::thread::scope(|scope| {
            for _ in 0..settings.workers.min(pending.len()) {
                let tx = tx.clone();
                let (next, stop, pending) = (&next, &stop, &pending);
                scope.spawn(move || loop {
                    if stop.load(Ordering::Relaxed) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(c) = pending.get(i) else { break };
                    let outcome = run_combination(space, c, train, test, settings);
                    if tx.send(outcome).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for outcome in rx {
                match outcome.and_then(|r| append_rows(&mut writer, &r, results_path).map(|_| r)) {
                    Ok(r) => {
                        done.insert(r.combination.id, r);
                    }
                    Err(e) => {
                        stop.store(true, Ordering::Relaxed);
                        failure.get_or_insert(e);
                    }
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
    }

    let results: Vec<RunResult> = done.into_values().collect();
    write_results(results_path, &results)?;
    Ok(SearchOutcome { results, computed })
}
