//! Experiment rigs. RIG0 trains on earlier releases and tests on the latest
//! one; RIG1 repeats stratified 80/20 splits. Inside each training set the
//! optimizer's objective fits on a 70% tuning part and scores on the
//! remaining 30%; the winning config is then refit on the whole training set
//! and scored once on the test set.

mod result;
mod split;

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, CsvSchema, Dataset};
use crate::error::{Error, Result};
use crate::learners::{self, LearnerSpec};
use crate::metrics::{self, Goal, GoalVector};
use crate::optimizers::{self, Budget, Objective, OptimizerKind, DEFAULT_EPSILON};
use crate::option_space::{Config, OptionSpace, OptionTree};
use crate::preprocess::{self, PreprocSpec};
use crate::seed;

pub use result::{read_records_csv, CellSummary, DatasetVerdict, PairSummary, RepeatRecord, StudyResult};
pub use split::{rig1_split, stratified_indices, tune_split, TEST_FRACTION, VALIDATION_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rig {
    Rig0,
    Rig1,
}

fn default_goal() -> Goal {
    Goal::D2h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    /// CSV file; relative paths resolve against the study file's directory.
    pub path: PathBuf,
    pub target: String,
    pub positive_label: String,
    #[serde(default)]
    pub effort: Option<String>,
    #[serde(default)]
    pub version: Option<String>,
    #[serde(default = "default_goal")]
    pub goal: Goal,
}

impl DatasetSpec {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            target: self.target.clone(),
            effort: self.effort.clone(),
            version: self.version.clone(),
            positive_label: self.positive_label.clone(),
        }
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    /// Label in reports; defaults to the kind.
    #[serde(default)]
    pub name: Option<String>,
    /// DODGE uses both phases; the others spend `n1 + n2` evaluations.
    #[serde(default)]
    pub budget: Budget,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind) -> Self {
        OptimizerSpec {
            kind,
            name: None,
            budget: Budget::default(),
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }
}

fn default_repeats() -> usize {
    25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub rig: Rig,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    /// Option space file; the standard space when absent.
    #[serde(default)]
    pub space: Option<PathBuf>,
    pub datasets: Vec<DatasetSpec>,
    pub optimizers: Vec<OptimizerSpec>,
}

impl StudySpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: StudySpec = toml::from_str(s).map_err(|e| Error::invalid(format!("study spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a spec and resolves its relative paths against the file's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut spec = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut spec.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        if let Some(space) = &mut spec.space {
            if space.is_relative() {
                *space = base.join(&*space);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::param("repeats", "must be >= 1"));
        }
        if self.datasets.is_empty() || self.optimizers.is_empty() {
            return Err(Error::invalid("a study needs at least one dataset and one optimizer"));
        }
        let mut names = HashSet::new();
        for d in &self.datasets {
            if !names.insert(d.name.as_str()) {
                return Err(Error::invalid(format!("duplicate dataset name {:?}", d.name)));
            }
            if d.goal == Goal::Popt20 && d.effort.is_none() {
                return Err(Error::invalid(format!(
                    "dataset {:?}: popt20 needs an effort column",
                    d.name
                )));
            }
            if self.rig == Rig::Rig0 && d.version.is_none() {
                return Err(Error::invalid(format!(
                    "dataset {:?}: rig0 needs a version column",
                    d.name
                )));
            }
        }
        let mut labels = HashSet::new();
        for o in &self.optimizers {
            if !labels.insert(o.label()) {
                return Err(Error::invalid(format!(
                    "duplicate optimizer label {:?}; give one of them a name",
                    o.label()
                )));
            }
            if o.budget.total() == 0 || !(o.epsilon > 0.0) {
                return Err(Error::invalid(format!(
                    "optimizer {:?}: budget must be positive and epsilon > 0",
                    o.label()
                )));
            }
        }
        Ok(())
    }

    /// Checks that every referenced file exists.
    pub fn check_files(&self) -> Result<()> {
        let files = self.datasets.iter().map(|d| &d.path).chain(self.space.iter());
        for f in files {
            if !f.is_file() {
                return Err(Error::invalid(format!("missing file {}", f.display())));
            }
        }
        Ok(())
    }

    pub fn option_space(&self) -> Result<OptionSpace> {
        match &self.space {
            Some(p) => OptionSpace::load(p),
            None => Ok(OptionSpace::standard()),
        }
    }

    pub fn load_datasets(&self) -> Result<Vec<Dataset>> {
        self.datasets
            .iter()
            .map(|d| dataset::load_csv(&d.path, &d.schema()))
            .collect()
    }
}

/// Fits `config` on `train` and scores it on `test`.
pub fn evaluate_pipeline(
    config: &Config,
    train: &Dataset,
    test: &Dataset,
    goals: &[Goal],
    seed: u64,
) -> Result<GoalVector> {
    let (tr, te) = fit_pipeline(config, train, test, seed)?;
    score_pipeline(config, &tr, &te, goals, seed)
}

fn fit_pipeline(config: &Config, train: &Dataset, test: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let pre = PreprocSpec::from_params(&config.preprocessor.kind, &config.preprocessor.params)?;
    preprocess::fit_transform(&pre, train, test, seed)
}

fn score_pipeline(config: &Config, train: &Dataset, test: &Dataset, goals: &[Goal], seed: u64) -> Result<GoalVector> {
    let learner = LearnerSpec::from_params(&config.learner.kind, &config.learner.params)?;
    let model = learners::fit(&learner, train, seed)?;
    let predicted = model.predict(test.features())?;
    metrics::goals(test.target(), &predicted, test.effort(), goals)
}

/// The objective optimizers see: fit on the tuning rows, score on the
/// validation rows. Optionally records the identity of every row that
/// reaches a learner, for leakage audits.
pub struct PipelineObjective<'a> {
    tune: &'a Dataset,
    valid: &'a Dataset,
    goals: Vec<Goal>,
    seed: u64,
    seen: Option<Mutex<BTreeSet<usize>>>,
}

impl<'a> PipelineObjective<'a> {
    pub fn new(tune: &'a Dataset, valid: &'a Dataset, goals: Vec<Goal>, seed: u64) -> Self {
        PipelineObjective {
            tune,
            valid,
            goals,
            seed,
            seen: None,
        }
    }

    pub fn audited(mut self) -> Self {
        self.seen = Some(Mutex::new(BTreeSet::new()));
        self
    }

    /// Row ids that reached fitting or scoring so far.
    pub fn seen_rows(&self) -> Vec<usize> {
        self.seen
            .as_ref()
            .map(|s| s.lock().expect("audit lock").iter().copied().collect())
            .unwrap_or_default()
    }
}

impl Objective for PipelineObjective<'_> {
    fn goals(&self) -> &[Goal] {
        &self.goals
    }

    fn evaluate(&self, config: &Config) -> Result<GoalVector> {
        let (tr, te) = fit_pipeline(config, self.tune, self.valid, self.seed)?;
        if let Some(seen) = &self.seen {
            let mut seen = seen.lock().expect("audit lock");
            seen.extend(tr.ids());
            seen.extend(te.ids());
        }
        score_pipeline(config, &tr, &te, &self.goals, self.seed)
    }
}

/// Options that do not belong in a study file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record test-row and objective-row identities in each record.
    pub audit: bool,
}

/// Loads the data and option space named by `spec` and runs the study.
pub fn run_study(spec: &StudySpec) -> Result<StudyResult> {
    spec.validate()?;
    let space = spec.option_space()?;
    let data = spec.load_datasets()?;
    run_study_on(spec, &data, &space, RunOptions::default())
}

/// Runs a study on already loaded datasets, one per `spec.datasets` entry.
pub fn run_study_on(
    spec: &StudySpec,
    data: &[Dataset],
    space: &OptionSpace,
    options: RunOptions,
) -> Result<StudyResult> {
    spec.validate()?;
    if data.len() != spec.datasets.len() {
        return Err(Error::LengthMismatch {
            left: spec.datasets.len(),
            right: data.len(),
        });
    }
    let tree = OptionTree::new(space)?;
    let jobs: Vec<(usize, usize)> = (0..data.len())
        .flat_map(|d| (0..spec.repeats).map(move |r| (d, r)))
        .collect();
    let records: Vec<Vec<RepeatRecord>> = jobs
        .par_iter()
        .map(|&(d, r)| run_repeat(spec, d, r, &data[d], &tree, options))
        .collect();
    StudyResult::from_records(spec, records.into_iter().flatten().collect())
}

fn run_repeat(
    spec: &StudySpec,
    d: usize,
    repeat: usize,
    data: &Dataset,
    tree: &OptionTree,
    options: RunOptions,
) -> Vec<RepeatRecord> {
    let ds = &spec.datasets[d];
    let repeat_seed = seed::derive(spec.seed, &[d as u64, repeat as u64]);
    let split = match spec.rig {
        Rig::Rig0 => dataset::temporal_split(data),
        Rig::Rig1 => rig1_split(data, repeat, seed::derive(spec.seed, &[d as u64])),
    };
    let prepared = split.and_then(|(train, test)| {
        let (tune, valid) = tune_split(&train, seed::derive(repeat_seed, &[1]))?;
        Ok((train, test, tune, valid))
    });
    spec.optimizers
        .iter()
        .map(|o| {
            let mut record = RepeatRecord {
                dataset: ds.name.clone(),
                optimizer: o.label(),
                repeat,
                goal: ds.goal,
                score: ds.goal.worst(),
                evaluations: 0,
                best_config: String::new(),
                error: None,
                test_rows: Vec::new(),
                objective_rows: Vec::new(),
            };
            let outcome = prepared.as_ref().map_err(|e| e.to_string()).and_then(|(train, test, tune, valid)| {
                run_optimizer(o, ds.goal, tree, train, test, tune, valid, repeat_seed, options, &mut record)
                    .map_err(|e| e.to_string())
            });
            if let Err(e) = outcome {
                record.score = ds.goal.worst();
                record.error = Some(e);
            }
            record
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_optimizer(
    o: &OptimizerSpec,
    goal: Goal,
    tree: &OptionTree,
    train: &Dataset,
    test: &Dataset,
    tune: &Dataset,
    valid: &Dataset,
    repeat_seed: u64,
    options: RunOptions,
    record: &mut RepeatRecord,
) -> Result<()> {
    // Optimizer seeds depend on (study seed, dataset, repeat) only, so two
    // entries of the same kind see identical randomness.
    let learner_seed = seed::derive(repeat_seed, &[2]);
    let mut objective = PipelineObjective::new(tune, valid, vec![goal], learner_seed);
    if options.audit {
        objective = objective.audited();
    }
    let report = optimizers::run(o.kind, tree, &objective, o.budget, o.epsilon, seed::derive(repeat_seed, &[3]))?;
    let best = &report.best_trial().config;
    record.evaluations = report.evaluations_used;
    record.best_config = best.describe();
    if options.audit {
        record.test_rows = test.ids().to_vec();
        record.objective_rows = objective.seen_rows();
    }
    let scores = evaluate_pipeline(best, train, test, &[goal], learner_seed)?;
    record.score = scores.primary().score;
    Ok(())
}
