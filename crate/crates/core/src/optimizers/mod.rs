//! Search strategies over an [`OptionTree`]: DODGE, a tree-structured Parzen
//! estimator and plain random search. Each one spends exactly its budget of
//! objective evaluations and reports every trial.

mod tpe;

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Goal, GoalVector};
use crate::option_space::{Config, OptionTree, SampleMode};
use crate::seed;

pub use tpe::{tpe, TpeSettings};

pub const DEFAULT_EPSILON: f64 = 0.2;

/// Maps a configuration to its goal scores.
pub trait Objective: Sync {
    /// Goals produced by [`Objective::evaluate`]; the first is primary.
    fn goals(&self) -> &[Goal];
    fn evaluate(&self, config: &Config) -> Result<GoalVector>;
}

/// An objective backed by a closure.
pub struct FnObjective<F> {
    goals: Vec<Goal>,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&Config) -> Result<GoalVector> + Sync,
{
    pub fn new(goals: Vec<Goal>, f: F) -> Self {
        FnObjective { goals, f }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&Config) -> Result<GoalVector> + Sync,
{
    fn goals(&self) -> &[Goal] {
        &self.goals
    }

    fn evaluate(&self, config: &Config) -> Result<GoalVector> {
        (self.f)(config)
    }
}

/// DODGE evaluation budget: `n1` random-branch trials, then `n2`
/// refinement trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub n1: usize,
    pub n2: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { n1: 15, n2: 15 }
    }
}

impl Budget {
    pub fn total(&self) -> usize {
        self.n1 + self.n2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub config: Config,
    pub goals: GoalVector,
    /// Whether the result fell within epsilon of an earlier one. Only DODGE
    /// tracks this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redundant: Option<bool>,
    /// Set when the objective failed and the trial was scored as worst.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub optimizer: OptimizerKind,
    pub trials: Vec<Trial>,
    /// Index into `trials` of the best primary-goal score (earliest on ties).
    pub best: usize,
    pub evaluations_used: usize,
}

impl OptimizerReport {
    fn from_trials(optimizer: OptimizerKind, trials: Vec<Trial>) -> Self {
        let best = best_index(&trials);
        OptimizerReport {
            optimizer,
            evaluations_used: trials.len(),
            trials,
            best,
        }
    }

    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }

    pub fn n_redundant(&self) -> usize {
        self.trials.iter().filter(|t| t.redundant == Some(true)).count()
    }

    /// One JSON object per trial.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for t in &self.trials {
            serde_json::to_writer(&mut out, t).map_err(|e| Error::invalid(e.to_string()))?;
            writeln!(out).map_err(|source| Error::Io {
                path: "<report>".into(),
                source,
            })?;
        }
        Ok(())
    }
}

fn best_index(trials: &[Trial]) -> usize {
    let mut best = 0;
    for (i, t) in trials.iter().enumerate().skip(1) {
        let (cur, prev) = (t.goals.primary(), trials[best].goals.primary());
        if cur.goal.compare(cur.score, prev.score) == Ordering::Greater {
            best = i;
        }
    }
    best
}

/// Evaluates `config`, turning failures into worst-possible scores.
fn evaluate(objective: &dyn Objective, config: &Config) -> Result<(GoalVector, Option<String>)> {
    match objective.evaluate(config) {
        Ok(g) => Ok((g, None)),
        Err(e) => Ok((GoalVector::worst(objective.goals())?, Some(e.to_string()))),
    }
}

fn check_budget(total: usize) -> Result<()> {
    if total == 0 {
        Err(Error::param("budget", "must be > 0"))
    } else {
        Ok(())
    }
}

/// Runs DODGE on `tree`, mutating its weights and ranges.
///
/// Phase one draws `n1` random branches. The highest-weight branches at
/// that point are frozen; phase two draws `n2` configs from them and, after
/// each weight update, narrows the numeric ranges of the branch it used.
pub fn dodge(
    tree: &mut OptionTree,
    objective: &dyn Objective,
    budget: Budget,
    epsilon: f64,
    seed: u64,
) -> Result<OptimizerReport> {
    check_budget(budget.total())?;
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be > 0"));
    }
    let mut rng = seed::rng(seed);
    let mut history: Vec<GoalVector> = Vec::with_capacity(budget.total());
    let mut trials = Vec::with_capacity(budget.total());
    for index in 0..budget.total() {
        let refine = index >= budget.n1;
        if index == budget.n1 {
            tree.freeze();
        }
        let mode = if refine {
            SampleMode::FrozenBest
        } else {
            SampleMode::Random
        };
        let config = tree.sample_branch(mode, &mut rng);
        let (goals, error) = evaluate(objective, &config)?;
        let redundant = tree.update_weights(&config, &goals, &history, epsilon)?;
        if refine {
            tree.narrow_branch(config.branch);
        }
        history.push(goals.clone());
        trials.push(Trial {
            index,
            config,
            goals,
            redundant: Some(redundant),
            error,
        });
    }
    Ok(OptimizerReport::from_trials(OptimizerKind::Dodge, trials))
}

/// Uniform sampling over the tree's branches and current ranges.
pub fn random_search(
    tree: &OptionTree,
    objective: &dyn Objective,
    budget: usize,
    seed: u64,
) -> Result<OptimizerReport> {
    check_budget(budget)?;
    let mut tree = tree.clone();
    let mut rng = seed::rng(seed);
    let mut trials = Vec::with_capacity(budget);
    for index in 0..budget {
        let mut config = tree.sample_branch(SampleMode::Random, &mut rng);
        config.provenance.clear();
        let (goals, error) = evaluate(objective, &config)?;
        trials.push(Trial {
            index,
            config,
            goals,
            redundant: None,
            error,
        });
    }
    Ok(OptimizerReport::from_trials(OptimizerKind::Random, trials))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Dodge,
    Tpe,
    Random,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [OptimizerKind::Dodge, OptimizerKind::Tpe, OptimizerKind::Random];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Dodge => "dodge",
            OptimizerKind::Tpe => "tpe",
            OptimizerKind::Random => "random",
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dodge" => Ok(OptimizerKind::Dodge),
            "tpe" => Ok(OptimizerKind::Tpe),
            "random" => Ok(OptimizerKind::Random),
            other => Err(Error::invalid(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Runs `kind` with a fresh copy of `tree`. DODGE splits `budget` as
/// given; the other strategies use its total.
pub fn run(
    kind: OptimizerKind,
    tree: &OptionTree,
    objective: &dyn Objective,
    budget: Budget,
    epsilon: f64,
    seed: u64,
) -> Result<OptimizerReport> {
    match kind {
        OptimizerKind::Dodge => dodge(&mut tree.clone(), objective, budget, epsilon, seed),
        OptimizerKind::Tpe => tpe(tree, objective, budget.total(), seed, &TpeSettings::default()),
        OptimizerKind::Random => random_search(tree, objective, budget.total(), seed),
    }
}
