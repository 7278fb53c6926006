//! The weighted option tree searched by the optimizers.
//!
//! A tree has two levels of nodes: pre-processors and learners. A branch is
//! one node from each level. Nodes carry integer weights (initially zero)
//! and a parameter set; numeric parameters carry mutable `(lo, hi)` bounds
//! that DODGE narrows as it learns which sampled values did well.

pub mod params;

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::GoalVector;
use crate::seed::Rng;
pub use params::{describe, ParamValue, Params};

/// Value domain of a hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    Real { lo: f64, hi: f64 },
    Int { lo: i64, hi: i64 },
    Choice { values: Vec<String> },
}

impl Domain {
    fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Domain::Real { lo, hi } => Some((lo, hi)),
            Domain::Int { lo, hi } => Some((lo as f64, hi as f64)),
            Domain::Choice { .. } => None,
        }
    }
}

/// A parameter that only exists when another parameter of the same node
/// took a given choice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub param: String,
    pub equals: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    #[serde(flatten)]
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<Condition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDef {
    pub name: String,
    #[serde(default)]
    pub params: Vec<ParamDef>,
}

/// Declarative description of a search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSpace {
    pub preprocessors: Vec<NodeDef>,
    pub learners: Vec<NodeDef>,
}

fn real(name: &str, lo: f64, hi: f64) -> ParamDef {
    ParamDef {
        name: name.into(),
        domain: Domain::Real { lo, hi },
        when: None,
    }
}

fn int(name: &str, lo: i64, hi: i64) -> ParamDef {
    ParamDef {
        name: name.into(),
        domain: Domain::Int { lo, hi },
        when: None,
    }
}

fn choice(name: &str, values: &[&str]) -> ParamDef {
    ParamDef {
        name: name.into(),
        domain: Domain::Choice {
            values: values.iter().map(|v| v.to_string()).collect(),
        },
        when: None,
    }
}

fn node(name: &str, params: Vec<ParamDef>) -> NodeDef {
    NodeDef {
        name: name.into(),
        params,
    }
}

impl OptionSpace {
    /// The standard tabular space: nine pre-processors and five learners.
    pub fn standard() -> Self {
        let criterion = || choice("criterion", &["gini", "entropy"]);
        let min_split = || real("min_samples_split", 0.0, 1.0);
        OptionSpace {
            preprocessors: vec![
                node("standard_scaler", vec![]),
                node("minmax_scaler", vec![]),
                node("maxabs_scaler", vec![]),
                node(
                    "robust_scaler",
                    vec![int("quantile_lo", 0, 50), int("quantile_hi", 51, 100)],
                ),
                node("kernel_centerer", vec![]),
                node(
                    "quantile_transform",
                    vec![
                        int("n_quantiles", 100, 1000),
                        int("subsample", 1000, 100_000),
                        choice("output_distribution", &["normal", "uniform"]),
                    ],
                ),
                node("normalizer", vec![choice("norm", &["l1", "l2", "max"])]),
                node("binarizer", vec![real("threshold", 0.0, 100.0)]),
                node(
                    "smote",
                    vec![
                        int("n_neighbors", 1, 20),
                        choice("n_synthetics", &["50", "100", "200", "400"]),
                        real("minkowski_exponent", 0.1, 5.0),
                    ],
                ),
            ],
            learners: vec![
                node(
                    "decision_tree",
                    vec![criterion(), choice("splitter", &["best", "random"]), min_split()],
                ),
                node(
                    "random_forest",
                    vec![int("n_estimators", 50, 150), criterion(), min_split()],
                ),
                node(
                    "logistic_regression",
                    vec![
                        choice("penalty", &["l1", "l2"]),
                        real("tol", 0.0, 0.1),
                        int("c", 1, 500),
                    ],
                ),
                node("multinomial_nb", vec![real("alpha", 0.0, 0.1)]),
                node(
                    "knn",
                    vec![
                        int("n_neighbors", 2, 25),
                        choice("weights", &["uniform", "distance"]),
                        choice("metric", &["minkowski", "chebyshev"]),
                        ParamDef {
                            when: Some(Condition {
                                param: "metric".into(),
                                equals: "minkowski".into(),
                            }),
                            ..int("p", 1, 15)
                        },
                    ],
                ),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.preprocessors.is_empty() || self.learners.is_empty() {
            return Err(Error::invalid("option space needs at least one preprocessor and one learner"));
        }
        for n in self.preprocessors.iter().chain(&self.learners) {
            for p in &n.params {
                let ok = match &p.domain {
                    Domain::Real { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
                    Domain::Int { lo, hi } => lo <= hi,
                    Domain::Choice { values } => !values.is_empty(),
                };
                if !ok {
                    return Err(Error::param(
                        format!("{}.{}", n.name, p.name),
                        "empty domain",
                    ));
                }
                if let Some(c) = &p.when {
                    if !n.params.iter().any(|q| q.name == c.param) {
                        return Err(Error::param(
                            format!("{}.{}", n.name, p.name),
                            format!("condition refers to unknown parameter {:?}", c.param),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let space: OptionSpace =
            toml::from_str(s).map_err(|e| Error::invalid(format!("option space: {e}")))?;
        space.validate()?;
        Ok(space)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("option space serializes")
    }
}

/// Which level of the tree a node lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Preprocessor,
    Learner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub preprocessor: usize,
    pub learner: usize,
}

impl Branch {
    fn index(&self, level: Level) -> usize {
        match level {
            Level::Preprocessor => self.preprocessor,
            Level::Learner => self.learner,
        }
    }
}

/// Points at the weight record created when a numeric value was sampled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueRef {
    pub level: Level,
    pub param: usize,
    pub slot: usize,
}

/// The node name and sampled hyperparameters of one side of a branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeChoice {
    pub kind: String,
    pub params: Params,
}

/// One concrete point of the option space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub preprocessor: NodeChoice,
    pub learner: NodeChoice,
    pub branch: Branch,
    /// Weight records of the numeric values sampled for this config.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<ValueRef>,
}

impl Config {
    pub fn describe(&self) -> String {
        format!(
            "{}({}) -> {}({})",
            self.preprocessor.kind,
            describe(&self.preprocessor.params),
            self.learner.kind,
            describe(&self.learner.params)
        )
    }
}

/// A sampled numeric value and its weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueRecord {
    pub value: f64,
    pub weight: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    pub def: ParamDef,
    /// Current bounds of a numeric parameter.
    pub range: Option<(f64, f64)>,
    pub records: Vec<ValueRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub weight: i64,
    pub params: Vec<ParamState>,
}

impl Node {
    fn new(def: &NodeDef) -> Self {
        Node {
            name: def.name.clone(),
            weight: 0,
            params: def
                .params
                .iter()
                .map(|p| ParamState {
                    def: p.clone(),
                    range: p.domain.bounds(),
                    records: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn param(&self, name: &str) -> Option<&ParamState> {
        self.params.iter().find(|p| p.def.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Any branch, values uniform over the current ranges.
    Random,
    /// Only the frozen branches, or when nothing is frozen, the
    /// highest-weight branches among those already evaluated.
    FrozenBest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionTree {
    preprocessors: Vec<Node>,
    learners: Vec<Node>,
    visited: BTreeSet<Branch>,
    frozen: Option<Vec<Branch>>,
}

impl OptionTree {
    pub fn new(space: &OptionSpace) -> Result<Self> {
        space.validate()?;
        Ok(OptionTree {
            preprocessors: space.preprocessors.iter().map(Node::new).collect(),
            learners: space.learners.iter().map(Node::new).collect(),
            visited: BTreeSet::new(),
            frozen: None,
        })
    }

    pub fn standard() -> Self {
        Self::new(&OptionSpace::standard()).expect("standard space is valid")
    }

    pub fn nodes(&self, level: Level) -> &[Node] {
        match level {
            Level::Preprocessor => &self.preprocessors,
            Level::Learner => &self.learners,
        }
    }

    fn nodes_mut(&mut self, level: Level) -> &mut [Node] {
        match level {
            Level::Preprocessor => &mut self.preprocessors,
            Level::Learner => &mut self.learners,
        }
    }

    pub fn node(&self, level: Level, index: usize) -> &Node {
        &self.nodes(level)[index]
    }

    pub fn branch_weight(&self, b: Branch) -> i64 {
        self.preprocessors[b.preprocessor].weight + self.learners[b.learner].weight
    }

    /// Branches evaluated so far.
    pub fn visited(&self) -> &BTreeSet<Branch> {
        &self.visited
    }

    pub fn n_branches(&self) -> usize {
        self.preprocessors.len() * self.learners.len()
    }

    /// Draws a config. Numeric values are uniform within the current bounds
    /// and get a fresh weight record (initial weight zero).
    pub fn sample_branch(&mut self, mode: SampleMode, rng: &mut Rng) -> Config {
        let branch = match mode {
            SampleMode::Random => Branch {
                preprocessor: rng.random_range(0..self.preprocessors.len()),
                learner: rng.random_range(0..self.learners.len()),
            },
            SampleMode::FrozenBest => self.best_branch(rng),
        };
        self.visited.insert(branch);
        let mut provenance = Vec::new();
        let preprocessor = self.sample_node(Level::Preprocessor, branch.preprocessor, rng, &mut provenance);
        let learner = self.sample_node(Level::Learner, branch.learner, rng, &mut provenance);
        Config {
            preprocessor,
            learner,
            branch,
            provenance,
        }
    }

    /// Fixes the current highest-weight branches as the only ones
    /// `FrozenBest` will draw from, whatever later weight updates do.
    pub fn freeze(&mut self) {
        self.frozen = Some(self.top_branches());
    }

    pub fn frozen(&self) -> Option<&[Branch]> {
        self.frozen.as_deref()
    }

    /// Highest-weight branches among those evaluated, or among all
    /// branches before any evaluation.
    pub fn top_branches(&self) -> Vec<Branch> {
        let pool: Vec<Branch> = if self.visited.is_empty() {
            (0..self.preprocessors.len())
                .flat_map(|p| {
                    (0..self.learners.len()).map(move |l| Branch {
                        preprocessor: p,
                        learner: l,
                    })
                })
                .collect()
        } else {
            self.visited.iter().copied().collect()
        };
        let best = pool
            .iter()
            .map(|&b| self.branch_weight(b))
            .max()
            .expect("tree has at least one branch");
        pool.into_iter().filter(|&b| self.branch_weight(b) == best).collect()
    }

    fn best_branch(&self, rng: &mut Rng) -> Branch {
        match &self.frozen {
            Some(f) => *f.choose(rng).expect("non-empty"),
            None => *self.top_branches().choose(rng).expect("non-empty"),
        }
    }

    fn sample_node(
        &mut self,
        level: Level,
        index: usize,
        rng: &mut Rng,
        provenance: &mut Vec<ValueRef>,
    ) -> NodeChoice {
        let node = &mut self.nodes_mut(level)[index];
        let mut params = Params::new();
        for (pi, p) in node.params.iter_mut().enumerate() {
            if let Some(c) = &p.def.when {
                match params.get(&c.param) {
                    Some(ParamValue::Choice(v)) if *v == c.equals => {}
                    _ => continue,
                }
            }
            let value = match (&p.def.domain, p.range) {
                (Domain::Choice { values }, _) => {
                    ParamValue::Choice(values.choose(rng).expect("non-empty").clone())
                }
                (domain, Some((lo, hi))) => {
                    let raw = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                    let value = snap(domain, raw, (lo, hi));
                    provenance.push(ValueRef {
                        level,
                        param: pi,
                        slot: p.records.len(),
                    });
                    p.records.push(ValueRecord {
                        value: value.as_f64().expect("numeric"),
                        weight: 0,
                    });
                    value
                }
                (_, None) => unreachable!("numeric parameter without range"),
            };
            params.insert(p.def.name.clone(), value);
        }
        NodeChoice {
            kind: node.name.clone(),
            params,
        }
    }

    /// Rewards (+1) or deprecates (-1) the branch of `config` and the
    /// numeric values it sampled. Returns whether the result was redundant,
    /// i.e. within `epsilon` of some earlier result on every goal.
    pub fn update_weights(
        &mut self,
        config: &Config,
        result: &GoalVector,
        history: &[GoalVector],
        epsilon: f64,
    ) -> Result<bool> {
        if !(epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be > 0"));
        }
        let mut redundant = false;
        for prior in history {
            if !prior.same_goals(result) {
                return Err(Error::GoalMismatch(format!(
                    "history has {:?}, result has {:?}",
                    prior.names(),
                    result.names()
                )));
            }
            redundant |= prior.within(result, epsilon);
        }
        let delta = if redundant { -1 } else { 1 };
        self.preprocessors[config.branch.preprocessor].weight += delta;
        self.learners[config.branch.learner].weight += delta;
        for r in &config.provenance {
            let node = &mut self.nodes_mut(r.level)[config.branch.index(r.level)];
            node.params[r.param].records[r.slot].weight += delta;
        }
        Ok(redundant)
    }

    /// Narrows every numeric range of the branch's nodes towards the
    /// best-weighted value recorded for it and away from the worst one.
    /// Parameters with fewer than two records are left alone.
    pub fn narrow_branch(&mut self, branch: Branch) {
        for level in [Level::Preprocessor, Level::Learner] {
            let node = &mut self.nodes_mut(level)[branch.index(level)];
            for p in &mut node.params {
                let Some((lo, hi)) = p.range else { continue };
                if p.records.len() < 2 {
                    continue;
                }
                // best: highest weight, earliest on ties; worst: lowest, latest on ties
                let best = p
                    .records
                    .iter()
                    .rev()
                    .max_by_key(|r| r.weight)
                    .expect("records");
                let worst = p.records.iter().rev().min_by_key(|r| r.weight).expect("records");
                let x = best.value.clamp(lo, hi);
                let y = worst.value.clamp(lo, hi);
                p.range = Some(narrow_range((lo, hi), x, y).expect("clamped into range"));
            }
        }
    }
}

/// Integer parameters round to the nearest integer inside the current
/// bounds when the bounds contain one, otherwise inside the domain.
fn snap(domain: &Domain, raw: f64, (lo, hi): (f64, f64)) -> ParamValue {
    match *domain {
        Domain::Real { .. } => ParamValue::Real(raw),
        Domain::Int { lo: dlo, hi: dhi } => {
            let (a, b) = (lo.ceil(), hi.floor());
            let v = if a <= b {
                raw.round().clamp(a, b)
            } else {
                raw.round().clamp(dlo as f64, dhi as f64)
            };
            ParamValue::Int(v as i64)
        }
        Domain::Choice { .. } => unreachable!(),
    }
}

/// Moves the bounds towards `best` and away from `worst`:
/// `(best, mid)` when `best <= worst`, otherwise `(mid, best)`, where `mid`
/// is their midpoint.
pub fn narrow_range(range: (f64, f64), best: f64, worst: f64) -> Result<(f64, f64)> {
    let (lo, hi) = range;
    for (name, v) in [("best", best), ("worst", worst)] {
        if !(lo <= v && v <= hi) {
            return Err(Error::param(name, format!("{v} outside [{lo}, {hi}]")));
        }
    }
    let mid = (best + worst) / 2.0;
    Ok(if best <= worst { (best, mid) } else { (mid, best) })
}
