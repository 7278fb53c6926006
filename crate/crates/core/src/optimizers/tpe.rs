//! Tree-structured Parzen estimator with a best/rest split.

use std::cmp::Ordering;

use rand::Rng as _;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::{check_budget, evaluate, Objective, OptimizerKind, OptimizerReport, Trial};
use crate::error::Result;
use crate::metrics::Polarity;
use crate::option_space::{
    Branch, Config, Domain, Level, Node, NodeChoice, OptionTree, ParamValue, Params, SampleMode,
};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct TpeSettings {
    /// Fraction of completed trials forming the "best" group.
    pub gamma: f64,
    pub candidates_per_step: usize,
    /// Random trials before the density model takes over.
    pub startup: usize,
    /// Smallest kernel bandwidth as a fraction of the parameter range.
    pub min_bandwidth: f64,
}

impl Default for TpeSettings {
    fn default() -> Self {
        TpeSettings {
            gamma: 0.25,
            candidates_per_step: 24,
            startup: 5,
            min_bandwidth: 0.01,
        }
    }
}

/// Observations of one group (best or rest).
struct Group<'a> {
    configs: Vec<&'a Config>,
}

impl Group<'_> {
    fn node_counts(&self, level: Level, n_nodes: usize) -> Vec<f64> {
        let mut counts = vec![0.0; n_nodes];
        for c in &self.configs {
            counts[branch_index(c.branch, level)] += 1.0;
        }
        counts
    }

    /// Values of one parameter among configs that used `node`.
    fn values(&self, level: Level, node: usize, param: &str) -> Vec<&ParamValue> {
        self.configs
            .iter()
            .filter(|c| branch_index(c.branch, level) == node)
            .filter_map(|c| side(c, level).params.get(param))
            .collect()
    }
}

fn branch_index(b: Branch, level: Level) -> usize {
    match level {
        Level::Preprocessor => b.preprocessor,
        Level::Learner => b.learner,
    }
}

fn side(c: &Config, level: Level) -> &NodeChoice {
    match level {
        Level::Preprocessor => &c.preprocessor,
        Level::Learner => &c.learner,
    }
}

/// Smoothed frequency: `(count + 1) / (n + k)`.
fn categorical_probs(counts: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum::<f64>() + counts.len() as f64;
    counts.iter().map(|c| (c + 1.0) / total).collect()
}

fn sample_categorical(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// One-dimensional Parzen estimator on `[lo, hi]`: a truncated Gaussian per
/// observation plus a uniform prior component, equally weighted.
struct Parzen {
    lo: f64,
    hi: f64,
    centers: Vec<f64>,
    bandwidth: f64,
}

impl Parzen {
    fn new(lo: f64, hi: f64, centers: Vec<f64>, min_bandwidth: f64) -> Self {
        let width = hi - lo;
        let n = centers.len().max(1) as f64;
        let bandwidth = (width / n.sqrt()).max(min_bandwidth * width);
        Parzen {
            lo,
            hi,
            centers,
            bandwidth,
        }
    }

    fn kernel(&self, mu: f64) -> Normal {
        Normal::new(mu, self.bandwidth).expect("positive bandwidth")
    }

    fn density(&self, x: f64) -> f64 {
        let width = self.hi - self.lo;
        if width <= 0.0 {
            return 1.0;
        }
        let k = (self.centers.len() + 1) as f64;
        let mut d = 1.0 / width;
        for &mu in &self.centers {
            let n = self.kernel(mu);
            let mass = n.cdf(self.hi) - n.cdf(self.lo);
            if mass > 0.0 {
                d += n.pdf(x) / mass;
            }
        }
        d / k
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        if self.hi <= self.lo {
            return self.lo;
        }
        let pick = rng.random_range(0..=self.centers.len());
        if pick == self.centers.len() {
            return rng.random_range(self.lo..=self.hi);
        }
        let n = self.kernel(self.centers[pick]);
        let (a, b) = (n.cdf(self.lo), n.cdf(self.hi));
        if b - a <= 0.0 {
            return rng.random_range(self.lo..=self.hi);
        }
        let u = a + (b - a) * rng.random::<f64>();
        n.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16)).clamp(self.lo, self.hi)
    }
}

fn snap_int(v: f64, lo: f64, hi: f64) -> ParamValue {
    ParamValue::Int(v.round().clamp(lo.ceil(), hi.floor()) as i64)
}

struct Model<'a> {
    tree: &'a OptionTree,
    best: Group<'a>,
    rest: Group<'a>,
    settings: &'a TpeSettings,
}

impl Model<'_> {
    fn parzen(&self, group: &Group, level: Level, node: usize, pi: usize) -> Option<Parzen> {
        let p = &self.tree.node(level, node).params[pi];
        let (lo, hi) = p.range?;
        let centers = group
            .values(level, node, &p.def.name)
            .into_iter()
            .filter_map(ParamValue::as_f64)
            .collect();
        Some(Parzen::new(lo, hi, centers, self.settings.min_bandwidth))
    }

    fn choice_probs(&self, group: &Group, level: Level, node: usize, pi: usize) -> Vec<f64> {
        let p = &self.tree.node(level, node).params[pi];
        let Domain::Choice { values } = &p.def.domain else {
            unreachable!("choice parameter")
        };
        let mut counts = vec![0.0; values.len()];
        for v in group.values(level, node, &p.def.name) {
            if let ParamValue::Choice(s) = v {
                if let Some(k) = values.iter().position(|x| x == s) {
                    counts[k] += 1.0;
                }
            }
        }
        categorical_probs(&counts)
    }

    /// Draws a config from the best-group model and returns it with its
    /// log density ratio `log l(x) - log g(x)`.
    fn propose(&self, rng: &mut Rng) -> (Config, f64) {
        let mut score = 0.0;
        let pick_node = |level: Level, rng: &mut Rng, score: &mut f64| {
            let n = self.tree.nodes(level).len();
            let l = categorical_probs(&self.best.node_counts(level, n));
            let g = categorical_probs(&self.rest.node_counts(level, n));
            let k = sample_categorical(&l, rng);
            *score += l[k].ln() - g[k].ln();
            k
        };
        let branch = Branch {
            preprocessor: pick_node(Level::Preprocessor, rng, &mut score),
            learner: pick_node(Level::Learner, rng, &mut score),
        };
        let preprocessor = self.propose_node(Level::Preprocessor, branch.preprocessor, rng, &mut score);
        let learner = self.propose_node(Level::Learner, branch.learner, rng, &mut score);
        (
            Config {
                preprocessor,
                learner,
                branch,
                provenance: Vec::new(),
            },
            score,
        )
    }

    fn propose_node(&self, level: Level, index: usize, rng: &mut Rng, score: &mut f64) -> NodeChoice {
        let node: &Node = self.tree.node(level, index);
        let mut params = Params::new();
        for (pi, p) in node.params.iter().enumerate() {
            if let Some(c) = &p.def.when {
                match params.get(&c.param) {
                    Some(ParamValue::Choice(v)) if *v == c.equals => {}
                    _ => continue,
                }
            }
            let value = match &p.def.domain {
                Domain::Choice { values } => {
                    let l = self.choice_probs(&self.best, level, index, pi);
                    let g = self.choice_probs(&self.rest, level, index, pi);
                    let k = sample_categorical(&l, rng);
                    *score += l[k].ln() - g[k].ln();
                    ParamValue::Choice(values[k].clone())
                }
                domain => {
                    let l = self.parzen(&self.best, level, index, pi).expect("numeric range");
                    let g = self.parzen(&self.rest, level, index, pi).expect("numeric range");
                    let raw = l.sample(rng);
                    let value = match domain {
                        Domain::Int { .. } => snap_int(raw, l.lo, l.hi),
                        _ => ParamValue::Real(raw),
                    };
                    let x = value.as_f64().expect("numeric");
                    *score += l.density(x).ln() - g.density(x).ln();
                    value
                }
            };
            params.insert(p.def.name.clone(), value);
        }
        NodeChoice {
            kind: node.name.clone(),
            params,
        }
    }
}

/// Loss to minimise for a primary-goal score.
fn loss(t: &Trial) -> f64 {
    let p = t.goals.primary();
    match p.goal.polarity() {
        Polarity::LowerIsBetter => p.score,
        Polarity::HigherIsBetter => -p.score,
    }
}

/// Runs TPE for `budget` evaluations. The first `startup` trials are
/// uniform; afterwards each trial is the candidate, among
/// `candidates_per_step` drawn from the best-group model, with the highest
/// best/rest density ratio.
pub fn tpe(
    tree: &OptionTree,
    objective: &dyn Objective,
    budget: usize,
    seed: u64,
    settings: &TpeSettings,
) -> Result<OptimizerReport> {
    check_budget(budget)?;
    let mut sampler = tree.clone();
    let mut rng = seed::rng(seed);
    let mut trials: Vec<Trial> = Vec::with_capacity(budget);
    for index in 0..budget {
        let config = if index < settings.startup.max(1) {
            let mut c = sampler.sample_branch(SampleMode::Random, &mut rng);
            c.provenance.clear();
            c
        } else {
            let mut order: Vec<usize> = (0..trials.len()).collect();
            order.sort_by(|&a, &b| {
                loss(&trials[a])
                    .partial_cmp(&loss(&trials[b]))
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let n_best = ((settings.gamma * trials.len() as f64).ceil() as usize).clamp(1, trials.len());
            let model = Model {
                tree,
                best: Group {
                    configs: order[..n_best].iter().map(|&i| &trials[i].config).collect(),
                },
                rest: Group {
                    configs: order[n_best..].iter().map(|&i| &trials[i].config).collect(),
                },
                settings,
            };
            let mut chosen: Option<(Config, f64)> = None;
            for _ in 0..settings.candidates_per_step.max(1) {
                let (c, s) = model.propose(&mut rng);
                if chosen.as_ref().is_none_or(|(_, best)| s > *best) {
                    chosen = Some((c, s));
                }
            }
            chosen.expect("at least one candidate").0
        };
        let (goals, error) = evaluate(objective, &config)?;
        trials.push(Trial {
            index,
            config,
            goals,
            redundant: None,
            error,
        });
    }
    Ok(OptimizerReport::from_trials(OptimizerKind::Tpe, trials))
}
