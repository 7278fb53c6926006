use rand::Rng as _;
use rayon::prelude::*;

use super::{min_split_count, Criterion, MaxFeatures, Splitter};
use crate::matrix::Matrix;
use crate::seed::{self, Rng};

#[derive(Debug, Clone)]
pub(crate) struct TreeOptions {
    pub criterion: Criterion,
    pub splitter: Splitter,
    pub min_samples_split: usize,
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(bool),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classifier. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

fn impurity(criterion: Criterion, pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    let q = 1.0 - p;
    match criterion {
        Criterion::Gini => 1.0 - p * p - q * q,
        Criterion::Entropy => {
            let h = |v: f64| if v > 0.0 { -v * v.log2() } else { 0.0 };
            h(p) + h(q)
        }
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = 0.5 * a + 0.5 * b;
    if m >= a && m < b {
        m
    } else {
        a
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [bool],
    opts: &'a TreeOptions,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, rows: &[usize], rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r]).count();
        self.nodes.push(Node::Leaf(2 * pos > n));
        if n < self.opts.min_samples_split || pos == 0 || pos == n {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, pos, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x.get(i, feature) <= threshold);
        let left = self.build(&l, rng);
        let right = self.build(&r, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&self, rng: &mut Rng) -> Vec<usize> {
        let f = self.x.cols();
        match self.opts.max_features {
            Some(m) if m < f => {
                let mut picked = rand::seq::index::sample(rng, f, m).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..f).collect(),
        }
    }

    fn best_split(&self, rows: &[usize], pos: usize, rng: &mut Rng) -> Option<(usize, f64)> {
        let n = rows.len();
        let crit = self.opts.criterion;
        let score = |left_pos: usize, nl: usize| {
            let nr = n - nl;
            (nl as f64 * impurity(crit, left_pos, nl)
                + nr as f64 * impurity(crit, pos - left_pos, nr))
                / n as f64
        };
        let mut best: Option<(usize, f64, f64)> = None;
        let mut consider = |feature: usize, threshold: f64, s: f64| {
            if best.is_none_or(|(_, _, b)| s < b) {
                best = Some((feature, threshold, s));
            }
        };
        for feature in self.candidate_features(rng) {
            match self.opts.splitter {
                Splitter::Best => {
                    let mut vals: Vec<(f64, bool)> = rows
                        .iter()
                        .map(|&r| (self.x.get(r, feature), self.y[r]))
                        .collect();
                    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let mut left_pos = 0;
                    for k in 0..n - 1 {
                        left_pos += vals[k].1 as usize;
                        if vals[k].0 < vals[k + 1].0 {
                            consider(feature, midpoint(vals[k].0, vals[k + 1].0), score(left_pos, k + 1));
                        }
                    }
                }
                Splitter::Random => {
                    let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                        let v = self.x.get(r, feature);
                        (lo.min(v), hi.max(v))
                    });
                    if lo >= hi {
                        continue;
                    }
                    let t = rng.random_range(lo..hi);
                    let (mut nl, mut left_pos) = (0, 0);
                    for &r in rows {
                        if self.x.get(r, feature) <= t {
                            nl += 1;
                            left_pos += self.y[r] as usize;
                        }
                    }
                    if nl > 0 && nl < n {
                        consider(feature, t, score(left_pos, nl));
                    }
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }
}

impl DecisionTree {
    pub(crate) fn fit(x: &Matrix, y: &[bool], opts: &TreeOptions, seed: u64) -> Self {
        let rows: Vec<usize> = (0..x.rows()).collect();
        Self::fit_rows(x, y, &rows, opts, &mut seed::rng(seed))
    }

    fn fit_rows(x: &Matrix, y: &[bool], rows: &[usize], opts: &TreeOptions, rng: &mut Rng) -> Self {
        let mut b = Builder {
            x,
            y,
            opts,
            nodes: Vec::new(),
        };
        b.build(rows, rng);
        DecisionTree { nodes: b.nodes }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }

    pub(crate) fn predict_row(&self, row: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Bagged CART trees with majority vote.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn fit(
        x: &Matrix,
        y: &[bool],
        n_estimators: usize,
        criterion: Criterion,
        min_samples_split: f64,
        bootstrap: bool,
        max_features: MaxFeatures,
        seed: u64,
    ) -> Self {
        let n = x.rows();
        let opts = TreeOptions {
            criterion,
            splitter: Splitter::Best,
            min_samples_split: min_split_count(min_samples_split, n),
            max_features: match max_features {
                MaxFeatures::Sqrt => Some(((x.cols() as f64).sqrt().floor() as usize).max(1)),
                MaxFeatures::All => None,
            },
        };
        let trees = (0..n_estimators as u64)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::derived_rng(seed, &[t]);
                let rows: Vec<usize> = if bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit_rows(x, y, &rows, &opts, &mut rng)
            })
            .collect();
        RandomForest { trees }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub(crate) fn predict_row(&self, row: &[f64]) -> bool {
        let votes = self.trees.iter().filter(|t| t.predict_row(row)).count();
        2 * votes > self.trees.len()
    }
}
