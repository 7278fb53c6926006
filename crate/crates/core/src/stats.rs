//! Bootstrap significance, Vargha-Delaney A12 and win/tie/loss counts.

use std::cmp::Ordering;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Polarity;
use crate::seed;

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;
/// A12 at or beyond this (or its mirror) counts as more than a small effect.
pub const SMALL_EFFECT: f64 = 0.56;
pub const TIE: &str = "tie";

/// Scores of one treatment, one per repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub name: String,
    pub scores: Vec<f64>,
    pub polarity: Polarity,
}

impl SampleSet {
    pub fn new(name: impl Into<String>, scores: Vec<f64>, polarity: Polarity) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Empty("sample"));
        }
        Ok(SampleSet {
            name: name.into(),
            scores,
            polarity,
        })
    }

    pub fn mean(&self) -> f64 {
        mean(&self.scores)
    }

    pub fn median(&self) -> f64 {
        let mut s = self.scores.clone();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_nonempty(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        Err(Error::Empty("sample"))
    } else {
        Ok(())
    }
}

/// Two-sided bootstrap test of the difference in means. Both samples are
/// resampled from their pooled values (the null of no difference), and the
/// observed difference is significant when fewer than `1 - confidence` of
/// the resampled differences are at least as extreme.
///
/// The samples are put in a canonical order first, so the answer does not
/// depend on argument order.
pub fn bootstrap_test(a: &[f64], b: &[f64], resamples: usize, confidence: f64, seed: u64) -> Result<bool> {
    check_nonempty(a, b)?;
    if resamples < 100 {
        return Err(Error::param("resamples", "must be >= 100"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::param("confidence", "must be in (0, 1)"));
    }
    let (x, y) = if canonical_cmp(a, b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let observed = (mean(x) - mean(y)).abs();
    if observed == 0.0 {
        return Ok(false);
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let draw_mean = |rng: &mut seed::Rng, n: usize| {
        (0..n).map(|_| pooled[rng.random_range(0..pooled.len())]).sum::<f64>() / n as f64
    };
    let extreme = (0..resamples as u64)
        .into_par_iter()
        .filter(|&k| {
            let mut rng = seed::derived_rng(seed, &[k]);
            let mx = draw_mean(&mut rng, x.len());
            let my = draw_mean(&mut rng, y.len());
            // guard against rounding making an identical split look smaller
            (mx - my).abs() >= observed * (1.0 - 1e-12)
        })
        .count();
    Ok((extreme as f64 / resamples as f64) < 1.0 - confidence)
}

fn canonical_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Mid-ranks (1-based) of `v`, ties sharing the mean of their positions.
fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Probability that a draw from `a` is larger than one from `b`, ties
/// counting half.
pub fn a12_raw(a: &[f64], b: &[f64]) -> Result<f64> {
    check_nonempty(a, b)?;
    let (m, n) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r1: f64 = mid_ranks(&pooled)[..a.len()].iter().sum();
    Ok(((r1 - m * (m + 1.0) / 2.0) / (m * n)).clamp(0.0, 1.0))
}

/// A12 of `a` over `b` in the direction where larger means better for
/// `a`'s polarity.
pub fn a12(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    match a.polarity {
        Polarity::HigherIsBetter => a12_raw(&a.scores, &b.scores),
        Polarity::LowerIsBetter => a12_raw(&b.scores, &a.scores),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonVerdict {
    pub a: String,
    pub b: String,
    pub significant: bool,
    /// Polarity-corrected A12 of `a` over `b`.
    pub a12: f64,
    /// `a`, `b`, or [`TIE`].
    pub winner: String,
}

impl ComparisonVerdict {
    pub fn is_tie(&self) -> bool {
        self.winner == TIE
    }
}

/// A treatment wins when the bootstrap finds a significant difference and
/// the effect is more than small; anything else is a tie.
pub fn verdict(a: &SampleSet, b: &SampleSet, seed: u64) -> Result<ComparisonVerdict> {
    if a.polarity != b.polarity {
        return Err(Error::invalid(format!(
            "polarity mismatch between {:?} and {:?}",
            a.name, b.name
        )));
    }
    let significant = bootstrap_test(&a.scores, &b.scores, DEFAULT_RESAMPLES, DEFAULT_CONFIDENCE, seed)?;
    let effect = a12(a, b)?;
    let winner = if significant && effect >= SMALL_EFFECT {
        a.name.clone()
    } else if significant && effect <= 1.0 - SMALL_EFFECT {
        b.name.clone()
    } else {
        TIE.to_string()
    };
    Ok(ComparisonVerdict {
        a: a.name.clone(),
        b: b.name.clone(),
        significant,
        a12: effect,
        winner,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinTieLoss {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

impl WinTieLoss {
    pub fn total(&self) -> usize {
        self.wins + self.ties + self.losses
    }
}

/// Counts verdicts won, tied and lost by `focal`.
pub fn win_tie_loss(verdicts: &[ComparisonVerdict], focal: &str) -> WinTieLoss {
    let mut w = WinTieLoss::default();
    for v in verdicts {
        if v.is_tie() {
            w.ties += 1;
        } else if v.winner == focal {
            w.wins += 1;
        } else {
            w.losses += 1;
        }
    }
    w
}
