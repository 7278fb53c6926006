//! Fractal (correlation) dimension of a feature matrix.
//!
//! `C(r)` is the fraction of row pairs closer than `r` in L1 distance. Over a
//! log-spaced radius grid the slope of `ln C(r)` against `ln r` approaches
//! the intrinsic dimension; the estimate is the maximum of the smoothed
//! slopes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// Above this the estimator is known to undercount columns.
pub const RELIABLE_MAX: f64 = 20.0;

/// At or below this dimension the simple optimizer is expected to suffice.
pub const SIMPLE_ENOUGH: f64 = 4.0;
/// Above this dimension the simple optimizer is expected to struggle.
pub const TOO_COMPLEX: f64 = 8.0;

/// Advice on whether DODGE is likely to be enough for data of this
/// intrinsic dimension.
pub fn recommendation(dimension: f64) -> &'static str {
    if dimension <= SIMPLE_ENOUGH {
        "simple optimizer (DODGE) recommended"
    } else if dimension > TOO_COMPLEX {
        "simple optimizer not recommended"
    } else {
        "inconclusive"
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `2 / (N (N - 1))` times the number of pairs `i < j` with L1 distance
/// strictly below `r`.
pub fn correlation_sum(rows: &Matrix, r: f64) -> Result<f64> {
    let n = rows.rows();
    if n < 2 {
        return Err(Error::invalid("correlation sum needs at least two rows"));
    }
    if !(r > 0.0) {
        return Err(Error::param("r", "must be > 0"));
    }
    let close: usize = (0..n)
        .map(|i| {
            (i + 1..n)
                .filter(|&j| l1(rows.row(i), rows.row(j)) < r)
                .count()
        })
        .sum();
    Ok(2.0 * close as f64 / (n as f64 * (n - 1) as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicDimOptions {
    /// Number of log-spaced radii.
    pub steps: usize,
    /// Rows beyond this are subsampled without replacement.
    pub subsample_cap: usize,
    /// Width of the centred moving average over the slopes.
    pub smoothing_window: usize,
    /// Radii closing fewer pairs than this are left out of the slopes.
    pub min_pairs: usize,
    pub seed: u64,
}

impl Default for IntrinsicDimOptions {
    fn default() -> Self {
        IntrinsicDimOptions {
            steps: 20,
            subsample_cap: 1000,
            smoothing_window: 3,
            min_pairs: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicDimReport {
    pub radii: Vec<f64>,
    pub corr_sums: Vec<f64>,
    /// Slope between consecutive radii; `None` where a radius closed too
    /// few pairs.
    pub slopes: Vec<Option<f64>>,
    pub smoothed: Vec<Option<f64>>,
    pub dimension: f64,
    pub n_used: usize,
    /// All rows identical, or too few close pairs to measure any slope.
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl IntrinsicDimReport {
    /// `(ln r, ln C(r))` for radii with a nonzero correlation sum.
    pub fn log_table(&self) -> Vec<(f64, f64)> {
        self.radii
            .iter()
            .zip(&self.corr_sums)
            .filter(|(_, c)| **c > 0.0)
            .map(|(r, c)| (r.ln(), c.ln()))
            .collect()
    }
}

/// Rescales every column to `[0, 1]`; constant columns become zero.
pub fn minmax_normalize(x: &Matrix) -> Matrix {
    let bounds: Vec<(f64, f64)> = (0..x.cols())
        .map(|j| {
            x.column(j)
                .into_iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        })
        .collect();
    x.map_cells(|j, v| {
        let (lo, hi) = bounds[j];
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.0
        }
    })
}

/// Sorted L1 distances of all row pairs.
fn pair_distances(x: &Matrix) -> Vec<f64> {
    let n = x.rows();
    let mut d: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..n).map(move |j| l1(x.row(i), x.row(j))))
        .collect();
    d.par_sort_unstable_by(f64::total_cmp);
    d
}

/// Centred moving average over the defined entries of `values`, using full
/// windows only. When there are fewer defined entries than the window, all
/// of them are averaged into one value at the middle.
fn smooth(values: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    let defined: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    let mut out = vec![None; values.len()];
    let w = window.max(1);
    if defined.is_empty() {
        return out;
    }
    if defined.len() < w {
        let mean = defined.iter().map(|p| p.1).sum::<f64>() / defined.len() as f64;
        out[defined[defined.len() / 2].0] = Some(mean);
        return out;
    }
    for k in 0..=defined.len() - w {
        let mean = defined[k..k + w].iter().map(|p| p.1).sum::<f64>() / w as f64;
        out[defined[k + w / 2].0] = Some(mean);
    }
    out
}

/// Estimates the intrinsic dimension of the rows of `x`.
pub fn intrinsic_dimension(x: &Matrix, options: &IntrinsicDimOptions) -> Result<IntrinsicDimReport> {
    if x.rows() < 2 {
        return Err(Error::invalid("intrinsic dimension needs at least two rows"));
    }
    if options.steps < 2 {
        return Err(Error::param("steps", "must be >= 2"));
    }
    if options.subsample_cap < 2 {
        return Err(Error::param("subsample_cap", "must be >= 2"));
    }
    let mut data = minmax_normalize(x);
    if data.rows() > options.subsample_cap {
        let mut rng = seed::rng(options.seed);
        let mut idx = rand::seq::index::sample(&mut rng, data.rows(), options.subsample_cap).into_vec();
        idx.sort_unstable();
        data = data.select_rows(&idx);
    }
    let n_used = data.rows();
    let dist = pair_distances(&data);
    let total = dist.len() as f64;
    let r_max = *dist.last().expect("at least one pair");
    let empty = |warning: &str| IntrinsicDimReport {
        radii: Vec::new(),
        corr_sums: Vec::new(),
        slopes: Vec::new(),
        smoothed: Vec::new(),
        dimension: 0.0,
        n_used,
        degenerate: true,
        warning: Some(warning.to_string()),
    };
    if r_max <= 0.0 {
        return Ok(empty("all rows are identical"));
    }
    let r_min = dist[dist.partition_point(|&d| d <= 0.0)];
    let (a, b) = (r_min.ln(), r_max.ln());
    let radii: Vec<f64> = (0..options.steps)
        .map(|k| (a + (b - a) * k as f64 / (options.steps - 1) as f64).exp())
        .collect();
    let counts: Vec<usize> = radii.iter().map(|&r| dist.partition_point(|&d| d < r)).collect();
    let corr_sums: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let usable = |k: usize| counts[k] > 0 && counts[k] >= options.min_pairs;
    let slopes: Vec<Option<f64>> = (0..options.steps - 1)
        .map(|k| {
            (usable(k) && usable(k + 1) && radii[k + 1] > radii[k]).then(|| {
                (corr_sums[k + 1].ln() - corr_sums[k].ln()) / (radii[k + 1].ln() - radii[k].ln())
            })
        })
        .collect();
    let smoothed = smooth(&slopes, options.smoothing_window);
    let best = smoothed.iter().flatten().copied().fold(None, |m: Option<f64>, v| {
        Some(m.map_or(v, |m| m.max(v)))
    });
    let Some(best) = best else {
        let mut report = empty("too few close pairs to measure a slope");
        report.radii = radii;
        report.corr_sums = corr_sums;
        report.slopes = slopes;
        report.smoothed = smoothed;
        return Ok(report);
    };
    let dimension = best.max(0.0);
    let warning = (dimension > RELIABLE_MAX).then(|| {
        format!("dimension {dimension:.1} exceeds {RELIABLE_MAX}; the estimate tends to undercount here")
    });
    Ok(IntrinsicDimReport {
        radii,
        corr_sums,
        slopes,
        smoothed,
        dimension,
        n_used,
        degenerate: false,
        warning,
    })
}
