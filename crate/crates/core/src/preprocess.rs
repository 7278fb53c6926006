//! Tabular pre-processors, fitted on training data and applied to both sides.
//!
//! Every transform computes its statistics (means, quantiles, maxima,
//! neighbour structure) from the training rows only. SMOTE is the one
//! transform that changes the row set: it appends synthetic minority rows to
//! the training data and leaves the test data untouched.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::option_space::params::{get_choice, get_int, get_real, Params};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L1,
    L2,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileOutput {
    Uniform,
    Normal,
}

/// A pre-processor and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PreprocSpec {
    None,
    StandardScaler,
    MinmaxScaler,
    MaxabsScaler,
    /// Centres on the median and scales by the spread between two
    /// percentiles (given in `[0, 100]`).
    RobustScaler { quantile_lo: f64, quantile_hi: f64 },
    /// Per-column mean centring.
    KernelCenterer,
    QuantileTransform {
        n_quantiles: usize,
        subsample: usize,
        output_distribution: QuantileOutput,
    },
    Normalizer { norm: Norm },
    /// Maps values strictly above `threshold` to 1 and everything else to 0.
    Binarizer { threshold: f64 },
    Smote {
        n_neighbors: usize,
        n_synthetics: usize,
        minkowski_exponent: f64,
    },
}

pub const KINDS: [&str; 10] = [
    "none",
    "standard_scaler",
    "minmax_scaler",
    "maxabs_scaler",
    "robust_scaler",
    "kernel_centerer",
    "quantile_transform",
    "normalizer",
    "binarizer",
    "smote",
];

impl PreprocSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            PreprocSpec::None => "none",
            PreprocSpec::StandardScaler => "standard_scaler",
            PreprocSpec::MinmaxScaler => "minmax_scaler",
            PreprocSpec::MaxabsScaler => "maxabs_scaler",
            PreprocSpec::RobustScaler { .. } => "robust_scaler",
            PreprocSpec::KernelCenterer => "kernel_centerer",
            PreprocSpec::QuantileTransform { .. } => "quantile_transform",
            PreprocSpec::Normalizer { .. } => "normalizer",
            PreprocSpec::Binarizer { .. } => "binarizer",
            PreprocSpec::Smote { .. } => "smote",
        }
    }

    /// Builds a spec from an option-tree node name and its sampled values.
    pub fn from_params(kind: &str, params: &Params) -> Result<Self> {
        let spec = match kind {
            "none" => PreprocSpec::None,
            "standard_scaler" => PreprocSpec::StandardScaler,
            "minmax_scaler" => PreprocSpec::MinmaxScaler,
            "maxabs_scaler" => PreprocSpec::MaxabsScaler,
            "robust_scaler" => PreprocSpec::RobustScaler {
                quantile_lo: get_real(params, "quantile_lo")?,
                quantile_hi: get_real(params, "quantile_hi")?,
            },
            "kernel_centerer" => PreprocSpec::KernelCenterer,
            "quantile_transform" => PreprocSpec::QuantileTransform {
                n_quantiles: get_int(params, "n_quantiles")?.max(1) as usize,
                subsample: get_int(params, "subsample")?.max(1) as usize,
                output_distribution: match get_choice(params, "output_distribution")? {
                    "uniform" => QuantileOutput::Uniform,
                    "normal" => QuantileOutput::Normal,
                    other => return Err(Error::param("output_distribution", other)),
                },
            },
            "normalizer" => PreprocSpec::Normalizer {
                norm: match get_choice(params, "norm")? {
                    "l1" => Norm::L1,
                    "l2" => Norm::L2,
                    "max" => Norm::Max,
                    other => return Err(Error::param("norm", other)),
                },
            },
            "binarizer" => PreprocSpec::Binarizer {
                threshold: get_real(params, "threshold")?,
            },
            "smote" => PreprocSpec::Smote {
                n_neighbors: get_int(params, "n_neighbors")?.max(0) as usize,
                n_synthetics: get_int(params, "n_synthetics")?.max(0) as usize,
                minkowski_exponent: get_real(params, "minkowski_exponent")?,
            },
            other => return Err(Error::invalid(format!("unknown preprocessor {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PreprocSpec::RobustScaler {
                quantile_lo,
                quantile_hi,
            } if !(0.0..=100.0).contains(&quantile_lo)
                || !(0.0..=100.0).contains(&quantile_hi)
                || quantile_lo >= quantile_hi =>
            {
                Err(Error::param(
                    "quantile_range",
                    format!("need 0 <= lo < hi <= 100, got ({quantile_lo}, {quantile_hi})"),
                ))
            }
            PreprocSpec::Smote { n_neighbors: 0, .. } => {
                Err(Error::param("n_neighbors", "must be >= 1"))
            }
            PreprocSpec::Smote {
                minkowski_exponent, ..
            } if !(minkowski_exponent > 0.0) => {
                Err(Error::param("minkowski_exponent", "must be > 0"))
            }
            PreprocSpec::QuantileTransform { n_quantiles: 0, .. } => {
                Err(Error::param("n_quantiles", "must be >= 1"))
            }
            _ => Ok(()),
        }
    }
}

/// A transform whose statistics were computed from training data.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedPreproc {
    Identity,
    /// `(x - shift) * scale` per column.
    Affine { shift: Vec<f64>, scale: Vec<f64> },
    Quantile {
        references: Vec<Vec<f64>>,
        probabilities: Vec<f64>,
        output: QuantileOutput,
    },
    Normalizer(Norm),
    Binarizer(f64),
}

const QUANTILE_CLIP: f64 = 1e-7;

impl FittedPreproc {
    pub fn fit(spec: &PreprocSpec, train: &Matrix, seed: u64) -> Result<Self> {
        spec.validate()?;
        if train.is_empty() {
            return Err(Error::Empty("training rows"));
        }
        let cols = train.cols();
        let columns: Vec<Vec<f64>> = (0..cols).map(|j| train.column(j)).collect();
        let fitted = match *spec {
            PreprocSpec::None | PreprocSpec::Smote { .. } => FittedPreproc::Identity,
            PreprocSpec::StandardScaler => {
                let (shift, scale) = columns
                    .iter()
                    .map(|c| {
                        let (mean, std) = mean_std(c);
                        (mean, if std > 0.0 { 1.0 / std } else { 0.0 })
                    })
                    .unzip();
                FittedPreproc::Affine { shift, scale }
            }
            PreprocSpec::MinmaxScaler => {
                let (shift, scale) = columns
                    .iter()
                    .map(|c| {
                        let (lo, hi) = min_max(c);
                        (lo, if hi > lo { 1.0 / (hi - lo) } else { 1.0 })
                    })
                    .unzip();
                FittedPreproc::Affine { shift, scale }
            }
            PreprocSpec::MaxabsScaler => FittedPreproc::Affine {
                shift: vec![0.0; cols],
                scale: columns
                    .iter()
                    .map(|c| {
                        let m = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                        if m > 0.0 {
                            1.0 / m
                        } else {
                            1.0
                        }
                    })
                    .collect(),
            },
            PreprocSpec::RobustScaler {
                quantile_lo,
                quantile_hi,
            } => {
                let (shift, scale) = columns
                    .iter()
                    .map(|c| {
                        let sorted = sorted(c);
                        let spread =
                            percentile(&sorted, quantile_hi) - percentile(&sorted, quantile_lo);
                        (
                            percentile(&sorted, 50.0),
                            if spread > 0.0 { 1.0 / spread } else { 0.0 },
                        )
                    })
                    .unzip();
                FittedPreproc::Affine { shift, scale }
            }
            PreprocSpec::KernelCenterer => FittedPreproc::Affine {
                shift: columns.iter().map(|c| mean_std(c).0).collect(),
                scale: vec![1.0; cols],
            },
            PreprocSpec::QuantileTransform {
                n_quantiles,
                subsample,
                output_distribution,
            } => {
                let rows: Vec<usize> = if train.rows() > subsample {
                    let mut rng = seed::derived_rng(seed, &[0x5155]);
                    let mut idx = rand::seq::index::sample(&mut rng, train.rows(), subsample).into_vec();
                    idx.sort_unstable();
                    idx
                } else {
                    (0..train.rows()).collect()
                };
                let n_q = n_quantiles.min(rows.len()).max(1);
                let probabilities: Vec<f64> = if n_q == 1 {
                    vec![0.5]
                } else {
                    (0..n_q).map(|k| k as f64 / (n_q - 1) as f64).collect()
                };
                let references = columns
                    .iter()
                    .map(|c| {
                        let s = sorted(&rows.iter().map(|&i| c[i]).collect::<Vec<_>>());
                        probabilities.iter().map(|&p| percentile(&s, p * 100.0)).collect()
                    })
                    .collect();
                FittedPreproc::Quantile {
                    references,
                    probabilities,
                    output: output_distribution,
                }
            }
            PreprocSpec::Normalizer { norm } => FittedPreproc::Normalizer(norm),
            PreprocSpec::Binarizer { threshold } => FittedPreproc::Binarizer(threshold),
        };
        Ok(fitted)
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        match self {
            FittedPreproc::Identity => x.clone(),
            FittedPreproc::Affine { shift, scale } => {
                x.map_cells(|j, v| (v - shift[j]) * scale[j])
            }
            FittedPreproc::Quantile {
                references,
                probabilities,
                output,
            } => {
                let normal = Normal::standard();
                x.map_cells(|j, v| {
                    let p = quantile_position(&references[j], probabilities, v);
                    match output {
                        QuantileOutput::Uniform => p,
                        QuantileOutput::Normal => {
                            normal.inverse_cdf(p.clamp(QUANTILE_CLIP, 1.0 - QUANTILE_CLIP))
                        }
                    }
                })
            }
            FittedPreproc::Normalizer(norm) => {
                let mut out = x.clone();
                for i in 0..out.rows() {
                    let row = out.row_mut(i);
                    let n = match norm {
                        Norm::L1 => row.iter().map(|v| v.abs()).sum::<f64>(),
                        Norm::L2 => row.iter().map(|v| v * v).sum::<f64>().sqrt(),
                        Norm::Max => row.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
                    };
                    if n > 0.0 {
                        row.iter_mut().for_each(|v| *v /= n);
                    }
                }
                out
            }
            FittedPreproc::Binarizer(t) => {
                x.map_cells(|_, v| if v > *t { 1.0 } else { 0.0 })
            }
        }
    }
}

/// Fits `spec` on `train`, applies it to both sides, then oversamples the
/// training side when the spec is SMOTE.
pub fn fit_transform(
    spec: &PreprocSpec,
    train: &Dataset,
    test: &Dataset,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let fitted = FittedPreproc::fit(spec, train.features(), seed)?;
    let train_out = train.with_features(fitted.apply(train.features()));
    let test_out = test.with_features(fitted.apply(test.features()));
    match *spec {
        PreprocSpec::Smote {
            n_neighbors,
            n_synthetics,
            minkowski_exponent,
        } => Ok((
            smote_oversample(&train_out, n_neighbors, n_synthetics, minkowski_exponent, seed)?,
            test_out,
        )),
        _ => Ok((train_out, test_out)),
    }
}

/// Appends `n_synthetics` minority rows, each interpolated between a random
/// minority row and one of its `n_neighbors` nearest minority rows under
/// the Minkowski distance with exponent `minkowski_exponent`.
///
/// The minority class is the one with fewer rows (positive on a tie).
/// `n_neighbors` is clamped to the minority count minus one.
pub fn smote_oversample(
    train: &Dataset,
    n_neighbors: usize,
    n_synthetics: usize,
    minkowski_exponent: f64,
    seed: u64,
) -> Result<Dataset> {
    let positives = train.n_positive();
    let minority_label = positives * 2 <= train.len();
    let minority: Vec<usize> = (0..train.len())
        .filter(|&i| train.target()[i] == minority_label)
        .collect();
    if minority.len() < 2 {
        return Err(Error::SmoteTooFew(minority.len()));
    }
    if n_neighbors == 0 {
        return Err(Error::param("n_neighbors", "must be >= 1"));
    }
    let k = n_neighbors.min(minority.len() - 1);
    let x = train.features();
    let p = minkowski_exponent;

    // k nearest minority neighbours of every minority row; ties by position.
    let neighbours: Vec<Vec<usize>> = minority
        .iter()
        .map(|&a| {
            let mut d: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| {
                    let s: f64 = x
                        .row(a)
                        .iter()
                        .zip(x.row(b))
                        .map(|(u, v)| (u - v).abs().powf(p))
                        .sum();
                    (s, b)
                })
                .collect();
            d.sort_by(|l, r| l.0.total_cmp(&r.0).then(l.1.cmp(&r.1)));
            d.into_iter().take(k).map(|(_, b)| b).collect()
        })
        .collect();

    let mut rng = seed::derived_rng(seed, &[0x5307e]);
    let mut rows = Matrix::empty(x.cols());
    let mut parents = Vec::with_capacity(n_synthetics);
    let mut buf = vec![0.0; x.cols()];
    for _ in 0..n_synthetics {
        let a = rng.random_range(0..minority.len());
        let b = neighbours[a][rng.random_range(0..k)];
        let t: f64 = rng.random();
        let base = x.row(minority[a]);
        for ((o, u), v) in buf.iter_mut().zip(base).zip(x.row(b)) {
            *o = u + t * (v - u);
        }
        rows.push_row(&buf)?;
        parents.push(minority[a]);
    }
    let mut out = train.clone();
    out.append_synthetic(rows, minority_label, &parents)?;
    Ok(out)
}

fn mean_std(c: &[f64]) -> (f64, f64) {
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn min_max(c: &[f64]) -> (f64, f64) {
    c.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn sorted(c: &[f64]) -> Vec<f64> {
    let mut s = c.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 100]`.
pub(crate) fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let mut pos = (q / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    // absorb rounding from the percent round trip so grid points hit rows
    if (pos - pos.round()).abs() < 1e-9 {
        pos = pos.round();
    }
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Position of `v` among monotone reference quantiles, in `[0, 1]`. Inside a
/// run of tied references the result is the midpoint of the run's
/// probabilities.
fn quantile_position(refs: &[f64], probs: &[f64], v: f64) -> f64 {
    let n = refs.len();
    if v < refs[0] {
        return probs[0];
    }
    if v > refs[n - 1] {
        return probs[n - 1];
    }
    let up = {
        let i = refs.partition_point(|&r| r <= v);
        if i >= n {
            probs[n - 1]
        } else {
            lerp(refs[i - 1], refs[i], probs[i - 1], probs[i], v)
        }
    };
    let down = {
        let j = refs.partition_point(|&r| r < v);
        if j == 0 {
            probs[0]
        } else {
            lerp(refs[j - 1], refs[j], probs[j - 1], probs[j], v)
        }
    };
    0.5 * (up + down)
}

fn lerp(x0: f64, x1: f64, y0: f64, y1: f64, x: f64) -> f64 {
    if x1 == x0 {
        y1
    } else {
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}
