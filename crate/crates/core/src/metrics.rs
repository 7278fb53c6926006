//! Evaluation goals: distance-to-heaven (`d2h`) and effort-aware `Popt(20)`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    LowerIsBetter,
    HigherIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Goal {
    D2h,
    Popt20,
}

impl Goal {
    pub fn name(self) -> &'static str {
        match self {
            Goal::D2h => "d2h",
            Goal::Popt20 => "popt20",
        }
    }

    pub fn polarity(self) -> Polarity {
        match self {
            Goal::D2h => Polarity::LowerIsBetter,
            Goal::Popt20 => Polarity::HigherIsBetter,
        }
    }

    /// The worst attainable score.
    pub fn worst(self) -> f64 {
        match self.polarity() {
            Polarity::LowerIsBetter => 1.0,
            Polarity::HigherIsBetter => 0.0,
        }
    }

    /// Orders scores so that `Greater` means `a` is better than `b`.
    pub fn compare(self, a: f64, b: f64) -> Ordering {
        match self.polarity() {
            Polarity::LowerIsBetter => b.total_cmp(&a),
            Polarity::HigherIsBetter => a.total_cmp(&b),
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Goal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d2h" => Ok(Goal::D2h),
            "popt20" | "popt" => Ok(Goal::Popt20),
            other => Err(Error::invalid(format!("unknown goal {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalScore {
    pub goal: Goal,
    pub score: f64,
}

/// Named goal scores, each in `[0, 1]`. The first entry is the primary goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoalVector {
    entries: Vec<GoalScore>,
}

impl GoalVector {
    pub fn new(entries: Vec<(Goal, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::NoGoals);
        }
        for (i, (goal, score)) in entries.iter().enumerate() {
            if !(0.0..=1.0).contains(score) {
                return Err(Error::invalid(format!("{goal} score {score} outside [0, 1]")));
            }
            if entries[..i].iter().any(|(g, _)| g == goal) {
                return Err(Error::GoalMismatch(format!("duplicate goal {goal}")));
            }
        }
        Ok(GoalVector {
            entries: entries
                .into_iter()
                .map(|(goal, score)| GoalScore { goal, score })
                .collect(),
        })
    }

    /// Worst attainable scores for each goal.
    pub fn worst(goals: &[Goal]) -> Result<Self> {
        Self::new(goals.iter().map(|&g| (g, g.worst())).collect())
    }

    pub fn entries(&self) -> &[GoalScore] {
        &self.entries
    }

    pub fn get(&self, goal: Goal) -> Option<f64> {
        self.entries.iter().find(|e| e.goal == goal).map(|e| e.score)
    }

    pub fn primary(&self) -> GoalScore {
        self.entries[0]
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.goal.name()).collect()
    }

    pub fn same_goals(&self, other: &GoalVector) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| a.goal == b.goal)
    }

    /// True when every goal differs from `other` by strictly less than
    /// `epsilon`.
    pub fn within(&self, other: &GoalVector, epsilon: f64) -> bool {
        self.entries
            .iter()
            .zip(&other.entries)
            .all(|(a, b)| (a.score - b.score).abs() < epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_labels(actual: &[bool], predicted: &[bool]) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                left: actual.len(),
                right: predicted.len(),
            });
        }
        if actual.is_empty() {
            return Err(Error::Empty("labels"));
        }
        let mut c = Confusion::default();
        for (&a, &p) in actual.iter().zip(predicted) {
            match (a, p) {
                (true, true) => c.tp += 1,
                (true, false) => c.fn_ += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn recall(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.tp as f64 / pos as f64)
    }

    pub fn false_positive_rate(&self) -> Option<f64> {
        let neg = self.fp + self.tn;
        (neg > 0).then(|| self.fp as f64 / neg as f64)
    }
}

/// Normalized distance from `(recall, fpr)` to the ideal point `(1, 0)`.
pub fn d2h_from_rates(recall: f64, fpr: f64) -> f64 {
    ((1.0 - recall).powi(2) + fpr.powi(2)).sqrt() / std::f64::consts::SQRT_2
}

pub fn d2h(c: &Confusion) -> Result<f64> {
    let recall = c.recall().ok_or(Error::D2hUndefined("positive"))?;
    let fpr = c.false_positive_rate().ok_or(Error::D2hUndefined("negative"))?;
    Ok(d2h_from_rates(recall, fpr))
}

/// Normalized `Popt(20)` and whether the normalization was degenerate
/// (optimal and worst curves coincide, in which case the score is 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Popt {
    pub score: f64,
    pub degenerate: bool,
}

/// Fraction of total effort at which the effort-aware curve is cut.
pub const POPT_CUTOFF: f64 = 0.2;

/// Area under the cumulative defects-vs-effort curve for `x` in
/// `[0, cutoff]`, visiting rows in `order`. The curve is linear within each
/// row's effort span; rows with zero effort add a vertical step.
pub fn effort_curve_area(order: &[usize], effort: &[f64], actual: &[bool], cutoff: f64) -> f64 {
    let total_effort: f64 = effort.iter().sum();
    let total_defects = actual.iter().filter(|&&a| a).count() as f64;
    let (mut x0, mut y0, mut area) = (0.0_f64, 0.0_f64, 0.0_f64);
    for &i in order {
        let x1 = x0 + effort[i] / total_effort;
        let y1 = y0 + if actual[i] { 1.0 / total_defects } else { 0.0 };
        if x1 >= cutoff {
            if x1 > x0 {
                let y_cut = y0 + (y1 - y0) * (cutoff - x0) / (x1 - x0);
                area += (cutoff - x0) * (y0 + y_cut) / 2.0;
            }
            return area;
        }
        area += (x1 - x0) * (y0 + y1) / 2.0;
        x0 = x1;
        y0 = y1;
    }
    area
}

fn density(effort: f64, defective: bool) -> f64 {
    match (defective, effort > 0.0) {
        (false, _) => 0.0,
        (true, true) => 1.0 / effort,
        (true, false) => f64::INFINITY,
    }
}

/// Rows predicted defective first, then the rest; each group by ascending
/// effort, ties by row position.
pub fn inspection_order(effort: &[f64], predicted: &[bool]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..effort.len()).collect();
    order.sort_by(|&a, &b| {
        predicted[b]
            .cmp(&predicted[a])
            .then(effort[a].total_cmp(&effort[b]))
            .then(a.cmp(&b))
    });
    order
}

fn density_order(effort: &[f64], actual: &[bool], descending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..effort.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (density(effort[a], actual[a]), density(effort[b], actual[b]));
        let ord = if descending { db.total_cmp(&da) } else { da.total_cmp(&db) };
        ord.then(a.cmp(&b))
    });
    order
}

pub fn popt20(effort: &[f64], actual: &[bool], predicted: &[bool]) -> Result<Popt> {
    if effort.len() != actual.len() || actual.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: effort.len(),
            right: actual.len().max(predicted.len()),
        });
    }
    if actual.is_empty() {
        return Err(Error::Empty("labels"));
    }
    if effort.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::PoptUndefined("effort must be finite and >= 0"));
    }
    if effort.iter().sum::<f64>() <= 0.0 {
        return Err(Error::PoptUndefined("total effort is zero"));
    }
    if !actual.iter().any(|&a| a) {
        return Err(Error::PoptUndefined("no actual defects"));
    }
    let area = |order: &[usize]| effort_curve_area(order, effort, actual, POPT_CUTOFF);
    let optimal = area(&density_order(effort, actual, true));
    let worst = area(&density_order(effort, actual, false));
    let model = area(&inspection_order(effort, predicted));
    if optimal - worst <= f64::EPSILON * optimal.max(1e-300) {
        return Ok(Popt {
            score: 1.0,
            degenerate: true,
        });
    }
    let score = 1.0 - (optimal - model) / (optimal - worst);
    Ok(Popt {
        score: score.clamp(0.0, 1.0),
        degenerate: false,
    })
}

/// Scores predictions on the requested goals, in the requested order.
pub fn goals(
    actual: &[bool],
    predicted: &[bool],
    effort: Option<&[f64]>,
    wanted: &[Goal],
) -> Result<GoalVector> {
    if wanted.is_empty() {
        return Err(Error::NoGoals);
    }
    if wanted.contains(&Goal::Popt20) && effort.is_none() {
        return Err(Error::MissingEffort);
    }
    let confusion = Confusion::from_labels(actual, predicted)?;
    let mut entries = Vec::with_capacity(wanted.len());
    for &goal in wanted {
        let score = match goal {
            Goal::D2h => d2h(&confusion)?,
            Goal::Popt20 => popt20(effort.expect("checked above"), actual, predicted)?.score,
        };
        entries.push((goal, score));
    }
    GoalVector::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T: bool = true;
    const F: bool = false;

    #[test]
    fn confusion_counts() {
        let c = Confusion::from_labels(&[T, T, F, F], &[T, F, T, F]).unwrap();
        assert_eq!((c.tp, c.fn_, c.fp, c.tn), (1, 1, 1, 1));
        let c = Confusion::from_labels(&[T, F, T], &[T, F, T]).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let c = Confusion::from_labels(&[T, F], &[T, T]).unwrap();
        assert_eq!((c.tp, c.fp), (1, 1));
        assert!(Confusion::from_labels(&[T], &[T, F]).is_err());
        assert!(Confusion::from_labels(&[], &[]).is_err());
    }

    #[test]
    fn d2h_reference_points() {
        assert_eq!(d2h_from_rates(1.0, 0.0), 0.0);
        assert_eq!(d2h_from_rates(0.0, 1.0), 1.0);
        assert!((d2h_from_rates(0.8, 0.2) - 0.2).abs() < 1e-12);
        let single = Confusion::from_labels(&[T, T], &[T, F]).unwrap();
        assert!(matches!(d2h(&single), Err(Error::D2hUndefined(_))));
    }

    #[test]
    fn popt_small_example() {
        // A (10 LOC, defective) and B (90 LOC, clean); predicting A matches
        // the optimal ordering.
        let p = popt20(&[10.0, 90.0], &[T, F], &[T, F]).unwrap();
        assert_eq!(p.score, 1.0);
        assert!(!p.degenerate);
    }

    #[test]
    fn popt_optimal_and_worst_orderings() {
        let effort = [5.0, 40.0, 20.0, 10.0, 25.0];
        let actual = [T, F, T, F, T];
        let opt = popt20(&effort, &actual, &actual).unwrap();
        assert!((opt.score - 1.0).abs() < 1e-9);
        // Flagging only clean modules pushes every defect past the 20% mark,
        // which is exactly what the worst ordering does as well.
        let inverted: Vec<bool> = actual.iter().map(|a| !a).collect();
        let worst = popt20(&effort, &actual, &inverted).unwrap();
        assert!(worst.score.abs() < 1e-9);
    }

    #[test]
    fn popt_degenerate_and_errors() {
        // one row: every ordering is identical
        let p = popt20(&[10.0], &[T], &[F]).unwrap();
        assert!(p.degenerate);
        assert_eq!(p.score, 1.0);
        assert!(popt20(&[0.0, 0.0], &[T, F], &[T, F]).is_err());
        assert!(popt20(&[1.0, 1.0], &[F, F], &[T, F]).is_err());
    }

    #[test]
    fn goal_vectors() {
        let g = goals(&[T, F], &[T, F], None, &[Goal::D2h]).unwrap();
        assert_eq!(g.get(Goal::D2h), Some(0.0));
        assert!(matches!(
            goals(&[T, F], &[T, F], None, &[Goal::D2h, Goal::Popt20]),
            Err(Error::MissingEffort)
        ));
        let err = goals(&[T, F], &[T, F], None, &[]).unwrap_err();
        assert_eq!(err.to_string(), "no goals");
        let g = goals(&[T, F], &[T, F], Some(&[1.0, 2.0]), &[Goal::Popt20, Goal::D2h]).unwrap();
        assert_eq!(g.primary().goal, Goal::Popt20);
    }

    #[test]
    fn goal_vector_json_round_trip() {
        let g = GoalVector::new(vec![(Goal::D2h, 0.25), (Goal::Popt20, 0.5)]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<GoalVector>(&s).unwrap(), g);
    }

    #[test]
    fn d2h_monotone_on_grid() {
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        for &fpr in &grid {
            for w in grid.windows(2) {
                assert!(d2h_from_rates(w[1], fpr) <= d2h_from_rates(w[0], fpr));
                assert!(d2h_from_rates(fpr, w[1]) >= d2h_from_rates(fpr, w[0]));
            }
        }
    }

    proptest! {
        #[test]
        fn popt_in_unit_interval_and_scale_free(
            rows in prop::collection::vec((0.0..500.0f64, any::<bool>(), any::<bool>()), 1..30),
            scale in 0.01..100.0f64,
        ) {
            let effort: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let actual: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let predicted: Vec<bool> = rows.iter().map(|r| r.2).collect();
            prop_assume!(actual.iter().any(|&a| a) && effort.iter().sum::<f64>() > 0.0);
            let p = popt20(&effort, &actual, &predicted).unwrap();
            prop_assert!((0.0..=1.0).contains(&p.score));
            let scaled: Vec<f64> = effort.iter().map(|e| e * scale).collect();
            let q = popt20(&scaled, &actual, &predicted).unwrap();
            prop_assert!((p.score - q.score).abs() < 1e-9);
        }
    }
}
