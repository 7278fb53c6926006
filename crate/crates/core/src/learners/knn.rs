use super::{KnnMetric, KnnWeights};
use crate::matrix::Matrix;

/// k-nearest-neighbour vote. Distance weighting gives exact matches all the
/// weight when any neighbour is at distance zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    x: Matrix,
    y: Vec<bool>,
    k: usize,
    weights: KnnWeights,
    metric: KnnMetric,
}

pub(crate) fn distance(metric: KnnMetric, a: &[f64], b: &[f64]) -> f64 {
    let diffs = a.iter().zip(b).map(|(u, v)| (u - v).abs());
    match metric {
        KnnMetric::Chebyshev => diffs.fold(0.0, f64::max),
        KnnMetric::Minkowski { p: 1.0 } => diffs.sum(),
        KnnMetric::Minkowski { p: 2.0 } => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        KnnMetric::Minkowski { p } => diffs.map(|d| d.powf(p)).sum::<f64>().powf(1.0 / p),
    }
}

impl Knn {
    pub(crate) fn fit(x: &Matrix, y: &[bool], k: usize, weights: KnnWeights, metric: KnnMetric) -> Self {
        Knn {
            x: x.clone(),
            y: y.to_vec(),
            k: k.clamp(1, y.len().max(1)),
            weights,
            metric,
        }
    }

    pub(crate) fn predict_row(&self, row: &[f64]) -> bool {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter_rows()
            .enumerate()
            .map(|(i, t)| (distance(self.metric, row, t), i))
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
        }
        let nearest = &d[..k];
        let mut votes = [0.0f64; 2];
        match self.weights {
            KnnWeights::Uniform => {
                for &(_, i) in nearest {
                    votes[self.y[i] as usize] += 1.0;
                }
            }
            KnnWeights::Distance => {
                let exact = nearest.iter().any(|(dist, _)| *dist == 0.0);
                for &(dist, i) in nearest {
                    let w = if exact {
                        (dist == 0.0) as u8 as f64
                    } else {
                        1.0 / dist
                    };
                    votes[self.y[i] as usize] += w;
                }
            }
        }
        votes[1] > votes[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        let a = [0.0, 0.0];
        let b = [3.0, 4.0];
        assert_eq!(distance(KnnMetric::Minkowski { p: 1.0 }, &a, &b), 7.0);
        assert_eq!(distance(KnnMetric::Minkowski { p: 2.0 }, &a, &b), 5.0);
        assert_eq!(distance(KnnMetric::Chebyshev, &a, &b), 4.0);
        let d3 = distance(KnnMetric::Minkowski { p: 3.0 }, &a, &b);
        assert!((d3 - 91f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn exact_match_dominates_distance_weighting() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [0.2]]).unwrap();
        let m = Knn::fit(&x, &[true, false, false], 3, KnnWeights::Distance, KnnMetric::Chebyshev);
        assert!(m.predict_row(&[0.0]));
    }
}
