use crate::matrix::Matrix;

const MIN_ALPHA: f64 = 1e-10;

/// Multinomial naive Bayes over non-negative feature "counts". Columns with
/// negative training values are shifted by their training minimum; the same
/// shift applies at prediction time and anything still negative is clipped
/// to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialNb {
    shift: Vec<f64>,
    /// Log prior and per-feature log probabilities, negative class first.
    log_prior: [f64; 2],
    log_theta: [Vec<f64>; 2],
}

impl MultinomialNb {
    pub(crate) fn fit(x: &Matrix, y: &[bool], alpha: f64) -> Self {
        let alpha = alpha.max(MIN_ALPHA);
        let f = x.cols();
        let shift: Vec<f64> = (0..f)
            .map(|j| {
                let min = x.column(j).into_iter().fold(f64::INFINITY, f64::min);
                if min < 0.0 { -min } else { 0.0 }
            })
            .collect();
        let mut counts = [vec![0.0; f], vec![0.0; f]];
        let mut class_n = [0usize; 2];
        for (row, &label) in x.iter_rows().zip(y) {
            let c = label as usize;
            class_n[c] += 1;
            for j in 0..f {
                counts[c][j] += row[j] + shift[j];
            }
        }
        let n = y.len() as f64;
        let log_theta = counts.map(|cnt| {
            let total: f64 = cnt.iter().sum::<f64>() + alpha * f as f64;
            cnt.iter().map(|v| ((v + alpha) / total).ln()).collect()
        });
        MultinomialNb {
            shift,
            log_prior: class_n.map(|k| (k as f64 / n).ln()),
            log_theta,
        }
    }

    /// Unnormalised log posterior of each class, negative class first.
    pub fn log_scores(&self, row: &[f64]) -> [f64; 2] {
        [0, 1].map(|c| {
            self.log_prior[c]
                + row
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (v + self.shift[j]).max(0.0) * self.log_theta[c][j])
                    .sum::<f64>()
        })
    }

    pub(crate) fn predict_row(&self, row: &[f64]) -> bool {
        let [neg, pos] = self.log_scores(row);
        pos > neg
    }
}
