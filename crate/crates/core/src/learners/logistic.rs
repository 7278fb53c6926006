use super::Penalty;
use crate::matrix::Matrix;

const MAX_EPOCHS: usize = 1000;

/// L1/L2 regularised logistic regression trained by full-batch gradient
/// descent on internally standardised features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
    epochs: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticRegression {
    /// Minimises mean log-loss plus `penalty(w) / (c * n)`. Stops when the
    /// objective improves by less than `tol` or after 1000 epochs.
    pub(crate) fn fit(x: &Matrix, y: &[bool], penalty: Penalty, tol: f64, c: f64) -> Self {
        let (n, f) = (x.rows(), x.cols());
        let nf = n as f64;
        let mut mean = vec![0.0; f];
        let mut inv_std = vec![0.0; f];
        for j in 0..f {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / nf;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf;
            mean[j] = m;
            inv_std[j] = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
        }
        let z: Vec<f64> = x
            .iter_rows()
            .flat_map(|row| (0..f).map(|j| (row[j] - mean[j]) * inv_std[j]).collect::<Vec<_>>())
            .collect();
        let active = inv_std.iter().filter(|s| **s > 0.0).count();
        // The log-loss gradient is Lipschitz with constant at most
        // trace(Z'Z)/(4n) = active/4 for standardised columns.
        let reg = 1.0 / (c * nf);
        let lr = 1.0 / (0.25 * active.max(1) as f64 + reg);

        let mut w = vec![0.0; f];
        let mut b = 0.0;
        let mut prev = f64::INFINITY;
        let mut epochs = 0;
        let mut grad = vec![0.0; f];
        while epochs < MAX_EPOCHS {
            epochs += 1;
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            let mut loss = 0.0;
            for i in 0..n {
                let row = &z[i * f..(i + 1) * f];
                let s = b + row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                let t = if y[i] { 1.0 } else { 0.0 };
                loss += softplus(s) - t * s;
                let r = sigmoid(s) - t;
                gb += r;
                for (g, v) in grad.iter_mut().zip(row) {
                    *g += r * v;
                }
            }
            loss /= nf;
            loss += match penalty {
                Penalty::L2 => 0.5 * reg * w.iter().map(|v| v * v).sum::<f64>(),
                Penalty::L1 => reg * w.iter().map(|v| v.abs()).sum::<f64>(),
            };
            if prev - loss < tol && epochs > 1 {
                break;
            }
            prev = loss;
            for (j, wj) in w.iter_mut().enumerate() {
                let pen = match penalty {
                    Penalty::L2 => reg * *wj,
                    Penalty::L1 => reg * wj.signum() * (*wj != 0.0) as u8 as f64,
                };
                *wj -= lr * (grad[j] / nf + pen);
            }
            b -= lr * gb / nf;
        }
        LogisticRegression {
            mean,
            inv_std,
            weights: w,
            bias: b,
            epochs,
        }
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        let s = self.bias
            + row
                .iter()
                .enumerate()
                .map(|(j, v)| (v - self.mean[j]) * self.inv_std[j] * self.weights[j])
                .sum::<f64>();
        sigmoid(s)
    }

    pub(crate) fn predict_row(&self, row: &[f64]) -> bool {
        self.probability(row) > 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_and_softplus_are_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn all_zero_features_predict_the_prior() {
        let x = Matrix::zeros(4, 2);
        let m = LogisticRegression::fit(&x, &[true, true, true, false], Penalty::L2, 1e-8, 1.0);
        assert!(m.probability(&[0.0, 0.0]) > 0.5);
    }
}
