//! Seeded synthetic data for calibration and tests.

use rand::Rng as _;

use crate::dataset::Dataset;
use crate::matrix::Matrix;
use crate::seed;

/// `n` points uniform in the unit cube of dimension `d`.
pub fn uniform_cube(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = seed::rng(seed);
    let data = (0..n * d).map(|_| rng.random::<f64>()).collect();
    Matrix::new(n, d, data).expect("shape")
}

/// `n` points uniform on a segment: column 0 varies, the other `cols - 1`
/// columns are constant.
pub fn embedded_segment(n: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = seed::rng(seed);
    let mut m = Matrix::zeros(n, cols);
    for i in 0..n {
        m.set(i, 0, rng.random::<f64>());
        for j in 1..cols {
            m.set(i, j, j as f64 * 0.5);
        }
    }
    m
}

/// Binary classification data with three informative columns followed by
/// `copies` noisy rescaled copies of them, so the intrinsic dimension stays
/// near three whatever the column count. About a quarter of the rows are
/// positive. Rows carry an effort value (larger for the first informative
/// column) and one of three versions, assigned by row thirds.
pub fn low_dim_classification(n: usize, copies: usize, seed: u64) -> Dataset {
    let mut rng = seed::rng(seed);
    let cols = 3 + copies;
    let mut rows = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    let mut effort = Vec::with_capacity(n);
    for _ in 0..n {
        let u: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        let s = u[0] + 0.8 * u[1] * u[2] + 0.3 * (rng.random::<f64>() - 0.5);
        let mut label = s > 1.0;
        if rng.random::<f64>() < 0.05 {
            label = !label;
        }
        let mut row = Vec::with_capacity(cols);
        row.extend_from_slice(&u);
        for k in 0..copies {
            let scale = (k + 2) as f64;
            row.push(scale * u[k % 3] + k as f64 + 0.01 * (rng.random::<f64>() - 0.5));
        }
        rows.push(row);
        target.push(label);
        effort.push((10.0 + 200.0 * u[0] * rng.random_range(0.5..1.5)).round());
    }
    let version = (0..n).map(|i| format!("{}.0", 1 + 3 * i / n.max(1))).collect();
    let names = (0..cols)
        .map(|j| if j < 3 { format!("x{j}") } else { format!("copy{}", j - 3) })
        .collect();
    Dataset::new(
        Matrix::from_rows(&rows).expect("rectangular"),
        target,
        Some(effort),
        Some(version),
        names,
    )
    .expect("both classes present at this size")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_shape_and_balance() {
        let d = low_dim_classification(500, 20, 1);
        assert_eq!(d.features().cols(), 23);
        let rate = d.n_positive() as f64 / d.len() as f64;
        assert!((0.1..0.45).contains(&rate), "{rate}");
        let v = d.version().unwrap();
        assert_eq!(v[0], "1.0");
        assert_eq!(v[499], "3.0");
    }

    #[test]
    fn seeded() {
        assert_eq!(uniform_cube(10, 3, 4), uniform_cube(10, 3, 4));
        assert_ne!(uniform_cube(10, 3, 4), uniform_cube(10, 3, 5));
    }
}
