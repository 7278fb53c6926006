use rand::seq::SliceRandom;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Fraction of rows held out for testing under RIG1.
pub const TEST_FRACTION: f64 = 0.2;
/// Fraction of the training rows the optimizer's objective validates on.
pub const VALIDATION_FRACTION: f64 = 0.3;

/// Stratified split of row positions. Returns `(kept, held_out)`, each in
/// ascending order, with both classes present on both sides.
pub fn stratified_indices(data: &Dataset, held_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = data.len();
    let mut pos: Vec<usize> = (0..n).filter(|&i| data.target()[i]).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| !data.target()[i]).collect();
    if pos.len() < 2 || neg.len() < 2 {
        return Err(Error::invalid(format!(
            "stratified split needs two rows of each class, found {} positive and {} negative",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = seed::rng(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let n_held = (held_fraction * n as f64).round() as usize;
    let pos_held = ((held_fraction * pos.len() as f64).round() as usize).clamp(1, pos.len() - 1);
    let neg_held = n_held.saturating_sub(pos_held).clamp(1, neg.len() - 1);
    let mut held: Vec<usize> = pos[..pos_held].iter().chain(&neg[..neg_held]).copied().collect();
    let mut kept: Vec<usize> = pos[pos_held..].iter().chain(&neg[neg_held..]).copied().collect();
    held.sort_unstable();
    kept.sort_unstable();
    Ok((kept, held))
}

/// RIG1: stratified 80/20 train/test split, fixed by `(seed, repeat)`.
pub fn rig1_split(data: &Dataset, repeat: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if data.len() < 10 {
        return Err(Error::invalid(format!(
            "RIG1 needs at least 10 rows, found {}",
            data.len()
        )));
    }
    let (train, test) = stratified_indices(data, TEST_FRACTION, seed::derive(seed, &[repeat as u64]))?;
    Ok((data.subset(&train)?, data.subset(&test)?))
}

/// Carves the optimizer's tuning and validation sets out of a training set.
pub fn tune_split(train: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let (tune, valid) = stratified_indices(train, VALIDATION_FRACTION, seed)?;
    Ok((train.subset(&tune)?, train.subset(&valid)?))
}
