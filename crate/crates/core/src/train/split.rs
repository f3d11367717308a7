use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;

/// Seeded shuffle, then the first `round(n · fraction)` items (at least one,
/// leaving at least one) form the training set.
pub fn split_dataset<T>(samples: Vec<T>, fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), TrainError> {
    let n = samples.len();
    if n < 2 {
        return Err(TrainError::TooFewSamples { found: n });
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(TrainError::InvalidConfig(format!("split fraction {fraction} must lie in (0, 1)")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let mut slots: Vec<Option<T>> = samples.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| idx.iter().map(|&i| slots[i].take().expect("permutation")).collect::<Vec<T>>();
    let train = take(&order[..n_train]);
    let test = take(&order[n_train..]);
    Ok((train, test))
}
