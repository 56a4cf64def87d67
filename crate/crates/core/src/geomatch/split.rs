use crate::error::{Error, Result};
use crate::rng::{stream, DetRng};

/// Marks data as belonging to the training partition. Resampling accepts
/// only this type, so validation and test data cannot be rebalanced by
/// accident.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSplit<T>(T);

impl<T> TrainSplit<T> {
    /// Declares `data` to be training data.
    pub fn designate(data: T) -> Self {
        TrainSplit(data)
    }

    pub fn get(&self) -> &T {
        &self.0
    }

    pub fn into_inner(self) -> T {
        self.0
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> Result<U>) -> Result<TrainSplit<U>> {
        f(self.0).map(TrainSplit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits<T> {
    pub train: TrainSplit<T>,
    pub validation: T,
    pub test: T,
}

/// Seeded shuffle into train/validation/test. Validation and test sizes are
/// `round(ratio·n)`; train takes the remainder. Each part keeps the input
/// order of its members.
pub fn split<T: Clone>(items: &[T], ratios: (f64, f64, f64), seed: u64) -> Result<Splits<Vec<T>>> {
    if items.is_empty() {
        return Err(Error::InvalidInput("cannot split an empty dataset".into()));
    }
    let (r_train, r_val, r_test) = ratios;
    if [r_train, r_val, r_test].iter().any(|r| !(0.0..=1.0).contains(r))
        || (r_train + r_val + r_test - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidInput(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let n = items.len();
    let n_val = ((r_val * n as f64).round() as usize).min(n);
    let n_test = ((r_test * n as f64).round() as usize).min(n - n_val);
    let n_train = n - n_val - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    DetRng::new(seed, stream::SPLIT).shuffle(&mut order);
    let take = |idx: &mut [usize]| -> Vec<T> {
        idx.sort_unstable();
        idx.iter().map(|&i| items[i].clone()).collect()
    };
    let (train_idx, rest) = order.split_at_mut(n_train);
    let (val_idx, test_idx) = rest.split_at_mut(n_val);
    Ok(Splits {
        train: TrainSplit(take(train_idx)),
        validation: take(val_idx),
        test: take(test_idx),
    })
}
