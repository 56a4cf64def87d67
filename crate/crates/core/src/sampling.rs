//! Class rebalancing of the training partition.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::geomatch::TrainSplit;
use crate::rng::{stream, DetRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    None,
    Undersample,
    Oversample,
    FiftyFifty,
}

impl SamplingKind {
    pub const ALL: [SamplingKind; 4] = [
        SamplingKind::None,
        SamplingKind::Undersample,
        SamplingKind::Oversample,
        SamplingKind::FiftyFifty,
    ];

    /// Short name used on the command line.
    pub fn flag(self) -> &'static str {
        match self {
            SamplingKind::None => "none",
            SamplingKind::Undersample => "under",
            SamplingKind::Oversample => "over",
            SamplingKind::FiftyFifty => "5050",
        }
    }
}

impl fmt::Display for SamplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.flag())
    }
}

impl FromStr for SamplingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SamplingKind::None),
            "under" | "undersample" => Ok(SamplingKind::Undersample),
            "over" | "oversample" => Ok(SamplingKind::Oversample),
            "5050" | "fifty_fifty" => Ok(SamplingKind::FiftyFifty),
            other => Err(Error::InvalidInput(format!(
                "unknown sampling strategy {other:?} (expected none, under, over, 5050)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingStrategy {
    pub kind: SamplingKind,
    pub seed: u64,
}

/// Target per-class sizes `(positives, negatives)`.
pub fn target_sizes(kind: SamplingKind, n_pos: usize, n_neg: usize) -> (usize, usize) {
    let (n_min, n_maj) = (n_pos.min(n_neg), n_pos.max(n_neg));
    match kind {
        SamplingKind::None => (n_pos, n_neg),
        SamplingKind::Undersample => (n_min, n_min),
        SamplingKind::Oversample => (n_maj, n_maj),
        SamplingKind::FiftyFifty => {
            let half = (n_pos + n_neg) / 2;
            (half, half)
        }
    }
}

/// Draws `target` of `pool`: without replacement when shrinking, the whole
/// pool plus draws with replacement when growing.
fn draw(pool: &[usize], target: usize, rng: &mut DetRng) -> Vec<usize> {
    if target <= pool.len() {
        rng.sample_indices(pool.len(), target)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    } else {
        let mut out = pool.to_vec();
        out.extend((0..target - pool.len()).map(|_| pool[rng.index(pool.len())]));
        out
    }
}

/// Rebalances the training data. `None` returns it unchanged; every other
/// kind returns equal class counts in a seeded shuffled order.
pub fn resample(train: &TrainSplit<Dataset>, strategy: SamplingStrategy) -> Result<Dataset> {
    let data = train.get();
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| data.label(i));
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    if strategy.kind == SamplingKind::None {
        return Ok(data.clone());
    }
    let (t_pos, t_neg) = target_sizes(strategy.kind, pos.len(), neg.len());
    let mut rng = DetRng::new(strategy.seed, stream::SAMPLING);
    let mut picked = draw(&pos, t_pos, &mut rng);
    picked.extend(draw(&neg, t_neg, &mut rng));
    rng.shuffle(&mut picked);
    Ok(data.select(&picked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SchemaId;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn imbalanced(n_pos: usize, n_neg: usize) -> TrainSplit<Dataset> {
        // the single feature is the row id, so rows can be traced back
        let labels: Vec<bool> = (0..n_pos + n_neg).map(|i| i < n_pos).collect();
        let values: Vec<f64> = (0..labels.len()).map(|i| i as f64).collect();
        TrainSplit::designate(Dataset::new(SchemaId(0), 1, values, labels).unwrap())
    }

    fn counts(d: &Dataset) -> (usize, usize) {
        (d.n_positive(), d.len() - d.n_positive())
    }

    fn run(kind: SamplingKind, n_pos: usize, n_neg: usize) -> Dataset {
        resample(&imbalanced(n_pos, n_neg), SamplingStrategy { kind, seed: 9 }).unwrap()
    }

    #[test]
    fn forced_sizes() {
        assert_eq!(counts(&run(SamplingKind::Undersample, 100, 900)), (100, 100));
        assert_eq!(counts(&run(SamplingKind::Oversample, 100, 900)), (900, 900));
        assert_eq!(counts(&run(SamplingKind::FiftyFifty, 100, 900)), (500, 500));
        assert_eq!(counts(&run(SamplingKind::None, 100, 900)), (100, 900));
    }

    #[test]
    fn none_is_identity() {
        let t = imbalanced(10, 30);
        let out = resample(&t, SamplingStrategy { kind: SamplingKind::None, seed: 1 }).unwrap();
        assert_eq!(&out, t.get());
    }

    #[test]
    fn single_class_is_rejected() {
        let t = imbalanced(0, 30);
        for kind in SamplingKind::ALL {
            assert!(matches!(
                resample(&t, SamplingStrategy { kind, seed: 1 }),
                Err(Error::SingleClass)
            ));
        }
    }

    #[test]
    fn undersample_is_a_subset_and_oversample_keeps_majority() {
        let under = run(SamplingKind::Undersample, 50, 400);
        let mut ids: Vec<usize> = under.column(0).iter().map(|&v| v as usize).collect();
        ids.sort_unstable();
        let before = ids.len();
        ids.dedup();
        assert_eq!(ids.len(), before, "undersampling must not repeat rows");
        assert!(ids[..50].iter().copied().eq(0..50), "all minority rows kept");

        let over = run(SamplingKind::Oversample, 50, 400);
        let mut seen: HashMap<usize, usize> = HashMap::new();
        for v in over.column(0) {
            *seen.entry(v as usize).or_default() += 1;
        }
        for neg in 50..450 {
            assert_eq!(seen.get(&neg), Some(&1), "majority row {neg} copied exactly once");
        }
        for p in 0..50 {
            assert!(seen[&p] >= 1, "minority row {p} present");
        }
    }

    #[test]
    fn deterministic_by_seed() {
        let t = imbalanced(30, 200);
        let s = SamplingStrategy { kind: SamplingKind::FiftyFifty, seed: 4 };
        assert_eq!(resample(&t, s).unwrap(), resample(&t, s).unwrap());
    }

    #[test]
    fn flags_round_trip() {
        for k in SamplingKind::ALL {
            assert_eq!(k.flag().parse::<SamplingKind>().unwrap(), k);
        }
        assert!("both".parse::<SamplingKind>().is_err());
    }

    proptest! {
        #[test]
        fn balanced_within_one(n_pos in 1usize..300, n_neg in 1usize..300, seed: u64) {
            let t = imbalanced(n_pos, n_neg);
            for kind in [SamplingKind::Undersample, SamplingKind::Oversample, SamplingKind::FiftyFifty] {
                let out = resample(&t, SamplingStrategy { kind, seed }).unwrap();
                let (p, n) = counts(&out);
                prop_assert!(p.abs_diff(n) <= 1);
                prop_assert_eq!((p, n), target_sizes(kind, n_pos, n_neg));
            }
        }
    }
}
