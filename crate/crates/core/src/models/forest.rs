//! Bagged Gini trees averaged into a probability.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, FeaturePolicy, TreeParams};
use crate::features::Dataset;
use crate::rng::{derive_seed, stream, DetRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    /// Features examined per split; `None` means ⌊√d⌋.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 25,
            tree: TreeParams::default(),
            max_features: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn features_per_split(&self, n_features: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize)
            .clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Tree `i` draws from its own stream seeded by `(seed, i)`, so the
    /// result does not depend on how trees are scheduled across threads.
    pub fn fit(data: &Dataset, params: &ForestParams, seed: u64) -> Self {
        let m = params.features_per_split(data.n_features());
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = DetRng::new(derive_seed(seed, t as u64), stream::MODEL);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..data.len()).map(|_| rng.index(data.len())).collect()
                } else {
                    (0..data.len()).collect()
                };
                DecisionTree::fit_rows(
                    data,
                    rows,
                    &params.tree,
                    FeaturePolicy::Random {
                        count: m,
                        rng: &mut rng,
                    },
                )
            })
            .collect();
        RandomForest { trees }
    }

    pub fn from_trees(trees: Vec<DecisionTree>) -> Self {
        RandomForest { trees }
    }

    /// Unweighted mean of the trees' leaf fractions.
    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }
}
