//! Randomized hyperparameter search scored by k-fold cross-validated AUC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{roc_auc, sweep_scores};
use crate::features::{Dataset, FeatureSchema};
use crate::models::{fit, Family, ForestParams, HyperParams, TreeParams};
use crate::rng::{derive_seed, stream, DetRng};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub held_out: Vec<usize>,
}

/// Splits row indices into `k` folds. Stratified folds deal each class
/// separately so per-class counts differ by at most one between folds.
pub fn kfold(data: &Dataset, k: usize, seed: u64, stratified: bool) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k must be at least 2, got {k}")));
    }
    if data.len() < k {
        return Err(Error::InvalidInput(format!(
            "{} rows cannot fill {k} folds",
            data.len()
        )));
    }
    let mut rng = DetRng::new(seed, stream::FOLDS);
    let order: Vec<usize> = if stratified {
        let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
            (0..data.len()).partition(|&i| data.label(i));
        if pos.len() < k || neg.len() < k {
            return Err(Error::InvalidInput(format!(
                "stratified {k}-fold needs at least {k} rows per class, have {} positive and {} negative",
                pos.len(),
                neg.len()
            )));
        }
        rng.shuffle(&mut pos);
        rng.shuffle(&mut neg);
        pos.into_iter().chain(neg).collect()
    } else {
        let mut all: Vec<usize> = (0..data.len()).collect();
        rng.shuffle(&mut all);
        all
    };
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (j, i) in order.into_iter().enumerate() {
        held[j % k].push(i);
    }
    Ok((0..k)
        .map(|f| {
            let mut held_out = held[f].clone();
            held_out.sort_unstable();
            let mut train: Vec<usize> = held
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            train.sort_unstable();
            Fold { train, held_out }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Dist {
    Values { values: Vec<usize> },
    Uniform { lo: usize, hi: usize },
    LogUniform { lo: usize, hi: usize },
}

impl Dist {
    fn sample(&self, rng: &mut DetRng) -> usize {
        match self {
            Dist::Values { values } => values[rng.index(values.len())],
            Dist::Uniform { lo, hi } => lo + rng.index(hi - lo + 1),
            Dist::LogUniform { lo, hi } => {
                let (a, b) = ((*lo as f64).ln(), (*hi as f64 + 1.0).ln());
                ((a + (b - a) * rng.uniform()).exp().floor() as usize).clamp(*lo, *hi)
            }
        }
    }

    fn bounds(&self) -> Option<(usize, usize)> {
        match self {
            Dist::Values { values } => Some((*values.iter().min()?, *values.iter().max()?)),
            Dist::Uniform { lo, hi } | Dist::LogUniform { lo, hi } => (lo <= hi).then_some((*lo, *hi)),
        }
    }
}

/// Search space for the tree families; `n_trees` is ignored for single trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub family: Family,
    pub n_trees: Dist,
    pub max_depth: Dist,
    pub min_samples_split: Dist,
    pub min_samples_leaf: Dist,
}

impl SearchSpace {
    pub fn default_for(family: Family) -> Result<Self> {
        let space = SearchSpace {
            family,
            n_trees: Dist::Uniform { lo: 10, hi: 200 },
            max_depth: Dist::LogUniform { lo: 2, hi: 341 },
            min_samples_split: Dist::Uniform { lo: 2, hi: 20 },
            min_samples_leaf: Dist::Uniform { lo: 1, hi: 10 },
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.family, Family::Tree | Family::Forest) {
            return Err(Error::Config(format!(
                "random search supports dt and rf, not {}",
                self.family
            )));
        }
        let check = |name: &str, d: &Dist, min: usize| match d.bounds() {
            Some((lo, _)) if lo >= min => Ok(()),
            _ => Err(Error::Config(format!(
                "search range for {name} must be non-empty with values >= {min}"
            ))),
        };
        check("n_trees", &self.n_trees, 1)?;
        check("max_depth", &self.max_depth, 1)?;
        check("min_samples_split", &self.min_samples_split, 2)?;
        check("min_samples_leaf", &self.min_samples_leaf, 1)
    }

    pub fn sample(&self, rng: &mut DetRng) -> HyperParams {
        let n_trees = self.n_trees.sample(rng);
        let tree = TreeParams {
            max_depth: self.max_depth.sample(rng),
            min_samples_split: self.min_samples_split.sample(rng),
            min_samples_leaf: self.min_samples_leaf.sample(rng),
        };
        match self.family {
            Family::Forest => HyperParams::Forest(ForestParams {
                n_trees,
                tree,
                ..ForestParams::default()
            }),
            _ => HyperParams::Tree(tree),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub index: usize,
    pub hyperparams: HyperParams,
    pub fold_auc: Vec<f64>,
    pub mean_auc: Option<f64>,
    pub mean_accuracy: Option<f64>,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub best_index: usize,
    pub best: HyperParams,
    pub candidates: Vec<CandidateResult>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn size_key(hp: &HyperParams) -> (usize, usize) {
    match hp {
        HyperParams::Forest(f) => (f.n_trees, f.tree.max_depth),
        HyperParams::Tree(t) => (1, t.max_depth),
        _ => (0, 0),
    }
}

/// Highest mean AUC; ties go to fewer trees, then shallower depth, then the
/// earlier candidate.
pub fn select_best(candidates: &[CandidateResult]) -> Option<usize> {
    candidates
        .iter()
        .filter_map(|c| c.mean_auc.map(|a| (a, c)))
        .min_by(|(a, x), (b, y)| {
            b.total_cmp(a)
                .then_with(|| size_key(&x.hyperparams).cmp(&size_key(&y.hyperparams)))
                .then_with(|| x.index.cmp(&y.index))
        })
        .map(|(_, c)| c.index)
}

fn score_candidate(
    index: usize,
    hp: HyperParams,
    data: &Dataset,
    schema: &FeatureSchema,
    folds: &[Fold],
    seed: u64,
) -> CandidateResult {
    let mut result = CandidateResult {
        index,
        hyperparams: hp.clone(),
        fold_auc: Vec::new(),
        mean_auc: None,
        mean_accuracy: None,
        mean_precision: None,
        mean_recall: None,
        error: None,
    };
    let mut at_half = Vec::new();
    for fold in folds {
        let outcome = (|| {
            let model = fit(&hp, &data.select(&fold.train), schema, derive_seed(seed, 0))?;
            let held = data.select(&fold.held_out);
            let scores = model.predict_dataset(&held)?;
            let auc = roc_auc(held.labels(), &scores)?.auc;
            let row = sweep_scores(held.labels(), &scores, &[0.5])?.remove(0);
            Ok::<_, Error>((auc, row))
        })();
        match outcome {
            Ok((auc, row)) => {
                result.fold_auc.push(auc);
                at_half.push(row);
            }
            Err(e) => {
                result.error = Some(e.to_string());
                return result;
            }
        }
    }
    result.mean_auc = mean_defined(result.fold_auc.iter().map(|&a| Some(a)));
    result.mean_accuracy = mean_defined(at_half.iter().map(|r| r.accuracy));
    result.mean_precision = mean_defined(at_half.iter().map(|r| r.precision));
    result.mean_recall = mean_defined(at_half.iter().map(|r| r.recall));
    result
}

/// Scores `baseline` (if any) as candidate 0 followed by `n_candidates`
/// i.i.d. draws from `space`, each by stratified `k`-fold mean held-out AUC.
/// Every candidate trains with the same model seed. Metrics other than AUC
/// are taken at threshold 0.5.
pub fn random_search(
    space: &SearchSpace,
    data: &Dataset,
    schema: &FeatureSchema,
    n_candidates: usize,
    k: usize,
    seed: u64,
    baseline: Option<HyperParams>,
) -> Result<SearchReport> {
    space.validate()?;
    let folds = kfold(data, k, seed, true)?;
    let mut rng = DetRng::new(seed, stream::SEARCH);
    let mut points: Vec<HyperParams> = baseline.into_iter().collect();
    points.extend((0..n_candidates).map(|_| space.sample(&mut rng)));
    let candidates: Vec<CandidateResult> = points
        .into_par_iter()
        .enumerate()
        .map(|(i, hp)| score_candidate(i, hp, data, schema, &folds, seed))
        .collect();
    let best_index = select_best(&candidates).ok_or_else(|| {
        Error::InvalidInput(format!(
            "every candidate failed; first error: {}",
            candidates
                .iter()
                .find_map(|c| c.error.clone())
                .unwrap_or_else(|| "no candidates".into())
        ))
    })?;
    Ok(SearchReport {
        best_index,
        best: candidates[best_index].hyperparams.clone(),
        candidates,
    })
}
