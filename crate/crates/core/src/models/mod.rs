//! The four classifier families behind one probability-scoring contract.

pub mod forest;
pub mod logistic;
pub mod network;
pub mod tree;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use forest::{ForestParams, RandomForest};
pub use logistic::{LogisticParams, LogisticRegression};
pub use network::{Network, NetworkParams};
pub use tree::{gini, DecisionTree, Node, PathStep, TreeParams};

use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureSchema, FeatureVector, SchemaId, Standardizer};

/// Current on-disk model format.
pub const FORMAT_VERSION: u32 = 1;

/// Logistic function; never evaluates `exp` of a positive argument.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

const BCE_EPS: f64 = 1e-12;

/// Mean binary cross-entropy with probabilities clamped to [ε, 1−ε].
pub fn bce_loss(labels: &[bool], probabilities: &[f64]) -> Result<f64> {
    if labels.len() != probabilities.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} probabilities",
            labels.len(),
            probabilities.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("empty input".into()));
    }
    let total: f64 = labels
        .iter()
        .zip(probabilities)
        .map(|(&y, &p)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / labels.len() as f64)
}

/// Cross-entropy of a single logit, computed without forming the probability.
pub(crate) fn bce_from_logit(z: f64, y: bool) -> f64 {
    // softplus(z) - y·z
    let softplus = if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    };
    softplus - if y { z } else { 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    Tree,
    Forest,
    Network,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Logistic, Family::Tree, Family::Forest, Family::Network];

    pub fn short(self) -> &'static str {
        match self {
            Family::Logistic => "lr",
            Family::Tree => "dt",
            Family::Forest => "rf",
            Family::Network => "nn",
        }
    }

    pub fn default_params(self) -> HyperParams {
        match self {
            Family::Logistic => HyperParams::Logistic(LogisticParams::default()),
            Family::Tree => HyperParams::Tree(TreeParams::default()),
            Family::Forest => HyperParams::Forest(ForestParams::default()),
            Family::Network => HyperParams::Network(NetworkParams::default()),
        }
    }

    fn standardizes(self) -> bool {
        matches!(self, Family::Logistic | Family::Network)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" | "logistic" => Ok(Family::Logistic),
            "dt" | "tree" => Ok(Family::Tree),
            "rf" | "forest" => Ok(Family::Forest),
            "nn" | "network" => Ok(Family::Network),
            other => Err(Error::InvalidInput(format!(
                "unknown model family {other:?} (expected lr, dt, rf, nn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HyperParams {
    Logistic(LogisticParams),
    Tree(TreeParams),
    Forest(ForestParams),
    Network(NetworkParams),
}

impl HyperParams {
    pub fn family(&self) -> Family {
        match self {
            HyperParams::Logistic(_) => Family::Logistic,
            HyperParams::Tree(_) => Family::Tree,
            HyperParams::Forest(_) => Family::Forest,
            HyperParams::Network(_) => Family::Network,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("invalid hyperparameter: {what}")));
        let tree_ok = |t: &TreeParams| t.max_depth >= 1 && t.min_samples_split >= 2 && t.min_samples_leaf >= 1;
        match self {
            HyperParams::Logistic(p) => {
                if !(p.learning_rate > 0.0) || p.epochs < 1 || !(p.l2 >= 0.0) {
                    return bad("logistic learning rate, epochs or l2");
                }
            }
            HyperParams::Tree(t) => {
                if !tree_ok(t) {
                    return bad("tree depth or sample minimums");
                }
            }
            HyperParams::Forest(f) => {
                if f.n_trees < 1 || !tree_ok(&f.tree) || f.max_features == Some(0) {
                    return bad("forest size, depth, sample minimums or features per split");
                }
            }
            HyperParams::Network(n) => {
                if !(n.learning_rate > 0.0)
                    || n.epochs < 1
                    || n.batch_size < 1
                    || n.hidden.iter().any(|&h| h < 1)
                {
                    return bad("network layers, learning rate, epochs or batch size");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "parameters", rename_all = "snake_case")]
pub enum ModelParams {
    Logistic(LogisticRegression),
    Tree(DecisionTree),
    Forest(RandomForest),
    Network(Network),
}

/// A fitted classifier together with the input layout it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub hyperparams: HyperParams,
    pub schema: FeatureSchema,
    pub schema_id: SchemaId,
    pub standardizer: Option<Standardizer>,
    pub seed: u64,
    pub params: ModelParams,
}

/// Fits `hp` on `train`, whose columns must follow `schema`.
pub fn fit(hp: &HyperParams, train: &Dataset, schema: &FeatureSchema, seed: u64) -> Result<TrainedModel> {
    hp.validate()?;
    if train.schema() != schema.id() || train.n_features() != schema.len() {
        return Err(Error::SchemaMismatch {
            expected: format!("{} ({} slots)", schema.id(), schema.len()),
            given: format!("{} ({} slots)", train.schema(), train.n_features()),
        });
    }
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let n_pos = train.n_positive();
    if n_pos == 0 || n_pos == train.len() {
        return Err(Error::SingleClass);
    }
    let standardizer = hp
        .family()
        .standardizes()
        .then(|| Standardizer::fit(train, schema));
    let scaled;
    let input = match &standardizer {
        Some(s) => {
            scaled = s.transform(train);
            &scaled
        }
        None => train,
    };
    let params = match hp {
        HyperParams::Logistic(p) => ModelParams::Logistic(LogisticRegression::fit(input, p).0),
        HyperParams::Tree(p) => ModelParams::Tree(DecisionTree::fit(input, p)),
        HyperParams::Forest(p) => ModelParams::Forest(RandomForest::fit(input, p, seed)),
        HyperParams::Network(p) => ModelParams::Network(Network::fit(input, p, seed)),
    };
    Ok(TrainedModel {
        format_version: FORMAT_VERSION,
        hyperparams: hp.clone(),
        schema: schema.clone(),
        schema_id: schema.id(),
        standardizer,
        seed,
        params,
    })
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        self.hyperparams.family()
    }

    fn check_schema(&self, given: SchemaId, len: usize) -> Result<()> {
        if given != self.schema_id || len != self.schema.len() {
            return Err(Error::SchemaMismatch {
                expected: format!("{} ({} slots)", self.schema_id, self.schema.len()),
                given: format!("{given} ({len} slots)"),
            });
        }
        Ok(())
    }

    /// Score of a raw row whose layout the caller has already checked.
    fn score_row(&self, row: &[f64]) -> f64 {
        let mut buf;
        let x = match &self.standardizer {
            Some(s) => {
                buf = vec![0.0; row.len()];
                s.apply(row, &mut buf);
                &buf[..]
            }
            None => row,
        };
        let p = match &self.params {
            ModelParams::Logistic(m) => m.predict(x),
            ModelParams::Tree(m) => m.predict(x),
            ModelParams::Forest(m) => m.predict(x),
            ModelParams::Network(m) => m.predict(x),
        };
        p.clamp(0.0, 1.0)
    }

    /// Probability of an emergency braking for one unscaled feature vector.
    pub fn predict_proba(&self, x: &FeatureVector) -> Result<f64> {
        self.check_schema(x.schema, x.values.len())?;
        Ok(self.score_row(&x.values))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.check_schema(data.schema(), data.n_features())?;
        Ok(data.rows().map(|r| self.score_row(r)).collect())
    }

    /// `predict_proba(x) >= threshold`.
    pub fn classify(&self, x: &FeatureVector, threshold: f64) -> Result<bool> {
        Ok(self.predict_proba(x)? >= threshold)
    }

    /// Root-to-leaf decisions for tree models, `None` for other families.
    pub fn decision_path(&self, x: &FeatureVector) -> Result<Option<Vec<PathStep>>> {
        self.check_schema(x.schema, x.values.len())?;
        Ok(match &self.params {
            ModelParams::Tree(t) => Some(t.decision_path(&x.values)),
            _ => None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::corrupt(origin, e))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::corrupt(origin, "missing format_version"))?;
        if version != FORMAT_VERSION as u64 {
            return Err(Error::Version {
                found: version.try_into().unwrap_or(u32::MAX),
                supported: FORMAT_VERSION,
            });
        }
        let model: TrainedModel =
            serde_json::from_value(value).map_err(|e| Error::corrupt(origin, e))?;
        if model.schema.id() != model.schema_id {
            return Err(Error::corrupt(origin, "schema fingerprint does not match slot names"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}
