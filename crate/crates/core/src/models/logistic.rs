use serde::{Deserialize, Serialize};

use super::{bce_from_logit, sigmoid};
use crate::features::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            learning_rate: 0.1,
            epochs: 300,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticRegression {
    pub fn zeros(n_features: usize) -> Self {
        LogisticRegression {
            weights: vec![0.0; n_features],
            bias: 0.0,
        }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Mean cross-entropy plus `l2/2 · ‖w‖²`.
    pub fn objective(&self, data: &Dataset, l2: f64) -> f64 {
        let n = data.len() as f64;
        let bce: f64 = data
            .rows()
            .zip(data.labels())
            .map(|(x, &y)| bce_from_logit(self.logit(x), y))
            .sum::<f64>()
            / n;
        bce + 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Full-batch gradient descent from zero weights. Returns the model and
    /// the objective before each step plus after the last one.
    pub fn fit(data: &Dataset, params: &LogisticParams) -> (Self, Vec<f64>) {
        let d = data.n_features();
        let n = data.len() as f64;
        let mut model = LogisticRegression::zeros(d);
        let mut history = Vec::with_capacity(params.epochs + 1);
        let mut grad = vec![0.0; d];
        for _ in 0..params.epochs {
            history.push(model.objective(data, params.l2));
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for (x, &y) in data.rows().zip(data.labels()) {
                let err = model.predict(x) - if y { 1.0 } else { 0.0 };
                for (g, v) in grad.iter_mut().zip(x) {
                    *g += err * v;
                }
                grad_b += err;
            }
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                *w -= params.learning_rate * (g / n + params.l2 * *w);
            }
            model.bias -= params.learning_rate * grad_b / n;
        }
        history.push(model.objective(data, params.l2));
        (model, history)
    }
}
