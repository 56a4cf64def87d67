//! Fully connected network: rectifier hidden layers, sigmoid output,
//! cross-entropy loss, Adam updates.

use serde::{Deserialize, Serialize};

use super::{bce_from_logit, sigmoid};
use crate::features::Dataset;
use crate::rng::{stream, DetRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            hidden: vec![10],
            learning_rate: 0.001,
            epochs: 30,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Network {
    /// Glorot-uniform weights, zero biases. `sizes` runs input → output and
    /// must end in 1.
    pub fn init(sizes: &[usize], rng: &mut DetRng) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let limit = (6.0 / (inputs + outputs) as f64).sqrt();
                Layer {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs)
                        .map(|_| rng.uniform_in(-limit, limit))
                        .collect(),
                    bias: vec![0.0; outputs],
                }
            })
            .collect();
        Network { layers }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Weights then biases, layer by layer.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(&l.weights);
            out.extend(&l.bias);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
    }

    /// Pre-activations of every layer for one input.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act: Vec<f64> = x.to_vec();
        for (li, l) in self.layers.iter().enumerate() {
            let z: Vec<f64> = (0..l.outputs)
                .map(|o| {
                    l.bias[o]
                        + l.weights[o * l.inputs..(o + 1) * l.inputs]
                            .iter()
                            .zip(&act)
                            .map(|(w, a)| w * a)
                            .sum::<f64>()
                })
                .collect();
            if li + 1 < self.layers.len() {
                act = z.iter().map(|v| v.max(0.0)).collect();
            }
            pre.push(z);
        }
        pre
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.forward(x).last().unwrap()[0]
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Mean cross-entropy over `rows` of `data` and its gradient, laid out
    /// like [`Network::params_flat`].
    pub fn loss_and_gradient(&self, data: &Dataset, rows: &[usize]) -> (f64, Vec<f64>) {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        let mut loss = 0.0;
        let scale = 1.0 / rows.len() as f64;
        for &r in rows {
            let x = data.row(r);
            let y = data.label(r);
            let pre = self.forward(x);
            let logit = pre.last().unwrap()[0];
            loss += bce_from_logit(logit, y);
            // d loss / d logit for sigmoid + cross-entropy
            let mut delta = vec![(sigmoid(logit) - if y { 1.0 } else { 0.0 }) * scale];
            for li in (0..self.layers.len()).rev() {
                let l = &self.layers[li];
                let input: Vec<f64> = if li == 0 {
                    x.to_vec()
                } else {
                    pre[li - 1].iter().map(|v| v.max(0.0)).collect()
                };
                let (gw, gb) = &mut grads[li];
                for o in 0..l.outputs {
                    gb[o] += delta[o];
                    for (i, a) in input.iter().enumerate() {
                        gw[o * l.inputs + i] += delta[o] * a;
                    }
                }
                if li > 0 {
                    delta = (0..l.inputs)
                        .map(|i| {
                            if pre[li - 1][i] > 0.0 {
                                (0..l.outputs)
                                    .map(|o| l.weights[o * l.inputs + i] * delta[o])
                                    .sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        let flat = grads
            .into_iter()
            .flat_map(|(w, b)| w.into_iter().chain(b))
            .collect();
        (loss * scale, flat)
    }

    /// Mini-batch Adam with a seeded shuffle each epoch.
    pub fn fit(data: &Dataset, params: &NetworkParams, seed: u64) -> Self {
        let mut rng = DetRng::new(seed, stream::MODEL);
        let mut sizes = vec![data.n_features()];
        sizes.extend(&params.hidden);
        sizes.push(1);
        let mut net = Network::init(&sizes, &mut rng);
        let mut theta = net.params_flat();
        let mut m = vec![0.0; theta.len()];
        let mut v = vec![0.0; theta.len()];
        let mut step = 0i32;
        let mut order: Vec<usize> = (0..data.len()).collect();
        let batch = params.batch_size.max(1);
        for _ in 0..params.epochs {
            rng.shuffle(&mut order);
            for chunk in order.chunks(batch) {
                let (_, g) = net.loss_and_gradient(data, chunk);
                step += 1;
                let c1 = 1.0 - BETA1.powi(step);
                let c2 = 1.0 - BETA2.powi(step);
                for k in 0..theta.len() {
                    m[k] = BETA1 * m[k] + (1.0 - BETA1) * g[k];
                    v[k] = BETA2 * v[k] + (1.0 - BETA2) * g[k] * g[k];
                    theta[k] -= params.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
                }
                net.set_params_flat(&theta);
            }
        }
        net
    }
}
