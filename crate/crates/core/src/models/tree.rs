//! CART classification tree with Gini impurity.

use serde::{Deserialize, Serialize};

use crate::features::Dataset;
use crate::rng::DetRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 341,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        positive_fraction: f64,
        samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

/// One decision on the way from the root to a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub feature: usize,
    pub threshold: f64,
    pub value: f64,
    pub went_left: bool,
}

/// 1 − p₁² − p₀²; `None` for an empty multiset.
pub fn gini(labels: &[bool]) -> Option<f64> {
    if labels.is_empty() {
        return None;
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Some(gini_counts(pos, labels.len()))
}

fn gini_counts(pos: usize, n: usize) -> f64 {
    let p = pos as f64 / n as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.gain > o.gain
                    || (self.gain == o.gain
                        && (self.feature < o.feature
                            || (self.feature == o.feature && self.threshold < o.threshold)))
            }
        }
    }
}

/// How many features to look at per node. `Random` draws a fresh order per
/// node and keeps drawing past `count` until a usable split turns up.
pub(crate) enum FeaturePolicy<'a> {
    All,
    Random { count: usize, rng: &'a mut DetRng },
}

struct Work {
    slot: usize,
    rows: Vec<usize>,
    depth: usize,
}

impl DecisionTree {
    /// A tree that predicts `positive_fraction` everywhere.
    pub fn constant(positive_fraction: f64, samples: usize) -> Self {
        DecisionTree {
            nodes: vec![Node::Leaf {
                positive_fraction,
                samples,
            }],
        }
    }

    pub fn fit(data: &Dataset, params: &TreeParams) -> Self {
        let rows: Vec<usize> = (0..data.len()).collect();
        Self::fit_rows(data, rows, params, FeaturePolicy::All)
    }

    /// Fits on `rows`, a multiset of row indices into `data`.
    pub(crate) fn fit_rows(
        data: &Dataset,
        rows: Vec<usize>,
        params: &TreeParams,
        mut policy: FeaturePolicy<'_>,
    ) -> Self {
        let mut nodes = vec![Node::Leaf {
            positive_fraction: 0.0,
            samples: 0,
        }];
        let mut stack = vec![Work {
            slot: 0,
            rows,
            depth: 0,
        }];
        let mut scratch: Vec<(f64, bool)> = Vec::new();
        while let Some(Work { slot, rows, depth }) = stack.pop() {
            let n = rows.len();
            let pos = rows.iter().filter(|&&i| data.label(i)).count();
            let impurity = if n == 0 { 0.0 } else { gini_counts(pos, n) };
            let leaf = Node::Leaf {
                positive_fraction: if n == 0 { 0.0 } else { pos as f64 / n as f64 },
                samples: n,
            };
            if depth >= params.max_depth || n < params.min_samples_split || impurity == 0.0 {
                nodes[slot] = leaf;
                continue;
            }
            let best = best_split(data, &rows, pos, impurity, params, &mut policy, &mut scratch);
            let Some(best) = best else {
                nodes[slot] = leaf;
                continue;
            };
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&i| data.row(i)[best.feature] <= best.threshold);
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf {
                positive_fraction: 0.0,
                samples: 0,
            });
            nodes.push(Node::Leaf {
                positive_fraction: 0.0,
                samples: 0,
            });
            nodes[slot] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right,
            };
            stack.push(Work {
                slot: right,
                rows: right_rows,
                depth: depth + 1,
            });
            stack.push(Work {
                slot: left,
                rows: left_rows,
                depth: depth + 1,
            });
        }
        DecisionTree { nodes }
    }

    fn leaf_for(&self, x: &[f64]) -> &Node {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                leaf => return leaf,
            }
        }
    }

    /// Positive fraction of the leaf `x` falls into.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.leaf_for(x) {
            Node::Leaf {
                positive_fraction, ..
            } => *positive_fraction,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn decision_path(&self, x: &[f64]) -> Vec<PathStep> {
        let mut steps = Vec::new();
        let mut i = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = &self.nodes[i]
        {
            let value = x[*feature];
            let went_left = value <= *threshold;
            steps.push(PathStep {
                feature: *feature,
                threshold: *threshold,
                value,
                went_left,
            });
            i = if went_left { *left } else { *right };
        }
        steps
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

fn best_split(
    data: &Dataset,
    rows: &[usize],
    pos: usize,
    impurity: f64,
    params: &TreeParams,
    policy: &mut FeaturePolicy<'_>,
    scratch: &mut Vec<(f64, bool)>,
) -> Option<Candidate> {
    let d = data.n_features();
    let mut best: Option<Candidate> = None;
    match policy {
        FeaturePolicy::All => {
            for f in 0..d {
                scan_feature(data, rows, pos, impurity, params, f, scratch, &mut best);
            }
        }
        FeaturePolicy::Random { count, rng } => {
            let mut order: Vec<usize> = (0..d).collect();
            rng.shuffle(&mut order);
            for (k, &f) in order.iter().enumerate() {
                if k >= *count && best.is_some() {
                    break;
                }
                scan_feature(data, rows, pos, impurity, params, f, scratch, &mut best);
            }
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn scan_feature(
    data: &Dataset,
    rows: &[usize],
    pos: usize,
    impurity: f64,
    params: &TreeParams,
    feature: usize,
    scratch: &mut Vec<(f64, bool)>,
    best: &mut Option<Candidate>,
) {
    scratch.clear();
    scratch.extend(rows.iter().map(|&i| (data.row(i)[feature], data.label(i))));
    scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = scratch.len();
    let min_leaf = params.min_samples_leaf.max(1);
    let mut left_pos = 0usize;
    for i in 0..n - 1 {
        if scratch[i].1 {
            left_pos += 1;
        }
        let (v, next) = (scratch[i].0, scratch[i + 1].0);
        if v == next {
            continue;
        }
        let n_left = i + 1;
        let n_right = n - n_left;
        if n_left < min_leaf || n_right < min_leaf {
            continue;
        }
        let weighted = (n_left as f64 * gini_counts(left_pos, n_left)
            + n_right as f64 * gini_counts(pos - left_pos, n_right))
            / n as f64;
        let mut threshold = v + (next - v) / 2.0;
        if threshold >= next {
            threshold = v;
        }
        let cand = Candidate {
            gain: impurity - weighted,
            feature,
            threshold,
        };
        if cand.beats(best) {
            *best = Some(cand);
        }
    }
}
