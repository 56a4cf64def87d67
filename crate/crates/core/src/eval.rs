//! Correlations, confusion metrics, ROC/AUC and threshold sweeps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::models::TrainedModel;

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "pearson needs two equal-length series of at least 2 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn confusion(labels: &[bool], predictions: &[bool]) -> Result<ConfusionCounts> {
    if labels.len() != predictions.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y, p) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (self.tp + self.tn) as f64 / n as f64)
    }

    /// `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `None` when there are no positives.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

/// Renders an optional metric, with `undefined` for missing ratios.
pub fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// From (0,0) to (1,1); the first point's threshold is +∞.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC over every distinct score, with the trapezoid area. Tied scores form
/// one diagonal segment, which credits tied pairs with ½.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<RocCurve> {
    if labels.len() != scores.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    // twice the area in units of (1/n_pos)(1/n_neg), kept integral
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += ((fp - fp0) * (tp + tp0)) as u128;
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    let auc = area2 as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// 0.10, 0.15, …, 0.90.
pub fn default_threshold_grid() -> Vec<f64> {
    (0..=16).map(|i| (10 + 5 * i) as f64 / 100.0).collect()
}

/// Metrics at each threshold from already computed scores.
pub fn sweep_scores(labels: &[bool], scores: &[f64], thresholds: &[f64]) -> Result<Vec<SweepRow>> {
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidInput(format!("threshold {t} outside (0, 1)")));
    }
    thresholds
        .iter()
        .map(|&threshold| {
            let predicted: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
            let counts = confusion(labels, &predicted)?;
            Ok(SweepRow {
                threshold,
                counts,
                accuracy: counts.accuracy(),
                precision: counts.precision(),
                recall: counts.recall(),
            })
        })
        .collect()
}

pub fn threshold_sweep(model: &TrainedModel, data: &Dataset, thresholds: &[f64]) -> Result<Vec<SweepRow>> {
    let scores = model.predict_dataset(data)?;
    sweep_scores(data.labels(), &scores, thresholds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub feature: String,
    /// `None` when the feature is constant.
    pub rho: Option<f64>,
}

/// Pearson of each column against the label, strongest |ρ| first; constant
/// columns are kept at the end as undefined.
pub fn feature_correlation_report(columns: &[(String, Vec<f64>)], labels: &[bool]) -> Result<Vec<Correlation>> {
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut out = Vec::with_capacity(columns.len());
    for (name, values) in columns {
        let rho = match pearson(values, &y) {
            Ok(r) => Some(r),
            Err(Error::UndefinedCorrelation(_)) if y.iter().any(|&v| v != y[0]) => None,
            Err(e) => return Err(e),
        };
        out.push(Correlation {
            feature: name.clone(),
            rho,
        });
    }
    out.sort_by(|a, b| match (a.rho, b.rho) {
        (Some(x), Some(y)) => y.abs().total_cmp(&x.abs()),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(out)
}

/// Threshold-independent and thresholded scores of a model on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub n_positive: usize,
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub auc: f64,
    pub roc: Vec<RocPoint>,
    pub sweep: Vec<SweepRow>,
}

pub fn evaluate(model: &TrainedModel, data: &Dataset, threshold: f64) -> Result<EvaluationReport> {
    let scores = model.predict_dataset(data)?;
    let roc = roc_auc(data.labels(), &scores)?;
    let at = sweep_scores(data.labels(), &scores, &[threshold])?.remove(0);
    Ok(EvaluationReport {
        n: data.len(),
        n_positive: data.n_positive(),
        threshold,
        counts: at.counts,
        accuracy: at.accuracy,
        precision: at.precision,
        recall: at.recall,
        auc: roc.auc,
        roc: roc.points,
        sweep: sweep_scores(data.labels(), &scores, &default_threshold_grid())?,
    })
}
