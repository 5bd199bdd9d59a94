//! Threshold classification rule and the ITR objective built on it.
//!
//! A window is assigned to class `k` when `f_k >= t_k` and every other
//! feature is below its threshold; otherwise no prediction is made. With
//! class-conditional feature distributions `F_ℓ | C_k` (assumed independent
//! given the class) the probability of each outcome is a closed-form
//! function of the thresholds:
//!
//! ```text
//! P(P_i | C_k) = (1 - F_{i|k}(t_i)) · Π_{j≠i} F_{j|k}(t_j)
//! ```
//!
//! Everything else (prediction rate `P(M)`, the distributions conditioned on
//! a prediction being made, mutual information, mean detection time and ITR)
//! follows from these `n²` numbers and the class priors.

use crate::dataio::FeatureMatrix;
use crate::error::{Error, Result};
use crate::skewnorm::SkewNormalParams;

/// One discrimination threshold per target.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector(pub Vec<f64>);

impl ThresholdVector {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("thresholds must be finite: {t:?}")));
        }
        Ok(Self(t))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    Class(usize),
    Abstain,
}

impl Prediction {
    pub fn class(self) -> Option<usize> {
        match self {
            Prediction::Class(k) => Some(k),
            Prediction::Abstain => None,
        }
    }
}

/// Class `k` iff `f_k >= t_k` and `f_j < t_j` for every `j != k`.
pub fn classify(features: &[f64], t: &ThresholdVector) -> Prediction {
    debug_assert_eq!(features.len(), t.len());
    let mut hit = None;
    for (k, (f, th)) in features.iter().zip(&t.0).enumerate() {
        if f >= th {
            if hit.is_some() {
                return Prediction::Abstain;
            }
            hit = Some(k);
        }
    }
    hit.map_or(Prediction::Abstain, Prediction::Class)
}

/// Fitted class-conditional distributions plus priors and window timing.
#[derive(Debug, Clone, PartialEq)]
pub struct ItrModel {
    /// `dist[ℓ][k]`: distribution of feature `ℓ` when class `k` is correct.
    pub dist: Vec<Vec<SkewNormalParams>>,
    pub priors: Vec<f64>,
    pub window_s: f64,
    pub step_s: f64,
}

impl ItrModel {
    pub fn new(
        dist: Vec<Vec<SkewNormalParams>>,
        priors: Vec<f64>,
        window_s: f64,
        step_s: f64,
    ) -> Result<Self> {
        let n = priors.len();
        if n < 2 {
            return Err(Error::Data("an ITR model needs at least two classes".into()));
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::Data(format!("distribution grid must be {n}×{n}")));
        }
        if priors.iter().any(|p| !(*p >= 0.0)) || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Data(format!("priors must be nonnegative and sum to 1: {priors:?}")));
        }
        if !(step_s > 0.0 && step_s <= window_s) {
            return Err(Error::Config(format!(
                "need 0 < step <= window (window {window_s}, step {step_s})"
            )));
        }
        Ok(Self {
            dist,
            priors,
            window_s,
            step_s,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.priors.len()
    }

    /// `F_{ℓ|k}(t_ℓ)` for every feature `ℓ` and class `k`.
    pub fn cdf_grid(&self, t: &ThresholdVector) -> Vec<Vec<f64>> {
        self.dist
            .iter()
            .zip(&t.0)
            .map(|(row, &th)| row.iter().map(|d| d.cdf(th)).collect())
            .collect()
    }

    /// `f_{ℓ|k}(t_ℓ)` for every feature `ℓ` and class `k`.
    pub fn pdf_grid(&self, t: &ThresholdVector) -> Vec<Vec<f64>> {
        self.dist
            .iter()
            .zip(&t.0)
            .map(|(row, &th)| row.iter().map(|d| d.pdf(th)).collect())
            .collect()
    }
}

/// `P(P_i | C_k)` from a precomputed CDF grid.
pub(crate) fn pred_given_class_from_cdf(cdf: &[Vec<f64>], i: usize, k: usize) -> f64 {
    let mut p = 1.0 - cdf[i][k];
    for (j, row) in cdf.iter().enumerate() {
        if j != i {
            p *= row[k];
        }
    }
    p
}

pub fn pred_prob_given_class(m: &ItrModel, t: &ThresholdVector, i: usize, k: usize) -> f64 {
    pred_given_class_from_cdf(&m.cdf_grid(t), i, k)
}

/// All probabilities the ITR needs, unconditioned and conditioned on the
/// event `M` that a prediction was made. Indices are `[predicted][correct]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub priors: Vec<f64>,
    /// `P(P_i | C_j)`
    pub p_pred_given_class: Vec<Vec<f64>>,
    /// `P(P_i)`
    pub p_pred: Vec<f64>,
    /// `P(M)`
    pub p_made: f64,
    /// `P(M | C_j)`
    pub p_made_given_class: Vec<f64>,
    /// `P(P_i | C_j, M)`; zero column when `P(M | C_j) = 0`.
    pub p_pred_given_class_made: Vec<Vec<f64>>,
    /// `P(P_i ∩ C_j | M)`
    pub joint_given_made: Vec<Vec<f64>>,
    /// `P(P_i | M)`
    pub p_pred_given_made: Vec<f64>,
    /// `P(C_j | M)`
    pub p_class_given_made: Vec<f64>,
}

impl ProbabilityTable {
    /// Builds the table from `P(P_i | C_j)` (indexed `[i][j]`) and `P(C_j)`.
    pub fn from_conditionals(p_pred_given_class: Vec<Vec<f64>>, priors: Vec<f64>) -> Self {
        let n = priors.len();
        let p_pred: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| p_pred_given_class[i][j] * priors[j]).sum())
            .collect();
        let p_made: f64 = p_pred.iter().sum();
        let p_made_given_class: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| p_pred_given_class[i][j]).sum())
            .collect();

        let mut p_pred_given_class_made = vec![vec![0.0; n]; n];
        for j in 0..n {
            if p_made_given_class[j] > 0.0 {
                for i in 0..n {
                    p_pred_given_class_made[i][j] = p_pred_given_class[i][j] / p_made_given_class[j];
                }
            }
        }
        // Both conditioned marginals are sums of one normalised joint, so
        // they stay consistent with it even when P(M) is tiny.
        let joint_given_made: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if p_made > 0.0 {
                            p_pred_given_class[i][j] * priors[j] / p_made
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let p_pred_given_made = joint_given_made.iter().map(|row| row.iter().sum()).collect();
        let p_class_given_made = (0..n)
            .map(|j| joint_given_made.iter().map(|row| row[j]).sum())
            .collect();

        Self {
            priors,
            p_pred_given_class,
            p_pred,
            p_made,
            p_made_given_class,
            p_pred_given_class_made,
            joint_given_made,
            p_pred_given_made,
            p_class_given_made,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.priors.len()
    }

    /// True when no prediction is ever made (`P(M) = 0`).
    pub fn is_degenerate(&self) -> bool {
        !(self.p_made > 0.0)
    }

    /// `P(correct | M)`.
    pub fn accuracy_given_made(&self) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        (0..self.n_classes())
            .map(|j| self.p_pred_given_class[j][j] * self.priors[j])
            .sum::<f64>()
            / self.p_made
    }
}

pub fn probability_table(m: &ItrModel, t: &ThresholdVector) -> ProbabilityTable {
    let cdf = m.cdf_grid(t);
    let n = m.n_classes();
    let pgc = (0..n)
        .map(|i| (0..n).map(|k| pred_given_class_from_cdf(&cdf, i, k)).collect())
        .collect();
    ProbabilityTable::from_conditionals(pgc, m.priors.clone())
}

/// Mutual information between prediction and correct class, both
/// conditioned on a prediction being made, in bits per prediction.
pub fn mutual_information(pt: &ProbabilityTable) -> f64 {
    if pt.is_degenerate() {
        return 0.0;
    }
    // P(P_i|C_j,M)·P(C_j|M)·log2(P(P_i|C_j,M)/P(P_i|M)), written through the
    // conditioned joint and taken as a difference of logs so that tiny
    // marginals cannot overflow the ratio
    let n = pt.n_classes();
    let mut mi = 0.0;
    for i in 0..n {
        for j in 0..n {
            let joint = pt.joint_given_made[i][j];
            if joint > 0.0 {
                mi += joint
                    * (joint.log2() - pt.p_pred_given_made[i].log2() - pt.p_class_given_made[j].log2());
            }
        }
    }
    mi.max(0.0)
}

/// `Σ P(P_i ∩ C_j) log2(P(P_i ∩ C_j) / (P(P_i)P(C_j)))` over the raw,
/// unconditioned events. Abstentions make the joint sum to `P(M)` instead
/// of 1, which is why the conditioned form is the one optimised.
pub fn unconditioned_mutual_information(pt: &ProbabilityTable) -> f64 {
    let n = pt.n_classes();
    let mut mi = 0.0;
    for i in 0..n {
        for j in 0..n {
            let joint = pt.p_pred_given_class[i][j] * pt.priors[j];
            if joint > 0.0 {
                mi += joint * (joint.log2() - pt.p_pred[i].log2() - pt.priors[j].log2());
            }
        }
    }
    mi
}

/// Wolpaw's ITR in bits per prediction:
/// `log2 N + P log2 P + (1-P) log2((1-P)/(N-1))`.
pub fn standard_itr_bits(n_targets: usize, accuracy: f64) -> f64 {
    let n = n_targets as f64;
    let p = accuracy.clamp(0.0, 1.0);
    let mut bits = n.log2();
    if p > 0.0 {
        bits += p * p.log2();
    }
    if p < 1.0 {
        bits += (1.0 - p) * ((1.0 - p) / (n - 1.0)).log2();
    }
    bits
}

/// `w + (1/P(M) - 1)·s`, or `+∞` when nothing is ever predicted.
pub fn mdt_seconds(pt: &ProbabilityTable, window_s: f64, step_s: f64) -> f64 {
    mdt_from_rate(pt.p_made, window_s, step_s)
}

pub(crate) fn mdt_from_rate(p_made: f64, window_s: f64, step_s: f64) -> f64 {
    if p_made > 0.0 {
        window_s + (1.0 / p_made - 1.0) * step_s
    } else {
        f64::INFINITY
    }
}

/// `MI · 60 / MDT` for a table; zero when nothing is ever predicted.
pub fn itr_from_table(pt: &ProbabilityTable, window_s: f64, step_s: f64) -> f64 {
    if pt.is_degenerate() {
        return 0.0;
    }
    mutual_information(pt) * 60.0 / mdt_seconds(pt, window_s, step_s)
}

/// Model-based ITR in bits per minute.
pub fn itr_bits_per_min(m: &ItrModel, t: &ThresholdVector) -> f64 {
    itr_from_table(&probability_table(m, t), m.window_s, m.step_s)
}

/// The same table filled with observed outcome frequencies of [`classify`].
/// Priors are the class proportions of the matrix.
pub fn empirical_table(features: &FeatureMatrix, t: &ThresholdVector) -> Result<ProbabilityTable> {
    let n = features.n_classes;
    if features.is_empty() {
        return Err(Error::Data("empirical table needs at least one row".into()));
    }
    if features.n_features() != n || t.len() != n {
        return Err(Error::Data(format!(
            "need one feature and one threshold per class ({n}), got {} and {}",
            features.n_features(),
            t.len()
        )));
    }
    let mut counts = vec![vec![0usize; n]; n];
    let class_counts = features.class_counts();
    for row in &features.rows {
        if let Prediction::Class(i) = classify(&row.values, t) {
            counts[i][row.class] += 1;
        }
    }
    Ok(table_from_counts(&counts, &class_counts))
}

/// Table from outcome counts `counts[predicted][correct]` and per-class totals.
pub fn table_from_counts(counts: &[Vec<usize>], class_counts: &[usize]) -> ProbabilityTable {
    let n = class_counts.len();
    let total: usize = class_counts.iter().sum();
    let priors = class_counts.iter().map(|&c| c as f64 / total as f64).collect();
    let pgc = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if class_counts[j] > 0 {
                        counts[i][j] as f64 / class_counts[j] as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    ProbabilityTable::from_conditionals(pgc, priors)
}
