//! Analytic gradient of the model ITR with respect to the thresholds and
//! multi-restart gradient ascent.
//!
//! The mutual information is split as `H(P|M) - H(P|C,M)` and every
//! probability in the table is differentiated through the quotient rule,
//! starting from
//!
//! ```text
//! ∂P(P_i|C_k)/∂t_ℓ = -f_{ℓ|k}(t_ℓ) Π_{j≠ℓ} F_{j|k}(t_j)                       i = ℓ
//!                  = (1 - F_{i|k}(t_i)) f_{ℓ|k}(t_ℓ) Π_{j≠i,ℓ} F_{j|k}(t_j)   i ≠ ℓ
//! ```

use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataio::FeatureMatrix;
use crate::error::{Error, Result};
use crate::probmodel::{itr_bits_per_min, mdt_from_rate, pred_given_class_from_cdf, ItrModel, ThresholdVector};
use crate::skewnorm::quantile_sorted;

/// Below this prediction rate the gradient is treated as undefined.
pub const MIN_PREDICTION_RATE: f64 = f64::EPSILON;

const MIN_STEP: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;

/// `∇ITR(t)` in bits/min per unit threshold.
pub fn grad_itr(m: &ItrModel, t: &ThresholdVector) -> Result<Vec<f64>> {
    let n = m.n_classes();
    if t.len() != n {
        return Err(Error::Data(format!("expected {n} thresholds, got {}", t.len())));
    }
    let cdf = m.cdf_grid(t);
    let pdf = m.pdf_grid(t);
    let prior = &m.priors;

    // a[i][k] = P(P_i | C_k), made[k] = P(M | C_k)
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|k| pred_given_class_from_cdf(&cdf, i, k)).collect())
        .collect();
    let made: Vec<f64> = (0..n).map(|k| (0..n).map(|i| a[i][k]).sum()).collect();
    let p_made: f64 = (0..n).map(|k| prior[k] * made[k]).sum();
    if !(p_made > MIN_PREDICTION_RATE) {
        return Err(Error::Degenerate(format!(
            "prediction rate {p_made:e} at thresholds {:?}; the gradient is undefined where no predictions are made",
            t.0
        )));
    }

    let p_pred: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|k| prior[k] * a[i][k]).sum::<f64>() / p_made)
        .collect();
    let p_class: Vec<f64> = (0..n).map(|k| prior[k] * made[k] / p_made).collect();
    let cond = |i: usize, k: usize| if made[k] > 0.0 { a[i][k] / made[k] } else { 0.0 };

    let plogp = |p: f64| if p > 0.0 { p * p.log2() } else { 0.0 };
    // The derivative of p·log2(p) is log2(p) + 1/ln 2; the constant part
    // drops out because each differentiated distribution sums to one.
    let dlog = |p: f64| if p > 0.0 { p.log2() } else { 0.0 };

    let h_pred: f64 = -p_pred.iter().map(|&p| plogp(p)).sum::<f64>();
    let h_within: Vec<f64> = (0..n)
        .map(|k| -(0..n).map(|i| plogp(cond(i, k))).sum::<f64>())
        .collect();
    let h_cond: f64 = (0..n).map(|k| p_class[k] * h_within[k]).sum();
    let mi = (h_pred - h_cond).max(0.0);
    let mdt = mdt_from_rate(p_made, m.window_s, m.step_s);

    let mut grad = vec![0.0; n];
    for (l, g) in grad.iter_mut().enumerate() {
        let da: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|k| d_pred_given_class(&cdf, &pdf, i, k, l)).collect())
            .collect();
        let d_made: Vec<f64> = (0..n).map(|k| (0..n).map(|i| da[i][k]).sum()).collect();
        let d_p_made: f64 = (0..n).map(|k| prior[k] * d_made[k]).sum();

        let mut d_h_pred = 0.0;
        for i in 0..n {
            let joint: f64 = (0..n).map(|k| prior[k] * a[i][k]).sum();
            let d_joint: f64 = (0..n).map(|k| prior[k] * da[i][k]).sum();
            let d_p = (d_joint * p_made - joint * d_p_made) / (p_made * p_made);
            d_h_pred -= d_p * dlog(p_pred[i]);
        }

        let mut d_h_cond = 0.0;
        for k in 0..n {
            if made[k] <= 0.0 {
                continue;
            }
            let d_p_class = prior[k] * (d_made[k] * p_made - made[k] * d_p_made) / (p_made * p_made);
            let mut d_h_k = 0.0;
            for i in 0..n {
                let d_cond = (da[i][k] * made[k] - a[i][k] * d_made[k]) / (made[k] * made[k]);
                d_h_k -= d_cond * dlog(cond(i, k));
            }
            d_h_cond += d_p_class * h_within[k] + p_class[k] * d_h_k;
        }

        let d_mi = d_h_pred - d_h_cond;
        let d_mdt = -m.step_s * d_p_made / (p_made * p_made);
        *g = (mdt * d_mi - mi * d_mdt) * 60.0 / (mdt * mdt);
    }
    Ok(grad)
}

/// `∂P(P_i | C_k) / ∂t_ℓ`.
fn d_pred_given_class(cdf: &[Vec<f64>], pdf: &[Vec<f64>], i: usize, k: usize, l: usize) -> f64 {
    let others = |skip: &[usize]| -> f64 {
        (0..cdf.len())
            .filter(|j| !skip.contains(j))
            .map(|j| cdf[j][k])
            .product()
    };
    if i == l {
        -pdf[l][k] * others(&[l])
    } else {
        (1.0 - cdf[i][k]) * pdf[l][k] * others(&[i, l])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentConfig {
    /// Initial step length `μ`, halved by the line search as needed.
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once an accepted step improves the ITR by less than this.
    pub stop_tol: f64,
    pub n_restarts: usize,
    pub seed: u64,
    /// Keep every iterate in [`RestartOutcome::trace`].
    pub record_trace: bool,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            max_iters: 5000,
            stop_tol: 1e-6,
            n_restarts: 20,
            seed: 0,
            record_trace: false,
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step_size must be positive, got {}", self.step_size)));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::Config(format!("stop_tol must be positive, got {}", self.stop_tol)));
        }
        if self.n_restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-coordinate range the restarts are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct InitBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InitBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::Config(format!("invalid initialisation box {lower:?}..{upper:?}")));
        }
        Ok(Self { lower, upper })
    }

    /// 1st to 99th percentile of each feature column.
    pub fn from_features(features: &FeatureMatrix) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Data("cannot derive an initialisation range from no rows".into()));
        }
        let (lower, upper) = (0..features.n_features())
            .map(|j| {
                let mut col: Vec<f64> = features.column(j).collect();
                col.sort_by(f64::total_cmp);
                (quantile_sorted(&col, 0.01), quantile_sorted(&col, 0.99))
            })
            .unzip();
        Self::new(lower, upper)
    }

    /// Lowest 1st and highest 99th percentile over each feature's class
    /// distributions.
    pub fn from_model(m: &ItrModel) -> Self {
        let (lower, upper) = m
            .dist
            .iter()
            .map(|row| {
                let lo = row.iter().map(|d| d.quantile(0.01)).fold(f64::INFINITY, f64::min);
                let hi = row.iter().map(|d| d.quantile(0.99)).fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .unzip();
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub itr: f64,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub initial: ThresholdVector,
    pub thresholds: ThresholdVector,
    pub itr: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Started where no predictions are made, so never moved.
    pub degenerate: bool,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub best_thresholds: ThresholdVector,
    pub best_itr: f64,
    pub best_restart: usize,
    pub per_restart: Vec<RestartOutcome>,
}

/// Ascent from starting points drawn inside [`InitBox::from_model`].
pub fn ascend(m: &ItrModel, cfg: &AscentConfig) -> Result<AscentResult> {
    ascend_from(m, cfg, &InitBox::from_model(m))
}

/// Runs `cfg.n_restarts` independent ascents from uniform draws in `init`
/// and keeps the best. Restarts run in parallel; the draws are made up
/// front and ties go to the lower restart index, so the result does not
/// depend on scheduling.
pub fn ascend_from(m: &ItrModel, cfg: &AscentConfig, init: &InitBox) -> Result<AscentResult> {
    cfg.validate()?;
    if init.dim() != m.n_classes() {
        return Err(Error::Config(format!(
            "initialisation box has {} coordinates for {} classes",
            init.dim(),
            m.n_classes()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<Vec<f64>> = (0..cfg.n_restarts).map(|_| init.sample(&mut rng)).collect();
    let per_restart: Vec<RestartOutcome> = starts
        .into_par_iter()
        .map(|t0| climb(m, cfg, ThresholdVector(t0)))
        .collect();

    let mut best: Option<usize> = None;
    for (r, out) in per_restart.iter().enumerate() {
        if out.degenerate {
            continue;
        }
        if best.is_none_or(|b| out.itr > per_restart[b].itr) {
            best = Some(r);
        }
    }
    let Some(best) = best else {
        return Err(Error::Degenerate(format!(
            "all {} restarts started where no predictions are made; widen the initialisation range",
            cfg.n_restarts
        )));
    };
    Ok(AscentResult {
        best_thresholds: per_restart[best].thresholds.clone(),
        best_itr: per_restart[best].itr,
        best_restart: best,
        per_restart,
    })
}

/// One ascent: `t ← t + μ∇ITR(t)`, halving `μ` until the step gives a
/// sufficient increase.
fn climb(m: &ItrModel, cfg: &AscentConfig, initial: ThresholdVector) -> RestartOutcome {
    let mut t = initial.clone();
    let mut itr = itr_bits_per_min(m, &t);
    let mut trace = Vec::new();
    let mut record = |iteration: usize, itr: f64, t: &ThresholdVector| {
        if cfg.record_trace {
            trace.push(TracePoint {
                iteration,
                itr,
                thresholds: t.0.clone(),
            });
        }
    };
    record(0, itr, &t);

    let mut iterations = 0;
    let mut converged = false;
    let mut degenerate = false;
    while iterations < cfg.max_iters {
        let grad = match grad_itr(m, &t) {
            Ok(g) => g,
            Err(_) => {
                degenerate = iterations == 0;
                break;
            }
        };
        let norm2: f64 = grad.iter().map(|g| g * g).sum();
        if norm2 == 0.0 {
            converged = true;
            break;
        }
        let along = |mu: f64| {
            let cand = ThresholdVector(t.0.iter().zip(&grad).map(|(x, g)| x + mu * g).collect());
            let cand_itr = itr_bits_per_min(m, &cand);
            (cand, cand_itr)
        };
        let mut mu = cfg.step_size;
        let mut step = loop {
            let (cand, cand_itr) = along(mu);
            if cand_itr >= itr + ARMIJO * mu * norm2 {
                break Some((cand, cand_itr));
            }
            mu *= 0.5;
            if mu < MIN_STEP {
                break None;
            }
        };
        // keep halving while that still helps, so steps do not overshoot a ridge
        while let Some((_, best)) = &step {
            mu *= 0.5;
            if mu < MIN_STEP {
                break;
            }
            let (cand, cand_itr) = along(mu);
            if cand_itr <= *best {
                break;
            }
            step = Some((cand, cand_itr));
        }
        let Some((cand, cand_itr)) = step else {
            // no step length increases the ITR: numerically stationary
            converged = true;
            break;
        };
        iterations += 1;
        let gain = cand_itr - itr;
        t = cand;
        itr = cand_itr;
        record(iterations, itr, &t);
        if gain < cfg.stop_tol {
            converged = true;
            break;
        }
    }
    if !converged && !degenerate {
        log::warn!("gradient ascent stopped at the iteration cap ({})", cfg.max_iters);
    }
    RestartOutcome {
        initial,
        thresholds: t,
        itr: if degenerate { 0.0 } else { itr },
        iterations,
        converged,
        degenerate,
        trace,
    }
}

/// Writes `restart,iteration,itr,t_1..t_n` rows for every recorded iterate.
pub fn write_trace(path: &Path, result: &AscentResult) -> Result<()> {
    let n = result.best_thresholds.len();
    let mut out = String::from("restart,iteration,itr");
    for k in 1..=n {
        out.push_str(&format!(",t_{k}"));
    }
    out.push('\n');
    for (r, restart) in result.per_restart.iter().enumerate() {
        for p in &restart.trace {
            out.push_str(&format!("{r},{},{}", p.iteration, p.itr));
            for x in &p.thresholds {
                out.push_str(&format!(",{x}"));
            }
            out.push('\n');
        }
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
