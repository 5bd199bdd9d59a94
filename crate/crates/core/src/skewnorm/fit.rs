use super::{pdf, SkewNormalParams};
use crate::error::{Error, Result};

/// Shape values are clamped to `[-MAX_SHAPE, MAX_SHAPE]` while fitting.
pub const MAX_SHAPE: f64 = 20.0;

const MIN_SAMPLES: usize = 30;
const MAX_ITERS: usize = 2000;
const TOLERANCE: f64 = 1e-10;

/// Density-normalised histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub density: Vec<f64>,
    pub width: f64,
}

/// Freedman–Diaconis bin width (Scott's rule when the IQR is zero).
pub fn histogram(samples: &[f64]) -> Histogram {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let mut width = 2.0 * iqr / n.cbrt();
    if !(width > 0.0) {
        let (_, var) = mean_var(samples);
        width = 3.49 * var.sqrt() / n.cbrt();
    }
    let range = max - min;
    let bins = if range > 0.0 && width > 0.0 {
        ((range / width).ceil() as usize).clamp(1, 10_000)
    } else {
        1
    };
    let width = if range > 0.0 { range / bins as f64 } else { 1.0 };

    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        let idx = (((x - min) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Histogram {
        centers: (0..bins).map(|i| min + (i as f64 + 0.5) * width).collect(),
        density: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
        width,
    }
}

/// Linear-interpolated quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn mean_var(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub params: SkewNormalParams,
    /// Sum of squared differences between histogram density and fitted pdf.
    pub residual: f64,
    /// Residual at the method-of-moments starting point.
    pub initial_residual: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before the tolerance.
    pub converged: bool,
}

/// Least-squares fit of a skew-normal pdf to the samples' histogram,
/// started from the method-of-moments estimate and refined with
/// Nelder–Mead over `(ξ, ln ω, α)`.
pub fn fit_least_squares(samples: &[f64]) -> Result<FitOutcome> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Data(format!(
            "skew-normal fit needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("skew-normal fit given non-finite samples".into()));
    }
    let (_, var) = mean_var(samples);
    if !(var > 0.0) {
        return Err(Error::Data("skew-normal fit given samples with zero variance".into()));
    }

    let hist = histogram(samples);
    let objective = |v: &[f64; 3]| -> f64 {
        let p = unpack(v);
        hist.centers
            .iter()
            .zip(&hist.density)
            .map(|(&x, &d)| (d - pdf(&p, x)).powi(2))
            .sum()
    };

    let start = moment_estimate(samples);
    let x0 = [start.location, start.scale.ln(), start.shape];
    let initial_residual = objective(&x0);
    let steps = [0.25 * start.scale, 0.25, 0.5 + 0.25 * start.shape.abs()];

    let mut best = (x0, initial_residual);
    let mut iterations = 0;
    let mut converged = false;
    // Restart from the incumbent until a restart no longer helps.
    while iterations < MAX_ITERS {
        let run = nelder_mead(&objective, best.0, steps, MAX_ITERS - iterations);
        iterations += run.iterations;
        let improved = best.1 - run.value > TOLERANCE;
        if run.value <= best.1 {
            best = (run.point, run.value);
        }
        if run.converged && !improved {
            converged = true;
            break;
        }
    }
    let params = unpack(&best.0);
    if !converged {
        log::warn!("skew-normal fit stopped at the iteration cap ({MAX_ITERS})");
    }
    Ok(FitOutcome {
        params,
        residual: best.1,
        initial_residual,
        iterations,
        converged,
    })
}

fn unpack(v: &[f64; 3]) -> SkewNormalParams {
    SkewNormalParams {
        location: v[0],
        scale: v[1].clamp(-700.0, 700.0).exp(),
        shape: v[2].clamp(-MAX_SHAPE, MAX_SHAPE),
    }
}

/// Matches mean, variance and (clamped) skewness.
fn moment_estimate(samples: &[f64]) -> SkewNormalParams {
    use std::f64::consts::PI;
    let n = samples.len() as f64;
    let (mean, var) = mean_var(samples);
    let sd = var.sqrt();
    let skew = samples.iter().map(|x| ((x - mean) / sd).powi(3)).sum::<f64>() / n;
    // the skew-normal cannot exceed |skewness| ≈ 0.9953
    let g = skew.clamp(-0.99, 0.99);
    let g23 = g.abs().powf(2.0 / 3.0);
    let k = ((4.0 - PI) / 2.0).powf(2.0 / 3.0);
    let delta = (g.signum() * (PI / 2.0 * g23 / (g23 + k)).sqrt()).clamp(-0.999, 0.999);
    let shape = (delta / (1.0 - delta * delta).sqrt()).clamp(-MAX_SHAPE, MAX_SHAPE);
    let delta = shape / (1.0 + shape * shape).sqrt();
    let scale = sd / (1.0 - 2.0 * delta * delta / PI).sqrt();
    let location = mean - scale * delta * (2.0 / PI).sqrt();
    SkewNormalParams {
        location,
        scale,
        shape,
    }
}

struct SimplexRun {
    point: [f64; 3],
    value: f64,
    iterations: usize,
    converged: bool,
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction ½, shrink ½).
/// The best vertex never gets worse, so the result is no worse than `x0`.
fn nelder_mead(
    f: &dyn Fn(&[f64; 3]) -> f64,
    x0: [f64; 3],
    steps: [f64; 3],
    max_iters: usize,
) -> SimplexRun {
    const N: usize = 3;
    let eval = |x: &[f64; 3]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((x0, eval(&x0)));
    for i in 0..N {
        let mut x = x0;
        x[i] += steps[i];
        simplex.push((x, eval(&x)));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[N].1 - simplex[0].1).abs() <= TOLERANCE {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for j in 0..N {
                centroid[j] += x[j] / N as f64;
            }
        }
        let worst = simplex[N];
        let along = |t: f64| -> [f64; N] {
            let mut p = [0.0; N];
            for j in 0..N {
                p[j] = centroid[j] + t * (worst.0[j] - centroid[j]);
            }
            p
        };

        let reflected = along(-1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = eval(&expanded);
            simplex[N] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[N - 1].1 {
            simplex[N] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst.1 {
            let c = along(-0.5);
            (c, eval(&c))
        } else {
            let c = along(0.5);
            (c, eval(&c))
        };
        if fc < worst.1.min(fr) {
            simplex[N] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0;
        for vertex in simplex.iter_mut().skip(1) {
            for j in 0..N {
                vertex.0[j] = best[j] + 0.5 * (vertex.0[j] - best[j]);
            }
            vertex.1 = eval(&vertex.0);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    SimplexRun {
        point: simplex[0].0,
        value: simplex[0].1,
        iterations,
        converged,
    }
}
