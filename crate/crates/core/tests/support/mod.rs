#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssvep_itr::eval::ExperimentConfig;
use ssvep_itr::probmodel::ItrModel;
use ssvep_itr::skewnorm::SkewNormalParams;

/// Three-target fixture on two channels at 256 Hz. `extra` lines override
/// or add keys.
pub fn fixture_config(dir: &Path, name: &str, extra: &str) -> ExperimentConfig {
    let text = format!(
        "manifest = data/manifest.csv\n\
         output = {name}\n\
         stimuli = 8, 14, 28\n\
         channels = O1, O2\n\
         rate_hz = 256\n\
         {extra}\n"
    );
    let path = dir.join(format!("{name}.cfg"));
    std::fs::write(&path, text).unwrap();
    ExperimentConfig::load(&path).unwrap()
}

/// Every file under `root`, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// `log2 N + P log2 P + (1-P) log2((1-P)/(N-1))`, written out independently
/// of the library.
pub fn wolpaw_bits(n: usize, p: f64) -> f64 {
    let n = n as f64;
    let mut b = n.ln() + p * p.ln();
    if p < 1.0 {
        b += (1.0 - p) * ((1.0 - p) / (n - 1.0)).ln();
    }
    b / std::f64::consts::LN_2
}

/// Mutual information of a joint distribution given as nonnegative weights,
/// normalised here.
pub fn mutual_information_of_joint(joint: &[Vec<f64>]) -> f64 {
    let total: f64 = joint.iter().flatten().sum();
    let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum::<f64>() / total).collect();
    let cols: Vec<f64> = (0..joint[0].len())
        .map(|j| joint.iter().map(|r| r[j]).sum::<f64>() / total)
        .collect();
    let mut mi = 0.0;
    for (i, row) in joint.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            let p = w / total;
            if p > 0.0 {
                mi += p * (p / (rows[i] * cols[j])).log2();
            }
        }
    }
    mi
}

/// Feature `ℓ` sits near 1 under class `ℓ` and near 0 otherwise, with
/// random spread, skew and priors.
pub fn random_model(n: usize, rng: &mut ChaCha8Rng) -> ItrModel {
    let dist = (0..n)
        .map(|l| {
            (0..n)
                .map(|k| {
                    let centre = if l == k { 1.0 } else { 0.0 } + rng.random_range(-0.3..0.3);
                    SkewNormalParams::new(centre, rng.random_range(0.3..0.8), rng.random_range(-4.0..4.0)).unwrap()
                })
                .collect()
        })
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let sum: f64 = raw.iter().sum();
    let mut priors: Vec<f64> = raw.iter().map(|p| p / sum).collect();
    let rest: f64 = priors[1..].iter().sum();
    priors[0] = 1.0 - rest;
    ItrModel::new(dist, priors, 1.0, 0.125).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Skew-normal density written out from its definition with `libm::erfc`.
pub fn skew_normal_density(p: &SkewNormalParams, x: f64) -> f64 {
    let z = (x - p.location) / p.scale;
    let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let big_phi = 0.5 * libm::erfc(-p.shape * z / std::f64::consts::SQRT_2);
    2.0 / p.scale * phi * big_phi
}
