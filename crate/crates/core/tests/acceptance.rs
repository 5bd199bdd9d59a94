//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, SkewNormal};
use ssvep_itr::eval::{
    cross_validate, execute, extract_dataset, generate_fixture, Command, Dataset, ExperimentConfig, ExperimentReport, Rule,
};
use ssvep_itr::features::ExtractorRegistry;
use ssvep_itr::gradopt::{ascend, grad_itr, AscentConfig};
use ssvep_itr::probmodel::{
    classify, itr_bits_per_min, mutual_information, probability_table, standard_itr_bits, ItrModel, Prediction,
    ProbabilityTable, ThresholdVector,
};
use ssvep_itr::skewnorm::SkewNormalParams;
use support::{adaptive_simpson, random_model, seeded, skew_normal_density, snapshot, wolpaw_bits};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [(u32, &str, Option<Duration>, fn() -> Outcome); 8] = [
        (1, "gradient matches central differences", Some(Duration::from_secs(60)), gradient_correctness),
        (2, "mutual information reduces to the Wolpaw formula", None, wolpaw_reduction),
        (3, "probability table matches Monte Carlo", None, monte_carlo_table),
        (4, "cdf and pdf agree", None, cdf_pdf_identity),
        (5, "ascent dominates grid search", Some(Duration::from_secs(300)), optimizer_dominance),
        (6, "synthetic reproduction of the qualitative findings", Some(Duration::from_secs(600)), synthetic_reproduction),
        (7, "reproduction guide documented", None, reproduction_guide),
        (8, "every subcommand is deterministic", None, determinism),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.1?}, limit {limit:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("criterion {id}: PASS {name} ({detail}) [{:.1}s]", elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("criterion {id}: FAIL {name} ({detail}) [{:.1}s]", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn central_difference(m: &ItrModel, t: &ThresholdVector, l: usize, h: f64) -> f64 {
    let (mut up, mut down) = (t.clone(), t.clone());
    up.0[l] += h;
    down.0[l] -= h;
    (itr_bits_per_min(m, &up) - itr_bits_per_min(m, &down)) / (2.0 * h)
}

/// Relative error of each component against the central difference. The
/// denominator is floored at 1e-3 bit/min per unit so that components that
/// vanish analytically are compared absolutely.
fn gradient_correctness() -> Outcome {
    let mut rng = seeded(101);
    let mut worst = 0.0f64;
    let mut instances = 0;
    for n in [2, 3, 4] {
        let mut done = 0;
        while done < 40 {
            let m = random_model(n, &mut rng);
            let t = ThresholdVector((0..n).map(|_| rng.random_range(0.0..1.2)).collect());
            if probability_table(&m, &t).p_made < 1e-3 {
                continue;
            }
            let g = grad_itr(&m, &t).map_err(|e| e.to_string())?;
            for (l, &gl) in g.iter().enumerate() {
                let fd = central_difference(&m, &t, l, 1e-5);
                let rel = (gl - fd).abs() / fd.abs().max(1e-3);
                worst = worst.max(rel);
                ensure!(rel <= 1e-4, "n={n} component {l}: analytic {gl}, difference {fd}, relative {rel:e}");
            }
            done += 1;
        }
        instances += done;
    }
    Ok(format!("{instances} instances, worst relative error {worst:.2e}"))
}

/// Every prediction is made with accuracy `p` and errors spread evenly,
/// optionally after abstaining with a class-independent probability.
fn wolpaw_table(n: usize, p: f64, made: f64) -> ProbabilityTable {
    let cond = (0..n)
        .map(|i| (0..n).map(|j| made * if i == j { p } else { (1.0 - p) / (n - 1) as f64 }).collect())
        .collect();
    ProbabilityTable::from_conditionals(cond, vec![1.0 / n as f64; n])
}

fn wolpaw_reduction() -> Outcome {
    let mut worst = 0.0f64;
    for n in [2, 3, 4, 8] {
        for p in [0.55, 0.7, 0.9, 0.99] {
            let oracle = wolpaw_bits(n, p);
            let lib = standard_itr_bits(n, p);
            ensure!((lib - oracle).abs() <= 1e-12, "standard_itr_bits({n}, {p}) = {lib}, expected {oracle}");
            for made in [1.0, 0.37] {
                let mi = mutual_information(&wolpaw_table(n, p, made));
                let err = (mi - lib).abs();
                worst = worst.max(err);
                ensure!(err <= 1e-9, "n={n} P={p} P(M)={made}: MI {mi} vs {lib}");
            }
        }
    }
    Ok(format!("32 tables, worst difference {worst:.1e} bits"))
}

fn monte_carlo_table() -> Outcome {
    const DRAWS: usize = 1_000_000;
    let mut rng = seeded(303);
    let mut worst = 0.0f64;
    let mut models = 0;
    while models < 4 {
        let m = random_model(3, &mut rng);
        let t = ThresholdVector((0..3).map(|_| rng.random_range(0.3..0.9)).collect());
        let table = probability_table(&m, &t);
        if table.p_made_given_class.iter().any(|&p| p < 0.2) {
            continue;
        }
        let samplers: Vec<Vec<SkewNormal<f64>>> = m
            .dist
            .iter()
            .map(|row| row.iter().map(|d| SkewNormal::new(d.location, d.scale, d.shape).unwrap()).collect())
            .collect();
        for class in 0..3 {
            let mut counts = [0usize; 3];
            let mut made = 0usize;
            let mut f = [0.0; 3];
            for _ in 0..DRAWS {
                for (l, v) in f.iter_mut().enumerate() {
                    *v = samplers[l][class].sample(&mut rng);
                }
                if let Prediction::Class(i) = classify(&f, &t) {
                    counts[i] += 1;
                    made += 1;
                }
            }
            for i in 0..3 {
                let freq = counts[i] as f64 / DRAWS as f64;
                let err = (freq - table.p_pred_given_class[i][class]).abs();
                worst = worst.max(err);
                ensure!(err <= 3e-3, "P(P{i}|C{class}): analytic {}, sampled {freq}", table.p_pred_given_class[i][class]);
                let freq_made = counts[i] as f64 / made as f64;
                let err = (freq_made - table.p_pred_given_class_made[i][class]).abs();
                worst = worst.max(err);
                ensure!(err <= 3e-3, "P(P{i}|C{class},M): analytic {}, sampled {freq_made}", table.p_pred_given_class_made[i][class]);
            }
        }
        models += 1;
    }
    Ok(format!("{models} models x 3 classes x {DRAWS} draws, worst deviation {worst:.1e}"))
}

fn cdf_pdf_identity() -> Outcome {
    let mut rng = seeded(404);
    let (mut worst_fd, mut worst_quad) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let p = SkewNormalParams::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(0.2..3.0),
            rng.random_range(-10.0..10.0),
        )
        .unwrap();
        let xs: Vec<f64> = (0..1000).map(|k| p.location + p.scale * (-5.0 + 10.0 * k as f64 / 999.0)).collect();
        let h = 1e-5 * p.scale;
        for &x in &xs {
            let fd = (p.cdf(x + h) - p.cdf(x - h)) / (2.0 * h);
            worst_fd = worst_fd.max((fd - p.pdf(x)).abs());
            let oracle = skew_normal_density(&p, x);
            ensure!((p.pdf(x) - oracle).abs() <= 1e-14 * oracle.max(1.0), "pdf{p:?}({x}) = {}, expected {oracle}", p.pdf(x));
        }
        ensure!(worst_fd <= 1e-6, "finite difference of cdf differs from pdf by {worst_fd:e} for {p:?}");

        let pdf = |x: f64| p.pdf(x);
        let mut acc = adaptive_simpson(&pdf, p.location - 40.0 * p.scale, xs[0], 1e-14);
        let mut prev = xs[0];
        for &x in &xs {
            acc += adaptive_simpson(&pdf, prev, x, 1e-13);
            prev = x;
            let err = (acc - p.cdf(x)).abs();
            worst_quad = worst_quad.max(err);
            ensure!(err <= 1e-8, "cdf{p:?}({x}) = {}, quadrature {acc}", p.cdf(x));
        }
    }
    Ok(format!("50 triples x 1000 points, worst {worst_fd:.1e} (difference), {worst_quad:.1e} (quadrature)"))
}

fn grid_maximum(m: &ItrModel, points: usize) -> f64 {
    let n = m.n_classes();
    let axes: Vec<Vec<f64>> = m
        .dist
        .iter()
        .map(|row| {
            let lo = row.iter().map(|d| d.location - 3.0 * d.scale).fold(f64::INFINITY, f64::min);
            let hi = row.iter().map(|d| d.location + 3.0 * d.scale).fold(f64::NEG_INFINITY, f64::max);
            (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect()
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; n];
    loop {
        let t = ThresholdVector(idx.iter().enumerate().map(|(l, &k)| axes[l][k]).collect());
        best = best.max(itr_bits_per_min(m, &t));
        let mut l = 0;
        while l < n {
            idx[l] += 1;
            if idx[l] < points {
                break;
            }
            idx[l] = 0;
            l += 1;
        }
        if l == n {
            return best;
        }
    }
}

fn optimizer_dominance() -> Outcome {
    let mut lines = Vec::new();
    for (n, seed) in [(2, 1), (2, 2), (3, 1), (3, 2)] {
        let m = random_model(n, &mut seeded(500 + seed));
        let grid = grid_maximum(&m, 50);
        let found = ascend(&m, &AscentConfig::default()).map_err(|e| e.to_string())?.best_itr;
        ensure!(found >= grid - 1e-6, "n={n} model {seed}: ascent {found}, grid {grid}");
        lines.push(format!("n={n}: {found:.4} >= {grid:.4}"));
    }
    Ok(lines.join("; "))
}

const FIXTURE: &str = "seed = 1\n\
                       synth_trials_per_class = 5\n\
                       synth_duration_s = 10\n\
                       synth_noise_sd = 4\n\
                       synth_common_noise_sd = 6";

fn synthetic_reproduction() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reports: Vec<(&str, ExperimentReport)> = Vec::new();
    for extractor in ["combined", "psda", "cca"] {
        let cfg = support::fixture_config(dir.path(), extractor, &format!("{FIXTURE}\nextractor = {extractor}"));
        if extractor == "combined" {
            generate_fixture(&cfg).map_err(|e| e.to_string())?;
        }
        let data: Dataset = extract_dataset(&cfg, &ExtractorRegistry::builtin()).map_err(|e| e.to_string())?;
        reports.push((extractor, cross_validate(&cfg, &data).map_err(|e| e.to_string())?));
    }
    let itr: Vec<f64> = reports.iter().map(|(_, r)| r.mean(Rule::Abstain).proposed_itr).collect();
    let mut detail = reports
        .iter()
        .zip(&itr)
        .map(|((name, _), v)| format!("{name} {v:.2}"))
        .collect::<Vec<_>>()
        .join(", ");
    detail.push_str(" bit/min");
    ensure!(itr[0] >= itr[1] && itr[0] >= itr[2], "combined does not lead: {detail}");
    for (name, report) in &reports {
        let (a, f) = (report.mean(Rule::Abstain).accuracy, report.mean(Rule::Forced).accuracy);
        ensure!(a >= f, "{name}: abstaining accuracy {a} below forced {f}");
        detail.push_str(&format!("; {name} accuracy {a:.3} vs forced {f:.3}"));
    }
    Ok(detail)
}

fn reproduction_guide() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    for needle in [
        "## Reproducing on a recorded dataset",
        "62 bit/min",
        "ssvep-itr extract --config",
        "ssvep-itr run --config",
        "ssvep-itr compare --config",
    ] {
        ensure!(text.contains(needle), "README lacks `{needle}`");
    }
    let start = text.find("```ini\n").ok_or("README has no ini example")? + 7;
    let len = text[start..].find("```").ok_or("unterminated ini example")?;
    let cfg = ExperimentConfig::parse(&text[start..start + len], Path::new("README.md"), Path::new("."))
        .map_err(|e| format!("README example config: {e}"))?;
    cfg.validate().map_err(|e| format!("README example config: {e}"))?;
    Ok("guide, commands and example config present".into())
}

fn determinism() -> Outcome {
    let extra = "synth_trials_per_class = 3\nrestarts = 4\nmax_iters = 1000\nsynth_noise_sd = 4\ntrace = true";
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let cfgs: Vec<ExperimentConfig> = dirs.iter().map(|d| support::fixture_config(d.path(), "out", extra)).collect();
    for command in Command::ALL {
        let mut runs = Vec::new();
        for (dir, cfg) in dirs.iter().zip(&cfgs) {
            let summary = execute(command, cfg).map_err(|e| format!("{}: {e}", command.name()))?;
            let summary = summary.replace(&dir.path().display().to_string(), "<dir>");
            runs.push((summary, snapshot(dir.path())));
        }
        ensure!(runs[0].0 == runs[1].0, "{} printed different summaries", command.name());
        ensure!(runs[0].1 == runs[1].1, "{} wrote different files", command.name());
    }
    let files = snapshot(dirs[0].path()).len();
    Ok(format!("{} subcommands, {files} files identical", Command::ALL.len()))
}
