use std::fmt::Write as _;
use std::path::Path;

use super::experiment::{ExperimentReport, Rule, TestMetrics};
use crate::error::{Error, Result};
use crate::probmodel::ThresholdVector;
use crate::skewnorm::FitOutcome;

/// Six significant digits, fixed notation for moderate magnitudes and
/// scientific otherwise, trailing zeros removed.
pub fn fmt6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

const METRIC_COLUMNS: &str = "accuracy,p_made,mdt_s,standard_itr,proposed_itr";

fn metric_cells(m: &TestMetrics) -> String {
    [m.accuracy, m.p_made, m.mdt_s, m.standard_itr, m.proposed_itr]
        .iter()
        .map(|v| fmt6(*v))
        .collect::<Vec<_>>()
        .join(",")
}

/// One row per rule for a single fold or evaluation.
pub fn metrics_table(rows: &[(Rule, &TestMetrics)], train_itr: Option<f64>) -> String {
    let mut out = format!("rule,n_windows,{METRIC_COLUMNS},train_itr\n");
    for (rule, m) in rows {
        let train = train_itr.map_or_else(String::new, fmt6);
        let _ = writeln!(out, "{},{},{},{train}", rule.name(), m.n_windows, metric_cells(m));
    }
    out
}

/// Every fold and rule, followed by the per-rule means.
pub fn aggregate_table(report: &ExperimentReport) -> String {
    let mut out = format!("fold,rule,{METRIC_COLUMNS},train_itr\n");
    for f in &report.folds {
        for rule in Rule::ALL {
            let _ = writeln!(out, "{},{},{},{}", f.fold, rule.name(), metric_cells(f.metrics(rule)), fmt6(f.train_itr));
        }
    }
    for rule in Rule::ALL {
        let _ = writeln!(out, "mean,{},{},{}", rule.name(), metric_cells(&report.mean(rule)), fmt6(report.mean_train_itr()));
    }
    out
}

/// Abstaining and forced-choice metrics side by side.
pub fn comparison_table(report: &ExperimentReport) -> String {
    let names = ["accuracy", "p_made", "mdt_s", "standard_itr", "proposed_itr"];
    let mut out = String::from("fold");
    for n in names {
        let _ = write!(out, ",abstain_{n},forced_{n}");
    }
    out.push('\n');
    let row = |label: String, a: &TestMetrics, f: &TestMetrics| {
        let pick = |m: &TestMetrics| [m.accuracy, m.p_made, m.mdt_s, m.standard_itr, m.proposed_itr];
        let mut line = label;
        for (x, y) in pick(a).iter().zip(pick(f)) {
            let _ = write!(line, ",{},{}", fmt6(*x), fmt6(y));
        }
        line.push('\n');
        line
    };
    for f in &report.folds {
        out.push_str(&row(f.fold.to_string(), &f.abstain, &f.forced));
    }
    out.push_str(&row(
        "mean".into(),
        &report.mean(Rule::Abstain),
        &report.mean(Rule::Forced),
    ));
    out
}

/// Fitted parameters at full precision.
pub fn save_fits(path: &Path, fits: &[Vec<FitOutcome>]) -> Result<()> {
    let mut out = String::from("feature,class,location,scale,shape,residual,iterations,converged\n");
    for (l, row) in fits.iter().enumerate() {
        for (k, fit) in row.iter().enumerate() {
            let p = fit.params;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                l + 1,
                k + 1,
                p.location,
                p.scale,
                p.shape,
                fit.residual,
                fit.iterations,
                fit.converged
            );
        }
    }
    write_text(path, &out)
}

pub fn save_thresholds(path: &Path, stimuli_hz: &[f64], t: &ThresholdVector) -> Result<()> {
    let mut out = String::from("target_hz,threshold\n");
    for (hz, th) in stimuli_hz.iter().zip(t.as_slice()) {
        let _ = writeln!(out, "{hz},{th}");
    }
    write_text(path, &out)
}

/// Reads thresholds written by [`save_thresholds`], checking they are for
/// the expected targets.
pub fn load_thresholds(path: &Path, stimuli_hz: &[f64]) -> Result<ThresholdVector> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "target_hz,threshold")) => {}
        _ => return Err(Error::parse(path, 1, 1, "expected header `target_hz,threshold`")),
    }
    let mut values = Vec::new();
    for (idx, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let parsed = line
            .split_once(',')
            .and_then(|(hz, th)| Some((hz.trim().parse::<f64>().ok()?, th.trim().parse::<f64>().ok()?)));
        let Some((hz, th)) = parsed else {
            return Err(Error::parse(path, idx + 1, 1, format!("expected `hz,threshold`, got `{line}`")));
        };
        let expected = stimuli_hz.get(values.len()).copied();
        if expected != Some(hz) {
            return Err(Error::Data(format!(
                "{}: threshold for {hz} Hz does not match the configured targets {stimuli_hz:?}",
                path.display()
            )));
        }
        values.push(th);
    }
    if values.len() != stimuli_hz.len() {
        return Err(Error::Data(format!(
            "{}: {} thresholds for {} targets",
            path.display(),
            values.len(),
            stimuli_hz.len()
        )));
    }
    ThresholdVector::new(values)
}
