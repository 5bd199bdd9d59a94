use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::report::{
    aggregate_table, comparison_table, load_thresholds, metrics_table, save_fits, save_thresholds, write_text,
};
use crate::dataio::{
    load_manifest, load_trial, save_features, save_manifest, save_trial, synth_ssvep, windows, FeatureMatrix,
    ManifestEntry, SynthSpec, WindowSpec,
};
use crate::error::{Error, Result};
use crate::features::{ExtractorRegistry, FeatureExtractor, StimulusSet};
use crate::gradopt::{ascend_from, write_trace, AscentConfig, AscentResult, InitBox};
use crate::lda::{fit_lda, LdaModel};
use crate::probmodel::{
    classify, mdt_from_rate, mutual_information, standard_itr_bits, table_from_counts, ItrModel, Prediction,
    ThresholdVector,
};
use crate::skewnorm::{fit_least_squares, FitOutcome};

/// How a window's confidence features become a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Predict only when exactly one feature passes its threshold.
    Abstain,
    /// Always predict the largest feature.
    Forced,
}

impl Rule {
    pub const ALL: [Rule; 2] = [Rule::Abstain, Rule::Forced];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Abstain => "abstain",
            Rule::Forced => "forced",
        }
    }

    pub fn predict(self, features: &[f64], t: &ThresholdVector) -> Prediction {
        match self {
            Rule::Abstain => classify(features, t),
            Rule::Forced => {
                let mut best = 0;
                for (k, v) in features.iter().enumerate() {
                    if *v > features[best] {
                        best = k;
                    }
                }
                Prediction::Class(best)
            }
        }
    }
}

/// Held-out performance of one rule.
#[derive(Debug, Clone, PartialEq)]
pub struct TestMetrics {
    pub n_windows: usize,
    /// `counts[predicted][correct]`
    pub counts: Vec<Vec<usize>>,
    pub class_counts: Vec<usize>,
    /// Fraction of made predictions that were correct (0 if none were made).
    pub accuracy: f64,
    pub p_made: f64,
    /// `w + (1/P(M) - 1)s` with the observed prediction rate.
    pub mdt_s: f64,
    /// Wolpaw bits per prediction at the observed accuracy, per minute of MDT.
    pub standard_itr: f64,
    /// Mutual information of the observed table, per minute of MDT.
    pub proposed_itr: f64,
}

impl TestMetrics {
    pub fn from_outcomes(
        outcomes: &[(Prediction, usize)],
        n_classes: usize,
        window_s: f64,
        step_s: f64,
    ) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::Data("no test windows to evaluate".into()));
        }
        let mut counts = vec![vec![0usize; n_classes]; n_classes];
        let mut class_counts = vec![0usize; n_classes];
        for &(pred, class) in outcomes {
            class_counts[class] += 1;
            if let Prediction::Class(i) = pred {
                counts[i][class] += 1;
            }
        }
        let made: usize = counts.iter().flatten().sum();
        let correct: usize = (0..n_classes).map(|k| counts[k][k]).sum();
        let table = table_from_counts(&counts, &class_counts);
        let accuracy = if made > 0 { correct as f64 / made as f64 } else { 0.0 };
        let p_made = made as f64 / outcomes.len() as f64;
        let mdt_s = mdt_from_rate(p_made, window_s, step_s);
        let standard_itr = if made > 0 {
            standard_itr_bits(n_classes, accuracy) * 60.0 / mdt_s
        } else {
            0.0
        };
        Ok(Self {
            n_windows: outcomes.len(),
            accuracy,
            p_made,
            mdt_s,
            standard_itr,
            proposed_itr: if made > 0 { mutual_information(&table) * 60.0 / mdt_s } else { 0.0 },
            counts,
            class_counts,
        })
    }

    fn mean_of(items: &[&TestMetrics]) -> TestMetrics {
        let n = items.len() as f64;
        let avg = |f: fn(&TestMetrics) -> f64| items.iter().map(|m| f(m)).sum::<f64>() / n;
        let classes = items.first().map_or(0, |m| m.class_counts.len());
        let mut counts = vec![vec![0; classes]; classes];
        let mut class_counts = vec![0; classes];
        for m in items {
            for (i, row) in m.counts.iter().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    counts[i][j] += c;
                }
            }
            for (j, c) in m.class_counts.iter().enumerate() {
                class_counts[j] += c;
            }
        }
        TestMetrics {
            n_windows: items.iter().map(|m| m.n_windows).sum(),
            counts,
            class_counts,
            accuracy: avg(|m| m.accuracy),
            p_made: avg(|m| m.p_made),
            mdt_s: avg(|m| m.mdt_s),
            standard_itr: avg(|m| m.standard_itr),
            proposed_itr: avg(|m| m.proposed_itr),
        }
    }
}

/// Scores `conf` row by row with `rule`.
pub fn evaluate(conf: &FeatureMatrix, t: &ThresholdVector, rule: Rule, window_s: f64, step_s: f64) -> Result<TestMetrics> {
    let outcomes: Vec<(Prediction, usize)> = conf
        .rows
        .iter()
        .map(|r| (rule.predict(&r.values, t), r.class))
        .collect();
    TestMetrics::from_outcomes(&outcomes, conf.n_classes, window_s, step_s)
}

/// Everything fitted on one training set.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub lda: Option<LdaModel>,
    /// Confidence features of the training windows.
    pub train_features: FeatureMatrix,
    /// `fits[ℓ][k]`: feature `ℓ` under class `k`.
    pub fits: Vec<Vec<FitOutcome>>,
    pub model: ItrModel,
    pub ascent: AscentResult,
}

impl TrainedModel {
    pub fn thresholds(&self) -> &ThresholdVector {
        &self.ascent.best_thresholds
    }

    pub fn confidence(&self, raw: &FeatureMatrix) -> Result<FeatureMatrix> {
        match &self.lda {
            Some(lda) => lda.transform(raw),
            None => Ok(raw.clone()),
        }
    }
}

/// LDA (unless the features are already one per target), skew-normal fits,
/// priors and thresholds from raw training features.
pub fn train(
    raw: &FeatureMatrix,
    use_lda: bool,
    window_s: f64,
    step_s: f64,
    ascent: &AscentConfig,
) -> Result<TrainedModel> {
    let n = raw.n_classes;
    let counts = raw.class_counts();
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Data(format!("class {} has no training windows", k + 1)));
    }
    let (lda, conf) = if use_lda {
        let lda = fit_lda(raw)?;
        let conf = lda.transform(raw)?;
        (Some(lda), conf)
    } else {
        if raw.n_features() != n {
            return Err(Error::Data(format!(
                "{} features for {n} classes; thresholding without LDA needs one per class",
                raw.n_features()
            )));
        }
        (None, raw.clone())
    };

    let mut fits = Vec::with_capacity(n);
    for l in 0..n {
        let mut row = Vec::with_capacity(n);
        for k in 0..n {
            let samples: Vec<f64> = conf.rows.iter().filter(|r| r.class == k).map(|r| r.values[l]).collect();
            let fit = fit_least_squares(&samples)
                .map_err(|e| Error::Data(format!("feature {} under class {}: {e}", l + 1, k + 1)))?;
            row.push(fit);
        }
        fits.push(row);
    }
    let total: usize = counts.iter().sum();
    let mut priors: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let rest: f64 = priors[1..].iter().sum();
    priors[0] = 1.0 - rest;
    let dist = fits.iter().map(|row| row.iter().map(|f| f.params).collect()).collect();
    let model = ItrModel::new(dist, priors, window_s, step_s)?;
    let ascent = ascend_from(&model, ascent, &InitBox::from_features(&conf)?)?;
    Ok(TrainedModel {
        lda,
        train_features: conf,
        fits,
        model,
        ascent,
    })
}

/// Raw features of every window of every manifest trial.
#[derive(Clone)]
pub struct Dataset {
    pub stimuli: StimulusSet,
    pub extractor: Arc<dyn FeatureExtractor>,
    pub raw: FeatureMatrix,
    /// Class of every trial, by trial id.
    pub trials: BTreeMap<u64, usize>,
}

impl Dataset {
    pub fn use_lda(&self) -> bool {
        !self.extractor.one_per_target()
    }
}

pub fn extract_dataset(cfg: &ExperimentConfig, registry: &ExtractorRegistry) -> Result<Dataset> {
    let stimuli = StimulusSet::new(cfg.stimuli.clone(), cfg.harmonics)?;
    let extractor = registry.get(&cfg.extractor)?;
    let spec = WindowSpec::new(cfg.window_s, cfg.step_s)?;
    let entries = load_manifest(&cfg.manifest)?;
    if entries.is_empty() {
        return Err(Error::Data(format!("{} lists no trials", cfg.manifest.display())));
    }

    let per_trial: Vec<(u64, usize, Vec<Vec<f64>>)> = entries
        .par_iter()
        .map(|entry| {
            let class = stimuli.class_of(entry.target_hz).ok_or_else(|| {
                Error::Data(format!(
                    "trial {}: target {} Hz is not among the stimuli {:?}",
                    entry.trial_id, entry.target_hz, cfg.stimuli
                ))
            })?;
            let mut trial = load_trial(&entry.path, cfg.rate_hz, entry.target_hz, &cfg.channels, entry.trial_id)?;
            if let Some((start, end)) = entry.crop {
                trial = trial.crop(start, end)?;
            }
            let rows = windows(&trial, &spec)?
                .map(|(_, seg)| extractor.extract(&seg, cfg.rate_hz, &stimuli))
                .collect::<Result<Vec<_>>>()?;
            if rows.is_empty() {
                return Err(Error::Data(format!("trial {} is shorter than one window", entry.trial_id)));
            }
            Ok((entry.trial_id, class, rows))
        })
        .collect::<Result<_>>()?;

    let mut raw = FeatureMatrix::new(extractor.feature_names(&stimuli, &cfg.channels), stimuli.n_targets());
    let mut trials = BTreeMap::new();
    for (id, class, rows) in per_trial {
        trials.insert(id, class);
        for values in rows {
            raw.push(values, class, id)?;
        }
    }
    log::info!("{}: {} windows from {} trials", extractor.name(), raw.rows.len(), trials.len());
    Ok(Dataset {
        stimuli,
        extractor,
        raw,
        trials,
    })
}

/// The configured fold of every trial, or by default the r-th trial (by id)
/// of each class in fold r.
pub fn assign_folds(cfg: &ExperimentConfig, data: &Dataset) -> Result<BTreeMap<u64, usize>> {
    if let Some(folds) = &cfg.folds {
        for id in data.trials.keys() {
            if !folds.contains_key(id) {
                return Err(Error::Config(format!("trial {id} has no fold assignment")));
            }
        }
        if let Some(id) = folds.keys().find(|id| !data.trials.contains_key(id)) {
            return Err(Error::Config(format!("fold assignment names unknown trial {id}")));
        }
        return Ok(folds.clone());
    }
    let mut seen = vec![0usize; data.stimuli.n_targets()];
    let mut folds = BTreeMap::new();
    for (&id, &class) in &data.trials {
        folds.insert(id, seen[class]);
        seen[class] += 1;
    }
    if folds.values().max().copied().unwrap_or(0) == 0 {
        return Err(Error::Data("cross-validation needs at least two trials per class".into()));
    }
    Ok(folds)
}

#[derive(Debug, Clone)]
pub struct FoldReport {
    pub fold: usize,
    pub test_trials: Vec<u64>,
    pub trained: TrainedModel,
    /// Model-based ITR at the chosen thresholds.
    pub train_itr: f64,
    pub abstain: TestMetrics,
    pub forced: TestMetrics,
}

impl FoldReport {
    pub fn metrics(&self, rule: Rule) -> &TestMetrics {
        match rule {
            Rule::Abstain => &self.abstain,
            Rule::Forced => &self.forced,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub extractor: String,
    pub folds: Vec<FoldReport>,
}

impl ExperimentReport {
    /// Unweighted mean over folds.
    pub fn mean(&self, rule: Rule) -> TestMetrics {
        let items: Vec<&TestMetrics> = self.folds.iter().map(|f| f.metrics(rule)).collect();
        TestMetrics::mean_of(&items)
    }

    pub fn mean_train_itr(&self) -> f64 {
        self.folds.iter().map(|f| f.train_itr).sum::<f64>() / self.folds.len() as f64
    }
}

/// Trial-wise cross-validation on already extracted features. Nothing is
/// written.
pub fn cross_validate(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentReport> {
    let folds = assign_folds(cfg, data)?;
    let mut labels: Vec<usize> = folds.values().copied().collect();
    labels.sort_unstable();
    labels.dedup();

    let reports = labels
        .par_iter()
        .map(|&fold| run_fold(cfg, data, &folds, fold).map_err(|e| e.in_fold(fold)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        extractor: cfg.extractor.clone(),
        folds: reports,
    })
}

fn run_fold(cfg: &ExperimentConfig, data: &Dataset, folds: &BTreeMap<u64, usize>, fold: usize) -> Result<FoldReport> {
    let in_test = |id: u64| folds.get(&id) == Some(&fold);
    let train_raw = data.raw.filter_trials(|id| !in_test(id));
    let test_raw = data.raw.filter_trials(in_test);
    let ascent = AscentConfig {
        seed: cfg.ascent.seed.wrapping_add(fold as u64),
        ..cfg.ascent.clone()
    };
    let trained = train(&train_raw, data.use_lda(), cfg.window_s, cfg.step_s, &ascent)?;
    log::info!("fold {fold}: training ITR {:.3} bit/min", trained.ascent.best_itr);
    let test = trained.confidence(&test_raw)?;
    let t = trained.thresholds();
    Ok(FoldReport {
        fold,
        test_trials: folds.iter().filter(|(_, f)| **f == fold).map(|(id, _)| *id).collect(),
        train_itr: trained.ascent.best_itr,
        abstain: evaluate(&test, t, Rule::Abstain, cfg.window_s, cfg.step_s)?,
        forced: evaluate(&test, t, Rule::Forced, cfg.window_s, cfg.step_s)?,
        trained,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_model(dir: &Path, data: &Dataset, trained: &TrainedModel, trace: bool) -> Result<()> {
    create_dir(dir)?;
    save_features(&trained.train_features, &dir.join("features.csv"))?;
    if let Some(lda) = &trained.lda {
        lda.save(&dir.join("lda.txt"))?;
    }
    save_fits(&dir.join("skewnorm.csv"), &trained.fits)?;
    save_thresholds(&dir.join("thresholds.csv"), &data.stimuli.target_freqs_hz, trained.thresholds())?;
    if trace {
        write_trace(&dir.join("trace.csv"), &trained.ascent)?;
    }
    Ok(())
}

/// Writes `fold_<k>/` artifacts and `aggregate.csv`.
pub fn write_report(cfg: &ExperimentConfig, data: &Dataset, report: &ExperimentReport) -> Result<()> {
    create_dir(&cfg.output)?;
    for f in &report.folds {
        let dir = cfg.output.join(format!("fold_{}", f.fold));
        write_model(&dir, data, &f.trained, cfg.trace).map_err(|e| e.in_fold(f.fold))?;
        let rows = [(Rule::Abstain, &f.abstain), (Rule::Forced, &f.forced)];
        write_text(&dir.join("metrics.csv"), &metrics_table(&rows, Some(f.train_itr)))?;
    }
    write_text(&cfg.output.join("aggregate.csv"), &aggregate_table(report))
}

/// Full cross-validated experiment; writes every artifact.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let data = extract_dataset(cfg, &ExtractorRegistry::builtin())?;
    let report = cross_validate(cfg, &data)?;
    write_report(cfg, &data, &report)?;
    Ok(report)
}

/// As [`run_experiment`], plus `compare.csv` with the abstaining and
/// forced-choice rules side by side.
pub fn compare_abstain(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let report = run_experiment(cfg)?;
    write_text(&cfg.output.join("compare.csv"), &comparison_table(&report))?;
    Ok(report)
}

/// Raw features of every trial to `<output>/features.csv`.
pub fn extract_features(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let data = extract_dataset(cfg, &ExtractorRegistry::builtin())?;
    create_dir(&cfg.output)?;
    let path = cfg.output.join("features.csv");
    save_features(&data.raw, &path)?;
    Ok(path)
}

/// Trains on every manifest trial and writes the model to the model
/// directory.
pub fn train_model(cfg: &ExperimentConfig) -> Result<TrainedModel> {
    let data = extract_dataset(cfg, &ExtractorRegistry::builtin())?;
    let trained = train(&data.raw, data.use_lda(), cfg.window_s, cfg.step_s, &cfg.ascent)?;
    write_model(&cfg.model_dir(), &data, &trained, cfg.trace)?;
    Ok(trained)
}

/// Scores every manifest trial with a saved model; writes
/// `<output>/eval/metrics.csv`.
pub fn evaluate_model(cfg: &ExperimentConfig) -> Result<(TestMetrics, TestMetrics)> {
    let data = extract_dataset(cfg, &ExtractorRegistry::builtin())?;
    let dir = cfg.model_dir();
    let lda_path = dir.join("lda.txt");
    let conf = if data.use_lda() {
        if !lda_path.exists() {
            return Err(Error::Data(format!(
                "extractor `{}` needs an LDA model but {} is missing",
                cfg.extractor,
                lda_path.display()
            )));
        }
        LdaModel::load(&lda_path)?.transform(&data.raw)?
    } else {
        data.raw.clone()
    };
    let t = load_thresholds(&dir.join("thresholds.csv"), &data.stimuli.target_freqs_hz)?;
    let abstain = evaluate(&conf, &t, Rule::Abstain, cfg.window_s, cfg.step_s)?;
    let forced = evaluate(&conf, &t, Rule::Forced, cfg.window_s, cfg.step_s)?;
    let out = cfg.output.join("eval");
    create_dir(&out)?;
    let rows = [(Rule::Abstain, &abstain), (Rule::Forced, &forced)];
    write_text(&out.join("metrics.csv"), &metrics_table(&rows, None))?;
    Ok((abstain, forced))
}

/// Writes a synthetic dataset (one CSV per trial plus the manifest) at the
/// configured manifest path. Trial `r` of target `k` gets id `r·n + k + 1`.
pub fn generate_fixture(cfg: &ExperimentConfig) -> Result<Vec<ManifestEntry>> {
    let dir = cfg.manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    create_dir(&dir)?;
    let n = cfg.stimuli.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut entries = Vec::new();
    for r in 0..cfg.synth.trials_per_class {
        for (k, &hz) in cfg.stimuli.iter().enumerate() {
            let id = (r * n + k + 1) as u64;
            let spec = SynthSpec {
                target_hz: hz,
                duration_s: cfg.synth.duration_s,
                rate_hz: cfg.rate_hz,
                n_channels: cfg.channels.len(),
                harmonic_amps: cfg.synth.amps.clone(),
                noise_sd: cfg.synth.noise_sd,
                common_noise_sd: cfg.synth.common_noise_sd,
                seed: rng.next_u64(),
            };
            let mut trial = synth_ssvep(&spec, id)?;
            trial.channel_names = cfg.channels.clone();
            let name = format!("trial_{id:03}.csv");
            save_trial(&trial, &dir.join(&name))?;
            entries.push(ManifestEntry {
                path: dir.join(name),
                target_hz: hz,
                trial_id: id,
                crop: None,
            });
        }
    }
    save_manifest(&entries, &cfg.manifest)?;
    Ok(entries)
}
