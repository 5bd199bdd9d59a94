use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::StimulusSet;
use crate::gradopt::AscentConfig;

/// Everything one experiment needs, read from a flat `key = value` file.
///
/// Recognised keys (relative paths are resolved against the config file's
/// directory):
///
/// | key | meaning | default |
/// |-----|---------|---------|
/// | `manifest` | trial manifest | required |
/// | `output` | output directory | required |
/// | `stimuli` | comma-separated target frequencies in Hz | required |
/// | `channels` | comma-separated channel names | required |
/// | `rate_hz` | sampling rate | required |
/// | `harmonics` | harmonics per target | 2 |
/// | `window_s`, `step_s` | sliding window length and step | 1, 0.125 |
/// | `extractor` | registered extractor name | `combined` |
/// | `seed` | random seed | 0 |
/// | `folds` | `trial_id:fold` list; default pairs the r-th trial of every class | |
/// | `step_size`, `max_iters`, `stop_tol`, `restarts` | gradient ascent | 1, 5000, 1e-6, 20 |
/// | `trace` | write the ascent trace of every fold | false |
/// | `model_dir` | trained model read by `eval` | `<output>/train` |
/// | `synth_trials_per_class`, `synth_duration_s`, `synth_amps` | fixture size and harmonic amplitudes | 5, 10, `1,0.5` |
/// | `synth_noise_sd`, `synth_common_noise_sd` | per-channel and shared noise | 1, 0 |
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub output: PathBuf,
    pub stimuli: Vec<f64>,
    pub channels: Vec<String>,
    pub rate_hz: f64,
    pub harmonics: usize,
    pub window_s: f64,
    pub step_s: f64,
    pub extractor: String,
    pub seed: u64,
    pub folds: Option<BTreeMap<u64, usize>>,
    pub ascent: AscentConfig,
    pub trace: bool,
    pub model_dir: Option<PathBuf>,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub trials_per_class: usize,
    pub duration_s: f64,
    pub noise_sd: f64,
    pub common_noise_sd: f64,
    pub amps: Vec<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            trials_per_class: 5,
            duration_s: 10.0,
            noise_sd: 1.0,
            common_noise_sd: 0.0,
            amps: vec![1.0, 0.5],
        }
    }
}

const KEYS: &[&str] = &[
    "manifest",
    "output",
    "stimuli",
    "channels",
    "rate_hz",
    "harmonics",
    "window_s",
    "step_s",
    "extractor",
    "seed",
    "folds",
    "step_size",
    "max_iters",
    "stop_tol",
    "restarts",
    "trace",
    "model_dir",
    "synth_trials_per_class",
    "synth_duration_s",
    "synth_noise_sd",
    "synth_common_noise_sd",
    "synth_amps",
];

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, path, base)
    }

    /// Parses config text; `origin` is only used in error messages.
    pub fn parse(text: &str, origin: &Path, base: &Path) -> Result<Self> {
        let mut values: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(origin, line_no, 1, format!("expected `key = value`, got `{line}`")));
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::parse(origin, line_no, 1, format!("unknown key `{key}`")));
            }
            if values.insert(key, (line_no, value.trim())).is_some() {
                return Err(Error::parse(origin, line_no, 1, format!("key `{key}` given twice")));
            }
        }

        let get = |key: &str| values.get(key).copied();
        let required = |key: &str| {
            get(key).ok_or_else(|| Error::Config(format!("{}: missing required key `{key}`", origin.display())))
        };
        let bad = |key: &str, line: usize, what: &str| {
            Error::parse(origin, line, 1, format!("`{key}` must be {what}"))
        };
        let number = |key: &str, default: f64| -> Result<f64> {
            match get(key) {
                None => Ok(default),
                Some((line, v)) => v.parse().map_err(|_| bad(key, line, "a number")),
            }
        };
        let count = |key: &str, default: usize| -> Result<usize> {
            match get(key) {
                None => Ok(default),
                Some((line, v)) => v.parse().map_err(|_| bad(key, line, "a nonnegative integer")),
            }
        };
        let numbers = |key: &str, (line, v): (usize, &str)| -> Result<Vec<f64>> {
            v.split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(key, line, "a comma-separated list of numbers"))
        };
        let path_of = |v: &str| base.join(v);

        let stimuli = numbers("stimuli", required("stimuli")?)?;
        let channels: Vec<String> = required("channels")?
            .1
            .split(',')
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();
        if channels.is_empty() {
            return Err(Error::Config("`channels` lists no channels".into()));
        }
        let (line, v) = required("rate_hz")?;
        let rate_hz = v.parse().map_err(|_| bad("rate_hz", line, "a number"))?;
        let seed = match get("seed") {
            None => 0,
            Some((line, v)) => v.parse().map_err(|_| bad("seed", line, "a nonnegative integer"))?,
        };
        let trace = match get("trace") {
            None => false,
            Some((line, v)) => v.parse().map_err(|_| bad("trace", line, "true or false"))?,
        };
        let folds = get("folds").map(|entry| parse_folds(entry, origin)).transpose()?;
        let synth = SynthConfig {
            trials_per_class: count("synth_trials_per_class", 5)?,
            duration_s: number("synth_duration_s", 10.0)?,
            noise_sd: number("synth_noise_sd", 1.0)?,
            common_noise_sd: number("synth_common_noise_sd", 0.0)?,
            amps: match get("synth_amps") {
                None => SynthConfig::default().amps,
                Some(entry) => numbers("synth_amps", entry)?,
            },
        };

        let cfg = Self {
            manifest: path_of(required("manifest")?.1),
            output: path_of(required("output")?.1),
            stimuli,
            channels,
            rate_hz,
            harmonics: count("harmonics", 2)?,
            window_s: number("window_s", 1.0)?,
            step_s: number("step_s", 0.125)?,
            extractor: get("extractor").map_or("combined", |(_, v)| v).to_string(),
            seed,
            folds,
            ascent: AscentConfig {
                step_size: number("step_size", 1.0)?,
                max_iters: count("max_iters", 5000)?,
                stop_tol: number("stop_tol", 1e-6)?,
                n_restarts: count("restarts", 20)?,
                seed,
                record_trace: trace,
            },
            trace,
            model_dir: get("model_dir").map(|(_, v)| path_of(v)),
            synth,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.extractor.is_empty() {
            return Err(Error::Config("`extractor` is empty".into()));
        }
        if !(self.rate_hz > 0.0) {
            return Err(Error::Config(format!("rate_hz must be positive, got {}", self.rate_hz)));
        }
        StimulusSet::new(self.stimuli.clone(), self.harmonics)?;
        if self.synth.trials_per_class == 0 {
            return Err(Error::Config("synth_trials_per_class must be at least 1".into()));
        }
        self.ascent.validate()
    }

    /// Same config with a different seed for every random choice.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.ascent.seed = seed;
        self
    }

    pub fn model_dir(&self) -> PathBuf {
        self.model_dir.clone().unwrap_or_else(|| self.output.join("train"))
    }
}

fn parse_folds((line, v): (usize, &str), origin: &Path) -> Result<BTreeMap<u64, usize>> {
    let mut folds = BTreeMap::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parsed = item
            .split_once(':')
            .and_then(|(id, fold)| Some((id.trim().parse::<u64>().ok()?, fold.trim().parse::<usize>().ok()?)));
        let Some((id, fold)) = parsed else {
            return Err(Error::parse(origin, line, 1, format!("bad fold entry `{item}`, expected `trial_id:fold`")));
        };
        if folds.insert(id, fold).is_some() {
            return Err(Error::parse(origin, line, 1, format!("trial {id} assigned to two folds")));
        }
    }
    let used: BTreeSet<usize> = folds.values().copied().collect();
    if used.len() < 2 {
        return Err(Error::parse(origin, line, 1, "cross-validation needs at least two folds"));
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
manifest = data/manifest.csv
output = out
stimuli = 8, 14, 28
channels = O1,O2
rate_hz = 256
";

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, Path::new("test.cfg"), Path::new("/base"))
    }

    #[test]
    fn defaults_fill_optional_keys() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.manifest, PathBuf::from("/base/data/manifest.csv"));
        assert_eq!(cfg.stimuli, vec![8.0, 14.0, 28.0]);
        assert_eq!(cfg.channels, vec!["O1", "O2"]);
        assert_eq!(cfg.harmonics, 2);
        assert_eq!(cfg.extractor, "combined");
        assert_eq!(cfg.ascent, AscentConfig::default());
        assert_eq!(cfg.model_dir(), PathBuf::from("/base/out/train"));
        assert!(cfg.folds.is_none());
    }

    #[test]
    fn comments_and_overrides() {
        let text = format!("{MINIMAL}# comment\nseed = 9 # trailing\nrestarts = 3\nfolds = 1:0, 2:1, 3:0\n");
        let cfg = parse(&text).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.ascent.seed, 9);
        assert_eq!(cfg.ascent.n_restarts, 3);
        assert_eq!(cfg.folds.as_ref().unwrap().get(&2), Some(&1));
        assert_eq!(cfg.clone().with_seed(4).ascent.seed, 4);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_errors() {
        let err = parse(&format!("{MINIMAL}windw_s = 2\n")).unwrap_err();
        assert!(err.to_string().contains("windw_s"));
        assert!(matches!(err, Error::Parse { line: 6, .. }));
        assert!(parse(&format!("{MINIMAL}rate_hz = 128\n")).is_err());
    }

    #[test]
    fn malformed_values_are_errors() {
        for extra in ["harmonics = two", "stimuli2 = 1", "folds = 1:0", "folds = 1-0,2:1", "restarts = 0", "trace = yes"] {
            let text = format!("{MINIMAL}{extra}\n");
            assert!(parse(&text).is_err(), "{extra}");
        }
        assert_eq!(parse("manifest = m\n").unwrap_err().category(), "config");
        let twice = MINIMAL.replace("8, 14, 28", "8, 14, 8");
        assert_eq!(parse(&twice).unwrap_err().category(), "config");
    }
}
