//! Run settings: flag parsing, the key=value config file, and resolution
//! against defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::data::{FoldMode, MissingPolicy, Task};
use crate::dimension::TestKind;
use crate::error::{Error, Result};
use crate::search::InitialMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceChoice {
    Ce,
    L1,
    Sq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestChoice {
    Auto,
    Binomial,
    Mw,
}

impl TestChoice {
    pub fn kind(self) -> Option<TestKind> {
        match self {
            TestChoice::Auto => None,
            TestChoice::Binomial => Some(TestKind::Binomial),
            TestChoice::Mw => Some(TestKind::MannWhitney),
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> String {
    format!("invalid value '{value}' for {key}: expected {expected}")
}

pub fn parse_task(s: &str) -> Result<Task, String> {
    match s {
        "binary" => Ok(Task::Binary),
        "continuous" => Ok(Task::Continuous),
        _ => Err(bad("task", s, "binary or continuous")),
    }
}

pub fn parse_divergence(s: &str) -> Result<DivergenceChoice, String> {
    match s {
        "ce" => Ok(DivergenceChoice::Ce),
        "l1" => Ok(DivergenceChoice::L1),
        "sq" => Ok(DivergenceChoice::Sq),
        _ => Err(bad("divergence", s, "ce, l1 or sq")),
    }
}

pub fn parse_cv(s: &str) -> Result<FoldMode, String> {
    match s {
        "mfold" => Ok(FoldMode::FullMfold),
        "holdout" => Ok(FoldMode::Holdout),
        _ => Err(bad("cv", s, "mfold or holdout")),
    }
}

pub fn parse_initial(s: &str) -> Result<InitialMode, String> {
    match s {
        "exhaustive" => Ok(InitialMode::Exhaustive),
        "sampled" => Ok(InitialMode::SampledLargeP),
        _ => s
            .strip_prefix("upto:")
            .and_then(|d| d.parse().ok())
            .map(InitialMode::ExhaustiveUpTo)
            .ok_or_else(|| bad("initial", s, "exhaustive, sampled or upto:D")),
    }
}

pub fn parse_test(s: &str) -> Result<TestChoice, String> {
    match s {
        "auto" => Ok(TestChoice::Auto),
        "binomial" => Ok(TestChoice::Binomial),
        "mw" => Ok(TestChoice::Mw),
        _ => Err(bad("test", s, "auto, binomial or mw")),
    }
}

pub fn parse_missing(s: &str) -> Result<MissingPolicy, String> {
    match s {
        "reject" => Ok(MissingPolicy::Reject),
        "impute" => Ok(MissingPolicy::MeanImpute),
        _ => Err(bad("missing", s, "reject or impute")),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T, String> {
    s.parse().map_err(|_| bad(key, s, "a number"))
}

/// Options shared by `select` flags and the config file. Every field is
/// optional so that sources can be layered.
#[derive(Args, Clone, Debug, Default)]
pub struct SearchOptions {
    /// Training data CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Name of the response column.
    #[arg(long)]
    pub response: Option<String>,
    /// binary or continuous.
    #[arg(long, value_parser = parse_task)]
    pub task: Option<Task>,
    /// ce (classification error), l1 or sq.
    #[arg(long, value_parser = parse_divergence)]
    pub divergence: Option<DivergenceChoice>,
    /// Cost of a false positive under ce.
    #[arg(long)]
    pub w1: Option<f64>,
    /// Cost of a false negative under ce.
    #[arg(long)]
    pub w2: Option<f64>,
    /// Quantile level defining the promising set.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Candidates drawn per level.
    #[arg(long)]
    pub b: Option<usize>,
    /// Probability of drawing from the promising covariates.
    #[arg(long)]
    pub pi: Option<f64>,
    /// Largest model dimension searched.
    #[arg(long)]
    pub dmax: Option<usize>,
    /// Number of folds.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of cross-validation repetitions.
    #[arg(long)]
    pub k: Option<usize>,
    /// mfold or holdout.
    #[arg(long, value_parser = parse_cv)]
    pub cv: Option<FoldMode>,
    /// exhaustive, sampled or upto:D.
    #[arg(long, value_parser = parse_initial)]
    pub initial: Option<InitialMode>,
    /// Comma-separated covariate names kept in every model.
    #[arg(long)]
    pub m0: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Family-wise level of the dimension and filtering tests.
    #[arg(long)]
    pub family_level: Option<f64>,
    /// auto, binomial or mw.
    #[arg(long, value_parser = parse_test)]
    pub test: Option<TestChoice>,
    /// Probability threshold for a positive label.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// reject or impute (column mean) for missing covariate cells.
    #[arg(long, value_parser = parse_missing)]
    pub missing: Option<MissingPolicy>,
}

macro_rules! layer {
    ($self:ident, $other:ident, $($f:ident),*) => {
        SearchOptions { $($f: $self.$f.or($other.$f)),* }
    };
}

impl SearchOptions {
    /// Fields set here win over fields set in `other`.
    pub fn over(self, other: SearchOptions) -> SearchOptions {
        layer!(
            self,
            other,
            data,
            response,
            task,
            divergence,
            w1,
            w2,
            alpha,
            b,
            pi,
            dmax,
            m,
            k,
            cv,
            initial,
            m0,
            seed,
            family_level,
            test,
            threshold,
            missing
        )
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "data" => self.data = Some(PathBuf::from(v)),
            "response" => self.response = Some(v.to_string()),
            "task" => self.task = Some(parse_task(v)?),
            "divergence" => self.divergence = Some(parse_divergence(v)?),
            "w1" => self.w1 = Some(parse_num(key, v)?),
            "w2" => self.w2 = Some(parse_num(key, v)?),
            "alpha" => self.alpha = Some(parse_num(key, v)?),
            "b" => self.b = Some(parse_num(key, v)?),
            "pi" => self.pi = Some(parse_num(key, v)?),
            "dmax" => self.dmax = Some(parse_num(key, v)?),
            "m" => self.m = Some(parse_num(key, v)?),
            "k" => self.k = Some(parse_num(key, v)?),
            "cv" => self.cv = Some(parse_cv(v)?),
            "initial" => self.initial = Some(parse_initial(v)?),
            "m0" => self.m0 = Some(v.to_string()),
            "seed" => self.seed = Some(parse_num(key, v)?),
            "family-level" | "family_level" => self.family_level = Some(parse_num(key, v)?),
            "test" => self.test = Some(parse_test(v)?),
            "threshold" => self.threshold = Some(parse_num(key, v)?),
            "missing" => self.missing = Some(parse_missing(v)?),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Parse a config file: one `key = value` per line, `#` starts a comment.
    /// Relative `data` paths are taken relative to the file's directory.
    pub fn from_config_text(text: &str, base: &Path) -> Result<SearchOptions> {
        let mut opts = SearchOptions::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("config line {}: expected key = value", lineno + 1))
            })?;
            opts.set(key.trim(), value.trim())
                .map_err(|e| Error::invalid(format!("config line {}: {e}", lineno + 1)))?;
        }
        if let Some(d) = &opts.data {
            if d.is_relative() {
                opts.data = Some(base.join(d));
            }
        }
        Ok(opts)
    }

    pub fn from_config_file(path: &Path) -> Result<SearchOptions> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_config_text(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Fill defaults and check ranges that do not need the data.
    pub fn resolve(self) -> Result<Settings> {
        let data = self
            .data
            .ok_or_else(|| Error::invalid("--data is required"))?;
        let response = self
            .response
            .ok_or_else(|| Error::invalid("--response is required"))?;
        let task = self.task.unwrap_or(Task::Binary);
        let divergence = self.divergence.unwrap_or(match task {
            Task::Binary => DivergenceChoice::Ce,
            Task::Continuous => DivergenceChoice::Sq,
        });
        if divergence == DivergenceChoice::Ce && task != Task::Binary {
            return Err(Error::invalid("the ce divergence needs a binary task"));
        }
        let m0 = self
            .m0
            .map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default();
        let s = Settings {
            data,
            response,
            task,
            divergence,
            w1: self.w1.unwrap_or(1.0),
            w2: self.w2.unwrap_or(1.0),
            alpha: self.alpha.unwrap_or(0.01),
            b: self.b,
            pi: self.pi.unwrap_or(0.5),
            d_max: self.dmax.unwrap_or(5),
            m: self.m.unwrap_or(10),
            k: self.k.unwrap_or(10),
            cv: self.cv.unwrap_or(FoldMode::FullMfold),
            initial: self.initial.unwrap_or(InitialMode::Exhaustive),
            m0,
            seed: self.seed,
            family_level: self.family_level.unwrap_or(0.05),
            test: self.test.unwrap_or(TestChoice::Auto),
            threshold: self.threshold.unwrap_or(0.5),
            missing: self.missing.unwrap_or_default(),
        };
        s.check()?;
        Ok(s)
    }
}

/// Fully resolved `select` settings, as recorded in the run manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub data: PathBuf,
    pub response: String,
    pub task: Task,
    pub divergence: DivergenceChoice,
    pub w1: f64,
    pub w2: f64,
    pub alpha: f64,
    /// `None` uses the size-dependent default.
    pub b: Option<usize>,
    pub pi: f64,
    pub d_max: usize,
    pub m: usize,
    pub k: usize,
    pub cv: FoldMode,
    pub initial: InitialMode,
    pub m0: Vec<String>,
    /// `None` until an entropy seed is drawn.
    pub seed: Option<u64>,
    pub family_level: f64,
    pub test: TestChoice,
    pub threshold: f64,
    pub missing: MissingPolicy,
}

impl Settings {
    fn check(&self) -> Result<()> {
        let in_unit = |name: &str, v: f64, lo_open: bool| {
            let ok = if lo_open {
                v > 0.0 && v < 1.0
            } else {
                (0.0..=1.0).contains(&v)
            };
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} is out of range")))
            }
        };
        in_unit("alpha", self.alpha, true)?;
        in_unit("pi", self.pi, false)?;
        in_unit("family-level", self.family_level, true)?;
        in_unit("threshold", self.threshold, true)?;
        if !(self.w1 > 0.0 && self.w2 > 0.0 && self.w1.is_finite() && self.w2.is_finite()) {
            return Err(Error::invalid("w1 and w2 must be positive"));
        }
        if self.d_max == 0 || self.m < 2 || self.k == 0 || self.b == Some(0) {
            return Err(Error::invalid(
                "dmax, k and b must be positive and m at least 2",
            ));
        }
        Ok(())
    }
}
