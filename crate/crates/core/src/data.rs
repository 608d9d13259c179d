//! Dataset loading and repeated cross-validation partitions.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Continuous,
    Binary,
}

/// Covariates, response and task kind.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    task: Task,
    feature_names: Vec<String>,
    has_intercept: bool,
}

impl Dataset {
    /// Validates the dataset invariants: finite values, unique names, and for
    /// binary tasks a 0/1 response with both classes present.
    pub fn new(x: Matrix, y: Vec<f64>, task: Task, feature_names: Vec<String>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::invalid(format!(
                "{} covariate rows but {} responses",
                x.rows(),
                y.len()
            )));
        }
        if x.cols() != feature_names.len() {
            return Err(Error::invalid(format!(
                "{} covariate columns but {} feature names",
                x.cols(),
                feature_names.len()
            )));
        }
        if x.cols() == 0 {
            return Err(Error::invalid("dataset has no covariates"));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("covariates"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        let mut seen = HashSet::with_capacity(feature_names.len());
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateFeature(name.clone()));
            }
        }
        if task == Task::Binary {
            for (row, &v) in y.iter().enumerate() {
                if v != 0.0 && v != 1.0 {
                    return Err(Error::NonBinaryResponse { row, value: v });
                }
            }
            let ones = y.iter().filter(|&&v| v == 1.0).count();
            if ones == 0 || ones == y.len() {
                return Err(Error::SingleClass);
            }
        }
        Ok(Dataset {
            x,
            y,
            task,
            feature_names,
            has_intercept: true,
        })
    }

    pub fn with_intercept(mut self, has_intercept: bool) -> Self {
        self.has_intercept = has_intercept;
        self
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    MeanImpute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Cell content treated as missing. Empty cells are always missing.
    pub missing_token: String,
    pub policy: MissingPolicy,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            missing_token: "NA".to_string(),
            policy: MissingPolicy::Reject,
        }
    }
}

/// Load a headered CSV. Every column except `response_column` becomes a
/// covariate, in file order. Missing responses are always rejected.
pub fn load_dataset(
    path: &Path,
    response_column: &str,
    task: Task,
    opts: &LoadOptions,
) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_dataset(file, path, response_column, task, opts)
}

pub(crate) fn read_dataset<R: std::io::Read>(
    reader: R,
    path: &Path,
    response_column: &str,
    task: Task,
    opts: &LoadOptions,
) -> Result<Dataset> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let response_pos = header
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| Error::MissingResponse(response_column.to_string()))?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != response_pos)
        .map(|(_, h)| h.clone())
        .collect();
    let p = names.len();

    let mut cells: Vec<Option<f64>> = Vec::new();
    let mut y = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        for (j, raw) in record.iter().enumerate() {
            let is_missing = raw.is_empty() || raw == opts.missing_token;
            let value = if is_missing {
                None
            } else {
                Some(raw.parse::<f64>().map_err(|_| Error::NonNumeric {
                    row,
                    column: header[j].clone(),
                    value: raw.to_string(),
                })?)
            };
            if j == response_pos {
                let v = value.ok_or_else(|| Error::MissingValue {
                    row,
                    column: header[j].clone(),
                })?;
                y.push(v);
            } else {
                if value.is_some_and(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("covariates"));
                }
                cells.push(value);
            }
        }
    }
    let n = y.len();

    let mut data = vec![0.0; n * p];
    for j in 0..p {
        let column = (0..n).map(|i| cells[i * p + j]);
        let missing = column.clone().filter(Option::is_none).count();
        if missing > 0 && opts.policy == MissingPolicy::Reject {
            let row = column.clone().position(|c| c.is_none()).unwrap_or(0);
            return Err(Error::MissingValue {
                row,
                column: names[j].clone(),
            });
        }
        let fill = if missing > 0 {
            if missing == n {
                return Err(Error::MissingValue {
                    row: 0,
                    column: names[j].clone(),
                });
            }
            column.clone().flatten().sum::<f64>() / (n - missing) as f64
        } else {
            0.0
        };
        for (i, c) in column.enumerate() {
            data[i * p + j] = c.unwrap_or(fill);
        }
    }
    Dataset::new(Matrix::from_row_major(n, p, data), y, task, names)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldMode {
    /// K repetitions of an m-way partition.
    #[default]
    FullMfold,
    /// K repetitions of a single random test set of size floor(n/m).
    Holdout,
}

/// One train/test split (zero-based, ascending indices).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test: Vec<usize>,
    pub train: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub m: usize,
    pub k: usize,
    pub mode: FoldMode,
    pub n: usize,
    pub stratified: bool,
    pub repetitions: Vec<Vec<Fold>>,
}

impl FoldPlan {
    pub fn folds(&self) -> impl Iterator<Item = &Fold> {
        self.repetitions.iter().flatten()
    }

    /// Total number of held-out evaluations.
    pub fn evaluations(&self) -> usize {
        self.folds().map(|f| f.test.len()).sum()
    }

    pub fn min_train_size(&self) -> usize {
        self.folds().map(|f| f.train.len()).min().unwrap_or(0)
    }

    /// Identifier used to key cached risk estimates.
    pub fn id(&self) -> u64 {
        let mode = match self.mode {
            FoldMode::FullMfold => 0,
            FoldMode::Holdout => 1,
        };
        let mut h = rng::split(self.seed, self.n as u64);
        for v in [self.m as u64, self.k as u64, mode, self.stratified as u64] {
            h = rng::split(h, v);
        }
        h
    }
}

/// Unstratified fold plan over `n` observations.
pub fn make_fold_plan(n: usize, m: usize, k: usize, mode: FoldMode, seed: u64) -> Result<FoldPlan> {
    build_plan(n, None, m, k, mode, seed)
}

/// Fold plan stratified by binary `labels`: each test set holds the classes in
/// proportions as close to the full sample as the fold size allows.
pub fn make_stratified_fold_plan(
    labels: &[f64],
    m: usize,
    k: usize,
    mode: FoldMode,
    seed: u64,
) -> Result<FoldPlan> {
    build_plan(labels.len(), Some(labels), m, k, mode, seed)
}

/// Stratified plan for binary tasks when `stratify` is set, plain otherwise.
pub fn plan_for(
    dataset: &Dataset,
    m: usize,
    k: usize,
    mode: FoldMode,
    stratify: bool,
    seed: u64,
) -> Result<FoldPlan> {
    if stratify && dataset.task() == Task::Binary {
        make_stratified_fold_plan(dataset.y(), m, k, mode, seed)
    } else {
        make_fold_plan(dataset.n(), m, k, mode, seed)
    }
}

fn build_plan(
    n: usize,
    labels: Option<&[f64]>,
    m: usize,
    k: usize,
    mode: FoldMode,
    seed: u64,
) -> Result<FoldPlan> {
    if m < 2 {
        return Err(Error::invalid(format!(
            "fold count m={m} must be at least 2"
        )));
    }
    if k < 1 {
        return Err(Error::invalid("repetition count k must be at least 1"));
    }
    if n / m < 1 {
        return Err(Error::invalid(format!("n={n} is smaller than m={m}")));
    }

    let repetitions = (0..k)
        .map(|r| {
            let mut rng = rng::rng_from(rng::split(seed, r as u64));
            let mut assignment = vec![usize::MAX; n];
            match (mode, labels) {
                (FoldMode::FullMfold, Some(labels)) => {
                    // deal each shuffled class round-robin, continuing the
                    // fold counter across classes
                    let mut next = 0;
                    for class in [0.0, 1.0] {
                        let mut members: Vec<usize> =
                            (0..n).filter(|&i| labels[i] == class).collect();
                        members.shuffle(&mut rng);
                        for i in members {
                            assignment[i] = next % m;
                            next += 1;
                        }
                    }
                }
                (FoldMode::FullMfold, None) => {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.shuffle(&mut rng);
                    for (pos, &i) in order.iter().enumerate() {
                        assignment[i] = pos % m;
                    }
                }
                (FoldMode::Holdout, labels) => {
                    let order = match labels {
                        Some(labels) => stratified_order(labels, &mut rng),
                        None => {
                            let mut order: Vec<usize> = (0..n).collect();
                            order.shuffle(&mut rng);
                            order
                        }
                    };
                    for &i in &order[..n / m] {
                        assignment[i] = 0;
                    }
                }
            }
            let folds = match mode {
                FoldMode::FullMfold => m,
                FoldMode::Holdout => 1,
            };
            (0..folds).map(|f| split_fold(&assignment, f)).collect()
        })
        .collect::<Vec<Vec<Fold>>>();

    let plan = FoldPlan {
        seed,
        m,
        k,
        mode,
        n,
        stratified: labels.is_some(),
        repetitions,
    };
    if plan.min_train_size() == 0 {
        return Err(Error::invalid("a training split is empty"));
    }
    Ok(plan)
}

fn split_fold(assignment: &[usize], fold: usize) -> Fold {
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..assignment.len()).partition(|&i| assignment[i] == fold);
    Fold { test, train }
}

/// Interleave the shuffled members of each class so every prefix of the
/// order is close to class-balanced.
fn stratified_order<R: Rng>(labels: &[f64], rng: &mut R) -> Vec<usize> {
    let mut keyed: Vec<(f64, u8, usize)> = Vec::with_capacity(labels.len());
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|&(_, &v)| (v == 1.0) == (class == 1))
            .map(|(i, _)| i)
            .collect();
        members.shuffle(rng);
        let offset: f64 = rng.random();
        let size = members.len() as f64;
        for (t, i) in members.into_iter().enumerate() {
            keyed.push(((t as f64 + offset) / size, class, i));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}
