//! Synthetic data with a planted sparse truth, and support-recovery metrics.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::dimension::{select, Selection, TestConfig};
use crate::divergence::DivergenceSpec;
use crate::error::{Error, Result};
use crate::estimators::{logistic, EstimatorConfig};
use crate::linalg::Matrix;
use crate::model::ModelIndexSet;
use crate::rng;
use crate::search::{run_search, FoldConfig, Scoring, SearchConfig, SearchTrace};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Correlation {
    Independent,
    /// Every pair of columns has correlation `rho`.
    Equicorrelated {
        rho: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    /// Zero-based covariate indices carrying signal.
    pub support: ModelIndexSet,
    /// One coefficient per support index, in ascending index order.
    pub coefficients: Vec<f64>,
    pub task: Task,
    /// Gaussian noise sd (continuous) or multiplier of the linear predictor
    /// inside the logistic link (binary).
    pub scale: f64,
    pub correlation: Correlation,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Two-covariate logistic truth at `n = 120`, `p = 200`, with a Bayes
    /// error of about 0.26%.
    pub fn default_bench(seed: u64) -> Self {
        SyntheticSpec {
            n: 120,
            p: 200,
            support: ModelIndexSet::from([3, 17]),
            coefficients: vec![1.0, -1.0],
            task: Task::Binary,
            scale: 150.0,
            correlation: Correlation::Independent,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 {
            return Err(Error::invalid("synthetic data needs n >= 2 and p >= 1"));
        }
        if self.support.max_index().is_some_and(|i| i >= self.p) {
            return Err(Error::invalid("support index beyond p"));
        }
        if self.coefficients.len() != self.support.len() {
            return Err(Error::invalid(
                "one coefficient per support index is required",
            ));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        if !(self.scale.is_finite() && self.scale >= 0.0) {
            return Err(Error::invalid("scale must be finite and non-negative"));
        }
        if let Correlation::Equicorrelated { rho } = self.correlation {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::invalid("equicorrelation must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    pub fn feature_names(&self) -> Vec<String> {
        (0..self.p).map(|j| format!("x{j}")).collect()
    }
}

/// Draw a dataset. Covariates are standard normal; equicorrelated columns
/// share a per-row common factor.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut r = rng::rng_from(spec.seed);
    let rho = match spec.correlation {
        Correlation::Independent => 0.0,
        Correlation::Equicorrelated { rho } => rho,
    };
    let (own, shared) = ((1.0 - rho).sqrt(), rho.sqrt());
    let mut x = Matrix::zeros(spec.n, spec.p);
    let mut y = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let common: f64 = StandardNormal.sample(&mut r);
        for j in 0..spec.p {
            let z: f64 = StandardNormal.sample(&mut r);
            x.set(i, j, own * z + shared * common);
        }
        let eta: f64 = spec
            .support
            .indices()
            .iter()
            .zip(&spec.coefficients)
            .map(|(&j, &b)| x.get(i, j) * b)
            .sum();
        let value = match spec.task {
            Task::Continuous => {
                let e: f64 = StandardNormal.sample(&mut r);
                eta + spec.scale * e
            }
            Task::Binary => f64::from(u8::from(r.random_bool(logistic(spec.scale * eta)))),
        };
        y.push(value);
    }
    Dataset::new(x, y, spec.task, spec.feature_names())
}

/// Write covariates followed by a `y` column.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let csv = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut header: Vec<String> = dataset.feature_names().to_vec();
    header.push("y".into());
    w.write_record(&header).map_err(csv)?;
    for i in 0..dataset.n() {
        let mut rec: Vec<String> = dataset.x().row(i).iter().map(f64::to_string).collect();
        rec.push(dataset.y()[i].to_string());
        w.write_record(&rec).map_err(csv)?;
    }
    w.flush().map_err(io)
}

/// Search settings of the default benchmark: `alpha = 0.01`, `pi = 0.5`,
/// `d_max = 5`, tenfold CV repeated five times.
pub fn default_search(spec: &SyntheticSpec) -> SearchConfig {
    SearchConfig {
        folds: FoldConfig {
            k: 5,
            ..FoldConfig::default()
        },
        ..SearchConfig::new(spec.p, rng::split(spec.seed, 0xbe7c))
    }
}

pub fn default_scoring(task: Task) -> Scoring {
    Scoring {
        estimator: EstimatorConfig::for_task(task),
        divergence: match task {
            Task::Binary => DivergenceSpec::classification(1.0, 1.0),
            Task::Continuous => DivergenceSpec::squared(),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub true_support: ModelIndexSet,
    pub d_star: usize,
    pub d_star_correct: bool,
    /// The planted support is one of the retained models.
    pub support_in_s0: bool,
    pub support_is_min_model: bool,
    pub s0_size: usize,
    pub curve: Vec<(usize, f64)>,
    /// The curve minimum is attained at the true dimension.
    pub curve_min_at_true_d: bool,
    pub runtime_secs: f64,
}

impl RecoveryReport {
    pub fn recovered(&self) -> bool {
        self.d_star_correct && self.support_in_s0 && self.curve_min_at_true_d
    }
}

pub fn recovery_report(
    trace: &SearchTrace,
    selection: &Selection,
    spec: &SyntheticSpec,
    runtime: Duration,
) -> RecoveryReport {
    let truth = trace.config.m0.union(&spec.support);
    let d_true = spec.support.len();
    let curve = trace.curve();
    let min_q = curve.iter().map(|&(_, q)| q).fold(f64::INFINITY, f64::min);
    let q_at = |d: usize| curve.iter().find(|&&(e, _)| e == d).map(|&(_, q)| q);
    let curve_min_at_true_d = q_at(d_true) == Some(min_q);
    let models = selection.models();
    RecoveryReport {
        d_star: selection.dimension.d_star,
        d_star_correct: selection.dimension.d_star == d_true,
        support_in_s0: models.contains(&truth),
        support_is_min_model: *selection.filter.min_model() == truth,
        s0_size: models.len(),
        curve,
        curve_min_at_true_d,
        runtime_secs: runtime.as_secs_f64(),
        true_support: spec.support.clone(),
    }
}

pub struct BenchRun {
    pub dataset: Dataset,
    pub trace: SearchTrace,
    pub selection: Selection,
    pub report: RecoveryReport,
}

/// Generate, search, select and score recovery.
pub fn run_bench(
    spec: &SyntheticSpec,
    config: &SearchConfig,
    scoring: &Scoring,
    tests: &TestConfig,
) -> Result<BenchRun> {
    let dataset = generate(spec)?;
    let start = Instant::now();
    let trace = run_search(&dataset, config, scoring)?;
    let selection = select(&trace, tests)?;
    let report = recovery_report(&trace, &selection, spec, start.elapsed());
    Ok(BenchRun {
        dataset,
        trace,
        selection,
        report,
    })
}
