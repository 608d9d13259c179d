//! Cross-validated risk of a single candidate model.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoldPlan, Task};
use crate::divergence::{loss, DivergenceSpec};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, Prediction};
use crate::model::ModelIndexSet;

/// Mean held-out divergence of one model together with the losses behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub model: ModelIndexSet,
    pub d_hat: f64,
    /// One loss per held-out evaluation, in fold-plan order.
    #[serde(skip)]
    pub losses: Vec<f64>,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misclass_count: Option<usize>,
    /// Folds whose fit failed and were scored with the fallback predictor.
    pub fit_failures: usize,
    /// Folds whose iterative fit hit the iteration cap.
    pub nonconverged: usize,
}

impl RiskEstimate {
    pub fn summary(&self) -> RiskSummary {
        RiskSummary {
            d_hat: self.d_hat,
            evaluations: self.evaluations,
            misclass_count: self.misclass_count,
            fit_failures: self.fit_failures,
        }
    }
}

/// [`RiskEstimate`] without the loss vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary {
    pub d_hat: f64,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misclass_count: Option<usize>,
    pub fit_failures: usize,
}

/// Training-majority class (binary) or training mean (continuous).
fn fallback_prediction(task: Task, y_train: &[f64]) -> Prediction {
    let mean = y_train.iter().sum::<f64>() / y_train.len() as f64;
    match task {
        Task::Continuous => Prediction {
            value: mean,
            label: None,
        },
        Task::Binary => Prediction {
            value: mean,
            label: Some(u8::from(mean >= 0.5)),
        },
    }
}

fn validate_model(dataset: &Dataset, model: &ModelIndexSet) -> Result<()> {
    if model.is_empty() {
        return Err(Error::invalid("model must contain at least one covariate"));
    }
    if model.max_index().is_some_and(|m| m >= dataset.p()) {
        return Err(Error::invalid(format!(
            "model {model} references a covariate beyond p={}",
            dataset.p()
        )));
    }
    Ok(())
}

/// Fit on every training split of `plan` restricted to `model`, predict the
/// matching test rows and average the divergence over all held-out evaluations.
pub fn estimate_risk<E: Estimator + ?Sized>(
    dataset: &Dataset,
    model: &ModelIndexSet,
    plan: &FoldPlan,
    estimator: &E,
    divergence: &DivergenceSpec,
) -> Result<RiskEstimate> {
    validate_model(dataset, model)?;
    if plan.n != dataset.n() {
        return Err(Error::invalid(format!(
            "fold plan covers {} rows, dataset has {}",
            plan.n,
            dataset.n()
        )));
    }
    let cols = model.indices();
    let x = dataset.x();
    let y = dataset.y();

    let mut losses = Vec::with_capacity(plan.evaluations());
    let mut misclass = 0usize;
    let mut fit_failures = 0usize;
    let mut nonconverged = 0usize;
    let mut folds = 0usize;
    let mut sub_row = vec![0.0; cols.len()];

    for fold in plan.folds() {
        folds += 1;
        let x_train = x.select(&fold.train, cols);
        let y_train: Vec<f64> = fold.train.iter().map(|&i| y[i]).collect();
        let fit = estimator.fit(model, &x_train, &y_train);
        let fallback = match &fit {
            Ok(coef) => {
                if !coef.converged {
                    nonconverged += 1;
                }
                None
            }
            Err(_) => {
                fit_failures += 1;
                Some(fallback_prediction(dataset.task(), &y_train))
            }
        };
        for &i in &fold.test {
            let row = x.row(i);
            for (s, &j) in sub_row.iter_mut().zip(cols) {
                *s = row[j];
            }
            let pred = match (&fit, fallback) {
                (Ok(coef), _) => estimator.predict_sub(coef, &sub_row),
                (Err(_), Some(p)) => p,
                (Err(_), None) => unreachable!(),
            };
            if pred.label.is_some_and(|l| f64::from(l) != y[i]) {
                misclass += 1;
            }
            losses.push(loss(divergence, &pred, y[i])?);
        }
    }
    if folds > 0 && fit_failures == folds {
        return Err(Error::UnestimableModel(model.to_string()));
    }

    let evaluations = losses.len();
    let d_hat = losses.iter().sum::<f64>() / evaluations as f64;
    Ok(RiskEstimate {
        model: model.clone(),
        d_hat,
        losses,
        evaluations,
        misclass_count: divergence.is_classification().then_some(misclass),
        fit_failures,
        nonconverged,
    })
}

/// Memo of risk estimates keyed by (model, fold-plan id). Safe for concurrent
/// use; since estimation is pure, the stored value does not depend on which
/// caller inserts first.
#[derive(Debug, Default)]
pub struct RiskCache {
    map: Mutex<HashMap<(ModelIndexSet, u64), Arc<RiskEstimate>>>,
}

impl RiskCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute<F>(
        &self,
        model: &ModelIndexSet,
        plan: &FoldPlan,
        compute: F,
    ) -> Result<Arc<RiskEstimate>>
    where
        F: FnOnce() -> Result<RiskEstimate>,
    {
        let key = (model.clone(), plan.id());
        if let Some(hit) = self.map.lock().expect("risk cache poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let value = Arc::new(compute()?);
        let mut map = self.map.lock().expect("risk cache poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(value)))
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("risk cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
