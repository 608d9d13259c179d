//! Per-model estimators: least squares for continuous responses and
//! ridge-stabilised IRLS logistic regression for binary ones.

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, min_norm_lstsq, Matrix};
use crate::model::ModelIndexSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Linear,
    Logistic,
}

/// Fitted coefficients for one model. When `intercept` is set, `values[0]` is
/// the intercept and the rest follow the model's sorted indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefVector {
    pub model: ModelIndexSet,
    pub values: Vec<f64>,
    pub intercept: bool,
    pub estimator_kind: EstimatorKind,
    pub converged: bool,
    pub iterations: usize,
}

impl CoefVector {
    /// Linear predictor for a covariate row already restricted to the model's columns.
    pub fn linear_predictor(&self, sub_row: &[f64]) -> f64 {
        if self.intercept {
            self.values[0] + dot(&self.values[1..], sub_row)
        } else {
            dot(&self.values, sub_row)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Point prediction (continuous) or probability of class 1 (binary).
    pub value: f64,
    pub label: Option<u8>,
}

/// `1 - 1/(e^t + 1)`, evaluated without overflow.
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Extension point for alternative inner estimators.
pub trait Estimator: Sync {
    fn fit(&self, model: &ModelIndexSet, x: &Matrix, y: &[f64]) -> Result<CoefVector>;

    /// Predict from a row restricted to the model's columns.
    fn predict_sub(&self, coef: &CoefVector, sub_row: &[f64]) -> Prediction;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub intercept: bool,
    /// Ridge added to the diagonal of the IRLS normal matrix.
    pub ridge: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Probability at or above which a binary prediction is labelled 1.
    pub threshold: f64,
}

impl EstimatorConfig {
    pub fn for_task(task: Task) -> Self {
        EstimatorConfig {
            kind: match task {
                Task::Continuous => EstimatorKind::Linear,
                Task::Binary => EstimatorKind::Logistic,
            },
            intercept: true,
            ridge: 1e-4,
            max_iter: 100,
            tol: 1e-8,
            threshold: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(Error::invalid("ridge must be a finite non-negative number"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid("threshold must lie in (0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        Ok(())
    }
}

impl Estimator for EstimatorConfig {
    fn fit(&self, model: &ModelIndexSet, x: &Matrix, y: &[f64]) -> Result<CoefVector> {
        match self.kind {
            EstimatorKind::Linear => fit_linear(model, x, y, self.intercept),
            EstimatorKind::Logistic => fit_logistic(
                model,
                x,
                y,
                self.intercept,
                self.ridge,
                self.max_iter,
                self.tol,
            ),
        }
    }

    fn predict_sub(&self, coef: &CoefVector, sub_row: &[f64]) -> Prediction {
        predict_sub(coef, sub_row, self.threshold)
    }
}

fn design(x: &Matrix, intercept: bool) -> Matrix {
    if !intercept {
        return x.clone();
    }
    let k = x.cols() + 1;
    let mut data = Vec::with_capacity(x.rows() * k);
    for i in 0..x.rows() {
        data.push(1.0);
        data.extend_from_slice(x.row(i));
    }
    Matrix::from_row_major(x.rows(), k, data)
}

fn check_inputs(model: &ModelIndexSet, x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::FitFailed("no training rows".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::invalid("row count differs from response length"));
    }
    if x.cols() != model.len() {
        return Err(Error::invalid(format!(
            "design has {} columns, model {} has {}",
            x.cols(),
            model,
            model.len()
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("training covariates"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training response"));
    }
    Ok(())
}

/// Least squares; the minimum-norm solution when the design is rank deficient.
pub fn fit_linear(
    model: &ModelIndexSet,
    x: &Matrix,
    y: &[f64],
    intercept: bool,
) -> Result<CoefVector> {
    check_inputs(model, x, y)?;
    let z = design(x, intercept);
    let values = min_norm_lstsq(&z, y)
        .ok_or_else(|| Error::FitFailed("least-squares solve failed".into()))?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailed("non-finite least-squares solution".into()));
    }
    Ok(CoefVector {
        model: model.clone(),
        values,
        intercept,
        estimator_kind: EstimatorKind::Linear,
        converged: true,
        iterations: 0,
    })
}

/// Logistic regression by IRLS on the ridge-penalised negative log-likelihood.
pub fn fit_logistic(
    model: &ModelIndexSet,
    x: &Matrix,
    y: &[f64],
    intercept: bool,
    ridge: f64,
    max_iter: usize,
    tol: f64,
) -> Result<CoefVector> {
    fit_logistic_traced(model, x, y, intercept, ridge, max_iter, tol).map(|(c, _)| c)
}

/// `-loglik(beta) + ridge/2 * |beta|^2`.
pub fn penalized_objective(z: &Matrix, y: &[f64], beta: &[f64], ridge: f64) -> f64 {
    let mut f = 0.5 * ridge * dot(beta, beta);
    for (i, &yi) in y.iter().enumerate() {
        let eta = dot(z.row(i), beta);
        f += softplus(eta) - yi * eta;
    }
    f
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

struct Newton {
    objective: f64,
    /// Lower triangle of Z'WZ + ridge*I, row major.
    hessian: Vec<f64>,
    /// Z'(y - mu) - ridge*beta.
    gradient: Vec<f64>,
}

fn newton_terms(z: &Matrix, y: &[f64], beta: &[f64], ridge: f64) -> Newton {
    let k = beta.len();
    let mut hessian = vec![0.0; k * k];
    let mut gradient = vec![0.0; k];
    let mut objective = 0.5 * ridge * dot(beta, beta);
    for (i, &yi) in y.iter().enumerate() {
        let row = z.row(i);
        let eta = dot(row, beta);
        // one exponential serves both the mean and the softplus
        let e = (-eta.abs()).exp();
        let (mu, sp) = if eta >= 0.0 {
            (1.0 / (1.0 + e), eta + e.ln_1p())
        } else {
            (e / (1.0 + e), e.ln_1p())
        };
        let w = mu * (1.0 - mu);
        let r = yi - mu;
        objective += sp - yi * eta;
        for a in 0..k {
            let wa = w * row[a];
            gradient[a] += r * row[a];
            let h = &mut hessian[a * k..a * k + a + 1];
            for (b, hb) in h.iter_mut().enumerate() {
                *hb += wa * row[b];
            }
        }
    }
    for a in 0..k {
        hessian[a * k + a] += ridge;
        gradient[a] -= ridge * beta[a];
    }
    Newton {
        objective,
        hessian,
        gradient,
    }
}

/// As [`fit_logistic`], also returning the penalised objective after every
/// accepted iterate (starting with the initial point). Step halving keeps the
/// sequence non-increasing.
pub fn fit_logistic_traced(
    model: &ModelIndexSet,
    x: &Matrix,
    y: &[f64],
    intercept: bool,
    ridge: f64,
    max_iter: usize,
    tol: f64,
) -> Result<(CoefVector, Vec<f64>)> {
    check_inputs(model, x, y)?;
    if !(ridge >= 0.0) {
        return Err(Error::invalid("ridge must be non-negative"));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("logistic response must be 0/1"));
    }
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ridge == 0.0 && (ones == 0 || ones == y.len()) {
        return Err(Error::FitFailed(
            "single-class training response without ridge".into(),
        ));
    }

    let z = design(x, intercept);
    let k = z.cols();
    let mut beta = vec![0.0; k];
    let mut current = newton_terms(&z, y, &beta, ridge);
    let mut trace = vec![current.objective];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mut step = current.gradient.clone();
        let mut h = current.hessian.clone();
        if !cholesky_solve(&mut h, &mut step, k) {
            return Err(Error::FitFailed("singular IRLS normal matrix".into()));
        }
        let scale = 1.0 + beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        if step.iter().all(|s| s.abs() <= tol * scale) {
            converged = true;
            break;
        }

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-10 {
            let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let next = newton_terms(&z, y, &candidate, ridge);
            if next.objective <= current.objective {
                accepted = Some((candidate, next));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((candidate, next)) => {
                beta = candidate;
                current = next;
                trace.push(current.objective);
            }
            // No decrease representable in floating point.
            None => break,
        }
    }

    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::FitFailed("non-finite logistic coefficients".into()));
    }
    Ok((
        CoefVector {
            model: model.clone(),
            values: beta,
            intercept,
            estimator_kind: EstimatorKind::Logistic,
            converged,
            iterations,
        },
        trace,
    ))
}

/// Predict from a row restricted to the model's columns.
pub fn predict_sub(coef: &CoefVector, sub_row: &[f64], threshold: f64) -> Prediction {
    let eta = coef.linear_predictor(sub_row);
    match coef.estimator_kind {
        EstimatorKind::Linear => Prediction {
            value: eta,
            label: None,
        },
        EstimatorKind::Logistic => {
            let value = logistic(eta);
            Prediction {
                value,
                label: Some(u8::from(value >= threshold)),
            }
        }
    }
}

/// Predict from a full covariate row; the model's columns are extracted here.
pub fn predict(coef: &CoefVector, x0: &[f64], threshold: f64) -> Result<Prediction> {
    if coef.model.max_index().is_some_and(|m| m >= x0.len()) {
        return Err(Error::invalid(format!(
            "row has {} covariates but model {} needs more",
            x0.len(),
            coef.model
        )));
    }
    let sub: Vec<f64> = coef.model.indices().iter().map(|&j| x0[j]).collect();
    if sub.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("prediction covariates"));
    }
    Ok(predict_sub(coef, &sub, threshold))
}
