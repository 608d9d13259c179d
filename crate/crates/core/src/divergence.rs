//! Discrepancy between a prediction and the observed response.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Prediction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    L1,
    Squared,
    /// Weighted misclassification of the thresholded label.
    Classification,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSpec {
    pub kind: DivergenceKind,
    /// Cost of predicting 1 when the truth is 0.
    pub w1: f64,
    /// Cost of predicting 0 when the truth is 1.
    pub w2: f64,
}

impl DivergenceSpec {
    pub fn l1() -> Self {
        DivergenceSpec {
            kind: DivergenceKind::L1,
            w1: 1.0,
            w2: 1.0,
        }
    }

    pub fn squared() -> Self {
        DivergenceSpec {
            kind: DivergenceKind::Squared,
            ..Self::l1()
        }
    }

    pub fn classification(w1: f64, w2: f64) -> Self {
        DivergenceSpec {
            kind: DivergenceKind::Classification,
            w1,
            w2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == DivergenceKind::Classification
            && !(self.w1 >= 0.0 && self.w2 >= 0.0 && self.w1 + self.w2 > 0.0)
        {
            return Err(Error::invalid(
                "classification weights must be non-negative with a positive sum",
            ));
        }
        Ok(())
    }

    pub fn is_classification(&self) -> bool {
        self.kind == DivergenceKind::Classification
    }
}

pub fn loss(spec: &DivergenceSpec, prediction: &Prediction, truth: f64) -> Result<f64> {
    match spec.kind {
        DivergenceKind::L1 => Ok((prediction.value - truth).abs()),
        DivergenceKind::Squared => {
            let d = prediction.value - truth;
            Ok(d * d)
        }
        DivergenceKind::Classification => {
            if truth != 0.0 && truth != 1.0 {
                return Err(Error::invalid(format!(
                    "classification divergence needs a 0/1 truth, got {truth}"
                )));
            }
            let label = prediction.label.ok_or_else(|| {
                Error::invalid("classification divergence needs a thresholded label")
            })?;
            Ok(match (label, truth == 1.0) {
                (1, false) => spec.w1,
                (0, true) => spec.w2,
                _ => 0.0,
            })
        }
    }
}
