//! Choosing the model dimension from the search trace and filtering the
//! final model set.

pub mod two_sample;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cv_risk::RiskEstimate;
use crate::divergence::DivergenceSpec;
use crate::error::{Error, Result};
use crate::model::ModelIndexSet;
use crate::search::{LevelResult, ModelEntry, SearchTrace};

pub use two_sample::{binomial_improvement_test, mann_whitney_test, Alternative, TestOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Exact conditional test on error indicators.
    Binomial,
    MannWhitney,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    Bonferroni,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub family_level: f64,
    pub correction: Correction,
    /// `None` picks the binomial test for classification loss and
    /// Mann-Whitney otherwise.
    pub test_kind: Option<TestKind>,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            family_level: 0.05,
            correction: Correction::Bonferroni,
            test_kind: None,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.family_level > 0.0 && self.family_level < 1.0) {
            return Err(Error::invalid(format!(
                "family level must lie in (0, 1), got {}",
                self.family_level
            )));
        }
        Ok(())
    }

    pub fn kind_for(&self, divergence: &DivergenceSpec) -> TestKind {
        self.test_kind.unwrap_or(if divergence.is_classification() {
            TestKind::Binomial
        } else {
            TestKind::MannWhitney
        })
    }

    /// Level of each test in a family of `tests` comparisons.
    pub fn per_test_level(&self, tests: usize) -> f64 {
        match self.correction {
            Correction::Bonferroni if tests > 1 => self.family_level / tests as f64,
            _ => self.family_level,
        }
    }
}

/// One-sided test that `a` has smaller losses than `b`.
pub fn improvement_test(kind: TestKind, a: &[f64], b: &[f64], level: f64) -> TestOutcome {
    match kind {
        TestKind::Binomial => binomial_improvement_test(a, b, level),
        TestKind::MannWhitney => mann_whitney_test(a, b, level),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionChoice {
    pub d_star: usize,
    /// p-value of level `j + 1` against level `j`, index 0 is `j = 1`.
    pub step_pvalues: Vec<f64>,
    pub per_test_level: f64,
    /// Every step was significant, so `d_star` sits at `d_max` and a larger
    /// search may be warranted.
    pub at_d_max: bool,
}

/// Smallest `j` for which the anchor of level `j + 1` is not significantly
/// better than the anchor of level `j`.
pub fn select_dimension(trace: &SearchTrace, tc: &TestConfig) -> Result<DimensionChoice> {
    tc.validate()?;
    let levels = &trace.levels;
    if levels.is_empty() {
        return Err(Error::invalid("search trace has no levels"));
    }
    let kind = tc.kind_for(&trace.scoring.divergence);
    let d_max = levels.len();
    let level = tc.per_test_level(d_max.saturating_sub(1));
    let anchors: Vec<&[f64]> = levels
        .iter()
        .map(|l| l.anchor_estimate().losses.as_slice())
        .collect();
    let (d_star, step_pvalues) = first_non_improvement(&anchors, kind, level);
    Ok(DimensionChoice {
        d_star: d_star.unwrap_or(d_max),
        at_d_max: d_star.is_none() && d_max > 1,
        step_pvalues,
        per_test_level: level,
    })
}

/// Walk consecutive anchor loss vectors and return the first level whose
/// successor is not a significant improvement, with the p-values seen.
fn first_non_improvement(
    anchors: &[&[f64]],
    kind: TestKind,
    level: f64,
) -> (Option<usize>, Vec<f64>) {
    let mut pvalues = Vec::with_capacity(anchors.len().saturating_sub(1));
    for j in 1..anchors.len() {
        let t = improvement_test(kind, anchors[j], anchors[j - 1], level);
        pvalues.push(t.p_value);
        if !t.reject {
            return (Some(j), pvalues);
        }
    }
    (None, pvalues)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterResult {
    /// Retained models, ascending by `(d_hat, model)`; the first is the
    /// minimum-risk model.
    pub s0: Vec<Arc<RiskEstimate>>,
    /// p-value of the minimum-risk model against each later model tested.
    pub pvalues: Vec<f64>,
    pub per_test_level: f64,
}

impl FilterResult {
    pub fn min_model(&self) -> &ModelIndexSet {
        &self.s0[0].model
    }
}

/// Keep the models of `level` that the minimum-risk model does not
/// significantly beat. Models are tested in order of increasing risk and the
/// scan stops at the first rejection.
pub fn filter_models(level: &LevelResult, tc: &TestConfig, kind: TestKind) -> Result<FilterResult> {
    tc.validate()?;
    let mut models: Vec<Arc<RiskEstimate>> = level.s_star.clone();
    if models.is_empty() {
        return Err(Error::invalid(format!(
            "level {} has an empty quantile set",
            level.d
        )));
    }
    models.sort_by(|a, b| {
        a.d_hat
            .total_cmp(&b.d_hat)
            .then_with(|| a.model.cmp(&b.model))
    });
    models.dedup_by(|a, b| a.model == b.model);
    let per_test_level = tc.per_test_level(models.len() - 1);
    let best = Arc::clone(&models[0]);
    let mut s0 = vec![Arc::clone(&best)];
    let mut pvalues = Vec::new();
    for m in &models[1..] {
        let t = improvement_test(kind, &best.losses, &m.losses, per_test_level);
        pvalues.push(t.p_value);
        if t.reject {
            break;
        }
        s0.push(Arc::clone(m));
    }
    Ok(FilterResult {
        s0,
        pvalues,
        per_test_level,
    })
}

/// Dimension choice plus filtered model set.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub m0: ModelIndexSet,
    pub test_kind: TestKind,
    pub config: TestConfig,
    pub dimension: DimensionChoice,
    pub filter: FilterResult,
}

pub fn select(trace: &SearchTrace, tc: &TestConfig) -> Result<Selection> {
    let dimension = select_dimension(trace, tc)?;
    let kind = tc.kind_for(&trace.scoring.divergence);
    let level = trace
        .level(dimension.d_star)
        .expect("selected dimension is a searched level");
    let filter = filter_models(level, tc, kind)?;
    Ok(Selection {
        m0: trace.config.m0.clone(),
        test_kind: kind,
        config: *tc,
        dimension,
        filter,
    })
}

/// JSON view of a selection, also read back by `predict` and `network`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub m0: ModelIndexSet,
    pub test_kind: TestKind,
    pub config: TestConfig,
    pub d_star: usize,
    pub at_d_max: bool,
    pub step_pvalues: Vec<f64>,
    pub step_level: f64,
    pub filter_pvalues: Vec<f64>,
    pub filter_level: f64,
    pub min_model: ModelEntry,
    pub models: Vec<ModelEntry>,
}

impl Selection {
    pub fn models(&self) -> Vec<ModelIndexSet> {
        self.filter.s0.iter().map(|r| r.model.clone()).collect()
    }

    pub fn report(&self, names: &[String]) -> SelectionReport {
        let models: Vec<ModelEntry> = self
            .filter
            .s0
            .iter()
            .map(|r| ModelEntry::new(r, names))
            .collect();
        SelectionReport {
            m0: self.m0.clone(),
            test_kind: self.test_kind,
            config: self.config,
            d_star: self.dimension.d_star,
            at_d_max: self.dimension.at_d_max,
            step_pvalues: self.dimension.step_pvalues.clone(),
            step_level: self.dimension.per_test_level,
            filter_pvalues: self.filter.pvalues.clone(),
            filter_level: self.filter.per_test_level,
            min_model: models[0].clone(),
            models,
        }
    }
}
