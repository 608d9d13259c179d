//! Stepwise importance-weighted exploration of the model space.
//!
//! Level `d` holds candidate models of `|m0| + d` covariates. Level 1 is built
//! by an initial step (exhaustive, sampled or exhaustive up to some `d'`);
//! every later level samples `b` candidates whose covariates are drawn from the
//! previous level's promising set `I*` with probability `pi` and from its
//! complement otherwise. Each level keeps the models whose risk is at or below
//! the `alpha` order statistic of the level's draws.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv_risk::{estimate_risk, RiskCache, RiskEstimate, RiskSummary};
use crate::data::{plan_for, Dataset, FoldMode, FoldPlan};
use crate::divergence::DivergenceSpec;
use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;
use crate::model::ModelIndexSet;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "d_prime")]
pub enum InitialMode {
    /// Every single-covariate addition to `m0`.
    Exhaustive,
    /// `b` uniformly drawn single-covariate additions.
    SampledLargeP,
    /// Every model of each dimension up to `d'`.
    ExhaustiveUpTo(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldConfig {
    pub m: usize,
    pub k: usize,
    pub mode: FoldMode,
    pub stratify: bool,
}

impl Default for FoldConfig {
    fn default() -> Self {
        FoldConfig {
            m: 10,
            k: 10,
            mode: FoldMode::FullMfold,
            stratify: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub d_max: usize,
    pub b: usize,
    pub alpha: f64,
    pub pi: f64,
    pub m0: ModelIndexSet,
    pub initial_mode: InitialMode,
    pub seed: u64,
    pub folds: FoldConfig,
    /// Upper bound on the number of models an exhaustive-up-to step may score.
    pub exhaustive_budget: u128,
}

impl SearchConfig {
    /// `clamp(p, 2000, 20000)`, within the usual `p <= b <= C(p, 2)` range for large p.
    pub fn default_b(p: usize) -> usize {
        p.clamp(2000, 20000)
    }

    pub fn new(p: usize, seed: u64) -> Self {
        SearchConfig {
            d_max: 5,
            b: Self::default_b(p),
            alpha: 0.01,
            pi: 0.5,
            m0: ModelIndexSet::empty(),
            initial_mode: InitialMode::Exhaustive,
            seed,
            folds: FoldConfig::default(),
            exhaustive_budget: 1_000_000,
        }
    }

    /// Checks that do not need a fold plan.
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.d_max < 1 {
            return Err(Error::invalid("d_max must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(Error::invalid("pi must lie in [0, 1]"));
        }
        if self.b < 1 {
            return Err(Error::invalid("b must be at least 1"));
        }
        if self.m0.max_index().is_some_and(|i| i >= p) {
            return Err(Error::invalid("m0 references a covariate beyond p"));
        }
        if self.m0.len() + self.d_max > p {
            return Err(Error::invalid(format!(
                "|m0| + d_max = {} exceeds p = {p}",
                self.m0.len() + self.d_max
            )));
        }
        if let InitialMode::ExhaustiveUpTo(dp) = self.initial_mode {
            if dp < 1 {
                return Err(Error::invalid(
                    "exhaustive-up-to dimension must be at least 1",
                ));
            }
        }
        Ok(())
    }
}

/// Estimator and divergence used to score every candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scoring {
    pub estimator: EstimatorConfig,
    pub divergence: DivergenceSpec,
}

/// A distinct evaluated model and how many times it was drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub model: ModelIndexSet,
    pub risk: RiskSummary,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelResult {
    pub d: usize,
    /// Distinct models in ascending model order.
    pub evaluated: Vec<Candidate>,
    /// Number of draws N behind the quantile (`b`, or the model count for
    /// exhaustive levels).
    pub draws: usize,
    pub q_hat: f64,
    /// The model realising the order statistic (lexicographically smallest on ties).
    pub anchor: ModelIndexSet,
    /// Models with `d_hat <= q_hat`, ascending by `(d_hat, model)`, with full losses.
    pub s_star: Vec<Arc<RiskEstimate>>,
    pub i_star: Vec<usize>,
    pub i_complement_size: usize,
}

impl LevelResult {
    pub fn anchor_estimate(&self) -> &RiskEstimate {
        self.s_star
            .iter()
            .find(|r| r.model == self.anchor)
            .expect("anchor is a member of s_star")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngAudit {
    pub master_seed: u64,
    pub fold_seed: u64,
    /// Seed of every level, index 0 is level 1. Exhaustive levels draw nothing
    /// but still get a seed.
    pub level_seeds: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct SearchTrace {
    pub config: SearchConfig,
    pub scoring: Scoring,
    pub plan: FoldPlan,
    pub levels: Vec<LevelResult>,
    pub rng_audit: RngAudit,
}

impl SearchTrace {
    pub fn level(&self, d: usize) -> Option<&LevelResult> {
        self.levels.get(d.checked_sub(1)?)
    }

    /// `(d, q_hat)` for every level.
    pub fn curve(&self) -> Vec<(usize, f64)> {
        self.levels.iter().map(|l| (l.d, l.q_hat)).collect()
    }

    pub fn curve_csv(&self) -> String {
        let mut s = String::from("d,q_hat\n");
        for (d, q) in self.curve() {
            s.push_str(&format!("{d},{q}\n"));
        }
        s
    }

    pub fn report(&self, names: &[String]) -> TraceReport {
        TraceReport {
            config: self.config.clone(),
            scoring: self.scoring,
            fold_plan_id: self.plan.id(),
            evaluations_per_model: self.plan.evaluations(),
            rng_audit: self.rng_audit.clone(),
            levels: self
                .levels
                .iter()
                .map(|l| LevelReport {
                    d: l.d,
                    q_hat: l.q_hat,
                    draws: l.draws,
                    distinct_models: l.evaluated.len(),
                    s_star_size: l.s_star.len(),
                    i_star: l.i_star.clone(),
                    i_star_names: l.i_star.iter().map(|&i| names[i].clone()).collect(),
                    i_complement_size: l.i_complement_size,
                    anchor: l.anchor.clone(),
                    s_star: l.s_star.iter().map(|r| ModelEntry::new(r, names)).collect(),
                })
                .collect(),
        }
    }
}

/// JSON view of a search trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceReport {
    pub config: SearchConfig,
    pub scoring: Scoring,
    pub fold_plan_id: u64,
    pub evaluations_per_model: usize,
    pub rng_audit: RngAudit,
    pub levels: Vec<LevelReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelReport {
    pub d: usize,
    pub q_hat: f64,
    pub draws: usize,
    pub distinct_models: usize,
    pub s_star_size: usize,
    pub i_star: Vec<usize>,
    pub i_star_names: Vec<String>,
    pub i_complement_size: usize,
    pub anchor: ModelIndexSet,
    pub s_star: Vec<ModelEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub model: ModelIndexSet,
    pub names: Vec<String>,
    pub d_hat: f64,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misclass_count: Option<usize>,
}

impl ModelEntry {
    pub fn new(r: &RiskEstimate, names: &[String]) -> Self {
        ModelEntry {
            model: r.model.clone(),
            names: r.model.names(names).into_iter().map(String::from).collect(),
            d_hat: r.d_hat,
            evaluations: r.evaluations,
            misclass_count: r.misclass_count,
        }
    }
}

/// Everything needed to score candidates for one search.
pub struct SearchContext<'a> {
    pub dataset: &'a Dataset,
    pub config: &'a SearchConfig,
    pub scoring: &'a Scoring,
    pub plan: FoldPlan,
    /// Covariates eligible for addition: all of them minus `m0`.
    pub free: Vec<usize>,
}

impl<'a> SearchContext<'a> {
    pub fn new(
        dataset: &'a Dataset,
        config: &'a SearchConfig,
        scoring: &'a Scoring,
    ) -> Result<Self> {
        config.validate(dataset.p())?;
        scoring.estimator.validate()?;
        scoring.divergence.validate()?;
        let f = config.folds;
        let plan = plan_for(
            dataset,
            f.m,
            f.k,
            f.mode,
            f.stratify,
            fold_seed(config.seed),
        )?;
        let largest = config.m0.len() + config.d_max;
        if largest >= plan.min_train_size() {
            return Err(Error::invalid(format!(
                "models of {largest} covariates need more than the smallest training split ({} rows)",
                plan.min_train_size()
            )));
        }
        let free = (0..dataset.p())
            .filter(|&i| !config.m0.contains(i))
            .collect();
        Ok(SearchContext {
            dataset,
            config,
            scoring,
            plan,
            free,
        })
    }

    pub fn score(&self, model: &ModelIndexSet) -> Result<RiskEstimate> {
        estimate_risk(
            self.dataset,
            model,
            &self.plan,
            &self.scoring.estimator,
            &self.scoring.divergence,
        )
    }
}

pub fn fold_seed(master: u64) -> u64 {
    rng::split(master, rng::stream::FOLDS)
}

pub fn level_seed(master: u64, d: usize) -> u64 {
    rng::split(rng::split(master, rng::stream::LEVELS), d as u64)
}

/// Rank `ceil(alpha * n)`, clamped to `1..=n`. A relative slack of 1e-12
/// keeps products such as `0.01 * 2000` from rounding up past an integer.
pub fn quantile_rank(alpha: f64, n: usize) -> usize {
    let x = alpha * n as f64;
    let r = (x - x.abs() * 1e-12).ceil() as usize;
    r.clamp(1, n.max(1))
}

/// Score the distinct models among `draws` and build the level's quantile set.
pub fn build_level(
    ctx: &SearchContext<'_>,
    d: usize,
    draws: Vec<ModelIndexSet>,
) -> Result<LevelResult> {
    let n_draws = draws.len();
    if n_draws == 0 {
        return Err(Error::invalid(format!("level {d} has no candidates")));
    }
    let mut counts: BTreeMap<ModelIndexSet, usize> = BTreeMap::new();
    for m in draws {
        *counts.entry(m).or_insert(0) += 1;
    }
    let distinct: Vec<(ModelIndexSet, usize)> = counts.into_iter().collect();

    let cache = RiskCache::new();
    let scored: Vec<Arc<RiskEstimate>> = distinct
        .par_iter()
        .map(|(m, _)| cache.get_or_compute(m, &ctx.plan, || ctx.score(m)))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..distinct.len()).collect();
    order.sort_by(|&a, &b| {
        scored[a]
            .d_hat
            .total_cmp(&scored[b].d_hat)
            .then_with(|| distinct[a].0.cmp(&distinct[b].0))
    });
    let rank = quantile_rank(ctx.config.alpha, n_draws);
    let mut cumulative = 0;
    let mut anchor_pos = order[order.len() - 1];
    for &i in &order {
        cumulative += distinct[i].1;
        if cumulative >= rank {
            anchor_pos = i;
            break;
        }
    }
    let q_hat = scored[anchor_pos].d_hat;
    // lexicographically smallest model at the quantile value
    let anchor = order
        .iter()
        .find(|&&i| scored[i].d_hat == q_hat)
        .map(|&i| distinct[i].0.clone())
        .expect("quantile value is attained");

    let s_star: Vec<Arc<RiskEstimate>> = order
        .iter()
        .take_while(|&&i| scored[i].d_hat <= q_hat)
        .map(|&i| Arc::clone(&scored[i]))
        .collect();
    let mut i_star: Vec<usize> = s_star
        .iter()
        .flat_map(|r| r.model.indices().iter().copied())
        .filter(|&i| !ctx.config.m0.contains(i))
        .collect();
    i_star.sort_unstable();
    i_star.dedup();

    let evaluated = distinct
        .into_iter()
        .zip(&scored)
        .map(|((model, multiplicity), r)| Candidate {
            model,
            risk: r.summary(),
            multiplicity,
        })
        .collect();

    Ok(LevelResult {
        d,
        evaluated,
        draws: n_draws,
        q_hat,
        anchor,
        s_star,
        i_complement_size: ctx.free.len() - i_star.len(),
        i_star,
    })
}

/// Level 1 from every single-covariate addition to `m0`.
pub fn initial_step_exhaustive(ctx: &SearchContext<'_>) -> Result<LevelResult> {
    let draws = ctx.free.iter().map(|&j| ctx.config.m0.with(j)).collect();
    build_level(ctx, 1, draws)
}

/// Level 1 from `b` uniform single-covariate draws (duplicates allowed).
pub fn initial_step_sampled(ctx: &SearchContext<'_>) -> Result<LevelResult> {
    let seed = level_seed(ctx.config.seed, 1);
    let draws = (0..ctx.config.b)
        .map(|c| {
            let mut r = rng::rng_from(rng::split(seed, c as u64));
            let j = ctx.free[r.random_range(0..ctx.free.len())];
            ctx.config.m0.with(j)
        })
        .collect();
    build_level(ctx, 1, draws)
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// All `k`-subsets of `items`, in lexicographic order of positions.
pub fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            break;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// Exhaustive levels `1..=d_prime` (capped at `d_max`).
pub fn initial_exhaustive_upto(
    ctx: &SearchContext<'_>,
    d_prime: usize,
) -> Result<Vec<LevelResult>> {
    let top = d_prime.min(ctx.config.d_max);
    let needed: u128 = (1..=top).map(|d| binomial(ctx.free.len(), d)).sum();
    if needed > ctx.config.exhaustive_budget {
        return Err(Error::BudgetExceeded {
            needed,
            budget: ctx.config.exhaustive_budget,
        });
    }
    (1..=top)
        .map(|d| {
            let draws = combinations(&ctx.free, d)
                .into_iter()
                .map(|c| ctx.config.m0.union(&ModelIndexSet::new(c)))
                .collect();
            build_level(ctx, d, draws)
        })
        .collect()
}

/// Draw `d` distinct covariates: each draw picks the `i_star_prev` pool with
/// probability `pi` (the complement otherwise), then a uniform member of that
/// pool not yet chosen. An exhausted pool falls through to the other one.
pub fn sample_candidate<R: Rng + ?Sized>(
    i_star_prev: &[usize],
    complement_prev: &[usize],
    m0: &ModelIndexSet,
    d: usize,
    pi: f64,
    rng: &mut R,
) -> Result<ModelIndexSet> {
    let pools = [i_star_prev, complement_prev];
    let mut taken = [0usize; 2];
    let mut chosen: Vec<usize> = Vec::with_capacity(d);
    for drawn in 0..d {
        let preferred = if rng.random_bool(pi) { 0 } else { 1 };
        let pool = if taken[preferred] < pools[preferred].len() {
            preferred
        } else if taken[1 - preferred] < pools[1 - preferred].len() {
            1 - preferred
        } else {
            return Err(Error::PoolsExhausted { drawn, wanted: d });
        };
        let members = pools[pool];
        let pick = loop {
            let c = members[rng.random_range(0..members.len())];
            if !chosen.contains(&c) {
                break c;
            }
        };
        chosen.push(pick);
        taken[pool] += 1;
    }
    chosen.extend_from_slice(m0.indices());
    Ok(ModelIndexSet::new(chosen))
}

/// Level `d` from `b` candidates sampled around the previous level's `I*`.
pub fn general_step(ctx: &SearchContext<'_>, prev: &LevelResult, d: usize) -> Result<LevelResult> {
    if d < 2 || prev.d + 1 != d {
        return Err(Error::invalid(format!(
            "general step for d={d} needs level {} as predecessor",
            d.saturating_sub(1)
        )));
    }
    let complement: Vec<usize> = ctx
        .free
        .iter()
        .copied()
        .filter(|i| prev.i_star.binary_search(i).is_err())
        .collect();
    let seed = level_seed(ctx.config.seed, d);
    let draws = (0..ctx.config.b)
        .map(|c| {
            let mut r = rng::rng_from(rng::split(seed, c as u64));
            sample_candidate(
                &prev.i_star,
                &complement,
                &ctx.config.m0,
                d,
                ctx.config.pi,
                &mut r,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    build_level(ctx, d, draws)
}

/// Run the whole search. Candidate scoring uses the current rayon pool; the
/// result does not depend on its size.
pub fn run_search(
    dataset: &Dataset,
    config: &SearchConfig,
    scoring: &Scoring,
) -> Result<SearchTrace> {
    let ctx = SearchContext::new(dataset, config, scoring)?;
    let mut levels = match config.initial_mode {
        InitialMode::Exhaustive => vec![initial_step_exhaustive(&ctx)?],
        InitialMode::SampledLargeP => vec![initial_step_sampled(&ctx)?],
        InitialMode::ExhaustiveUpTo(dp) => initial_exhaustive_upto(&ctx, dp)?,
    };
    while levels.len() < config.d_max {
        let d = levels.len() + 1;
        let next = general_step(&ctx, levels.last().expect("at least one level"), d)?;
        levels.push(next);
    }
    let rng_audit = RngAudit {
        master_seed: config.seed,
        fold_seed: fold_seed(config.seed),
        level_seeds: (1..=config.d_max)
            .map(|d| level_seed(config.seed, d))
            .collect(),
    };
    Ok(SearchTrace {
        config: config.clone(),
        scoring: *scoring,
        plan: ctx.plan,
        levels,
        rng_audit,
    })
}
