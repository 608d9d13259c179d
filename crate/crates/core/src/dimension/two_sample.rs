//! One- and two-sided two-sample tests on per-evaluation loss vectors.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// Sample `a` has the smaller loss.
    Less,
    Greater,
    TwoSided,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub p_value: f64,
    pub reject: bool,
}

impl TestOutcome {
    fn at(p_value: f64, level: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestOutcome {
            p_value,
            reject: p_value <= level,
        }
    }
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Conditional (Fisher) test of two proportions: `errors_a` of `n_a` against
/// `errors_b` of `n_b`, given the pooled error count.
pub fn two_proportion_pvalue(
    errors_a: usize,
    n_a: usize,
    errors_b: usize,
    n_b: usize,
    alt: Alternative,
) -> f64 {
    assert!(
        errors_a <= n_a && errors_b <= n_b,
        "more errors than trials"
    );
    let total = n_a + n_b;
    let k = errors_a + errors_b;
    if total == 0 {
        return 1.0;
    }
    let lo = k.saturating_sub(n_b);
    let hi = k.min(n_a);
    let denom = ln_choose(total, n_a);
    let pmf = |x: usize| (ln_choose(k, x) + ln_choose(total - k, n_a - x) - denom).exp();
    let p = match alt {
        Alternative::Less => (lo..=errors_a).map(pmf).sum(),
        Alternative::Greater => (errors_a..=hi).map(pmf).sum(),
        Alternative::TwoSided => {
            let observed = pmf(errors_a);
            (lo..=hi)
                .map(pmf)
                .filter(|&q| q <= observed * (1.0 + 1e-7))
                .sum()
        }
    };
    f64::min(p, 1.0)
}

fn error_count(losses: &[f64]) -> usize {
    losses.iter().filter(|&&l| l > 0.0).count()
}

/// One-sided exact test that the misclassification rate behind `losses_a`
/// is smaller than the one behind `losses_b`. A loss counts as an error when
/// it is positive.
pub fn binomial_improvement_test(losses_a: &[f64], losses_b: &[f64], level: f64) -> TestOutcome {
    let p = two_proportion_pvalue(
        error_count(losses_a),
        losses_a.len(),
        error_count(losses_b),
        losses_b.len(),
        Alternative::Less,
    );
    TestOutcome::at(p, level)
}

/// Midranks (1-based) of the pooled sample `a ++ b`, doubled so they are integers.
fn doubled_midranks(a: &[f64], b: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && pooled[order[end + 1]] == pooled[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end+1, doubled midrank = start + end + 2
        for &i in &order[start..=end] {
            ranks[i] = (start + end + 2) as u64;
        }
        ties.push(end - start + 1);
        start = end + 1;
    }
    (ranks, ties)
}

/// Mann-Whitney U for sample `a`: pairs with `a > b` plus half the ties.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> f64 {
    let (ranks, _) = doubled_midranks(a, b);
    let r2: u64 = ranks[..a.len()].iter().sum();
    let na = a.len() as f64;
    r2 as f64 / 2.0 - na * (na + 1.0) / 2.0
}

/// Samples at or below this size (both) use the exact permutation distribution.
pub const EXACT_MAX: usize = 12;

/// Exact distribution of the doubled rank sum of `na` items drawn from the
/// pooled doubled ranks: `counts[s]` is the number of subsets with sum `s`.
fn rank_sum_counts(ranks: &[u64], na: usize) -> Vec<f64> {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // table[k][s]: subsets of size k with doubled sum s
    let mut table = vec![vec![0.0f64; width]; na + 1];
    table[0][0] = 1.0;
    for &r in ranks {
        let r = r as usize;
        for k in (1..=na).rev() {
            let (lower, upper) = table.split_at_mut(k);
            let prev = &lower[k - 1];
            let cur = &mut upper[0];
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    table.swap_remove(na)
}

pub fn mann_whitney_pvalue(a: &[f64], b: &[f64], alt: Alternative) -> f64 {
    let (na, nb) = (a.len(), b.len());
    if na == 0 || nb == 0 {
        return 1.0;
    }
    let (ranks, ties) = doubled_midranks(a, b);
    let observed: u64 = ranks[..na].iter().sum();

    if na <= EXACT_MAX && nb <= EXACT_MAX {
        let counts = rank_sum_counts(&ranks, na);
        let total: f64 = counts.iter().sum();
        let obs = observed as usize;
        let lower: f64 = counts[..=obs].iter().sum::<f64>() / total;
        let upper: f64 = counts[obs..].iter().sum::<f64>() / total;
        return match alt {
            Alternative::Less => lower,
            Alternative::Greater => upper,
            Alternative::TwoSided => (2.0 * lower.min(upper)).min(1.0),
        };
    }

    let (fa, fb) = (na as f64, nb as f64);
    let n = fa + fb;
    let u = observed as f64 / 2.0 - fa * (fa + 1.0) / 2.0;
    let mean = fa * fb / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = fa * fb / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let lower = normal.cdf((u - mean + 0.5) / sd);
    let upper = 1.0 - normal.cdf((u - mean - 0.5) / sd);
    match alt {
        Alternative::Less => lower.min(1.0),
        Alternative::Greater => upper.min(1.0),
        Alternative::TwoSided => (2.0 * lower.min(upper)).min(1.0),
    }
}

/// One-sided rank-sum test that `a` tends to have smaller losses than `b`.
pub fn mann_whitney_test(a: &[f64], b: &[f64], level: f64) -> TestOutcome {
    TestOutcome::at(mann_whitney_pvalue(a, b, Alternative::Less), level)
}
