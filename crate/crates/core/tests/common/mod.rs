//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use paradigm::data::{Dataset, FoldPlan, Task};
use paradigm::divergence::{DivergenceKind, DivergenceSpec};
use paradigm::estimators::{fit_linear, fit_logistic, logistic, EstimatorConfig, EstimatorKind};
use paradigm::linalg::Matrix;
use paradigm::ModelIndexSet;

/// Held-out losses computed fold by fold with no shared helpers beyond the
/// fitting routines.
pub fn naive_losses(
    ds: &Dataset,
    model: &ModelIndexSet,
    plan: &FoldPlan,
    est: &EstimatorConfig,
    div: &DivergenceSpec,
) -> Vec<f64> {
    let cols = model.indices();
    let mut out = Vec::new();
    for rep in &plan.repetitions {
        for fold in rep {
            let mut rows = Vec::new();
            let mut ys = Vec::new();
            for &i in &fold.train {
                rows.push(cols.iter().map(|&j| ds.x().get(i, j)).collect::<Vec<f64>>());
                ys.push(ds.y()[i]);
            }
            let xt = Matrix::from_rows(&rows);
            let fit = match est.kind {
                EstimatorKind::Linear => fit_linear(model, &xt, &ys, est.intercept),
                EstimatorKind::Logistic => fit_logistic(
                    model,
                    &xt,
                    &ys,
                    est.intercept,
                    est.ridge,
                    est.max_iter,
                    est.tol,
                ),
            };
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            for &i in &fold.test {
                let (value, label) = match &fit {
                    Ok(c) => {
                        let mut s = 0.0;
                        let start = usize::from(c.intercept);
                        for (t, &j) in cols.iter().enumerate() {
                            s += c.values[start + t] * ds.x().get(i, j);
                        }
                        let eta = if c.intercept { c.values[0] + s } else { s };
                        match est.kind {
                            EstimatorKind::Linear => (eta, None),
                            EstimatorKind::Logistic => {
                                let p = logistic(eta);
                                (p, Some(p >= est.threshold))
                            }
                        }
                    }
                    Err(_) => match ds.task() {
                        Task::Continuous => (mean, None),
                        Task::Binary => (mean, Some(mean >= 0.5)),
                    },
                };
                let truth = ds.y()[i];
                let l = match div.kind {
                    DivergenceKind::L1 => (value - truth).abs(),
                    DivergenceKind::Squared => (value - truth) * (value - truth),
                    DivergenceKind::Classification => {
                        let predicted_one = label.expect("binary prediction");
                        if predicted_one && truth == 0.0 {
                            div.w1
                        } else if !predicted_one && truth == 1.0 {
                            div.w2
                        } else {
                            0.0
                        }
                    }
                };
                out.push(l);
            }
        }
    }
    out
}

fn choose(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `P(X <= x_a)` for the error count of sample `a` given the pooled count,
/// by exact rational enumeration of the conditional distribution.
pub fn hypergeometric_lower_tail(x_a: usize, n_a: usize, x_b: usize, n_b: usize) -> f64 {
    let k = x_a + x_b;
    let n = n_a + n_b;
    let mut num = BigUint::zero();
    for x in 0..=x_a {
        if k - x <= n_b {
            num += choose(k, x) * choose(n - k, n_a - x);
        }
    }
    let den = choose(n, n_a);
    // scale to keep 60 significant bits
    let shift = den.bits().saturating_sub(60);
    let (num, den) = (num >> shift, den >> shift);
    num.to_f64().unwrap() / den.to_f64().unwrap()
}

/// U statistic of `a` by pair counting.
pub fn pair_count_u(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// `P(U <= u_obs)` over every way of splitting the pooled sample into groups
/// of the original sizes.
pub fn permutation_lower_tail(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let na = a.len();
    let observed = pair_count_u(a, b);
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let (mut ga, mut gb) = (Vec::new(), Vec::new());
        for (i, &v) in pooled.iter().enumerate() {
            if mask >> i & 1 == 1 {
                ga.push(v);
            } else {
                gb.push(v);
            }
        }
        total += 1;
        if pair_count_u(&ga, &gb) <= observed {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}
