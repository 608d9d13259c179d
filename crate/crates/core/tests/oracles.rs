mod common;

use paradigm::cv_risk::estimate_risk;
use paradigm::data::{make_fold_plan, Dataset, FoldMode, Task};
use paradigm::dimension::binomial_improvement_test;
use paradigm::dimension::two_sample::{mann_whitney_pvalue, mann_whitney_u, Alternative};
use paradigm::divergence::DivergenceSpec;
use paradigm::estimators::EstimatorConfig;
use paradigm::linalg::Matrix;
use paradigm::ModelIndexSet;
use proptest::prelude::*;

fn dataset(cells: &[f64], noise: &[f64], n: usize, p: usize, task: Task) -> Dataset {
    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x.set(i, j, cells[i * p + j]);
        }
    }
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let s = x.get(i, 0) + noise[i];
            match task {
                Task::Continuous => s,
                Task::Binary => f64::from(u8::from(s > 0.0)),
            }
        })
        .collect();
    if task == Task::Binary {
        y[0] = 0.0;
        y[1] = 1.0;
    }
    Dataset::new(x, y, task, (0..p).map(|j| format!("c{j}")).collect()).unwrap()
}

fn instance() -> impl Strategy<
    Value = (
        usize,
        usize,
        Vec<f64>,
        Vec<f64>,
        bool,
        bool,
        usize,
        u64,
        Vec<usize>,
    ),
> {
    (10usize..24, 1usize..6).prop_flat_map(|(n, p)| {
        (
            Just(n),
            Just(p),
            prop::collection::vec(-3.0f64..3.0, n * p),
            prop::collection::vec(-1.0f64..1.0, n),
            any::<bool>(),
            any::<bool>(),
            2usize..5,
            any::<u64>(),
            Just((0..p).collect::<Vec<usize>>()).prop_shuffle(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cv_risk_matches_fold_loop((n, p, cells, noise, binary, holdout, m, seed, cols) in instance(), size in 1usize..4) {
        let task = if binary { Task::Binary } else { Task::Continuous };
        let mode = if holdout { FoldMode::Holdout } else { FoldMode::FullMfold };
        let ds = dataset(&cells, &noise, n, p, task);
        let plan = make_fold_plan(n, m, 2, mode, seed).unwrap();
        let size = size.min(p).min(plan.min_train_size().saturating_sub(2).max(1));
        let model = ModelIndexSet::new(cols[..size].to_vec());
        let est = EstimatorConfig::for_task(task);
        let div = if binary { DivergenceSpec::classification(1.0, 2.0) } else { DivergenceSpec::squared() };
        let fast = estimate_risk(&ds, &model, &plan, &est, &div).unwrap();
        let naive = common::naive_losses(&ds, &model, &plan, &est, &div);
        prop_assert_eq!(fast.losses.len(), naive.len());
        for (a, b) in fast.losses.iter().zip(&naive) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        let mean = naive.iter().sum::<f64>() / naive.len() as f64;
        prop_assert!((fast.d_hat - mean).abs() <= 1e-12 * mean.abs().max(1.0));
    }

    #[test]
    fn binomial_pvalue_matches_hypergeometric(n_a in 1usize..40, n_b in 1usize..40, fa in 0.0f64..=1.0, fb in 0.0f64..=1.0) {
        let x_a = (fa * n_a as f64).round() as usize;
        let x_b = (fb * n_b as f64).round() as usize;
        let ind = |e: usize, n: usize| -> Vec<f64> { (0..n).map(|i| f64::from(u8::from(i < e))).collect() };
        let p = binomial_improvement_test(&ind(x_a, n_a), &ind(x_b, n_b), 0.05).p_value;
        let oracle = common::hypergeometric_lower_tail(x_a, n_a, x_b, n_b);
        prop_assert!((p - oracle).abs() <= 1e-10, "p {} oracle {}", p, oracle);
    }

    #[test]
    fn u_statistic_matches_pair_count(a in prop::collection::vec(0u8..5, 1..30), b in prop::collection::vec(0u8..5, 1..30)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        prop_assert_eq!(mann_whitney_u(&a, &b), common::pair_count_u(&a, &b));
    }

    #[test]
    fn exact_mann_whitney_matches_permutations(a in prop::collection::vec(0u8..6, 1..8), b in prop::collection::vec(0u8..6, 1..8)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let p = mann_whitney_pvalue(&a, &b, Alternative::Less);
        let oracle = common::permutation_lower_tail(&a, &b);
        prop_assert!((p - oracle).abs() <= 1e-12, "p {} oracle {}", p, oracle);
    }
}
