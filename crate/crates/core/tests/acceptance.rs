//! Exit criteria. Each test prints one PASS/FAIL line with its measured
//! values; run with `cargo test --test acceptance -- --nocapture` to see
//! them.

use std::fs;
use std::time::{Duration, Instant};

use cmc_explore::cmc::{build_embedded, build_two_state, Transitions};
use cmc_explore::control::{
    evaluate_learned_model, evaluate_policy, policy_iteration, value_iteration_oracle,
    DiscountedTask, StationaryPolicy, EVALUATION_RESIDUAL,
};
use cmc_explore::estimation::{
    missing_information, per_row_missing_information, pig, posterior_row, CountTensor,
    DirichletPrior,
};
use cmc_explore::exploration::{exact_dp, explore, RolloutConfig, StrategyKind};
use cmc_explore::harness::{run_experiment, run_trials, EnvSpec, ExperimentConfig, DEFAULT_SEED};
use cmc_explore::{Cmc, RngStream};

const HORIZON: usize = 20;
const DISCOUNT: f64 = 0.99;
const LINEAR_SOLVE_TOLERANCE: f64 = 1e-9;
const ORDERING_MARGIN: f64 = 0.01;

fn prior() -> DirichletPrior {
    DirichletPrior::new(0.05).unwrap()
}

fn rollout() -> StrategyKind {
    StrategyKind::PigRollout(RolloutConfig::default())
}

fn report(id: u32, name: &str, passed: bool, elapsed: Duration, limit: Duration, detail: String) {
    let within = elapsed < limit;
    let verdict = if passed && within { "PASS" } else { "FAIL" };
    println!(
        "criterion {id} [{name}]: {verdict} ({:.2}s of {}s) {detail}",
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(passed, "criterion {id} failed: {detail}");
    assert!(within, "criterion {id} exceeded its time budget");
}

fn learned_state_one(env: &Cmc, strategy: StrategyKind, seed: u64) -> (usize, f64) {
    let log = explore(strategy, env, 0, HORIZON, prior(), seed, Some(&[0, 1])).unwrap();
    let task = DiscountedTask::from_cmc(env, DISCOUNT).unwrap();
    let eval = evaluate_learned_model(env, &log.final_counts, prior(), &task).unwrap();
    (eval.policy.control(0), eval.true_values.get(0))
}

#[test]
fn criterion_1_table1_reproduction() {
    let clock = Instant::now();
    let env = build_embedded(100).unwrap();
    let (rollout_policy, rollout_cost) = learned_state_one(&env, rollout(), DEFAULT_SEED);
    let (greedy_policy, greedy_cost) =
        learned_state_one(&env, StrategyKind::PigGreedy, DEFAULT_SEED);
    let (jpig_policy, jpig_cost) = learned_state_one(&env, StrategyKind::JpigGreedy, DEFAULT_SEED);
    let random_expensive = (0..50u64)
        .filter(|&seed| {
            let (_, cost) = learned_state_one(&env, StrategyKind::Random, seed);
            (cost - 100.0).abs() <= LINEAR_SOLVE_TOLERANCE
        })
        .count();

    let passed = rollout_policy == 0
        && (rollout_cost - 2.0).abs() <= LINEAR_SOLVE_TOLERANCE
        && greedy_policy == 1
        && (greedy_cost - 100.0).abs() <= LINEAR_SOLVE_TOLERANCE
        && jpig_policy == 1
        && (jpig_cost - 100.0).abs() <= LINEAR_SOLVE_TOLERANCE
        && random_expensive * 100 >= 80 * 50;
    let detail = format!(
        "rollout=(u{rollout_policy}, {rollout_cost}) greedy=(u{greedy_policy}, {greedy_cost}) \
         jpig=(u{jpig_policy}, {jpig_cost}) random cost-100 seeds={random_expensive}/50"
    );
    report(
        1,
        "downstream task table",
        passed,
        clock.elapsed(),
        Duration::from_secs(60),
        detail,
    );
}

fn final_mi(runs: &[cmc_explore::harness::StrategyRun], name: &str) -> f64 {
    runs.iter()
        .find(|r| r.strategy.name() == name)
        .unwrap()
        .mean_final_mi_subset()
}

#[test]
fn criterion_2_missing_information_ordering() {
    let clock = Instant::now();

    let fig1 = ExperimentConfig::new(EnvSpec::TwoState { p: 0.0 }, "unused");
    let runs = run_trials(&fig1, &fig1.env.build().unwrap()).unwrap();
    let [random, greedy, jpig, roll] =
        ["random", "pig-greedy", "jpig-greedy", "pig-rollout"].map(|s| final_mi(&runs, s));
    let random_trials = runs[0].logs.len();
    let fig1_ok = jpig + ORDERING_MARGIN < roll
        && roll + ORDERING_MARGIN < random
        && random + ORDERING_MARGIN < greedy
        && random_trials == 200;

    let fig4 = ExperimentConfig {
        metric_subset: Some(vec![0, 1]),
        ..ExperimentConfig::new(EnvSpec::Embedded { n: 100 }, "unused")
    };
    let runs4 = run_trials(&fig4, &fig4.env.build().unwrap()).unwrap();
    let [random4, greedy4, jpig4, roll4] =
        ["random", "pig-greedy", "jpig-greedy", "pig-rollout"].map(|s| final_mi(&runs4, s));
    let fig4_ok = [random4, greedy4, jpig4]
        .iter()
        .all(|&other| roll4 + ORDERING_MARGIN < other);

    let detail = format!(
        "fig1: jpig={jpig:.4} rollout={roll:.4} random={random:.4} greedy={greedy:.4}; \
         fig4 subset: rollout={roll4:.4} random={random4:.4} jpig={jpig4:.4} greedy={greedy4:.4}"
    );
    report(
        2,
        "missing-information ordering",
        fig1_ok && fig4_ok,
        clock.elapsed(),
        Duration::from_secs(120),
        detail,
    );
}

#[test]
fn criterion_3_policy_shape() {
    let clock = Instant::now();
    let env = build_two_state(0.0).unwrap();
    let greedy = explore(
        StrategyKind::PigGreedy,
        &env,
        0,
        HORIZON,
        prior(),
        DEFAULT_SEED,
        None,
    )
    .unwrap();
    let greedy_ok =
        greedy.records[0].control == 0 && greedy.records[1..].iter().all(|r| r.state == 1);

    let roll = explore(rollout(), &env, 0, HORIZON, prior(), DEFAULT_SEED, None).unwrap();
    let in_state_one = roll.records.iter().take_while(|r| r.state == 0).count();
    let held = roll.records.iter().take_while(|r| r.control == 1).count();
    let passed = greedy_ok && in_state_one >= 4;
    let detail = format!(
        "greedy control0={} in state two from period 1; rollout held control 1 for {held} periods, \
         {in_state_one} periods in state one",
        greedy.records[0].control
    );
    report(
        3,
        "policy shape",
        passed,
        clock.elapsed(),
        Duration::from_secs(30),
        detail,
    );
}

#[test]
fn criterion_4_exact_dp_dominance() {
    let clock = Instant::now();
    let env = build_two_state(0.0).unwrap();
    let zero = CountTensor::for_cmc(&env);
    let mut passed = true;
    let mut detail = String::new();
    for horizon in 2..=5 {
        let dp = exact_dp(0, &zero, 0, horizon, &env, prior()).unwrap().value;
        let roll = explore(rollout(), &env, 0, horizon, prior(), DEFAULT_SEED, None)
            .unwrap()
            .total_pig();
        let greedy = explore(
            StrategyKind::PigGreedy,
            &env,
            0,
            horizon,
            prior(),
            DEFAULT_SEED,
            None,
        )
        .unwrap()
        .total_pig();
        passed &= dp >= roll && roll >= greedy;
        detail.push_str(&format!(
            "N={horizon}: dp={dp:.6} rollout={roll:.6} greedy={greedy:.6}; "
        ));
    }
    report(
        4,
        "exact DP dominance",
        passed,
        clock.elapsed(),
        Duration::from_secs(60),
        detail,
    );
}

#[test]
fn criterion_5_estimator_properties() {
    let clock = Instant::now();
    let mut rng = RngStream::new(2024);

    let mut worst_row_error = 0.0f64;
    let mut min_pig = f64::INFINITY;
    for _ in 0..10_000 {
        let n_states = 1 + rng.below(6);
        let n_controls = 1 + rng.below(3);
        let mut f = CountTensor::zeros(n_states, n_controls);
        for _ in 0..rng.below(40) {
            f.record(
                rng.below(n_controls),
                rng.below(n_states),
                rng.below(n_states),
            )
            .unwrap();
        }
        let alpha = DirichletPrior::new(0.01 + 2.0 * rng.uniform()).unwrap();
        for u in 0..n_controls {
            for i in 0..n_states {
                let row = posterior_row(&f, alpha, u, i).unwrap();
                worst_row_error = worst_row_error.max((row.iter().sum::<f64>() - 1.0).abs());
                assert!(row.iter().all(|&p| p > 0.0));
                min_pig = min_pig.min(pig(i, u, &f, alpha).unwrap());
            }
        }
    }

    let mut f = CountTensor::zeros(2, 1);
    let mut previous = f64::INFINITY;
    let mut strictly_decreasing = true;
    for _ in 0..=10 {
        let v = pig(0, 0, &f, prior()).unwrap();
        strictly_decreasing &= v < previous;
        previous = v;
        f.record(0, 0, 1).unwrap();
    }

    let env = build_two_state(0.0).unwrap();
    let zero = CountTensor::for_cmc(&env);
    let initial = missing_information(&env, &zero, prior(), None).unwrap();
    let initial_error = (initial - 4.0 * std::f64::consts::LN_2).abs();

    let log = explore(StrategyKind::Random, &env, 0, HORIZON, prior(), 3, None).unwrap();
    let mut worst_sum_error = 0.0f64;
    for f in log.count_history() {
        let terms = per_row_missing_information(&env, &f, prior()).unwrap();
        let total = missing_information(&env, &f, prior(), None).unwrap();
        worst_sum_error = worst_sum_error.max((terms.values().sum::<f64>() - total).abs());
    }

    let passed = worst_row_error <= 1e-12
        && min_pig >= 0.0
        && strictly_decreasing
        && initial_error <= 1e-9
        && worst_sum_error <= 1e-12;
    let detail = format!(
        "row sum error={worst_row_error:e} min PIG={min_pig:e} decreasing={strictly_decreasing} \
         initial MI={initial:.9} per-row sum error={worst_sum_error:e}"
    );
    report(
        5,
        "estimator properties",
        passed,
        clock.elapsed(),
        Duration::from_secs(60),
        detail,
    );
}

fn random_task(rng: &mut RngStream) -> (Transitions, DiscountedTask) {
    let (n, m) = (5, 3);
    let rows = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let raw: Vec<f64> = (0..n).map(|_| rng.uniform() + 1e-3).collect();
                    let total: f64 = raw.iter().sum();
                    let mut row: Vec<f64> = raw.iter().map(|x| x / total).collect();
                    let rest: f64 = row[1..].iter().sum();
                    row[0] = 1.0 - rest;
                    row
                })
                .collect()
        })
        .collect();
    let costs = (0..n * m).map(|_| rng.uniform()).collect();
    (
        Transitions::from_rows(rows).unwrap(),
        DiscountedTask::new(n, m, costs, 0.9).unwrap(),
    )
}

#[test]
fn criterion_6_control_oracles() {
    let clock = Instant::now();
    let mut rng = RngStream::new(77);
    let mut worst_gap = 0.0f64;
    let mut worst_residual = 0.0f64;
    for _ in 0..100 {
        let (t, task) = random_task(&mut rng);
        let solved = policy_iteration(&t, &task, &StationaryPolicy::constant(5, 0)).unwrap();
        let oracle = value_iteration_oracle(&t, &task, 1e-8).unwrap();
        worst_gap = worst_gap.max(solved.values.sup_distance(&oracle));

        for policy in [solved.policy.clone(), StationaryPolicy::constant(5, 2)] {
            let j = evaluate_policy(&t, &policy, &task).unwrap();
            for i in 0..5 {
                let u = policy.control(i);
                let lhs: f64 = j.get(i)
                    - task.discount()
                        * t.row(u, i)
                            .iter()
                            .zip(&j.0)
                            .map(|(p, v)| p * v)
                            .sum::<f64>();
                worst_residual = worst_residual.max((lhs - task.cost(i, u)).abs());
            }
        }
    }
    let passed = worst_gap <= 1e-6 && worst_residual < EVALUATION_RESIDUAL;
    let detail = format!("max sup-norm gap={worst_gap:e} max residual={worst_residual:e}");
    report(
        6,
        "control oracles",
        passed,
        clock.elapsed(),
        Duration::from_secs(60),
        detail,
    );
}

#[test]
fn criterion_7_reproducibility() {
    let clock = Instant::now();
    let configs = |root: &std::path::Path| {
        let mut stochastic =
            ExperimentConfig::new(EnvSpec::TwoState { p: 0.5 }, root.join("fig1-stochastic"));
        stochastic.trials = 12;
        stochastic.strategies = vec![
            StrategyKind::Random,
            StrategyKind::PigGreedy,
            StrategyKind::JpigGreedy,
            StrategyKind::PigRollout(RolloutConfig {
                mc_repeats: Some(4),
                nesting_depth: 1,
            }),
        ];
        let mut embedded = ExperimentConfig::new(EnvSpec::Embedded { n: 20 }, root.join("fig4"));
        embedded.trials = 25;
        embedded.metric_subset = Some(vec![0, 1]);
        let mut nested = ExperimentConfig::new(EnvSpec::Sequential3, root.join("seq3"));
        nested.strategies = vec![StrategyKind::PigRollout(RolloutConfig {
            mc_repeats: None,
            nesting_depth: 2,
        })];
        vec![stochastic, embedded, nested]
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut identical = true;
    for (ca, cb) in configs(a.path()).iter().zip(configs(b.path())) {
        let fa = run_experiment(ca).unwrap().files;
        let fb = run_experiment(&cb).unwrap().files;
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            identical &= fs::read(x).unwrap() == fs::read(y).unwrap();
            compared += 1;
        }
    }
    let detail = format!("{compared} files compared, identical={identical}");
    report(
        7,
        "reproducibility",
        identical,
        clock.elapsed(),
        Duration::from_secs(60),
        detail,
    );
}
