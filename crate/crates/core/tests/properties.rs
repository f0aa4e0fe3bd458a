use proptest::prelude::*;

use cmc_explore::cmc::{build_embedded, build_two_state, load_cmc, save_cmc, Transitions};
use cmc_explore::estimation::{
    kl_divergence, missing_information, pig, posterior_row, CountTensor, DirichletPrior,
};
use cmc_explore::exploration::{explore, rollout_control, RolloutConfig, StrategyKind};
use cmc_explore::{Cmc, RngStream};

fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, len).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect()
    })
}

fn counts(n_states: usize, n_controls: usize) -> impl Strategy<Value = CountTensor> {
    prop::collection::vec((0..n_controls, 0..n_states, 0..n_states), 0..60).prop_map(move |obs| {
        let mut f = CountTensor::zeros(n_states, n_controls);
        for (u, i, j) in obs {
            f.record(u, i, j).unwrap();
        }
        f
    })
}

fn random_cmc(n_states: usize, n_controls: usize) -> impl Strategy<Value = Cmc> {
    prop::collection::vec(simplex(n_states), n_states * n_controls).prop_map(move |rows| {
        let mut it = rows.into_iter();
        let nested = (0..n_controls)
            .map(|_| {
                (0..n_states)
                    .map(|_| {
                        let mut row = it.next().unwrap();
                        let rest: f64 = row[1..].iter().sum();
                        row[0] = 1.0 - rest;
                        row
                    })
                    .collect()
            })
            .collect();
        Cmc::new(Transitions::from_rows(nested).unwrap()).unwrap()
    })
}

proptest! {
    #[test]
    fn kl_is_nonnegative_and_zero_only_on_equality((p, q) in (2usize..6).prop_flat_map(|n| (simplex(n), simplex(n)))) {
        let d = kl_divergence(&p, &q).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let max_gap = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if max_gap > 1e-6 {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn posterior_rows_are_strictly_positive_distributions(f in counts(4, 2), alpha in 0.001f64..3.0) {
        let prior = DirichletPrior::new(alpha).unwrap();
        for u in 0..2 {
            for i in 0..4 {
                let row = posterior_row(&f, prior, u, i).unwrap();
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!(row.iter().all(|&p| p > 0.0));
                prop_assert!(pig(i, u, &f, prior).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn pig_does_not_depend_on_the_true_chain(f in counts(3, 2), a in random_cmc(3, 2), b in random_cmc(3, 2)) {
        // PIG takes no chain; missing information does, and distinguishes them
        let prior = DirichletPrior::default();
        for i in 0..3 {
            for u in 0..2 {
                prop_assert_eq!(pig(i, u, &f, prior).unwrap(), pig(i, u, &f.clone(), prior).unwrap());
            }
        }
        prop_assert!(missing_information(&a, &f, prior, None).unwrap() >= 0.0);
        prop_assert!(missing_information(&b, &f, prior, None).unwrap() >= 0.0);
    }

    #[test]
    fn documents_round_trip(c in random_cmc(4, 3)) {
        let back = load_cmc(&save_cmc(&c)).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn count_documents_round_trip(f in counts(5, 3)) {
        prop_assert_eq!(CountTensor::from_json(&f.to_json()).unwrap(), f);
    }

    #[test]
    fn equal_seeds_replay_samples(seed in any::<u64>(), c in random_cmc(4, 2)) {
        let mut a = RngStream::new(seed);
        let mut b = RngStream::new(seed);
        for step in 0..200 {
            let (i, u) = (step % 4, step % 2);
            prop_assert_eq!(c.sample_transition(i, u, &mut a).unwrap(), c.sample_transition(i, u, &mut b).unwrap());
        }
    }

    #[test]
    fn planning_never_touches_learner_counts(f in counts(3, 2), i in 0usize..3, seed in any::<u64>()) {
        let env = build_embedded(3).unwrap();
        let stochastic = build_two_state(0.4).unwrap();
        let before = f.clone();
        let cfg = RolloutConfig { mc_repeats: Some(3), nesting_depth: 1 };
        rollout_control(i, &f, 2, 6, &env, DirichletPrior::default(), &cfg, &RngStream::new(seed)).unwrap();
        prop_assert_eq!(&f, &before);
        let g = CountTensor::zeros(2, 2);
        rollout_control(i % 2, &g, 0, 4, &stochastic, DirichletPrior::default(), &cfg, &RngStream::new(seed)).unwrap();
        prop_assert_eq!(g, CountTensor::zeros(2, 2));
    }

    #[test]
    fn rollout_collects_at_least_greedy_on_deterministic_chains(horizon in 1usize..12, n in 2usize..6) {
        let env = build_embedded(n).unwrap();
        let prior = DirichletPrior::default();
        let roll = explore(StrategyKind::PigRollout(RolloutConfig::default()), &env, 0, horizon, prior, 0, None).unwrap();
        let greedy = explore(StrategyKind::PigGreedy, &env, 0, horizon, prior, 0, None).unwrap();
        prop_assert!(roll.total_pig() >= greedy.total_pig());
    }
}

#[test]
fn builder_rows_are_stochastic() {
    for p in [0.0, 0.25, 0.5, 1.0] {
        build_two_state(p).unwrap().validate().unwrap();
    }
    for n in [2, 3, 10, 100, 250] {
        build_embedded(n).unwrap().validate().unwrap();
    }
    cmc_explore::cmc::build_sequential3().validate().unwrap();
}

#[test]
fn sampling_frequencies_converge() {
    let env = Cmc::new(
        Transitions::from_rows(vec![vec![
            vec![0.1, 0.2, 0.7],
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            vec![0.5, 0.0, 0.5],
        ]])
        .unwrap(),
    )
    .unwrap();
    let mut rng = RngStream::new(31);
    for i in 0..3 {
        let mut hits = [0usize; 3];
        for _ in 0..100_000 {
            hits[env.sample_transition(i, 0, &mut rng).unwrap()] += 1;
        }
        for (j, &hit) in hits.iter().enumerate() {
            let freq = hit as f64 / 100_000.0;
            assert!((freq - env.transitions().get(0, i, j)).abs() < 0.01);
        }
    }
}

#[test]
fn random_exploration_mean_missing_information_does_not_rise() {
    let env = build_two_state(0.0).unwrap();
    let prior = DirichletPrior::default();
    let trials = 200;
    let mut mean = [0.0; 21];
    for seed in 0..trials {
        let log = explore(StrategyKind::Random, &env, 0, 20, prior, seed, None).unwrap();
        for (k, v) in log.mi_total_curve().into_iter().enumerate() {
            mean[k] += v / trials as f64;
        }
    }
    for pair in mean.windows(2) {
        assert!(pair[1] <= pair[0] + 0.02, "{pair:?}");
    }
}

#[test]
fn seed_independence_of_deterministic_runs() {
    let env = build_embedded(10).unwrap();
    let prior = DirichletPrior::default();
    for strategy in [
        StrategyKind::PigGreedy,
        StrategyKind::JpigGreedy,
        StrategyKind::PigRollout(RolloutConfig::default()),
    ] {
        let a = explore(strategy, &env, 0, 15, prior, 1, Some(&[0, 1])).unwrap();
        let b = explore(strategy, &env, 0, 15, prior, 999, Some(&[0, 1])).unwrap();
        assert_eq!(a.records, b.records);
    }
    let a = explore(StrategyKind::Random, &env, 0, 15, prior, 5, None).unwrap();
    let b = explore(StrategyKind::Random, &env, 0, 15, prior, 5, None).unwrap();
    assert_eq!(a, b);
}
