//! Exploring strategies and the exploration loop.
//!
//! Four strategies are provided: uniform random controls, PIG greedy
//! (maximise PIG over controls in the current state), JPIG greedy (maximise
//! PIG jointly over state and control, teleporting to the chosen state), and
//! PIG rollout (one-step lookahead whose tail is estimated by simulating a
//! base policy on the black-box chain). Planning always works on private
//! copies of the counts; only the exploration loop updates the learner's
//! real [`CountTensor`].

use std::fmt;
use std::str::FromStr;

use crate::cmc::Cmc;
use crate::error::{check_index, Error, Result};
use crate::estimation::{missing_information, pig, CountTensor, DirichletPrior};
use crate::rng::RngStream;

/// Monte Carlo repeats used for stochastic chains when none are configured.
pub const DEFAULT_MC_REPEATS: usize = 16;

/// Node budget for [`exact_dp`].
pub const EXACT_DP_NODE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolloutConfig {
    /// Monte Carlo samples per control. `None` picks 1 on deterministic
    /// chains and [`DEFAULT_MC_REPEATS`] otherwise.
    pub mc_repeats: Option<usize>,
    /// 1 uses PIG greedy as the base policy; 2 uses the depth-1 rollout
    /// policy as the base policy.
    pub nesting_depth: u8,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            mc_repeats: None,
            nesting_depth: 1,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mc_repeats == Some(0) {
            return Err(Error::InvalidStrategy(
                "mc_repeats must be at least 1".into(),
            ));
        }
        if !(1..=2).contains(&self.nesting_depth) {
            return Err(Error::InvalidStrategy(format!(
                "nesting depth must be 1 or 2, got {}",
                self.nesting_depth
            )));
        }
        Ok(())
    }

    pub fn repeats_for(&self, env: &Cmc) -> usize {
        self.mc_repeats.unwrap_or(if env.is_deterministic() {
            1
        } else {
            DEFAULT_MC_REPEATS
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Random,
    PigGreedy,
    JpigGreedy,
    PigRollout(RolloutConfig),
}

impl StrategyKind {
    pub const NAMES: [&'static str; 4] = ["random", "pig-greedy", "jpig-greedy", "pig-rollout"];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::PigGreedy => "pig-greedy",
            StrategyKind::JpigGreedy => "jpig-greedy",
            StrategyKind::PigRollout(_) => "pig-rollout",
        }
    }

    /// True when the agent is placed at the chosen state instead of
    /// following the sampled transition.
    pub fn teleports(&self) -> bool {
        matches!(self, StrategyKind::JpigGreedy)
    }

    /// True when runs on `env` depend on the seed.
    pub fn is_stochastic_on(&self, env: &Cmc) -> bool {
        matches!(self, StrategyKind::Random) || !env.is_deterministic()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StrategyKind::PigRollout(cfg) => cfg.validate(),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "random" => Ok(StrategyKind::Random),
            "pig-greedy" => Ok(StrategyKind::PigGreedy),
            "jpig-greedy" => Ok(StrategyKind::JpigGreedy),
            "pig-rollout" => Ok(StrategyKind::PigRollout(RolloutConfig::default())),
            other => Err(Error::InvalidStrategy(format!(
                "unknown strategy {other:?}, expected one of {}",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

/// One exploration period.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationRecord {
    pub period: usize,
    pub state: usize,
    pub control: usize,
    pub next_state: usize,
    /// PIG of the played `(state, control)` before the transition.
    pub pig: f64,
    /// Missing information over all states before the transition.
    pub mi_total: f64,
    /// Missing information over the metric subset before the transition.
    pub mi_subset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationLog {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub horizon: usize,
    pub records: Vec<ExplorationRecord>,
    /// Learner counts after all periods.
    pub final_counts: CountTensor,
    /// Missing information after the last transition.
    pub final_mi_total: f64,
    pub final_mi_subset: f64,
}

impl ExplorationLog {
    /// Sum of collected PIG, accumulated from the last period backwards
    /// (the association used by the planners' value recursions).
    pub fn total_pig(&self) -> f64 {
        self.records.iter().rev().fold(0.0, |acc, r| r.pig + acc)
    }

    /// Missing information after `k` transitions for `k = 0..=horizon`.
    pub fn mi_total_curve(&self) -> Vec<f64> {
        let mut curve: Vec<f64> = self.records.iter().map(|r| r.mi_total).collect();
        curve.push(self.final_mi_total);
        curve
    }

    pub fn mi_subset_curve(&self) -> Vec<f64> {
        let mut curve: Vec<f64> = self.records.iter().map(|r| r.mi_subset).collect();
        curve.push(self.final_mi_subset);
        curve
    }

    /// Counts after each prefix of the log, `k = 0..=horizon`.
    pub fn count_history(&self) -> Vec<CountTensor> {
        let mut f =
            CountTensor::zeros(self.final_counts.n_states(), self.final_counts.n_controls());
        let mut history = Vec::with_capacity(self.records.len() + 1);
        history.push(f.clone());
        for r in &self.records {
            f.record(r.control, r.state, r.next_state)
                .expect("logged indices are valid");
            history.push(f.clone());
        }
        history
    }

    /// Checks the period numbering and, for non-teleporting strategies, that
    /// each period starts where the previous one ended.
    pub fn check_invariants(&self) -> Result<()> {
        if self.records.len() != self.horizon {
            return Err(Error::Config(format!(
                "log has {} records for horizon {}",
                self.records.len(),
                self.horizon
            )));
        }
        for (k, r) in self.records.iter().enumerate() {
            if r.period != k {
                return Err(Error::Config(format!("record {k} has period {}", r.period)));
            }
        }
        if !self.strategy.teleports() {
            for pair in self.records.windows(2) {
                if pair[0].next_state != pair[1].state {
                    return Err(Error::Config(format!(
                        "period {} ends in {} but period {} starts in {}",
                        pair[0].period, pair[0].next_state, pair[1].period, pair[1].state
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Uniform draw from `0..n_controls`.
pub fn random_control(n_controls: usize, rng: &mut RngStream) -> usize {
    assert!(n_controls >= 1, "need at least one control");
    rng.below(n_controls)
}

/// `argmax_u PIG(i, u, F)`, ties to the lowest control index.
pub fn pig_greedy_control(i: usize, f: &CountTensor, prior: DirichletPrior) -> Result<usize> {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for u in 0..f.n_controls() {
        let v = pig(i, u, f, prior)?;
        if v > best_value {
            best = u;
            best_value = v;
        }
    }
    Ok(best)
}

/// `argmax_(i, u) PIG(i, u, F)`, ties to the lowest state, then control.
pub fn jpig_greedy_pair(f: &CountTensor, prior: DirichletPrior) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_value = f64::NEG_INFINITY;
    for i in 0..f.n_states() {
        for u in 0..f.n_controls() {
            let v = pig(i, u, f, prior).expect("indices in range");
            if v > best_value {
                best = (i, u);
                best_value = v;
            }
        }
    }
    best
}

/// Simulates policies of a given nesting depth on the black-box chain.
/// Depth 0 is PIG greedy; depth `d > 0` is rollout over the depth `d - 1`
/// policy.
struct Planner<'a> {
    env: &'a Cmc,
    prior: DirichletPrior,
    repeats: usize,
}

impl Planner<'_> {
    fn choose(
        &self,
        depth: u8,
        i: usize,
        f: &CountTensor,
        k: usize,
        horizon: usize,
        rng: &RngStream,
    ) -> Result<usize> {
        if depth == 0 {
            pig_greedy_control(i, f, self.prior)
        } else {
            self.rollout(depth, i, f, k, horizon, rng)
        }
    }

    /// Total PIG collected by the depth-`depth` policy from `(start, f)` at
    /// period `k` to the horizon.
    fn policy_value(
        &self,
        depth: u8,
        start: usize,
        mut f: CountTensor,
        k: usize,
        horizon: usize,
        rng: &RngStream,
    ) -> Result<f64> {
        let mut env_rng = rng.fork(0);
        let mut state = start;
        let mut collected = Vec::with_capacity(horizon.saturating_sub(k));
        for t in k..horizon {
            let u = self.choose(depth, state, &f, t, horizon, &rng.fork(1 + t as u64))?;
            collected.push(pig(state, u, &f, self.prior)?);
            let j = self.env.sample_transition(state, u, &mut env_rng)?;
            f.record(u, state, j)?;
            state = j;
        }
        Ok(collected.iter().rev().fold(0.0, |acc, &v| v + acc))
    }

    fn rollout(
        &self,
        depth: u8,
        i: usize,
        f: &CountTensor,
        k: usize,
        horizon: usize,
        rng: &RngStream,
    ) -> Result<usize> {
        if k >= horizon {
            return Err(Error::HorizonExceeded { period: k, horizon });
        }
        let base = self.choose(depth - 1, i, f, k, horizon, &rng.fork(0))?;
        let n_controls = f.n_controls();
        let mut q = Vec::with_capacity(n_controls);
        for u in 0..n_controls {
            let mut tail = 0.0;
            for r in 0..self.repeats {
                let sample_rng = rng.fork(1 + (u * self.repeats + r) as u64);
                let j = self.env.sample_transition(i, u, &mut sample_rng.fork(0))?;
                let next = f.increment(u, i, j)?;
                tail +=
                    self.policy_value(depth - 1, j, next, k + 1, horizon, &sample_rng.fork(1))?;
            }
            q.push(pig(i, u, f, self.prior)? + tail / self.repeats as f64);
        }
        let mut best = base;
        for u in 0..n_controls {
            if q[u] > q[best] {
                best = u;
            }
        }
        Ok(best)
    }
}

/// Total PIG collected by PIG greedy from `(start, F)` at period `k` to the
/// horizon, sampling transitions from `env`. The caller's counts are not
/// touched.
pub fn base_policy_value(
    start: usize,
    f: &CountTensor,
    k: usize,
    horizon: usize,
    env: &Cmc,
    prior: DirichletPrior,
    rng: &RngStream,
) -> Result<f64> {
    check_index("state", start, env.n_states())?;
    let planner = Planner {
        env,
        prior,
        repeats: 1,
    };
    planner.policy_value(0, start, f.clone(), k, horizon, rng)
}

/// One-step lookahead control: maximises `PIG(i, u, F)` plus the Monte
/// Carlo average of the base policy's value from the sampled successor.
/// Ties go to the base policy's own choice, then to the lowest index.
#[allow(clippy::too_many_arguments)]
pub fn rollout_control(
    i: usize,
    f: &CountTensor,
    k: usize,
    horizon: usize,
    env: &Cmc,
    prior: DirichletPrior,
    config: &RolloutConfig,
    rng: &RngStream,
) -> Result<usize> {
    config.validate()?;
    check_index("state", i, env.n_states())?;
    let planner = Planner {
        env,
        prior,
        repeats: config.repeats_for(env),
    };
    planner.rollout(config.nesting_depth, i, f, k, horizon, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpSolution {
    pub value: f64,
    /// `None` when no periods remain.
    pub best_control: Option<usize>,
}

/// Exact finite-horizon value of expected collected PIG from `(i, F)` at
/// period `k`, expanding every hypothetical count update under the true
/// transition probabilities. Only for small instances.
pub fn exact_dp(
    i: usize,
    f: &CountTensor,
    k: usize,
    horizon: usize,
    env: &Cmc,
    prior: DirichletPrior,
) -> Result<DpSolution> {
    check_index("state", i, env.n_states())?;
    if k > horizon {
        return Err(Error::HorizonExceeded { period: k, horizon });
    }
    let remaining = horizon - k;
    let branching = (env.n_states() * env.n_controls()) as u64;
    let within_budget = u32::try_from(remaining)
        .ok()
        .and_then(|r| branching.checked_pow(r))
        .is_some_and(|nodes| nodes <= EXACT_DP_NODE_LIMIT);
    if !within_budget {
        return Err(Error::IntractableHorizon {
            remaining,
            limit: EXACT_DP_NODE_LIMIT,
        });
    }
    let mut counts = f.clone();
    dp_recurse(i, &mut counts, remaining, env, prior)
}

fn dp_recurse(
    i: usize,
    f: &mut CountTensor,
    remaining: usize,
    env: &Cmc,
    prior: DirichletPrior,
) -> Result<DpSolution> {
    if remaining == 0 {
        return Ok(DpSolution {
            value: 0.0,
            best_control: None,
        });
    }
    let mut best = DpSolution {
        value: f64::NEG_INFINITY,
        best_control: None,
    };
    for u in 0..env.n_controls() {
        let mut expected = 0.0;
        for (j, &p) in env.transitions().row(u, i).iter().enumerate() {
            if p > 0.0 {
                let mut next = f.increment(u, i, j)?;
                expected += p * dp_recurse(j, &mut next, remaining - 1, env, prior)?.value;
            }
        }
        let q = pig(i, u, f, prior)? + expected;
        if q > best.value {
            best = DpSolution {
                value: q,
                best_control: Some(u),
            };
        }
    }
    Ok(best)
}

/// Runs `horizon` exploration periods from `start` and logs them.
///
/// Each period the strategy picks `(i, u)`, the PIG of that pair and the
/// current missing information are recorded, `j` is drawn from the chain
/// and `F[u][i][j]` is incremented. Non-teleporting strategies then move to
/// `j`; JPIG greedy picks its next state from the next joint maximisation.
#[allow(clippy::too_many_arguments)]
pub fn explore(
    strategy: StrategyKind,
    env: &Cmc,
    start: usize,
    horizon: usize,
    prior: DirichletPrior,
    seed: u64,
    metric_subset: Option<&[usize]>,
) -> Result<ExplorationLog> {
    strategy.validate()?;
    env.validate()?;
    check_index("state", start, env.n_states())?;
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let root = RngStream::new(seed);
    let mut env_rng = root.fork(0);
    let mut control_rng = root.fork(1);
    let plan_rng = root.fork(2);

    let mut f = CountTensor::for_cmc(env);
    let mut state = start;
    let mut records = Vec::with_capacity(horizon);
    let subset_mi = |f: &CountTensor, total: f64| match metric_subset {
        Some(states) => missing_information(env, f, prior, Some(states)),
        None => Ok(total),
    };
    for k in 0..horizon {
        let (i, u) = match strategy {
            StrategyKind::Random => (state, random_control(env.n_controls(), &mut control_rng)),
            StrategyKind::PigGreedy => (state, pig_greedy_control(state, &f, prior)?),
            StrategyKind::JpigGreedy => jpig_greedy_pair(&f, prior),
            StrategyKind::PigRollout(cfg) => (
                state,
                rollout_control(
                    state,
                    &f,
                    k,
                    horizon,
                    env,
                    prior,
                    &cfg,
                    &plan_rng.fork(k as u64),
                )?,
            ),
        };
        let pig_value = pig(i, u, &f, prior)?;
        let mi_total = missing_information(env, &f, prior, None)?;
        let mi_subset = subset_mi(&f, mi_total)?;
        let j = env.sample_transition(i, u, &mut env_rng)?;
        f.record(u, i, j)?;
        records.push(ExplorationRecord {
            period: k,
            state: i,
            control: u,
            next_state: j,
            pig: pig_value,
            mi_total,
            mi_subset,
        });
        state = j;
    }
    let final_mi_total = missing_information(env, &f, prior, None)?;
    let final_mi_subset = subset_mi(&f, final_mi_total)?;
    Ok(ExplorationLog {
        strategy,
        seed,
        horizon,
        records,
        final_counts: f,
        final_mi_total,
        final_mi_subset,
    })
}
