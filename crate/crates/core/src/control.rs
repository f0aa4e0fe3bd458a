//! Discounted-cost control on a (true or estimated) chain: exact policy
//! evaluation by a direct linear solve, policy iteration, a value-iteration
//! cross-check, and the learned-model comparison that scores a policy
//! optimised on an estimate under the true chain.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cmc::{Cmc, Transitions};
use crate::error::{Error, Result};
use crate::estimation::{estimate_transitions, CountTensor, DirichletPrior};

/// Residual bound every policy evaluation must meet.
pub const EVALUATION_RESIDUAL: f64 = 1e-9;

/// Relative margin by which a new control must beat the incumbent before
/// policy iteration switches to it.
const IMPROVEMENT_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StationaryPolicy(pub Vec<usize>);

impl StationaryPolicy {
    pub fn constant(n_states: usize, control: usize) -> Self {
        StationaryPolicy(vec![control; n_states])
    }

    pub fn control(&self, i: usize) -> usize {
        self.0[i]
    }

    fn check(&self, transitions: &Transitions) -> Result<()> {
        if self.0.len() != transitions.n_states() {
            return Err(Error::ShapeMismatch(format!(
                "policy covers {} states, chain has {}",
                self.0.len(),
                transitions.n_states()
            )));
        }
        if let Some(&u) = self.0.iter().find(|&&u| u >= transitions.n_controls()) {
            return Err(Error::IndexOutOfRange {
                what: "control",
                index: u,
                size: transitions.n_controls(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Costs `g(i, u)` with a discount factor in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedTask {
    n_states: usize,
    n_controls: usize,
    costs: Vec<f64>,
    discount: f64,
}

impl DiscountedTask {
    /// `costs[i * n_controls + u]`.
    pub fn new(n_states: usize, n_controls: usize, costs: Vec<f64>, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidDiscount(discount));
        }
        if costs.len() != n_states * n_controls {
            return Err(Error::ShapeMismatch(format!(
                "{} costs for {n_states} states and {n_controls} controls",
                costs.len()
            )));
        }
        Ok(DiscountedTask {
            n_states,
            n_controls,
            costs,
            discount,
        })
    }

    /// Uses the chain's own cost table.
    pub fn from_cmc(cmc: &Cmc, discount: f64) -> Result<Self> {
        Self::new(
            cmc.n_states(),
            cmc.n_controls(),
            cmc.costs().to_vec(),
            discount,
        )
    }

    pub fn cost(&self, i: usize, u: usize) -> f64 {
        self.costs[i * self.n_controls + u]
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    fn check(&self, transitions: &Transitions) -> Result<()> {
        if transitions.n_states() != self.n_states || transitions.n_controls() != self.n_controls {
            return Err(Error::ShapeMismatch(format!(
                "task is {}x{}, chain is {}x{}",
                self.n_states,
                self.n_controls,
                transitions.n_states(),
                transitions.n_controls()
            )));
        }
        Ok(())
    }

    /// `g(i, u) + discount * sum_j p(j | i, u) J(j)`
    fn q_value(&self, transitions: &Transitions, values: &[f64], i: usize, u: usize) -> f64 {
        let expected: f64 = transitions
            .row(u, i)
            .iter()
            .zip(values)
            .map(|(p, v)| p * v)
            .sum();
        self.cost(i, u) + self.discount * expected
    }
}

/// Solves `(I - discount * P_mu) J = g_mu` by LU with partial pivoting.
pub fn evaluate_policy(
    transitions: &Transitions,
    policy: &StationaryPolicy,
    task: &DiscountedTask,
) -> Result<ValueFunction> {
    task.check(transitions)?;
    policy.check(transitions)?;
    let n = transitions.n_states();
    let system = DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - task.discount * transitions.get(policy.control(i), i, j)
    });
    let rhs = DVector::from_fn(n, |i, _| task.cost(i, policy.control(i)));
    let solution = system
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem)?;
    let residual = (&system * &solution - &rhs).amax();
    if residual.is_nan() || residual >= EVALUATION_RESIDUAL {
        return Err(Error::SingularSystem);
    }
    Ok(ValueFunction(solution.iter().copied().collect()))
}

/// Per-state argmin of the one-step lookahead cost, ties to the lowest
/// control index.
pub fn improve_policy(
    transitions: &Transitions,
    values: &ValueFunction,
    task: &DiscountedTask,
) -> Result<StationaryPolicy> {
    task.check(transitions)?;
    if values.0.len() != transitions.n_states() {
        return Err(Error::ShapeMismatch("value function length".into()));
    }
    let choice = (0..transitions.n_states())
        .map(|i| {
            let mut best = 0;
            let mut best_q = f64::INFINITY;
            for u in 0..transitions.n_controls() {
                let q = task.q_value(transitions, &values.0, i, u);
                if q < best_q {
                    best = u;
                    best_q = q;
                }
            }
            best
        })
        .collect();
    Ok(StationaryPolicy(choice))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyIterationResult {
    pub policy: StationaryPolicy,
    pub values: ValueFunction,
    /// Value of every evaluated policy, in order.
    pub history: Vec<ValueFunction>,
}

/// Alternates evaluation and improvement until the policy stops changing.
/// A state only switches control when the improvement beats the incumbent
/// by more than floating-point noise, so the loop cannot cycle between
/// equal-cost controls.
pub fn policy_iteration(
    transitions: &Transitions,
    task: &DiscountedTask,
    initial: &StationaryPolicy,
) -> Result<PolicyIterationResult> {
    task.check(transitions)?;
    initial.check(transitions)?;
    let mut policy = initial.clone();
    let mut history = Vec::new();
    loop {
        let values = evaluate_policy(transitions, &policy, task)?;
        let proposal = improve_policy(transitions, &values, task)?;
        let mut changed = false;
        let next: Vec<usize> = (0..transitions.n_states())
            .map(|i| {
                let current = policy.control(i);
                let candidate = proposal.control(i);
                if candidate == current {
                    return current;
                }
                let q_current = task.q_value(transitions, &values.0, i, current);
                let q_candidate = task.q_value(transitions, &values.0, i, candidate);
                if q_candidate < q_current - IMPROVEMENT_MARGIN * (1.0 + q_current.abs()) {
                    changed = true;
                    candidate
                } else {
                    current
                }
            })
            .collect();
        history.push(values.clone());
        if !changed {
            return Ok(PolicyIterationResult {
                policy,
                values,
                history,
            });
        }
        policy = StationaryPolicy(next);
    }
}

/// Largest Bellman residual `|J(i) - min_u [g + discount * P J]|`.
pub fn bellman_residual(
    transitions: &Transitions,
    values: &ValueFunction,
    task: &DiscountedTask,
) -> f64 {
    (0..transitions.n_states())
        .map(|i| {
            let best = (0..transitions.n_controls())
                .map(|u| task.q_value(transitions, &values.0, i, u))
                .fold(f64::INFINITY, f64::min);
            (values.get(i) - best).abs()
        })
        .fold(0.0, f64::max)
}

/// Bellman fixed-point iteration from `J = 0`, stopped once successive
/// iterates are within `tolerance * (1 - discount) / (2 * discount)`, which
/// bounds the distance to the optimum by `tolerance`.
pub fn value_iteration_oracle(
    transitions: &Transitions,
    task: &DiscountedTask,
    tolerance: f64,
) -> Result<ValueFunction> {
    task.check(transitions)?;
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::Config(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let n = transitions.n_states();
    let gamma = task.discount;
    let threshold = if gamma == 0.0 {
        f64::INFINITY
    } else {
        tolerance * (1.0 - gamma) / (2.0 * gamma)
    };
    let mut values = vec![0.0; n];
    loop {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                (0..transitions.n_controls())
                    .map(|u| task.q_value(transitions, &values, i, u))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let change = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        if change < threshold {
            return Ok(ValueFunction(values));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnedModelEvaluation {
    /// Optimal policy on the estimated chain.
    pub policy: StationaryPolicy,
    /// That policy's optimal cost as predicted by the estimate.
    pub estimated_values: ValueFunction,
    /// That policy's cost under the true chain.
    pub true_values: ValueFunction,
}

/// Optimises on the posterior-mean estimate built from `counts`, then scores
/// the resulting policy under the true transitions.
pub fn evaluate_learned_model(
    true_cmc: &Cmc,
    counts: &CountTensor,
    prior: DirichletPrior,
    task: &DiscountedTask,
) -> Result<LearnedModelEvaluation> {
    if counts.n_states() != true_cmc.n_states() || counts.n_controls() != true_cmc.n_controls() {
        return Err(Error::ShapeMismatch("counts do not match the chain".into()));
    }
    let estimate = estimate_transitions(counts, prior);
    let initial = StationaryPolicy::constant(true_cmc.n_states(), 0);
    let solved = policy_iteration(&estimate, task, &initial)?;
    let true_values = evaluate_policy(true_cmc.transitions(), &solved.policy, task)?;
    Ok(LearnedModelEvaluation {
        policy: solved.policy,
        estimated_values: solved.values,
        true_values,
    })
}
