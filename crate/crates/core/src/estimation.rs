//! Transition counts, the Dirichlet posterior-mean estimate, and the
//! information measures built on it. All information quantities are in nats.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cmc::{Cmc, Transitions};
use crate::error::{check_index, Error, Result};

/// Symmetric Dirichlet pseudo-count added to every outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletPrior {
    alpha: f64,
}

impl DirichletPrior {
    pub const DEFAULT_ALPHA: f64 = 0.05;

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(DirichletPrior { alpha })
        } else {
            Err(Error::InvalidPrior(alpha))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for DirichletPrior {
    fn default() -> Self {
        DirichletPrior {
            alpha: Self::DEFAULT_ALPHA,
        }
    }
}

/// Observed transition counts `F[u][i][j]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountTensor {
    n_states: usize,
    n_controls: usize,
    counts: Vec<u64>,
}

impl CountTensor {
    pub fn zeros(n_states: usize, n_controls: usize) -> Self {
        CountTensor {
            n_states,
            n_controls,
            counts: vec![0; n_controls * n_states * n_states],
        }
    }

    pub fn for_cmc(cmc: &Cmc) -> Self {
        Self::zeros(cmc.n_states(), cmc.n_controls())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_controls(&self) -> usize {
        self.n_controls
    }

    fn check(&self, u: usize, i: usize) -> Result<()> {
        check_index("control", u, self.n_controls)?;
        check_index("state", i, self.n_states)
    }

    fn offset(&self, u: usize, i: usize) -> usize {
        (u * self.n_states + i) * self.n_states
    }

    pub fn row(&self, u: usize, i: usize) -> Result<&[u64]> {
        self.check(u, i)?;
        let start = self.offset(u, i);
        Ok(&self.counts[start..start + self.n_states])
    }

    pub fn get(&self, u: usize, i: usize, j: usize) -> Result<u64> {
        check_index("state", j, self.n_states)?;
        Ok(self.row(u, i)?[j])
    }

    /// Records one observed transition in place.
    pub fn record(&mut self, u: usize, i: usize, j: usize) -> Result<()> {
        self.check(u, i)?;
        check_index("state", j, self.n_states)?;
        let k = self.offset(u, i) + j;
        self.counts[k] += 1;
        Ok(())
    }

    /// Copy of `self` with one extra `(u, i, j)` transition.
    pub fn increment(&self, u: usize, i: usize, j: usize) -> Result<CountTensor> {
        let mut next = self.clone();
        next.record(u, i, j)?;
        Ok(next)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_json(&self) -> String {
        let mut counts = Vec::new();
        for u in 0..self.n_controls {
            for i in 0..self.n_states {
                for j in 0..self.n_states {
                    let n = self.counts[self.offset(u, i) + j];
                    if n > 0 {
                        counts.push(CountEntry { u, i, j, n });
                    }
                }
            }
        }
        let doc = CountDocument {
            n_states: self.n_states,
            n_controls: self.n_controls,
            counts,
        };
        serde_json::to_string_pretty(&doc).expect("counts serialise")
    }

    pub fn from_json(document: &str) -> Result<CountTensor> {
        let doc: CountDocument = serde_json::from_str(document).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let mut f = CountTensor::zeros(doc.n_states, doc.n_controls);
        for e in doc.counts {
            f.check(e.u, e.i)?;
            check_index("state", e.j, f.n_states)?;
            let k = f.offset(e.u, e.i) + e.j;
            f.counts[k] += e.n;
        }
        Ok(f)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CountEntry {
    u: usize,
    i: usize,
    j: usize,
    n: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CountDocument {
    n_states: usize,
    n_controls: usize,
    counts: Vec<CountEntry>,
}

fn posterior_from_counts(counts: &[u64], alpha: f64, out: &mut Vec<f64>) {
    let total: f64 = counts.iter().map(|&c| c as f64 + alpha).sum();
    out.clear();
    out.extend(counts.iter().map(|&c| (c as f64 + alpha) / total));
}

/// Posterior-mean estimate `(F[u][i][j] + a) / sum_j' (F[u][i][j'] + a)`.
pub fn posterior_row(
    f: &CountTensor,
    prior: DirichletPrior,
    u: usize,
    i: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(f.n_states);
    posterior_from_counts(f.row(u, i)?, prior.alpha, &mut out);
    Ok(out)
}

/// The full estimated transition tensor.
pub fn estimate_transitions(f: &CountTensor, prior: DirichletPrior) -> Transitions {
    let mut row = Vec::new();
    let mut probs = Vec::with_capacity(f.counts.len());
    for u in 0..f.n_controls {
        for i in 0..f.n_states {
            let start = f.offset(u, i);
            posterior_from_counts(&f.counts[start..start + f.n_states], prior.alpha, &mut row);
            probs.extend_from_slice(&row);
        }
    }
    let mut it = probs.into_iter();
    Transitions::from_fn(f.n_states, f.n_controls, |_, _, _| it.next().unwrap())
}

/// `sum_j p_j ln(p_j / q_j)`, with `0 ln(0/q) = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut total = 0.0;
    for (index, (&pj, &qj)) in p.iter().zip(q).enumerate() {
        if pj > 0.0 {
            if qj <= 0.0 {
                return Err(Error::UnsupportedSupport { index });
            }
            total += pj * (pj / qj).ln();
        }
    }
    Ok(total.max(0.0))
}

/// KL for rows already known to be the same length with `q > 0`.
fn kl_positive(p: &[f64], q: &[f64]) -> f64 {
    let total: f64 = p
        .iter()
        .zip(q)
        .filter(|(&pj, _)| pj > 0.0)
        .map(|(&pj, &qj)| pj * (pj / qj).ln())
        .sum();
    total.max(0.0)
}

/// Predicted information gain of playing `u` in state `i`: the expected KL
/// divergence from the current estimate of row `(u, i)` to the estimate
/// after one more hypothetical observation, weighted by the current
/// estimate. Never looks at the true chain.
pub fn pig(i: usize, u: usize, f: &CountTensor, prior: DirichletPrior) -> Result<f64> {
    let counts = f.row(u, i)?;
    let mut current = Vec::with_capacity(counts.len());
    posterior_from_counts(counts, prior.alpha, &mut current);
    let mut hypothetical = counts.to_vec();
    let mut updated = Vec::with_capacity(counts.len());
    let mut total = 0.0;
    for (target, &weight) in current.iter().enumerate() {
        hypothetical[target] += 1;
        posterior_from_counts(&hypothetical, prior.alpha, &mut updated);
        hypothetical[target] -= 1;
        total += weight * kl_positive(&updated, &current);
    }
    Ok(total)
}

fn check_shape(true_cmc: &Cmc, f: &CountTensor) -> Result<()> {
    if true_cmc.n_states() != f.n_states || true_cmc.n_controls() != f.n_controls {
        return Err(Error::ShapeMismatch(format!(
            "chain is {}x{} (states x controls), counts are {}x{}",
            true_cmc.n_states(),
            true_cmc.n_controls(),
            f.n_states,
            f.n_controls
        )));
    }
    Ok(())
}

fn row_missing_information(
    true_cmc: &Cmc,
    f: &CountTensor,
    prior: DirichletPrior,
    i: usize,
    u: usize,
    buf: &mut Vec<f64>,
) -> f64 {
    let start = f.offset(u, i);
    posterior_from_counts(&f.counts[start..start + f.n_states], prior.alpha, buf);
    kl_positive(true_cmc.transitions().row(u, i), buf)
}

/// Sum over states in `subset` (all states when `None`) and all controls of
/// `KL(p(.|i,u) || p_hat(.|i,u))`.
pub fn missing_information(
    true_cmc: &Cmc,
    f: &CountTensor,
    prior: DirichletPrior,
    subset: Option<&[usize]>,
) -> Result<f64> {
    check_shape(true_cmc, f)?;
    let mut buf = Vec::with_capacity(f.n_states);
    let mut total = 0.0;
    let mut add_state = |i: usize, total: &mut f64| {
        for u in 0..f.n_controls {
            *total += row_missing_information(true_cmc, f, prior, i, u, &mut buf);
        }
    };
    match subset {
        Some(states) => {
            for &i in states {
                check_index("state", i, f.n_states)?;
                add_state(i, &mut total);
            }
        }
        None => (0..f.n_states).for_each(|i| add_state(i, &mut total)),
    }
    Ok(total)
}

/// The individual terms of [`missing_information`], keyed by `(i, u)`.
pub fn per_row_missing_information(
    true_cmc: &Cmc,
    f: &CountTensor,
    prior: DirichletPrior,
) -> Result<BTreeMap<(usize, usize), f64>> {
    check_shape(true_cmc, f)?;
    let mut buf = Vec::with_capacity(f.n_states);
    let mut terms = BTreeMap::new();
    for i in 0..f.n_states {
        for u in 0..f.n_controls {
            terms.insert(
                (i, u),
                row_missing_information(true_cmc, f, prior, i, u, &mut buf),
            );
        }
    }
    Ok(terms)
}
