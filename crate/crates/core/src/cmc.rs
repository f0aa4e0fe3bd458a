//! True controllable Markov chains and the benchmark environments.
//!
//! Learners may only interact with a [`Cmc`] through
//! [`Cmc::sample_transition`]; the transition table is read directly only by
//! metrics, oracles and the downstream evaluation under the true chain.

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::rng::RngStream;

const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Transition tensor `p[u][i][j]`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions {
    n_states: usize,
    n_controls: usize,
    probs: Vec<f64>,
}

impl Transitions {
    /// Builds a tensor from `rows[u][i] = p(. | i, u)` and validates it.
    pub fn from_rows(rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n_controls = rows.len();
        let n_states = rows.first().map_or(0, Vec::len);
        if n_controls == 0 || n_states == 0 {
            return Err(Error::InvalidShape(
                "need at least one state and control".into(),
            ));
        }
        let mut probs = Vec::with_capacity(n_controls * n_states * n_states);
        for (u, per_state) in rows.into_iter().enumerate() {
            if per_state.len() != n_states {
                return Err(Error::InvalidShape(format!(
                    "control {u} has {} rows, expected {n_states}",
                    per_state.len()
                )));
            }
            for (i, row) in per_state.into_iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::InvalidShape(format!(
                        "row (u={u}, i={i}) has length {}, expected {n_states}",
                        row.len()
                    )));
                }
                probs.extend(row);
            }
        }
        let t = Transitions {
            n_states,
            n_controls,
            probs,
        };
        t.validate()?;
        Ok(t)
    }

    /// Builds a tensor from a closure without validating it.
    pub(crate) fn from_fn(
        n_states: usize,
        n_controls: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut probs = Vec::with_capacity(n_controls * n_states * n_states);
        for u in 0..n_controls {
            for i in 0..n_states {
                for j in 0..n_states {
                    probs.push(f(u, i, j));
                }
            }
        }
        Transitions {
            n_states,
            n_controls,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_controls(&self) -> usize {
        self.n_controls
    }

    /// `p(. | i, u)`. Panics on out-of-range indices.
    pub fn row(&self, u: usize, i: usize) -> &[f64] {
        assert!(u < self.n_controls && i < self.n_states);
        let start = (u * self.n_states + i) * self.n_states;
        &self.probs[start..start + self.n_states]
    }

    pub fn get(&self, u: usize, i: usize, j: usize) -> f64 {
        self.row(u, i)[j]
    }

    /// Checks that every entry lies in `[0, 1]` and every row sums to 1.
    pub fn validate(&self) -> Result<()> {
        for u in 0..self.n_controls {
            for i in 0..self.n_states {
                let row = self.row(u, i);
                for (j, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::NegativeProbability { u, i, j });
                    }
                }
                let row_sum: f64 = row.iter().sum();
                if (row_sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::NonStochasticRow { u, i, row_sum });
                }
            }
        }
        Ok(())
    }

    /// True when every entry is exactly 0 or 1.
    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0 || p == 1.0)
    }
}

/// A controllable Markov chain with per-(state, control) costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Cmc {
    transitions: Transitions,
    /// `costs[i * n_controls + u]`
    costs: Vec<f64>,
}

impl Cmc {
    pub fn new(transitions: Transitions) -> Result<Self> {
        transitions.validate()?;
        let costs = vec![0.0; transitions.n_states * transitions.n_controls];
        Ok(Cmc { transitions, costs })
    }

    pub fn with_cost(mut self, i: usize, u: usize, g: f64) -> Result<Self> {
        check_index("state", i, self.n_states())?;
        check_index("control", u, self.n_controls())?;
        let n_controls = self.n_controls();
        self.costs[i * n_controls + u] = g;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.transitions.n_states
    }

    pub fn n_controls(&self) -> usize {
        self.transitions.n_controls
    }

    pub fn transitions(&self) -> &Transitions {
        &self.transitions
    }

    pub fn cost(&self, i: usize, u: usize) -> f64 {
        self.costs[i * self.n_controls() + u]
    }

    /// Cost table indexed `[i * n_controls + u]`.
    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn validate(&self) -> Result<()> {
        self.transitions.validate()
    }

    pub fn is_deterministic(&self) -> bool {
        self.transitions.is_deterministic()
    }

    /// Draws the next state after playing control `u` in state `i`.
    pub fn sample_transition(&self, i: usize, u: usize, rng: &mut RngStream) -> Result<usize> {
        check_index("state", i, self.n_states())?;
        check_index("control", u, self.n_controls())?;
        let row = self.transitions.row(u, i);
        let r = rng.uniform();
        let mut cumulative = 0.0;
        let mut last_supported = 0;
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                cumulative += p;
                last_supported = j;
                if r < cumulative {
                    return Ok(j);
                }
            }
        }
        // rounding left the cumulative sum just below r
        Ok(last_supported)
    }
}

/// Two states, two controls. Control 0 moves state 0 to state 1 with
/// probability `1 - p` and leaves state 1 absorbing; control 1 keeps every
/// state where it is.
pub fn build_two_state(p: f64) -> Result<Cmc> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let transitions = Transitions::from_fn(2, 2, |u, i, j| match (u, i, j) {
        (0, 0, 0) => p,
        (0, 0, 1) => 1.0 - p,
        (0, 1, 1) => 1.0,
        (1, i, j) if i == j => 1.0,
        _ => 0.0,
    });
    Cmc::new(transitions)
}

/// The two-state chain (with `p = 0`) embedded in `n` states. States 2..n
/// are absorbing under both controls. Costs are `g(0, 0) = 2`,
/// `g(0, 1) = 1` and zero elsewhere, so the cheapest policy leaves state 0
/// with control 0.
pub fn build_embedded(n: usize) -> Result<Cmc> {
    if n < 2 {
        return Err(Error::InvalidStateCount(n));
    }
    let transitions = Transitions::from_fn(n, 2, |u, i, j| match (u, i, j) {
        (0, 0, 1) => 1.0,
        (0, 0, _) => 0.0,
        (_, i, j) if i == j => 1.0,
        _ => 0.0,
    });
    Cmc::new(transitions)?
        .with_cost(0, 0, 2.0)?
        .with_cost(0, 1, 1.0)
}

/// A three-state, three-control deterministic chain of our own design,
/// standing in for a benchmark whose transition table was never published.
///
/// ```text
///            control 0   control 1   control 2
///   state 0  -> 2        -> 0        -> 1
///   state 1  -> 0        -> 1        -> 2
///   state 2  -> 2        -> 2        -> 2
/// ```
///
/// State 2 is absorbing. Reaching state 1 requires playing control 2 in
/// state 0 before control 0 sends the chain into state 2, so a greedy
/// explorer that breaks ties toward control 0 only ever sees states 0 and 2.
pub fn build_sequential3() -> Cmc {
    const NEXT: [[usize; 3]; 3] = [[2, 0, 1], [0, 1, 2], [2, 2, 2]];
    let transitions = Transitions::from_fn(3, 3, |u, i, j| f64::from(u8::from(NEXT[i][u] == j)));
    Cmc::new(transitions).expect("sequential chain is stochastic")
}

#[derive(Debug, Serialize, Deserialize)]
struct RowEntry {
    u: usize,
    i: usize,
    row: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CostEntry {
    i: usize,
    u: usize,
    g: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CmcDocument {
    n_states: usize,
    n_controls: usize,
    transitions: Vec<RowEntry>,
    #[serde(default)]
    costs: Vec<CostEntry>,
    /// Reserved per-state control availability `available[i][u]`. Only
    /// all-true masks are accepted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    available: Option<Vec<Vec<bool>>>,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    }
}

/// Parses a CMC JSON document and validates the resulting chain.
pub fn load_cmc(document: &str) -> Result<Cmc> {
    let doc: CmcDocument = serde_json::from_str(document).map_err(parse_error)?;
    let (n, m) = (doc.n_states, doc.n_controls);
    if n == 0 || m == 0 {
        return Err(Error::InvalidShape(
            "need at least one state and control".into(),
        ));
    }
    let mut rows: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; n]; m];
    for entry in doc.transitions {
        check_index("control", entry.u, m)?;
        check_index("state", entry.i, n)?;
        if entry.row.len() != n {
            return Err(Error::InvalidShape(format!(
                "row (u={}, i={}) has length {}, expected {n}",
                entry.u,
                entry.i,
                entry.row.len()
            )));
        }
        let slot = &mut rows[entry.u][entry.i];
        if slot.is_some() {
            return Err(Error::InvalidShape(format!(
                "duplicate row (u={}, i={})",
                entry.u, entry.i
            )));
        }
        *slot = Some(entry.row);
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(u, per_state)| {
            per_state
                .into_iter()
                .enumerate()
                .map(|(i, row)| {
                    row.ok_or_else(|| Error::InvalidShape(format!("missing row (u={u}, i={i})")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(mask) = &doc.available {
        if mask.len() != n || mask.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidShape("availability mask shape".into()));
        }
        if mask.iter().flatten().any(|&a| !a) {
            return Err(Error::InvalidShape(
                "per-state control availability is not supported".into(),
            ));
        }
    }
    let mut cmc = Cmc::new(Transitions::from_rows(rows)?)?;
    for c in doc.costs {
        cmc = cmc.with_cost(c.i, c.u, c.g)?;
    }
    Ok(cmc)
}

/// Serialises a chain to the JSON document format. Zero costs are omitted.
pub fn save_cmc(cmc: &Cmc) -> String {
    let mut transitions = Vec::with_capacity(cmc.n_controls() * cmc.n_states());
    for u in 0..cmc.n_controls() {
        for i in 0..cmc.n_states() {
            transitions.push(RowEntry {
                u,
                i,
                row: cmc.transitions.row(u, i).to_vec(),
            });
        }
    }
    let mut costs = Vec::new();
    for i in 0..cmc.n_states() {
        for u in 0..cmc.n_controls() {
            let g = cmc.cost(i, u);
            if g != 0.0 {
                costs.push(CostEntry { i, u, g });
            }
        }
    }
    let doc = CmcDocument {
        n_states: cmc.n_states(),
        n_controls: cmc.n_controls(),
        transitions,
        costs,
        available: None,
    };
    serde_json::to_string_pretty(&doc).expect("document serialises")
}
