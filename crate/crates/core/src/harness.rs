//! Reproducible experiments: builds an environment, runs every strategy for
//! the configured number of trials, and writes the results as CSV/JSON.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::cmc::{build_embedded, build_sequential3, build_two_state, load_cmc, Cmc};
use crate::control::{evaluate_learned_model, DiscountedTask, LearnedModelEvaluation};
use crate::error::{Error, Result};
use crate::estimation::{per_row_missing_information, DirichletPrior};
use crate::exploration::{explore, ExplorationLog, RolloutConfig, StrategyKind};
use crate::rng::RngStream;

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_HORIZON: usize = 20;
pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_DISCOUNT: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    /// Two-state chain with self-loop probability `p` under control 0.
    TwoState {
        p: f64,
    },
    /// Two-state chain embedded in `n` states, with the task costs.
    Embedded {
        n: usize,
    },
    /// Three-state ordered-control stand-in chain.
    Sequential3,
    File(PathBuf),
}

impl EnvSpec {
    /// Resolves a CLI environment name. Anything that is not a builtin name
    /// is treated as a path to a CMC document.
    pub fn from_name(name: &str, p: Option<f64>, n_states: Option<usize>) -> EnvSpec {
        match name {
            "fig1" => EnvSpec::TwoState {
                p: p.unwrap_or(0.0),
            },
            "fig4" => EnvSpec::Embedded {
                n: n_states.unwrap_or(100),
            },
            "seq3" => EnvSpec::Sequential3,
            path => EnvSpec::File(PathBuf::from(path)),
        }
    }

    pub fn build(&self) -> Result<Cmc> {
        match self {
            EnvSpec::TwoState { p } => build_two_state(*p),
            EnvSpec::Embedded { n } => build_embedded(*n),
            EnvSpec::Sequential3 => Ok(build_sequential3()),
            EnvSpec::File(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                load_cmc(&text)
            }
        }
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSpec::TwoState { p } => write!(f, "fig1(p={p})"),
            EnvSpec::Embedded { n } => write!(f, "fig4(n={n})"),
            EnvSpec::Sequential3 => write!(f, "seq3"),
            EnvSpec::File(path) => write!(f, "{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BuiltinParameter {
    pub name: &'static str,
    pub range: &'static str,
    pub default: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuiltinInfo {
    pub name: &'static str,
    pub parameters: Vec<BuiltinParameter>,
    pub description: &'static str,
}

pub fn describe_builtins() -> Vec<BuiltinInfo> {
    vec![
        BuiltinInfo {
            name: "fig1",
            parameters: vec![BuiltinParameter {
                name: "p",
                range: "[0,1]",
                default: "0",
            }],
            description: "2 states, 2 controls. Control 0: state 0 stays with probability p, \
                          else moves to absorbing state 1. Control 1: every state stays put.",
        },
        BuiltinInfo {
            name: "fig4",
            parameters: vec![BuiltinParameter {
                name: "n-states",
                range: ">= 2",
                default: "100",
            }],
            description: "fig1 with p=0 embedded among n states; states 2.. are absorbing. \
                          Costs g(0,0)=2, g(0,1)=1, zero elsewhere.",
        },
        BuiltinInfo {
            name: "seq3",
            parameters: vec![],
            description: "stand-in for Fig. 7: our own 3-state, 3-control deterministic chain \
                          where reaching every state needs control 2 before control 0 in state 0.",
        },
    ]
}

/// Human-readable listing of [`describe_builtins`].
pub fn builtins_listing() -> String {
    let mut out = String::new();
    for b in describe_builtins() {
        let params: Vec<String> = b
            .parameters
            .iter()
            .map(|p| format!("{} in {} (default {})", p.name, p.range, p.default))
            .collect();
        let params = if params.is_empty() {
            "no parameters".to_string()
        } else {
            params.join(", ")
        };
        out.push_str(&format!("{}: {}\n    {}\n", b.name, params, b.description));
    }
    out
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub strategies: Vec<StrategyKind>,
    pub horizon: usize,
    /// Trials for runs that depend on the seed. Seed-independent runs
    /// (deterministic strategy on a deterministic chain) run once.
    pub trials: usize,
    pub alpha: f64,
    pub discount: f64,
    pub seed: u64,
    pub start: usize,
    pub metric_subset: Option<Vec<usize>>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// All four strategies with the default horizon, prior, discount, seed
    /// and trial count, starting in state 0.
    pub fn new(env: EnvSpec, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            env,
            strategies: vec![
                StrategyKind::Random,
                StrategyKind::PigGreedy,
                StrategyKind::JpigGreedy,
                StrategyKind::PigRollout(RolloutConfig::default()),
            ],
            horizon: DEFAULT_HORIZON,
            trials: DEFAULT_TRIALS,
            alpha: DirichletPrior::DEFAULT_ALPHA,
            discount: DEFAULT_DISCOUNT,
            seed: DEFAULT_SEED,
            start: 0,
            metric_subset: None,
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self, env: &Cmc) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("periods must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies given".into()));
        }
        for s in &self.strategies {
            s.validate()?;
        }
        DirichletPrior::new(self.alpha)?;
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::InvalidDiscount(self.discount));
        }
        if self.start >= env.n_states() {
            return Err(Error::Config(format!(
                "start state {} out of range for {} states",
                self.start,
                env.n_states()
            )));
        }
        if let Some(subset) = &self.metric_subset {
            if let Some(&bad) = subset.iter().find(|&&i| i >= env.n_states()) {
                return Err(Error::Config(format!("subset state {bad} out of range")));
            }
        }
        Ok(())
    }
}

/// Seed of trial `trial` for the strategy at position `index`.
pub fn trial_seed(base: u64, index: usize, trial: usize) -> u64 {
    RngStream::new(base)
        .fork(index as u64)
        .fork(trial as u64)
        .next_u64()
}

#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub strategy: StrategyKind,
    pub logs: Vec<ExplorationLog>,
    /// Downstream task result for the first trial's learned model.
    pub evaluation: LearnedModelEvaluation,
}

impl StrategyRun {
    /// Trial-averaged missing information after `k` transitions,
    /// `k = 0..=horizon`, as `(total, subset)`.
    pub fn mean_curves(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.logs.len() as f64;
        let len = self.logs[0].horizon + 1;
        let mut total = vec![0.0; len];
        let mut subset = vec![0.0; len];
        for log in &self.logs {
            for (k, (t, s)) in log
                .mi_total_curve()
                .into_iter()
                .zip(log.mi_subset_curve())
                .enumerate()
            {
                total[k] += t;
                subset[k] += s;
            }
        }
        (
            total.into_iter().map(|v| v / n).collect(),
            subset.into_iter().map(|v| v / n).collect(),
        )
    }

    pub fn mean_final_mi_subset(&self) -> f64 {
        self.logs.iter().map(|l| l.final_mi_subset).sum::<f64>() / self.logs.len() as f64
    }
}

/// Runs every configured strategy without writing anything.
pub fn run_trials(config: &ExperimentConfig, env: &Cmc) -> Result<Vec<StrategyRun>> {
    config.validate(env)?;
    let prior = DirichletPrior::new(config.alpha)?;
    let task = DiscountedTask::from_cmc(env, config.discount)?;
    let subset = config.metric_subset.as_deref();
    config
        .strategies
        .iter()
        .enumerate()
        .map(|(index, &strategy)| {
            let trials = if strategy.is_stochastic_on(env) {
                config.trials
            } else {
                1
            };
            let logs = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let seed = trial_seed(config.seed, index, t);
                    explore(
                        strategy,
                        env,
                        config.start,
                        config.horizon,
                        prior,
                        seed,
                        subset,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let evaluation = evaluate_learned_model(env, &logs[0].final_counts, prior, &task)?;
            Ok(StrategyRun {
                strategy,
                logs,
                evaluation,
            })
        })
        .collect()
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ArtifactBundle {
    pub files: Vec<PathBuf>,
    pub runs: Vec<StrategyRun>,
}

#[derive(Serialize)]
struct ExplorationRow {
    trial: usize,
    period: usize,
    state: usize,
    control: usize,
    next_state: usize,
    pig: f64,
    mi_total: f64,
    mi_subset: f64,
}

#[derive(Serialize)]
struct CurveRow<'a> {
    strategy: &'a str,
    period: usize,
    trials: usize,
    mi_total: f64,
    mi_subset: f64,
}

#[derive(Serialize)]
struct RowCurveRow<'a> {
    strategy: &'a str,
    period: usize,
    state: usize,
    control: usize,
    mi: f64,
}

#[derive(Serialize)]
struct TraceRow<'a> {
    strategy: &'a str,
    period: usize,
    state: usize,
    control: usize,
    next_state: usize,
}

#[derive(Serialize)]
struct TableRow<'a> {
    strategy: &'a str,
    policy_state1: usize,
    true_cost_state1: f64,
}

#[derive(Serialize)]
struct TableEntry<'a> {
    strategy: &'a str,
    #[serde(flatten)]
    evaluation: &'a LearnedModelEvaluation,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the experiment and writes:
///
/// - `exploration_<strategy>.csv`: every period of every trial
/// - `curves.csv`: trial-averaged missing information per period
/// - `row_curves.csv`: trial-averaged per-(state, control) terms
/// - `policy_trace.csv`: the first trial's states and controls
/// - `table1.csv` / `table1.json`: downstream task results
/// - `counts_<strategy>.json`: the first trial's final counts
pub fn run_experiment(config: &ExperimentConfig) -> Result<ArtifactBundle> {
    let env = config.env.build()?;
    let runs = run_trials(config, &env)?;
    let prior = DirichletPrior::new(config.alpha)?;
    fs::create_dir_all(&config.out_dir)?;
    let dir = &config.out_dir;
    let mut files = Vec::new();

    for run in &runs {
        let path = dir.join(format!("exploration_{}.csv", run.strategy.name()));
        let rows = run.logs.iter().enumerate().flat_map(|(trial, log)| {
            log.records.iter().map(move |r| ExplorationRow {
                trial,
                period: r.period,
                state: r.state,
                control: r.control,
                next_state: r.next_state,
                pig: r.pig,
                mi_total: r.mi_total,
                mi_subset: r.mi_subset,
            })
        });
        write_csv(&path, rows)?;
        files.push(path);

        let path = dir.join(format!("counts_{}.json", run.strategy.name()));
        fs::write(&path, run.logs[0].final_counts.to_json())?;
        files.push(path);
    }

    let mut curves = Vec::new();
    for run in &runs {
        let (total, subset) = run.mean_curves();
        for (period, (mi_total, mi_subset)) in total.into_iter().zip(subset).enumerate() {
            curves.push(CurveRow {
                strategy: run.strategy.name(),
                period,
                trials: run.logs.len(),
                mi_total,
                mi_subset,
            });
        }
    }
    let path = dir.join("curves.csv");
    write_csv(&path, curves)?;
    files.push(path);

    let row_states: Vec<usize> = match &config.metric_subset {
        Some(s) => s.clone(),
        None => (0..env.n_states()).collect(),
    };
    let mut row_curves = Vec::new();
    for run in &runs {
        let mut sums = vec![vec![0.0; row_states.len() * env.n_controls()]; config.horizon + 1];
        for log in &run.logs {
            for (period, f) in log.count_history().iter().enumerate() {
                let terms = per_row_missing_information(&env, f, prior)?;
                let keys = row_states
                    .iter()
                    .flat_map(|&i| (0..env.n_controls()).map(move |u| (i, u)));
                for (slot, key) in keys.enumerate() {
                    sums[period][slot] += terms[&key];
                }
            }
        }
        let n = run.logs.len() as f64;
        for (period, per_row) in sums.iter().enumerate() {
            let keys = row_states
                .iter()
                .flat_map(|&i| (0..env.n_controls()).map(move |u| (i, u)));
            for ((state, control), total) in keys.zip(per_row) {
                row_curves.push(RowCurveRow {
                    strategy: run.strategy.name(),
                    period,
                    state,
                    control,
                    mi: total / n,
                });
            }
        }
    }
    let path = dir.join("row_curves.csv");
    write_csv(&path, row_curves)?;
    files.push(path);

    let trace = runs.iter().flat_map(|run| {
        run.logs[0].records.iter().map(move |r| TraceRow {
            strategy: run.strategy.name(),
            period: r.period,
            state: r.state,
            control: r.control,
            next_state: r.next_state,
        })
    });
    let path = dir.join("policy_trace.csv");
    write_csv(&path, trace)?;
    files.push(path);

    let table = runs.iter().map(|run| TableRow {
        strategy: run.strategy.name(),
        policy_state1: run.evaluation.policy.control(0),
        true_cost_state1: run.evaluation.true_values.get(0),
    });
    let path = dir.join("table1.csv");
    write_csv(&path, table)?;
    files.push(path);

    let entries: Vec<TableEntry> = runs
        .iter()
        .map(|run| TableEntry {
            strategy: run.strategy.name(),
            evaluation: &run.evaluation,
        })
        .collect();
    let path = dir.join("table1.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&entries).expect("table serialises"),
    )?;
    files.push(path);

    Ok(ArtifactBundle { files, runs })
}

/// Configuration of the one-shot downstream-task reproduction: the
/// 100-state embedded chain, metrics on states 0 and 1.
pub fn table1_config(out_dir: impl Into<PathBuf>) -> ExperimentConfig {
    ExperimentConfig {
        metric_subset: Some(vec![0, 1]),
        ..ExperimentConfig::new(EnvSpec::Embedded { n: 100 }, out_dir)
    }
}
