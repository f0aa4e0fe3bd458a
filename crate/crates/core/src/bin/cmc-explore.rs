use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cmc_explore::control::{evaluate_learned_model, DiscountedTask};
use cmc_explore::exploration::{exact_dp, explore, RolloutConfig, StrategyKind};
use cmc_explore::harness::{
    builtins_listing, run_experiment, table1_config, EnvSpec, ExperimentConfig, DEFAULT_DISCOUNT,
    DEFAULT_HORIZON, DEFAULT_SEED, DEFAULT_TRIALS,
};
use cmc_explore::{CountTensor, DirichletPrior, Error};

#[derive(Parser)]
#[command(
    name = "cmc-explore",
    version,
    about = "Informative exploration of controllable Markov chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EnvArgs {
    /// fig1, fig4, seq3, or a path to a CMC JSON document
    #[arg(long)]
    env: String,
    /// Self-loop probability for fig1
    #[arg(long)]
    p: Option<f64>,
    /// State count for fig4
    #[arg(long = "n-states")]
    n_states: Option<usize>,
}

impl EnvArgs {
    fn spec(&self) -> EnvSpec {
        EnvSpec::from_name(&self.env, self.p, self.n_states)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run exploration strategies and write curves, traces and task results
    Explore {
        #[command(flatten)]
        env: EnvArgs,
        /// Comma-separated: random, pig-greedy, jpig-greedy, pig-rollout
        #[arg(long, default_value = "random,pig-greedy,jpig-greedy,pig-rollout")]
        strategies: String,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        periods: usize,
        #[arg(long, default_value_t = DirichletPrior::DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long = "mc-repeats")]
        mc_repeats: Option<usize>,
        #[arg(long, default_value_t = 1)]
        nesting: u8,
        /// States whose rows enter the subset metric, e.g. 0,1
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = DEFAULT_DISCOUNT)]
        discount: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the discounted task on a learned model and score it under the true chain
    Task {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        counts: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DISCOUNT)]
        discount: f64,
        #[arg(long, default_value_t = DirichletPrior::DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Exact finite-horizon PIG value next to greedy and rollout totals
    DpOracle {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        periods: usize,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = DirichletPrior::DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Reproduce the downstream-task table on the 100-state embedded chain
    Table1 {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// List the builtin environments
    Builtins,
}

fn parse_strategies(
    list: &str,
    mc_repeats: Option<usize>,
    nesting: u8,
) -> Result<Vec<StrategyKind>, Error> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let kind: StrategyKind = s.parse()?;
            Ok(match kind {
                StrategyKind::PigRollout(_) => StrategyKind::PigRollout(RolloutConfig {
                    mc_repeats,
                    nesting_depth: nesting,
                }),
                other => other,
            })
        })
        .collect()
}

fn print_table(bundle: &cmc_explore::harness::ArtifactBundle) {
    println!("strategy,policy_state1,true_cost_state1,final_mi_subset");
    for run in &bundle.runs {
        println!(
            "{},{},{},{}",
            run.strategy,
            run.evaluation.policy.control(0),
            run.evaluation.true_values.get(0),
            run.mean_final_mi_subset()
        );
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Explore {
            env,
            strategies,
            periods,
            alpha,
            trials,
            seed,
            mc_repeats,
            nesting,
            subset,
            start,
            discount,
            out,
        } => {
            let config = ExperimentConfig {
                env: env.spec(),
                strategies: parse_strategies(&strategies, mc_repeats, nesting)?,
                horizon: periods,
                trials,
                alpha,
                discount,
                seed,
                start,
                metric_subset: subset,
                out_dir: out,
            };
            let bundle = run_experiment(&config)?;
            print_table(&bundle);
        }
        Command::Task {
            env,
            counts,
            discount,
            alpha,
        } => {
            let cmc = env.spec().build()?;
            let text = fs::read_to_string(&counts)
                .map_err(|e| Error::Io(format!("{}: {e}", counts.display())))?;
            let f = CountTensor::from_json(&text)?;
            let task = DiscountedTask::from_cmc(&cmc, discount)?;
            let eval = evaluate_learned_model(&cmc, &f, DirichletPrior::new(alpha)?, &task)?;
            println!(
                "{}",
                serde_json::to_string(&eval).expect("evaluation serialises")
            );
        }
        Command::DpOracle {
            env,
            periods,
            start,
            alpha,
        } => {
            let cmc = env.spec().build()?;
            let prior = DirichletPrior::new(alpha)?;
            let zero = CountTensor::for_cmc(&cmc);
            let dp = exact_dp(start, &zero, 0, periods, &cmc, prior)?;
            let greedy = explore(
                StrategyKind::PigGreedy,
                &cmc,
                start,
                periods,
                prior,
                DEFAULT_SEED,
                None,
            )?;
            let rollout = explore(
                StrategyKind::PigRollout(RolloutConfig::default()),
                &cmc,
                start,
                periods,
                prior,
                DEFAULT_SEED,
                None,
            )?;
            let line = json!({
                "periods": periods,
                "dp_value": dp.value,
                "dp_best_control": dp.best_control,
                "greedy_total_pig": greedy.total_pig(),
                "rollout_total_pig": rollout.total_pig(),
            });
            println!("{line}");
        }
        Command::Table1 { out, seed } => {
            let config = ExperimentConfig {
                seed,
                ..table1_config(out)
            };
            let bundle = run_experiment(&config)?;
            print_table(&bundle);
        }
        Command::Builtins => print!("{}", builtins_listing()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                json!({"error": {"kind": e.kind(), "message": e.to_string()}})
            );
            ExitCode::FAILURE
        }
    }
}
