use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use lolab_core::algorithms::Algorithm;
use lolab_core::harness::{
    read_csv, run_experiment_to_csv, summarize, ExperimentConfig, ScalingSummary,
    DEFAULT_BUDGET_FACTOR,
};
use lolab_core::oracle::Mode;
use lolab_core::verification::{
    check_identification, check_improvement_rate, check_level_sets, check_unbiasedness, CheckReport,
};

#[derive(Parser)]
#[command(
    name = "lolab",
    version,
    about = "Query-counted LeadingOnes experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trials of one algorithm over several sizes and write them as CSV.
    Run {
        #[arg(long, short)]
        algorithm: Algorithm,
        /// Comma-separated problem sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Trials per size [default: 200 for the block optimizers, 1000 for the baselines].
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Oracle mode; must match the algorithm (ranking for `ranking`, value otherwise).
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Per-run query budget in units of n log2 n (n^2 for opo_ea).
        #[arg(long, default_value_t = DEFAULT_BUDGET_FACTOR)]
        budget_factor: f64,
        /// Also print the summary as one JSON line.
        #[arg(long)]
        json: bool,
    },
    /// Run one statistical check and print its report as a JSON line.
    Verify {
        #[arg(long, value_enum)]
        check: Check,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Block length, for `lemma2`.
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Levels already gained in the block, for `lemma2`.
        #[arg(long, default_value_t = 0)]
        c: usize,
        /// Mutation samples, for `lemma2`.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        /// Independent trials, for `lemma4` and `lemma5`.
        #[arg(long, default_value_t = 100)]
        trials: u64,
    },
    /// Recompute scaling summaries from a results CSV.
    Scaling {
        #[arg(long = "in")]
        input: PathBuf,
        /// Print one JSON line per algorithm instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Value,
    Ranking,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Value => Mode::Value,
            ModeArg::Ranking => Mode::Ranking,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    /// Improvement rate of one encoded mutation against its closed form.
    Lemma2,
    /// Every level of a block receives enough samples.
    Lemma4,
    /// Sampled disagreement sets pin down each level's position.
    Lemma5,
    /// XOR and permutation invariance of the unbiased operators.
    Unbiasedness,
}

fn default_trials(a: Algorithm) -> u64 {
    match a {
        Algorithm::OpoEa | Algorithm::BinarySearch => 1000,
        _ => 200,
    }
}

fn print_summary(summary: &ScalingSummary, json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string(summary)?);
    } else {
        print!("{}", summary.render());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            algorithm,
            sizes,
            trials,
            seed,
            out,
            mode,
            budget_factor,
            json,
        } => {
            let mut config = ExperimentConfig::new(
                algorithm,
                sizes,
                trials.unwrap_or(default_trials(algorithm)),
                seed,
            );
            if let Some(m) = mode {
                config.mode = m.into();
            }
            config.budget_factor = budget_factor;
            config.validate()?;
            let output = run_experiment_to_csv(&config, &out)
                .with_context(|| format!("running {algorithm}, writing {}", out.display()))?;
            print_summary(&output.summary, json)?;
            let truncated = output.records.iter().filter(|r| r.truncated).count();
            if truncated > 0 {
                eprintln!(
                    "{truncated} of {} runs hit the query budget",
                    output.records.len()
                );
            }
            Ok(truncated == 0)
        }
        Command::Verify {
            check,
            n,
            seed,
            k,
            c,
            samples,
            trials,
        } => {
            let report: CheckReport = match check {
                Check::Lemma2 => check_improvement_rate(n, k, c, samples, seed)?,
                Check::Lemma4 => check_level_sets(n, trials, seed)?,
                Check::Lemma5 => check_identification(n, trials, seed)?,
                Check::Unbiasedness => check_unbiasedness(n, seed)?,
            };
            println!("{}", report.to_json_line());
            Ok(report.passed)
        }
        Command::Scaling { input, json } => {
            let records =
                read_csv(&input).with_context(|| format!("reading {}", input.display()))?;
            if records.is_empty() {
                bail!("{} contains no records", input.display());
            }
            let mut by_algorithm: BTreeMap<u64, Vec<_>> = BTreeMap::new();
            for r in &records {
                by_algorithm
                    .entry(r.algorithm.id())
                    .or_default()
                    .push(r.clone());
            }
            for (i, group) in by_algorithm.values().enumerate() {
                if i > 0 && !json {
                    println!();
                }
                print_summary(&summarize(group), json)?;
            }
            Ok(records.iter().all(|r| !r.truncated))
        }
    }
}

fn main() -> Result<ExitCode> {
    let ok = run(Cli::parse())?;
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
