//! Batch runner: trials over sizes, per-trial seeds, summaries and CSV output.

mod records;
mod summary;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::Algorithm;
use crate::error::{Error, Result};
use crate::oracle::{make_instance, Mode, OracleSession};

pub use records::{emit_csv, read_csv, CsvSink, CSV_HEADER};
pub use summary::{
    summarize, ModelFit, ScalingModel, ScalingSummary, SizeStats, MIN_TRIALS_FOR_SPREAD,
};

pub const DEFAULT_BUDGET_FACTOR: f64 = 50.0;

/// One batch: an algorithm, the sizes to run it at and how many trials per size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub sizes: Vec<usize>,
    pub trials_per_size: u64,
    pub base_seed: u64,
    pub mode: Mode,
    /// Multiplies [`budget_scale`] to give the per-run query budget.
    pub budget_factor: f64,
}

impl ExperimentConfig {
    /// Config with the algorithm's own mode and the default budget factor.
    pub fn new(
        algorithm: Algorithm,
        sizes: Vec<usize>,
        trials_per_size: u64,
        base_seed: u64,
    ) -> Self {
        Self {
            algorithm,
            sizes,
            trials_per_size,
            base_seed,
            mode: algorithm.mode(),
            budget_factor: DEFAULT_BUDGET_FACTOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != self.algorithm.mode() {
            return Err(Error::InvalidArgument(format!(
                "{} runs in {} mode only",
                self.algorithm,
                self.algorithm.mode().name()
            )));
        }
        if self.sizes.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one size is required".into(),
            ));
        }
        if self.sizes.contains(&0) {
            return Err(Error::ZeroDimension);
        }
        if self.trials_per_size == 0 {
            return Err(Error::InvalidArgument(
                "trials per size must be at least 1".into(),
            ));
        }
        if !(self.budget_factor.is_finite() && self.budget_factor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "budget factor must be positive, got {}",
                self.budget_factor
            )));
        }
        Ok(())
    }

    /// Query budget of a single run at size `n`.
    pub fn budget(&self, n: usize) -> u64 {
        (self.budget_factor * budget_scale(self.algorithm, n)).ceil() as u64
    }
}

/// `n log2 n` (at least `n`), or `n^2` for the (1+1) EA, whose expected
/// running time exceeds 50 n log2 n already at moderate `n`.
pub fn budget_scale(algorithm: Algorithm, n: usize) -> f64 {
    let n = n as f64;
    match algorithm {
        Algorithm::OpoEa => n * n,
        _ => n * n.log2().max(1.0),
    }
}

/// Outcome of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: Algorithm,
    pub n: usize,
    pub trial_index: u64,
    pub seed: u64,
    pub queries: u64,
    pub truncated: bool,
    pub wall_time_ms: f64,
}

impl TrialRecord {
    /// Equality of everything except the wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        (
            self.algorithm,
            self.n,
            self.trial_index,
            self.seed,
            self.queries,
            self.truncated,
        ) == (
            other.algorithm,
            other.n,
            other.trial_index,
            other.seed,
            other.queries,
            other.truncated,
        )
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial_index` at size `n`. Depends on nothing else, so adding
/// sizes or algorithms to a batch leaves existing trials untouched.
pub fn trial_seed(base_seed: u64, algorithm: Algorithm, n: usize, trial_index: u64) -> u64 {
    let mut h = splitmix64(base_seed);
    h = splitmix64(h ^ algorithm.id());
    h = splitmix64(h ^ n as u64);
    splitmix64(h ^ trial_index)
}

/// Generator used for a trial's instance and for the algorithm's own randomness.
pub fn trial_rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Builds the instance and session for one trial and runs the algorithm.
pub fn run_trial(config: &ExperimentConfig, n: usize, trial_index: u64) -> Result<TrialRecord> {
    config.validate()?;
    if n == 0 {
        return Err(Error::ZeroDimension);
    }
    let seed = trial_seed(config.base_seed, config.algorithm, n, trial_index);
    let mut rng = trial_rng(seed);
    let started = Instant::now();
    let instance = make_instance(n, &mut rng)?;
    let mut session = OracleSession::new(instance, config.mode).with_budget(config.budget(n));
    let result = config.algorithm.run(&mut session, &mut rng, &mut ())?;
    let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    if result.success && session.query_count() != result.queries {
        return Err(Error::InvalidArgument(format!(
            "{} kept querying after the optimum: {} queries, optimum at {}",
            config.algorithm,
            session.query_count(),
            result.queries
        )));
    }
    Ok(TrialRecord {
        algorithm: config.algorithm,
        n,
        trial_index,
        seed,
        queries: result.queries,
        truncated: !result.success,
        wall_time_ms,
    })
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub summary: ScalingSummary,
}

impl ExperimentOutput {
    pub fn any_truncated(&self) -> bool {
        self.records.iter().any(|r| r.truncated)
    }
}

/// Runs every distinct size in increasing order, trials in parallel. Records
/// of each finished size are written to `sink` before the next size starts.
pub fn run_experiment<W: Write>(
    config: &ExperimentConfig,
    mut sink: Option<&mut CsvSink<W>>,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut sizes = config.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let mut records = Vec::new();
    for n in sizes {
        let batch: Vec<TrialRecord> = (0..config.trials_per_size)
            .into_par_iter()
            .map(|i| run_trial(config, n, i))
            .collect::<Result<_>>()?;
        if let Some(s) = sink.as_deref_mut() {
            s.write_all(&batch)?;
        }
        records.extend(batch);
    }
    let summary = summarize(&records);
    Ok(ExperimentOutput { records, summary })
}

/// [`run_experiment`] writing its records to a CSV file at `path`.
pub fn run_experiment_to_csv(config: &ExperimentConfig, path: &Path) -> Result<ExperimentOutput> {
    let mut sink = CsvSink::create(path)?;
    run_experiment(config, Some(&mut sink))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_pure_and_distinct() {
        let a = trial_seed(7, Algorithm::ThreeAry, 1024, 3);
        assert_eq!(a, trial_seed(7, Algorithm::ThreeAry, 1024, 3));
        assert_ne!(a, trial_seed(7, Algorithm::StarAry, 1024, 3));
        assert_ne!(a, trial_seed(7, Algorithm::ThreeAry, 2048, 3));
        assert_ne!(a, trial_seed(7, Algorithm::ThreeAry, 1024, 4));
        assert_ne!(a, trial_seed(8, Algorithm::ThreeAry, 1024, 3));
    }

    #[test]
    fn config_validation() {
        let ok = ExperimentConfig::new(Algorithm::Ranking, vec![16], 1, 0);
        assert_eq!(ok.mode, Mode::Ranking);
        assert!(ok.validate().is_ok());
        let mut bad = ExperimentConfig::new(Algorithm::ThreeAry, vec![16], 1, 0);
        bad.mode = Mode::Ranking;
        assert!(bad.validate().is_err());
        let mut bad = ExperimentConfig::new(Algorithm::Ranking, vec![16], 1, 0);
        bad.mode = Mode::Value;
        assert!(bad.validate().is_err());
        assert!(ExperimentConfig::new(Algorithm::OpoEa, vec![], 1, 0)
            .validate()
            .is_err());
        assert!(ExperimentConfig::new(Algorithm::OpoEa, vec![0], 1, 0)
            .validate()
            .is_err());
        assert!(ExperimentConfig::new(Algorithm::OpoEa, vec![4], 0, 0)
            .validate()
            .is_err());
        let mut bad = ExperimentConfig::new(Algorithm::OpoEa, vec![4], 1, 0);
        bad.budget_factor = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn budgets() {
        let c = ExperimentConfig::new(Algorithm::ThreeAry, vec![1024], 1, 0);
        assert_eq!(c.budget(1024), 50 * 1024 * 10);
        assert_eq!(c.budget(1), 50);
        let c = ExperimentConfig::new(Algorithm::OpoEa, vec![128], 1, 0);
        assert_eq!(c.budget(128), 50 * 128 * 128);
    }

    #[test]
    fn n1_trials_take_at_most_two_queries() {
        for a in Algorithm::ALL {
            let c = ExperimentConfig::new(a, vec![1], 20, 5);
            for i in 0..20 {
                let r = run_trial(&c, 1, i).unwrap();
                assert!(!r.truncated && r.queries <= 2, "{a}: {r:?}");
            }
        }
    }

    #[test]
    fn trials_are_deterministic() {
        for a in Algorithm::ALL {
            let c = ExperimentConfig::new(a, vec![64], 1, 11);
            let r1 = run_trial(&c, 64, 0).unwrap();
            let r2 = run_trial(&c, 64, 0).unwrap();
            assert!(r1.same_outcome(&r2));
        }
    }
}
