//! Query-counted black-box optimization of LeadingOnes instances with
//! bounded-arity unbiased operators.

pub mod algorithms;
pub mod bitstring;
pub mod error;
pub mod harness;
pub mod operators;
pub mod oracle;
pub mod verification;

pub use algorithms::{Algorithm, EncodingPair, Observer, RunResult};
pub use bitstring::{BitString, Permutation};
pub use error::{Error, Result};
pub use harness::{
    run_experiment, run_trial, summarize, ExperimentConfig, ScalingSummary, TrialRecord,
};
pub use operators::{FlipRate, OperatorDescriptor, Variation};
pub use oracle::{make_instance, Instance, Mode, OracleSession};
pub use verification::CheckReport;
