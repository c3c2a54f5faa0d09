//! Optimizers for LeadingOnes instances. Every optimizer sees the instance only
//! through an [`OracleSession`] and stops at the first query of the optimum.

mod audit;
mod baselines;
mod blocks;
mod encoded_ea;
mod ranking;

use std::convert::Infallible;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitstring::BitString;
use crate::error::{Error, Result};
use crate::oracle::{Mode, OracleSession};

pub use audit::{ArityAuditor, AuditReport, Trace};
pub use baselines::{binary_search_baseline, opo_ea_baseline};
pub use blocks::{star_ary_optimizer, three_ary_optimizer};
pub use encoded_ea::encoded_opo_ea;
pub use ranking::ranking_optimizer;

/// Block length `ceil(sqrt(log2 n))`.
pub fn block_length(n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let lg = (n as f64).log2();
    let mut k = lg.sqrt().ceil() as usize;
    // guard against sqrt rounding just above an exact square
    while k > 1 && ((k - 1) * (k - 1)) as f64 >= lg {
        k -= 1;
    }
    k
}

/// Whether the block optimizers run in block mode at this size rather than
/// falling back to binary search.
pub fn uses_blocks(n: usize) -> bool {
    n >= 16 && block_length(n) >= 2
}

/// Outcome of one optimizer run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    /// Index of the first optimal query, or the number of queries spent when truncated.
    pub queries: u64,
    /// False only when the session's budget ran out first.
    pub success: bool,
}

/// Strings `(x, y)` that agree on exactly `ell` positions, with `fitness(y) = ell <= fitness(x)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodingPair {
    pub x: BitString,
    pub y: BitString,
    pub ell: usize,
}

impl EncodingPair {
    /// Checks only what can be checked without the oracle: equal lengths and
    /// that `ell` is the size of the agreement set.
    pub fn new(x: BitString, y: BitString) -> Result<Self> {
        y.ensure_len(x.len())?;
        let ell = x.agreement_count(&y);
        Ok(Self { x, y, ell })
    }
}

/// One application of a variation operator, as seen by an [`Observer`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct VariationEvent {
    pub operator: &'static str,
    /// Number of stored strings the operator read.
    pub arity: usize,
    pub unbiased: bool,
}

impl VariationEvent {
    pub const UNIFORM_SAMPLE: Self = Self::unbiased("uniform_sample", 0);
    pub const COMPLEMENT: Self = Self::unbiased("complement", 1);
    pub const IDENTITY: Self = Self::unbiased("identity", 1);
    pub const STANDARD_BIT_MUTATION: Self = Self::unbiased("standard_bit_mutation", 1);
    pub const FLIP_DISAGREEMENT: Self = Self::unbiased("flip_disagreement_independently", 3);
    pub const FLIP_WHERE_EQUAL: Self = Self::unbiased("flip_where_equal", 3);
    pub const FLIP_WHERE_ALL_AGREE: Self = Self::unbiased("flip_where_all_agree", 3);
    pub const FLIP_POSITIONS: Self = Self {
        operator: "flip_positions",
        arity: 1,
        unbiased: false,
    };

    const fn unbiased(operator: &'static str, arity: usize) -> Self {
        Self {
            operator,
            arity,
            unbiased: true,
        }
    }
}

/// Instrumentation hooks. All methods default to doing nothing; `()` is the
/// no-op observer.
pub trait Observer {
    fn on_variation(&mut self, _event: VariationEvent) {}

    /// A new `ell`-encoding pair has been established.
    fn on_pair(&mut self, _x: &BitString, _y: &BitString, _ell: usize) {}

    /// Whether [`Observer::on_candidates`] should be called; computing the
    /// candidate masks costs a pass over the string.
    fn wants_candidates(&self) -> bool {
        false
    }

    /// Current candidate mask for the position at sigma-rank `ell + c` (1-based `c`).
    fn on_candidates(&mut self, _ell: usize, _c: usize, _mask: &BitString) {}

    /// The block learner has determined the position at sigma-rank `ell + c`.
    fn on_learned(&mut self, _ell: usize, _c: usize, _position: usize) {}
}

impl Observer for () {}

/// The optimizers and baselines, addressable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    OpoEa,
    BinarySearch,
    StarAry,
    ThreeAry,
    Ranking,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::OpoEa,
        Algorithm::BinarySearch,
        Algorithm::StarAry,
        Algorithm::ThreeAry,
        Algorithm::Ranking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::OpoEa => "opo_ea",
            Algorithm::BinarySearch => "binary_search",
            Algorithm::StarAry => "star_ary",
            Algorithm::ThreeAry => "three_ary",
            Algorithm::Ranking => "ranking",
        }
    }

    /// Stable small integer used in seed derivation.
    pub fn id(self) -> u64 {
        match self {
            Algorithm::OpoEa => 1,
            Algorithm::BinarySearch => 2,
            Algorithm::StarAry => 3,
            Algorithm::ThreeAry => 4,
            Algorithm::Ranking => 5,
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            Algorithm::Ranking => Mode::Ranking,
            _ => Mode::Value,
        }
    }

    pub fn run<R: Rng + ?Sized>(
        self,
        session: &mut OracleSession,
        rng: &mut R,
        observer: &mut dyn Observer,
    ) -> Result<RunResult> {
        match self {
            Algorithm::OpoEa => {
                let n = session.n() as u64;
                baselines::opo_ea_observed(
                    session,
                    crate::operators::FlipRate::one_over(n),
                    rng,
                    observer,
                )
            }
            Algorithm::BinarySearch => baselines::binary_search_observed(session, rng, observer),
            Algorithm::StarAry => blocks::star_ary_observed(session, rng, observer),
            Algorithm::ThreeAry => blocks::three_ary_observed(session, rng, observer),
            Algorithm::Ranking => ranking::ranking_observed(session, rng, observer),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown algorithm {s:?}; expected one of opo_ea, binary_search, star_ary, three_ary, ranking"
                ))
            })
    }
}

/// Why an optimizer body stopped.
#[derive(Debug)]
pub(crate) enum Halt {
    Optimum,
    Truncated,
    Failed(Error),
}

pub(crate) fn ask(session: &mut OracleSession, w: &BitString) -> std::result::Result<usize, Halt> {
    match session.query(w) {
        Ok(v) => Ok(v),
        Err(Error::BudgetExhausted { .. }) => Err(Halt::Truncated),
        Err(e) => Err(Halt::Failed(e)),
    }
}

pub(crate) fn start(session: &OracleSession, mode: Mode) -> Result<()> {
    if session.mode() != mode {
        return Err(Error::WrongMode {
            expected: mode.name(),
        });
    }
    if session.query_count() != 0 {
        return Err(Error::SessionNotFresh(session.query_count()));
    }
    Ok(())
}

pub(crate) fn finish(
    session: &OracleSession,
    outcome: std::result::Result<Infallible, Halt>,
) -> Result<RunResult> {
    match outcome {
        Ok(never) => match never {},
        Err(Halt::Optimum) => Ok(RunResult {
            queries: session
                .optimum_query_index()
                .unwrap_or(session.query_count()),
            success: true,
        }),
        Err(Halt::Truncated) => Ok(RunResult {
            queries: session.query_count(),
            success: false,
        }),
        Err(Halt::Failed(e)) => Err(e),
    }
}

/// How an optimizer learns about the fitness of the strings it queries.
/// Value mode reads fitness directly; ranking mode reconstructs the order of
/// fitness classes from ranks.
pub(crate) trait Judge {
    type Level: Copy + PartialEq + fmt::Debug;

    fn observe(
        &mut self,
        session: &mut OracleSession,
        w: &BitString,
        obs: &mut dyn Observer,
    ) -> std::result::Result<Self::Level, Halt>;

    /// `f(a) < f(b)`.
    fn less(&self, a: Self::Level, b: Self::Level) -> bool;

    /// True only if `f(a) >= v` is certain.
    fn at_least(&self, a: Self::Level, v: usize) -> bool;

    /// Records that the algorithm knows, from its own invariants, that `f(a) = v`.
    fn pin(&mut self, a: Self::Level, v: usize);
}

pub(crate) struct ValueJudge {
    pub stop_at_optimum: bool,
}

impl Judge for ValueJudge {
    type Level = usize;

    fn observe(
        &mut self,
        session: &mut OracleSession,
        w: &BitString,
        _obs: &mut dyn Observer,
    ) -> std::result::Result<usize, Halt> {
        let v = ask(session, w)?;
        if self.stop_at_optimum && v == session.n() {
            return Err(Halt::Optimum);
        }
        Ok(v)
    }

    fn less(&self, a: usize, b: usize) -> bool {
        a < b
    }

    fn at_least(&self, a: usize, v: usize) -> bool {
        a >= v
    }

    fn pin(&mut self, a: usize, v: usize) {
        debug_assert_eq!(a, v, "encoding pair invariant broken");
    }
}

/// Encoding pair together with what the judge knows about both members.
pub(crate) struct Pair<L> {
    pub x: BitString,
    pub y: BitString,
    pub fx: L,
    pub fy: L,
    pub ell: usize,
}

impl<L: Copy> Pair<L> {
    pub fn swap(&mut self) {
        std::mem::swap(&mut self.x, &mut self.y);
        std::mem::swap(&mut self.fx, &mut self.fy);
    }
}

/// Uniform `x`, its complement `y`, ordered so that `f(x) > f(y) = 0`.
pub(crate) fn initial_pair<J: Judge, R: Rng + ?Sized>(
    session: &mut OracleSession,
    judge: &mut J,
    rng: &mut R,
    obs: &mut dyn Observer,
) -> std::result::Result<Pair<J::Level>, Halt> {
    let n = session.n();
    obs.on_variation(VariationEvent::UNIFORM_SAMPLE);
    let x = crate::operators::uniform_sample(n, rng);
    let fx = judge.observe(session, &x, obs)?;
    obs.on_variation(VariationEvent::COMPLEMENT);
    let y = crate::operators::complement(&x);
    let fy = judge.observe(session, &y, obs)?;
    let mut pair = Pair {
        x,
        y,
        fx,
        fy,
        ell: 0,
    };
    if !judge.less(pair.fy, pair.fx) {
        pair.swap();
    }
    judge.pin(pair.fy, 0);
    obs.on_pair(&pair.x, &pair.y, 0);
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_lengths() {
        assert_eq!(block_length(2), 1);
        assert_eq!(block_length(16), 2);
        assert_eq!(block_length(17), 3);
        assert_eq!(block_length(512), 3);
        assert_eq!(block_length(1024), 4);
        assert_eq!(block_length(1 << 14), 4);
        assert_eq!(block_length(1 << 16), 4);
        assert_eq!(block_length((1 << 16) + 1), 5);
        assert!(!uses_blocks(15));
        assert!(uses_blocks(16));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("simulated_annealing".parse::<Algorithm>().is_err());
    }

    #[test]
    fn encoding_pair_counts_agreements() {
        let p = EncodingPair::new("0110".parse().unwrap(), "0101".parse().unwrap()).unwrap();
        assert_eq!(p.ell, 2);
        assert!(EncodingPair::new("01".parse().unwrap(), "011".parse().unwrap()).is_err());
    }
}
