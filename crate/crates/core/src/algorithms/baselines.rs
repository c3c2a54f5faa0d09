use std::convert::Infallible;

use rand::Rng;

use super::{
    finish, initial_pair, start, Halt, Judge, Observer, RunResult, ValueJudge, VariationEvent,
};
use crate::error::{Error, Result};
use crate::operators::{flip_positions, standard_bit_mutation, uniform_sample, FlipRate};
use crate::oracle::{Mode, OracleSession};

/// Classical (1+1) EA: standard bit mutation with rate `mutation_p`, accepting
/// offspring that are at least as good as the parent.
pub fn opo_ea_baseline<R: Rng + ?Sized>(
    session: &mut OracleSession,
    mutation_p: FlipRate,
    rng: &mut R,
) -> Result<RunResult> {
    opo_ea_observed(session, mutation_p, rng, &mut ())
}

pub(crate) fn opo_ea_observed<R: Rng + ?Sized>(
    session: &mut OracleSession,
    mutation_p: FlipRate,
    rng: &mut R,
    obs: &mut dyn Observer,
) -> Result<RunResult> {
    start(session, Mode::Value)?;
    if mutation_p == FlipRate::ZERO {
        return Err(Error::InvalidArgument(
            "mutation probability must be positive".into(),
        ));
    }
    let outcome = (|| -> std::result::Result<Infallible, Halt> {
        let mut judge = ValueJudge {
            stop_at_optimum: true,
        };
        obs.on_variation(VariationEvent::UNIFORM_SAMPLE);
        let mut x = uniform_sample(session.n(), rng);
        let mut fx = judge.observe(session, &x, obs)?;
        loop {
            obs.on_variation(VariationEvent::STANDARD_BIT_MUTATION);
            let w = standard_bit_mutation(&x, mutation_p, rng);
            let fw = judge.observe(session, &w, obs)?;
            if fw >= fx {
                x = w;
                fx = fw;
            }
        }
    })();
    finish(session, outcome)
}

/// Learns one sigma-position at a time by halving the non-encoding candidates.
pub fn binary_search_baseline<R: Rng + ?Sized>(
    session: &mut OracleSession,
    rng: &mut R,
) -> Result<RunResult> {
    binary_search_observed(session, rng, &mut ())
}

pub(crate) fn binary_search_observed<R: Rng + ?Sized>(
    session: &mut OracleSession,
    rng: &mut R,
    obs: &mut dyn Observer,
) -> Result<RunResult> {
    start(session, Mode::Value)?;
    let mut judge = ValueJudge {
        stop_at_optimum: true,
    };
    let outcome = binary_search_body(session, &mut judge, rng, obs);
    finish(session, outcome)
}

/// Shared by the value-mode baseline and the ranking fallback for small `n`.
pub(crate) fn binary_search_body<J: Judge, R: Rng + ?Sized>(
    session: &mut OracleSession,
    judge: &mut J,
    rng: &mut R,
    obs: &mut dyn Observer,
) -> std::result::Result<Infallible, Halt> {
    let mut pair = initial_pair(session, judge, rng, obs)?;
    loop {
        let mut candidates: Vec<usize> =
            pair.x.equal_mask(&pair.y).not().ones_positions().collect();
        if candidates.is_empty() {
            return Err(Halt::Failed(Error::InvalidArgument(
                "encoding pair covers every position but the optimum was never queried".into(),
            )));
        }
        // a positive test on a single position already queried the updated y
        let mut confirmed = None;
        while candidates.len() > 1 {
            let half = candidates.len() / 2;
            obs.on_variation(VariationEvent::FLIP_POSITIONS);
            let w = flip_positions(&pair.y, &candidates[..half]).map_err(Halt::Failed)?;
            let lw = judge.observe(session, &w, obs)?;
            if judge.less(pair.fy, lw) {
                candidates.truncate(half);
                confirmed = (half == 1).then_some((w, lw));
            } else {
                candidates.drain(..half);
                confirmed = None;
            }
        }
        let j = candidates[0];
        obs.on_learned(pair.ell, 1, j);
        let (y, fy) = match confirmed {
            Some(found) => found,
            None => {
                obs.on_variation(VariationEvent::FLIP_POSITIONS);
                let w = flip_positions(&pair.y, &[j]).map_err(Halt::Failed)?;
                let lw = judge.observe(session, &w, obs)?;
                (w, lw)
            }
        };
        pair.y = y;
        pair.fy = fy;
        pair.ell += 1;
        if judge.less(pair.fx, pair.fy) {
            pair.swap();
        }
        judge.pin(pair.fy, pair.ell);
        obs.on_pair(&pair.x, &pair.y, pair.ell);
    }
}
