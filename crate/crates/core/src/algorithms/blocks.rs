//! Block learners: after the encoded EA has produced `y'` with
//! `f(y') >= ell + k`, samples around `y'` reveal the positions at sigma-ranks
//! `ell+1 ..= ell+k`, which are then folded into the encoding pair.
//!
//! The two variants differ only in how they remember the samples: the
//! unrestricted one keeps every sample per level, the ternary one keeps a
//! single tracker string per level.

use std::convert::Infallible;

use rand::Rng;

use super::baselines::binary_search_body;
use super::{
    block_length, encoded_ea, finish, initial_pair, start, uses_blocks, Halt, Judge, Observer,
    RunResult, ValueJudge, VariationEvent,
};
use crate::bitstring::BitString;
use crate::error::Result;
use crate::operators::{
    flip_disagreement_unchecked, flip_positions, flip_where_equal, retain_candidates_in_place,
    FlipRate,
};
use crate::oracle::{Mode, OracleSession};

/// Unrestricted block learner keeping the sample sets per level.
pub fn star_ary_optimizer<R: Rng + ?Sized>(
    session: &mut OracleSession,
    rng: &mut R,
) -> Result<RunResult> {
    star_ary_observed(session, rng, &mut ())
}

/// Ternary block learner keeping one tracker string per level.
pub fn three_ary_optimizer<R: Rng + ?Sized>(
    session: &mut OracleSession,
    rng: &mut R,
) -> Result<RunResult> {
    three_ary_observed(session, rng, &mut ())
}

pub(crate) fn star_ary_observed<R: Rng + ?Sized>(
    session: &mut OracleSession,
    rng: &mut R,
    obs: &mut dyn Observer,
) -> Result<RunResult> {
    run_blocks::<SampleSets, R>(session, rng, obs)
}

pub(crate) fn three_ary_observed<R: Rng + ?Sized>(
    session: &mut OracleSession,
    rng: &mut R,
    obs: &mut dyn Observer,
) -> Result<RunResult> {
    run_blocks::<Trackers, R>(session, rng, obs)
}

fn run_blocks<B: Bookkeeping, R: Rng + ?Sized>(
    session: &mut OracleSession,
    rng: &mut R,
    obs: &mut dyn Observer,
) -> Result<RunResult> {
    start(session, Mode::Value)?;
    let mut judge = ValueJudge {
        stop_at_optimum: true,
    };
    let outcome = if uses_blocks(session.n()) {
        block_body::<B, R>(session, &mut judge, rng, obs)
    } else {
        binary_search_body(session, &mut judge, rng, obs)
    };
    finish(session, outcome)
}

/// Per-block record of which positions can still be the one at sigma-rank `ell + c`.
trait Bookkeeping {
    fn new(
        k: usize,
        x: &BitString,
        y: &BitString,
        y_prime: &BitString,
        obs: &mut dyn Observer,
    ) -> Self;

    /// Sample `w` has fitness `ell + c - 1`.
    fn record(&mut self, c: usize, w: &BitString, y_prime: &BitString, obs: &mut dyn Observer);

    fn all_singletons(&self) -> bool;

    /// Positions still possible for level `c`, as a mask.
    fn candidates(&self, c: usize, y_prime: &BitString) -> BitString;

    /// `lower` with the learned position of level `c` flipped.
    fn fold(
        &self,
        c: usize,
        lower: &BitString,
        y_prime: &BitString,
        obs: &mut dyn Observer,
    ) -> BitString;
}

/// `X_{ell+c}` and `J_{ell+c}`.
struct SampleSets {
    samples: Vec<Vec<BitString>>,
    masks: Vec<BitString>,
    sizes: Vec<usize>,
}

impl Bookkeeping for SampleSets {
    fn new(
        k: usize,
        x: &BitString,
        y: &BitString,
        _y_prime: &BitString,
        _obs: &mut dyn Observer,
    ) -> Self {
        let non_encoding = x.equal_mask(y).not();
        let size = non_encoding.count_ones();
        Self {
            samples: vec![Vec::new(); k],
            masks: vec![non_encoding; k],
            sizes: vec![size; k],
        }
    }

    fn record(&mut self, c: usize, w: &BitString, y_prime: &BitString, _obs: &mut dyn Observer) {
        self.samples[c - 1].push(w.clone());
        let mask = self.masks[c - 1].and(&w.xor(y_prime));
        self.sizes[c - 1] = mask.count_ones();
        self.masks[c - 1] = mask;
    }

    fn all_singletons(&self) -> bool {
        self.sizes.iter().all(|&s| s == 1)
    }

    fn candidates(&self, c: usize, _y_prime: &BitString) -> BitString {
        self.masks[c - 1].clone()
    }

    fn fold(
        &self,
        c: usize,
        lower: &BitString,
        _y_prime: &BitString,
        obs: &mut dyn Observer,
    ) -> BitString {
        let j: Vec<usize> = self.masks[c - 1].ones_positions().collect();
        obs.on_variation(VariationEvent::FLIP_POSITIONS);
        flip_positions(lower, &j).expect("candidate positions are in range")
    }
}

/// Tracker strings `x^{ell+c}` with `B(x^{ell+c}, y') = J_{ell+c}`.
struct Trackers {
    trackers: Vec<BitString>,
    sizes: Vec<usize>,
}

impl Bookkeeping for Trackers {
    fn new(
        k: usize,
        x: &BitString,
        y: &BitString,
        y_prime: &BitString,
        obs: &mut dyn Observer,
    ) -> Self {
        let mut trackers = Vec::with_capacity(k);
        for _ in 0..k {
            obs.on_variation(VariationEvent::FLIP_WHERE_EQUAL);
            trackers.push(flip_where_equal(y_prime, x, y).expect("pair strings share a length"));
        }
        let size = trackers[0].agreement_count(y_prime);
        Self {
            trackers,
            sizes: vec![size; k],
        }
    }

    fn record(&mut self, c: usize, w: &BitString, y_prime: &BitString, obs: &mut dyn Observer) {
        obs.on_variation(VariationEvent::FLIP_WHERE_ALL_AGREE);
        let t = &mut self.trackers[c - 1];
        retain_candidates_in_place(t, y_prime, w);
        self.sizes[c - 1] = t.agreement_count(y_prime);
    }

    fn all_singletons(&self) -> bool {
        self.sizes.iter().all(|&s| s == 1)
    }

    fn candidates(&self, c: usize, y_prime: &BitString) -> BitString {
        self.trackers[c - 1].equal_mask(y_prime)
    }

    fn fold(
        &self,
        c: usize,
        lower: &BitString,
        y_prime: &BitString,
        obs: &mut dyn Observer,
    ) -> BitString {
        obs.on_variation(VariationEvent::FLIP_WHERE_EQUAL);
        flip_where_equal(lower, y_prime, &self.trackers[c - 1])
            .expect("pair strings share a length")
    }
}

fn block_body<B: Bookkeeping, R: Rng + ?Sized>(
    session: &mut OracleSession,
    judge: &mut ValueJudge,
    rng: &mut R,
    obs: &mut dyn Observer,
) -> std::result::Result<Infallible, Halt> {
    let n = session.n();
    let k = block_length(n);
    let rate = FlipRate::one_over(k as u64);
    let last_block_end = (n / k) * k;
    let mut pair = initial_pair(session, judge, rng, obs)?;

    while pair.ell + k <= last_block_end {
        let ell = pair.ell;
        let (y_prime, _) = encoded_ea::run(
            session,
            judge,
            &pair.x,
            &pair.y,
            pair.fy,
            k,
            ell + k,
            rng,
            obs,
        )?;

        let mut book = B::new(k, &pair.x, &pair.y, &y_prime, obs);
        if obs.wants_candidates() {
            for c in 1..=k {
                obs.on_candidates(ell, c, &book.candidates(c, &y_prime));
            }
        }
        while !book.all_singletons() {
            obs.on_variation(VariationEvent::FLIP_DISAGREEMENT);
            let w = flip_disagreement_unchecked(&y_prime, &pair.x, &pair.y, rate, rng);
            let fw = judge.observe(session, &w, obs)?;
            if (ell..ell + k).contains(&fw) {
                let c = fw - ell + 1;
                book.record(c, &w, &y_prime, obs);
                if obs.wants_candidates() {
                    obs.on_candidates(ell, c, &book.candidates(c, &y_prime));
                }
            }
        }

        for c in 1..=k {
            if let Some(j) = book.candidates(c, &y_prime).ones_positions().next() {
                obs.on_learned(ell, c, j);
            }
            if pair.fy <= pair.fx {
                pair.y = book.fold(c, &pair.y, &y_prime, obs);
                pair.fy = judge.observe(session, &pair.y, obs)?;
            } else {
                pair.x = book.fold(c, &pair.x, &y_prime, obs);
                pair.fx = judge.observe(session, &pair.x, obs)?;
            }
        }
        if pair.fy > pair.fx {
            pair.swap();
        }
        pair.ell += k;
        judge.pin(pair.fy, pair.ell);
        obs.on_pair(&pair.x, &pair.y, pair.ell);
    }

    encoded_ea::run(session, judge, &pair.x, &pair.y, pair.fy, k, n, rng, obs)?;
    Err(Halt::Optimum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::make_instance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_sizes_fall_back_and_finish() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for n in [1, 2, 4, 15] {
            for _ in 0..20 {
                let inst = make_instance(n, &mut rng).unwrap();
                let mut s = OracleSession::new(inst.clone(), Mode::Value);
                assert!(star_ary_optimizer(&mut s, &mut rng).unwrap().success);
                let mut s = OracleSession::new(inst, Mode::Value);
                assert!(three_ary_optimizer(&mut s, &mut rng).unwrap().success);
            }
        }
    }

    #[test]
    fn block_sizes_finish_exactly_at_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [16, 17, 31, 64, 100, 257] {
            for _ in 0..10 {
                let inst = make_instance(n, &mut rng).unwrap();
                let mut s = OracleSession::new(inst.clone(), Mode::Value);
                let r = three_ary_optimizer(&mut s, &mut rng).unwrap();
                assert!(r.success);
                assert_eq!(r.queries, s.query_count());
                assert_eq!(Some(r.queries), s.optimum_query_index());
            }
        }
    }
}
