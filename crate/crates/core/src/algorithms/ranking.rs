//! Block learner for ranking-mode sessions.
//!
//! The oracle only reports the dense rank of each new query among the fitness
//! values seen so far. [`RankModel`] turns these ranks into a stable ordered
//! list of fitness classes: a rank that points at an existing class is either
//! a tie with it or a new value just below it, and re-querying the class's
//! stored representative tells the two apart. Class values become known only
//! where the encoding-pair invariant pins them, and the block learner
//! identifies the classes of levels `ell, ell+1, ...` one at a time through the
//! fold queries themselves: after folding level `c`, the lower string of the
//! pair has fitness exactly `ell + c`.

use std::collections::HashMap;
use std::convert::Infallible;

use rand::Rng;

use super::baselines::binary_search_body;
use super::{
    ask, block_length, encoded_ea, finish, initial_pair, start, uses_blocks, Halt, Judge, Observer,
    RunResult, VariationEvent,
};
use crate::bitstring::BitString;
use crate::error::{Error, Result};
use crate::operators::{
    flip_disagreement_unchecked, flip_where_equal, retain_candidates_in_place, FlipRate,
};
use crate::oracle::{Mode, OracleSession};

/// Ternary block learner that needs only ranks.
pub fn ranking_optimizer<R: Rng + ?Sized>(
    session: &mut OracleSession,
    rng: &mut R,
) -> Result<RunResult> {
    ranking_observed(session, rng, &mut ())
}

pub(crate) fn ranking_observed<R: Rng + ?Sized>(
    session: &mut OracleSession,
    rng: &mut R,
    obs: &mut dyn Observer,
) -> Result<RunResult> {
    start(session, Mode::Ranking)?;
    let mut model = RankModel::default();
    let outcome = if uses_blocks(session.n()) {
        block_body(session, &mut model, rng, obs)
    } else {
        binary_search_body(session, &mut model, rng, obs)
    };
    finish(session, outcome)
}

type ClassId = u32;

/// Ordered fitness classes reconstructed from ranks.
#[derive(Default)]
pub(crate) struct RankModel {
    /// class ids by increasing fitness
    order: Vec<ClassId>,
    /// index of each class in `order`
    pos: Vec<u32>,
    /// one queried string per class
    rep: Vec<BitString>,
    /// fitness, where the caller's invariants determine it
    known: Vec<Option<usize>>,
}

impl RankModel {
    fn insert(&mut self, at: usize, w: &BitString) -> ClassId {
        let id = self.rep.len() as ClassId;
        self.rep.push(w.clone());
        self.known.push(None);
        self.pos.push(0);
        self.order.insert(at, id);
        for (i, &c) in self.order.iter().enumerate().skip(at) {
            self.pos[c as usize] = i as u32;
        }
        id
    }

    /// A rank pointing at `order[idx]` must be a tie when no fitness value
    /// fits between that class and the one below it.
    fn tie_certain(&self, idx: usize) -> bool {
        match self.known[self.order[idx] as usize] {
            Some(0) => idx == 0,
            Some(v) => idx > 0 && self.known[self.order[idx - 1] as usize] == Some(v - 1),
            None => false,
        }
    }

    #[cfg(test)]
    fn classes(&self) -> impl Iterator<Item = &BitString> {
        self.order.iter().map(|&c| &self.rep[c as usize])
    }
}

impl Judge for RankModel {
    type Level = ClassId;

    fn observe(
        &mut self,
        session: &mut OracleSession,
        w: &BitString,
        obs: &mut dyn Observer,
    ) -> std::result::Result<ClassId, Halt> {
        let r = ask(session, w)?;
        if session.optimum_query_index().is_some() {
            return Err(Halt::Optimum);
        }
        let d = self.order.len();
        if r == d + 1 {
            return Ok(self.insert(d, w));
        }
        if r == 0 || r > d {
            return Err(Halt::Failed(Error::InvalidArgument(format!(
                "rank {r} is impossible with {d} known classes"
            ))));
        }
        let idx = r - 1;
        let class = self.order[idx];
        if self.tie_certain(idx) {
            return Ok(class);
        }
        obs.on_variation(VariationEvent::IDENTITY);
        let rep = self.rep[class as usize].clone();
        let r2 = ask(session, &rep)?;
        if r2 == r {
            Ok(class)
        } else if r2 == r + 1 {
            Ok(self.insert(idx, w))
        } else {
            Err(Halt::Failed(Error::InvalidArgument(format!(
                "representative re-ranked from {r} to {r2}"
            ))))
        }
    }

    fn less(&self, a: ClassId, b: ClassId) -> bool {
        self.pos[a as usize] < self.pos[b as usize]
    }

    fn at_least(&self, a: ClassId, v: usize) -> bool {
        let top = self.pos[a as usize] as usize;
        for i in (0..=top).rev() {
            if let Some(known) = self.known[self.order[i] as usize] {
                return known + (top - i) >= v;
            }
        }
        false
    }

    fn pin(&mut self, a: ClassId, v: usize) {
        debug_assert!(self.known[a as usize].is_none_or(|old| old == v));
        self.known[a as usize] = Some(v);
    }
}

struct Tracker {
    string: BitString,
    size: usize,
}

fn block_body<R: Rng + ?Sized>(
    session: &mut OracleSession,
    model: &mut RankModel,
    rng: &mut R,
    obs: &mut dyn Observer,
) -> std::result::Result<Infallible, Halt> {
    let n = session.n();
    let k = block_length(n);
    let rate = FlipRate::one_over(k as u64);
    let last_block_end = (n / k) * k;
    let mut pair = initial_pair(session, model, rng, obs)?;

    while pair.ell + k <= last_block_end {
        let ell = pair.ell;
        let (y_prime, top) = encoded_ea::run(
            session,
            model,
            &pair.x,
            &pair.y,
            pair.fy,
            k,
            ell + k,
            rng,
            obs,
        )?;
        // samples keep using the pair from the start of the block
        let (x0, y0) = (pair.x.clone(), pair.y.clone());
        let mut trackers: HashMap<ClassId, Tracker> = HashMap::new();
        let mut level = pair.fy;

        for c in 1..=k {
            while trackers.get(&level).is_none_or(|t| t.size != 1) {
                obs.on_variation(VariationEvent::FLIP_DISAGREEMENT);
                let w = flip_disagreement_unchecked(&y_prime, &x0, &y0, rate, rng);
                let cw = model.observe(session, &w, obs)?;
                if model.less(cw, level) || !model.less(cw, top) {
                    continue;
                }
                let t = trackers.entry(cw).or_insert_with(|| {
                    obs.on_variation(VariationEvent::FLIP_WHERE_EQUAL);
                    let string =
                        flip_where_equal(&y_prime, &x0, &y0).expect("pair strings share a length");
                    let size = string.agreement_count(&y_prime);
                    Tracker { string, size }
                });
                obs.on_variation(VariationEvent::FLIP_WHERE_ALL_AGREE);
                retain_candidates_in_place(&mut t.string, &y_prime, &w);
                t.size = t.string.agreement_count(&y_prime);
                if cw == level && obs.wants_candidates() {
                    obs.on_candidates(ell, c, &t.string.equal_mask(&y_prime));
                }
            }

            let tracker = &trackers[&level].string;
            if let Some(j) = tracker.equal_mask(&y_prime).ones_positions().next() {
                obs.on_learned(ell, c, j);
            }
            obs.on_variation(VariationEvent::FLIP_WHERE_EQUAL);
            pair.y =
                flip_where_equal(&pair.y, &y_prime, tracker).expect("pair strings share a length");
            pair.fy = model.observe(session, &pair.y, obs)?;
            if model.less(pair.fx, pair.fy) {
                pair.swap();
            }
            model.pin(pair.fy, ell + c);
            level = pair.fy;
        }
        pair.ell += k;
        obs.on_pair(&pair.x, &pair.y, pair.ell);
    }

    encoded_ea::run(session, model, &pair.x, &pair.y, pair.fy, k, n, rng, obs)?;
    Err(Halt::Optimum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::make_instance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn model_matches_true_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = make_instance(12, &mut rng).unwrap();
        let mut s = OracleSession::new(inst.clone(), Mode::Ranking);
        let mut model = RankModel::default();
        let mut seen = Vec::new();
        for _ in 0..300 {
            let w = BitString::random(12, &mut rng);
            match model.observe(&mut s, &w, &mut ()) {
                Ok(c) => seen.push((w, c)),
                Err(Halt::Optimum) => break,
                Err(_) => panic!("unexpected halt"),
            }
        }
        let values: Vec<usize> = model.classes().map(|w| inst.evaluate(w).unwrap()).collect();
        assert!(values.windows(2).all(|p| p[0] < p[1]), "{values:?}");
        for (w, c) in &seen {
            let rep = &model.rep[*c as usize];
            assert_eq!(inst.evaluate(w).unwrap(), inst.evaluate(rep).unwrap());
        }
    }

    #[test]
    fn pinned_neighbours_skip_requery() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let inst = make_instance(40, &mut rng).unwrap();
        let z = inst.target().clone();
        let sigma = inst.sigma().clone();
        // string with fitness exactly v
        let at = |v: usize| {
            let mut w = z.clone();
            w.flip(sigma.get(v));
            w
        };
        let mut s = OracleSession::new(inst, Mode::Ranking);
        let mut model = RankModel::default();
        let c3 = model.observe(&mut s, &at(3), &mut ()).unwrap();
        let c4 = model.observe(&mut s, &at(4), &mut ()).unwrap();
        model.pin(c3, 3);
        model.pin(c4, 4);
        let before = s.query_count();
        let mut other = at(4);
        other.flip(sigma.get(30));
        assert_eq!(model.observe(&mut s, &other, &mut ()).unwrap(), c4);
        assert_eq!(s.query_count(), before + 1);
        assert!(model.at_least(c4, 4));
        assert!(!model.at_least(c4, 5));
    }

    #[test]
    fn finishes_small_and_block_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 15, 16, 40, 130] {
            for _ in 0..10 {
                let inst = make_instance(n, &mut rng).unwrap();
                let mut s = OracleSession::new(inst, Mode::Ranking);
                let r = ranking_optimizer(&mut s, &mut rng).unwrap();
                assert!(r.success);
                assert_eq!(r.queries, s.query_count());
            }
        }
    }

    #[test]
    fn value_session_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = make_instance(20, &mut rng).unwrap();
        let mut s = OracleSession::new(inst, Mode::Value);
        assert!(matches!(
            ranking_optimizer(&mut s, &mut rng),
            Err(Error::WrongMode { .. })
        ));
    }
}
