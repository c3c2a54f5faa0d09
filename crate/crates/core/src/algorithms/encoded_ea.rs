use rand::Rng;

use super::{EncodingPair, Halt, Judge, Observer, ValueJudge, VariationEvent};
use crate::bitstring::BitString;
use crate::error::{Error, Result};
use crate::operators::{flip_disagreement_unchecked, FlipRate};
use crate::oracle::{Mode, OracleSession};

/// (1+1) EA restricted to the non-encoding positions of `(x, y)`: mutates the
/// current string `y'` (starting at `y`) by flipping each position where `x`
/// and `y` differ with probability `1/k`, and accepts strict improvements
/// until `f(y') >= target`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run<J: Judge, R: Rng + ?Sized>(
    session: &mut OracleSession,
    judge: &mut J,
    x: &BitString,
    y: &BitString,
    fy: J::Level,
    k: usize,
    target: usize,
    rng: &mut R,
    obs: &mut dyn Observer,
) -> std::result::Result<(BitString, J::Level), Halt> {
    let rate = FlipRate::one_over(k as u64);
    let mut current = y.clone();
    let mut level = fy;
    while !judge.at_least(level, target) {
        obs.on_variation(VariationEvent::FLIP_DISAGREEMENT);
        let w = flip_disagreement_unchecked(&current, x, y, rate, rng);
        let lw = judge.observe(session, &w, obs)?;
        if judge.less(level, lw) {
            current = w;
            level = lw;
        }
    }
    Ok((current, level))
}

/// Runs the encoded (1+1) EA on a value-mode session from the `ell`-encoding
/// pair `pair` and returns the first accepted string with fitness at least
/// `target` (capped at `n`). The caller is responsible for `pair` actually
/// being an encoding pair for the session's instance.
pub fn encoded_opo_ea<R: Rng + ?Sized>(
    session: &mut OracleSession,
    pair: &EncodingPair,
    k: usize,
    target: usize,
    rng: &mut R,
) -> Result<BitString> {
    if session.mode() != Mode::Value {
        return Err(Error::WrongMode { expected: "value" });
    }
    let n = session.n();
    pair.x.ensure_len(n)?;
    pair.y.ensure_len(n)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if pair.x.agreement_count(&pair.y) != pair.ell {
        return Err(Error::InvalidArgument(
            "ell must equal the number of positions where x and y agree".into(),
        ));
    }
    let target = target.min(n);
    let mut judge = ValueJudge {
        stop_at_optimum: false,
    };
    match run(
        session,
        &mut judge,
        &pair.x,
        &pair.y,
        pair.ell,
        k,
        target,
        rng,
        &mut (),
    ) {
        Ok((w, _)) => Ok(w),
        Err(Halt::Truncated) => Err(Error::BudgetExhausted {
            budget: session.budget().unwrap_or(session.query_count()),
        }),
        Err(Halt::Failed(e)) => Err(e),
        Err(Halt::Optimum) => Err(Error::InvalidArgument("unexpected stop".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitstring::Permutation;
    use crate::oracle::Instance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `y` agrees with `z` on sigma(1..ell) and nowhere else; `x` agrees with
    /// `y` exactly on sigma(1..ell).
    fn pair_at(inst: &Instance, ell: usize) -> EncodingPair {
        let z = inst.target();
        let mut y = z.not();
        for r in 0..ell {
            let p = inst.sigma().get(r);
            y.set(p, z.get(p));
        }
        let mut x = y.not();
        for r in 0..ell {
            let p = inst.sigma().get(r);
            x.set(p, y.get(p));
        }
        EncodingPair::new(x, y).unwrap()
    }

    #[test]
    fn target_already_met_uses_no_queries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = crate::oracle::make_instance(32, &mut rng).unwrap();
        let pair = pair_at(&inst, 5);
        let mut s = OracleSession::new(inst, Mode::Value);
        let out = encoded_opo_ea(&mut s, &pair, 4, 5, &mut rng).unwrap();
        assert_eq!(out, pair.y);
        assert_eq!(s.query_count(), 0);
    }

    #[test]
    fn reaches_target_and_keeps_encoding_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let inst = crate::oracle::make_instance(256, &mut rng).unwrap();
            let pair = pair_at(&inst, 40);
            let mut s = OracleSession::new(inst.clone(), Mode::Value);
            let out = encoded_opo_ea(&mut s, &pair, 4, 44, &mut rng).unwrap();
            assert!(inst.evaluate(&out).unwrap() >= 44);
            let enc = pair.x.equal_mask(&pair.y);
            assert_eq!(out.xor(&pair.y).and(&enc).count_ones(), 0);
        }
    }

    #[test]
    fn target_capped_at_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = Instance::new(
            "0110".parse().unwrap(),
            Permutation::from_one_based(&[3, 1, 4, 2]).unwrap(),
        )
        .unwrap();
        let pair = pair_at(&inst, 2);
        let mut s = OracleSession::new(inst.clone(), Mode::Value);
        let out = encoded_opo_ea(&mut s, &pair, 2, 99, &mut rng).unwrap();
        assert_eq!(&out, inst.target());
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = crate::oracle::make_instance(8, &mut rng).unwrap();
        let mut pair = pair_at(&inst, 2);
        let mut s = OracleSession::new(inst.clone(), Mode::Value);
        assert!(encoded_opo_ea(&mut s, &pair, 0, 4, &mut rng).is_err());
        pair.ell = 3;
        assert!(encoded_opo_ea(&mut s, &pair, 2, 4, &mut rng).is_err());
        let ranked = pair_at(&inst, 1);
        let mut r = OracleSession::new(inst, Mode::Ranking);
        assert!(encoded_opo_ea(&mut r, &ranked, 2, 4, &mut rng).is_err());
    }
}
