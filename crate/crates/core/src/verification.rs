//! Statistical and exact checks of the facts the block learners rest on.
//!
//! The checks build their states directly from a hidden instance, which the
//! optimizers themselves never get to see.

use std::f64::consts::E;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::algorithms::{block_length, EncodingPair};
use crate::bitstring::{BitString, Permutation};
use crate::error::{Error, Result};
use crate::operators::{
    flip_disagreement_unchecked, permutation_invariance_gap, xor_invariance_gap, FlipRate,
    Variation, INVARIANCE_TOL,
};
use crate::oracle::{make_instance, Instance};

/// Result of one check. `passed` holds exactly when `statistic` satisfies the
/// check's inequality against `bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub statistic: f64,
    pub bound: f64,
    pub samples: u64,
    pub passed: bool,
    pub detail: String,
    pub seed: u64,
}

impl CheckReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialization is infallible")
    }
}

/// Success frequency demanded from checks of "with probability 1 - o(1)" claims.
pub const HIGH_PROBABILITY_THRESHOLD: f64 = 0.9;

/// `y` agrees with `z` on sigma-ranks `0..ell`, is wrong at rank `ell` and
/// random elsewhere; `x` agrees with `y` on ranks `0..ell` and nowhere else.
pub fn planted_pair<R: Rng + ?Sized>(
    inst: &Instance,
    ell: usize,
    rng: &mut R,
) -> Result<EncodingPair> {
    let n = inst.n();
    if ell > n {
        return Err(Error::InvalidArgument(format!(
            "ell = {ell} exceeds n = {n}"
        )));
    }
    let z = inst.target();
    let sigma = inst.sigma();
    let mut y = BitString::random(n, rng);
    for r in 0..ell {
        y.set(sigma.get(r), z.get(sigma.get(r)));
    }
    if ell < n {
        y.set(sigma.get(ell), !z.get(sigma.get(ell)));
    }
    let mut x = y.not();
    for r in 0..ell {
        x.set(sigma.get(r), y.get(sigma.get(r)));
    }
    EncodingPair::new(x, y)
}

/// Copy of `pair.y` raised to fitness exactly `level` (or `n`) by setting the
/// ranks `ell..level` to `z` and rank `level` to the wrong bit.
pub fn planted_lift(inst: &Instance, pair: &EncodingPair, level: usize) -> Result<BitString> {
    let n = inst.n();
    if level < pair.ell || level > n {
        return Err(Error::InvalidArgument(format!(
            "level {level} outside [{}, {n}]",
            pair.ell
        )));
    }
    let z = inst.target();
    let sigma = inst.sigma();
    let mut w = pair.y.clone();
    for r in pair.ell..level {
        w.set(sigma.get(r), z.get(sigma.get(r)));
    }
    if level < n {
        w.set(sigma.get(level), !z.get(sigma.get(level)));
    }
    Ok(w)
}

/// `(1 - 1/k)^c / k`: probability that one encoded mutation of a string at
/// level `ell + c` improves it.
pub fn improvement_probability(k: usize, c: usize) -> f64 {
    let k = k as f64;
    (1.0 - 1.0 / k).powi(c as i32) / k
}

/// Samples per block used by the level-set check: `ceil(8e log^{3/2} n / log log n)`.
pub fn level_sample_count(n: usize) -> usize {
    let lg = (n as f64).log2();
    (8.0 * E * lg.powf(1.5) / lg.log2()).ceil() as usize
}

/// Required size of each level set: `4 log n / log log n`.
pub fn level_set_threshold(n: usize) -> f64 {
    let lg = (n as f64).log2();
    4.0 * lg / lg.log2()
}

fn xoshiro(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Empirical frequency with which one encoded mutation improves a string at
/// level `ell + c`, where `ell = (n - k) / 2`. Passes iff the frequency is at
/// least `1/(ek)` minus three standard errors.
pub fn check_improvement_rate(
    n: usize,
    k: usize,
    c: usize,
    samples: u64,
    seed: u64,
) -> Result<CheckReport> {
    if k == 0 || c >= k || k > n {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= c < k <= n, got n = {n}, k = {k}, c = {c}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let mut rng = xoshiro(seed);
    let inst = make_instance(n, &mut rng)?;
    let ell = (n - k) / 2;
    let pair = planted_pair(&inst, ell, &mut rng)?;
    let start = planted_lift(&inst, &pair, ell + c)?;
    let rate = FlipRate::one_over(k as u64);
    let mut improved = 0u64;
    for _ in 0..samples {
        let w = flip_disagreement_unchecked(&start, &pair.x, &pair.y, rate, &mut rng);
        if inst.evaluate(&w)? > ell + c {
            improved += 1;
        }
    }
    let freq = improved as f64 / samples as f64;
    let floor = 1.0 / (E * k as f64);
    let bound = floor * (1.0 - 3.0 * (E * k as f64 / samples as f64).sqrt());
    let q = improvement_probability(k, c);
    Ok(CheckReport {
        check_name: "improvement_rate".into(),
        statistic: freq,
        bound,
        samples,
        passed: freq >= bound,
        detail: format!(
            "n={n} k={k} c={c} ell={ell}: {improved}/{samples} improved; closed form {q:.6}, 1/(ek) = {floor:.6}"
        ),
        seed,
    })
}

/// Per trial: draws [`level_sample_count`] encoded mutations of a string with
/// fitness `ell + k` and checks that every level `ell .. ell+k-1` received at
/// least [`level_set_threshold`] of them. Passes iff the trial success
/// frequency is at least 0.9.
pub fn check_level_sets(n: usize, trials: u64, seed: u64) -> Result<CheckReport> {
    if n < 16 {
        return Err(Error::InvalidArgument(format!("needs n >= 16, got {n}")));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let mut rng = xoshiro(seed);
    let k = block_length(n);
    let m = level_sample_count(n);
    let threshold = level_set_threshold(n);
    let rate = FlipRate::one_over(k as u64);
    let mut successes = 0u64;
    let mut smallest = usize::MAX;
    for _ in 0..trials {
        let inst = make_instance(n, &mut rng)?;
        let ell = (n - k) / 2;
        let pair = planted_pair(&inst, ell, &mut rng)?;
        let y_prime = planted_lift(&inst, &pair, ell + k)?;
        let mut counts = vec![0usize; k];
        for _ in 0..m {
            let w = flip_disagreement_unchecked(&y_prime, &pair.x, &pair.y, rate, &mut rng);
            let f = inst.evaluate(&w)?;
            if (ell..ell + k).contains(&f) {
                counts[f - ell] += 1;
            }
        }
        let low = *counts.iter().min().expect("k >= 1");
        smallest = smallest.min(low);
        if counts.iter().all(|&c| c as f64 >= threshold) {
            successes += 1;
        }
    }
    let freq = successes as f64 / trials as f64;
    Ok(CheckReport {
        check_name: "level_sets".into(),
        statistic: freq,
        bound: HIGH_PROBABILITY_THRESHOLD,
        samples: trials,
        passed: freq >= HIGH_PROBABILITY_THRESHOLD,
        detail: format!(
            "n={n} k={k}: {m} samples per trial, level-set threshold {threshold:.3}; smallest level set seen {smallest}"
        ),
        seed,
    })
}

/// Per trial: collects exactly `t = ceil(4 log n / log log n)` samples at each
/// level by rejection, intersects their disagreement sets with `y'` and checks
/// that each candidate set is exactly the true position. Passes iff the trial
/// success frequency is at least 0.9.
pub fn check_identification(n: usize, trials: u64, seed: u64) -> Result<CheckReport> {
    if n < 16 {
        return Err(Error::InvalidArgument(format!("needs n >= 16, got {n}")));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let mut rng = xoshiro(seed);
    let k = block_length(n);
    let t = level_set_threshold(n).ceil() as usize;
    let rate = FlipRate::one_over(k as u64);
    let mut successes = 0u64;
    let mut wrong_singletons = 0u64;
    let mut draws = 0u64;
    for _ in 0..trials {
        let inst = make_instance(n, &mut rng)?;
        let ell = (n - k) / 2;
        let pair = planted_pair(&inst, ell, &mut rng)?;
        let y_prime = planted_lift(&inst, &pair, ell + k)?;
        let non_encoding = pair.x.equal_mask(&pair.y).not();
        let mut candidates = vec![non_encoding; k];
        let mut counts = vec![0usize; k];
        while counts.iter().any(|&c| c < t) {
            let w = flip_disagreement_unchecked(&y_prime, &pair.x, &pair.y, rate, &mut rng);
            draws += 1;
            let f = inst.evaluate(&w)?;
            if (ell..ell + k).contains(&f) && counts[f - ell] < t {
                counts[f - ell] += 1;
                candidates[f - ell] = candidates[f - ell].and(&w.xor(&y_prime));
            }
        }
        let mut all_exact = true;
        for (c, mask) in candidates.iter().enumerate() {
            let truth = inst.sigma().get(ell + c);
            let exact = mask.count_ones() == 1 && mask.get(truth);
            if mask.count_ones() == 1 && !mask.get(truth) {
                wrong_singletons += 1;
            }
            all_exact &= exact;
        }
        if all_exact {
            successes += 1;
        }
    }
    let freq = successes as f64 / trials as f64;
    Ok(CheckReport {
        check_name: "identification".into(),
        statistic: freq,
        bound: HIGH_PROBABILITY_THRESHOLD,
        samples: trials,
        passed: freq >= HIGH_PROBABILITY_THRESHOLD && wrong_singletons == 0,
        detail: format!(
            "n={n} k={k}: {t} samples per level, {draws} draws in total; {wrong_singletons} singletons missed the true position"
        ),
        seed,
    })
}

/// Exact XOR- and permutation-invariance of the unbiased operators at size
/// `n <= 6`: every argument tuple for `n <= 3`, otherwise 50 random tuples,
/// each against all shifts and all permutations. The biased raw-position flip
/// is checked as well and must be detected as biased for the check to pass.
pub fn check_unbiasedness(n: usize, seed: u64) -> Result<CheckReport> {
    if n == 0 || n > 6 {
        return Err(Error::InvalidArgument(format!(
            "needs 1 <= n <= 6, got {n}"
        )));
    }
    let mut rng = xoshiro(seed);
    let shifts: Vec<BitString> = (0..1u64 << n)
        .map(|i| BitString::from_index(n, i))
        .collect();
    let perms = Permutation::all(n);
    let tuples = |arity: usize, rng: &mut Xoshiro256PlusPlus| -> Vec<Vec<BitString>> {
        if n <= 3 {
            let size = 1u64 << n;
            (0..size.pow(arity as u32))
                .map(|mut code| {
                    (0..arity)
                        .map(|_| {
                            let s = BitString::from_index(n, code % size);
                            code /= size;
                            s
                        })
                        .collect()
                })
                .collect()
        } else {
            (0..50)
                .map(|_| (0..arity).map(|_| BitString::random(n, rng)).collect())
                .collect()
        }
    };

    let unbiased = [
        Variation::FlipDisagreement(FlipRate::one_over(2)),
        Variation::FlipDisagreement(FlipRate::one_over(3)),
        Variation::Complement,
        Variation::FlipWhereEqual,
        Variation::FlipWhereAllAgree,
    ];
    let mut worst: f64 = 0.0;
    let mut checked = 0u64;
    let mut lines = Vec::new();
    for op in &unbiased {
        let mut op_worst: f64 = 0.0;
        let cases = tuples(op.arity(), &mut rng);
        for args in &cases {
            let refs: Vec<&BitString> = args.iter().collect();
            op_worst = op_worst
                .max(xor_invariance_gap(op, n, &refs, &shifts)?)
                .max(permutation_invariance_gap(op, n, &refs, &perms)?);
        }
        checked += cases.len() as u64;
        worst = worst.max(op_worst);
        let d = op.descriptor();
        let params: Vec<String> = d
            .parameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        lines.push(format!(
            "{}[{}]: max gap {op_worst:.3e}",
            d.name,
            params.join(",")
        ));
    }

    let probe = Variation::FlipPositions(vec![0]);
    let mut probe_gap: f64 = 0.0;
    for args in tuples(1, &mut rng) {
        let refs: Vec<&BitString> = args.iter().collect();
        probe_gap = probe_gap
            .max(xor_invariance_gap(&probe, n, &refs, &shifts)?)
            .max(permutation_invariance_gap(&probe, n, &refs, &perms)?);
    }
    // with n = 1 every map on a single position is symmetric
    let probe_flagged = n == 1 || probe_gap > INVARIANCE_TOL;
    lines.push(format!(
        "flip_positions[I={{1}}] probe: max gap {probe_gap:.3e}, {}",
        if probe_flagged {
            "flagged as biased"
        } else {
            "NOT flagged"
        }
    ));

    Ok(CheckReport {
        check_name: "unbiasedness".into(),
        statistic: worst,
        bound: INVARIANCE_TOL,
        samples: checked,
        passed: worst <= INVARIANCE_TOL && probe_flagged,
        detail: format!("n={n}; {}", lines.join("; ")),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_states_have_intended_fitness() {
        let mut rng = xoshiro(1);
        for n in [1, 2, 5, 64, 200] {
            let inst = make_instance(n, &mut rng).unwrap();
            for ell in [0, n / 3, n.saturating_sub(1), n] {
                let pair = planted_pair(&inst, ell, &mut rng).unwrap();
                assert_eq!(pair.ell, ell);
                assert_eq!(inst.evaluate(&pair.y).unwrap(), ell);
                assert!(inst.evaluate(&pair.x).unwrap() >= ell);
                for level in [ell, (ell + n) / 2, n] {
                    let w = planted_lift(&inst, &pair, level).unwrap();
                    assert_eq!(inst.evaluate(&w).unwrap(), level);
                }
            }
        }
    }

    #[test]
    fn derived_constants() {
        assert_eq!(level_sample_count(1 << 16), 348);
        assert_eq!(level_set_threshold(1 << 16), 16.0);
        assert!((improvement_probability(4, 3) - 0.10546875).abs() < 1e-15);
    }

    #[test]
    fn k1_always_improves() {
        let r = check_improvement_rate(64, 1, 0, 500, 3).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(r.passed);
    }

    #[test]
    fn improvement_rate_rejects_bad_parameters() {
        assert!(check_improvement_rate(64, 4, 4, 10, 0).is_err());
        assert!(check_improvement_rate(64, 0, 0, 10, 0).is_err());
        assert!(check_improvement_rate(3, 4, 0, 10, 0).is_err());
    }

    #[test]
    fn reports_are_reproducible() {
        assert_eq!(
            check_improvement_rate(128, 4, 2, 2000, 9).unwrap(),
            check_improvement_rate(128, 4, 2, 2000, 9).unwrap()
        );
        assert_eq!(
            check_level_sets(256, 5, 9).unwrap(),
            check_level_sets(256, 5, 9).unwrap()
        );
        assert_eq!(
            check_identification(256, 5, 9).unwrap(),
            check_identification(256, 5, 9).unwrap()
        );
        let line = check_unbiasedness(2, 1).unwrap().to_json_line();
        let back: CheckReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, check_unbiasedness(2, 1).unwrap());
    }

    #[test]
    fn unbiasedness_small_sizes() {
        for n in 1..=3 {
            let r = check_unbiasedness(n, 0).unwrap();
            assert!(r.passed, "{}", r.detail);
        }
        assert!(check_unbiasedness(7, 0).is_err());
    }
}
