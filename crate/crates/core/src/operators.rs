//! Variation operators used by the optimizers, each tagged with its arity.
//!
//! Every randomized operator here is a product of independent per-position
//! flips, so its output distribution can be written down exactly; see
//! [`Variation::distribution`]. That is what the invariance checks rely on.

use std::fmt;

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::bitstring::{BitString, Permutation};
use crate::error::{Error, Result};

/// An exact rational flip probability `num/den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FlipRate {
    num: u64,
    den: u64,
}

impl FlipRate {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num > den {
            return Err(Error::InvalidProbability { num, den });
        }
        Ok(Self { num, den })
    }

    /// `1/k` for `k >= 1`.
    pub fn one_over(k: u64) -> Self {
        assert!(k >= 1, "1/k requires k >= 1");
        Self { num: 1, den: k }
    }

    pub const ZERO: FlipRate = FlipRate { num: 0, den: 1 };
    pub const ONE: FlipRate = FlipRate { num: 1, den: 1 };

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn sampler(self) -> Threshold {
        if self.num == 0 {
            Threshold::Never
        } else if self.num == self.den {
            Threshold::Always
        } else {
            Threshold::Below((((self.num as u128) << 64) / self.den as u128) as u64)
        }
    }
}

impl fmt::Display for FlipRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Clone, Copy)]
enum Threshold {
    Never,
    Always,
    /// success iff a uniform 64-bit fraction is below this value
    Below(u64),
}

/// Returns a subset of `lanes` in which every lane is set independently with
/// the given probability. The 64 lanes compare uniform binary fractions with
/// the threshold digit by digit, so a draw costs one random word per digit
/// until every lane is decided.
#[inline]
fn bernoulli_lanes<R: RngCore + ?Sized>(t: Threshold, lanes: u64, rng: &mut R) -> u64 {
    match t {
        Threshold::Never => 0,
        Threshold::Always => lanes,
        Threshold::Below(mut digits) => {
            let mut undecided = lanes;
            let mut hit = 0u64;
            while undecided != 0 && digits != 0 {
                let r = rng.next_u64();
                if digits >> 63 == 1 {
                    hit |= undecided & !r;
                    undecided &= r;
                } else {
                    undecided &= !r;
                }
                digits <<= 1;
            }
            hit
        }
    }
}

fn same_len(expected: usize, xs: &[&BitString]) -> Result<()> {
    xs.iter().try_for_each(|x| x.ensure_len(expected))
}

/// Arity-0: uniform over `{0,1}^n`.
pub fn uniform_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BitString {
    BitString::random(n, rng)
}

/// Arity-1: bitwise complement.
pub fn complement(x: &BitString) -> BitString {
    x.not()
}

/// Arity-3: copies `base`, flipping each position where `x` and `y` differ
/// independently with probability `rate`. Positions where `x` and `y` agree
/// are never touched.
pub fn flip_disagreement_independently<R: Rng + ?Sized>(
    base: &BitString,
    x: &BitString,
    y: &BitString,
    rate: FlipRate,
    rng: &mut R,
) -> Result<BitString> {
    same_len(base.len(), &[x, y])?;
    Ok(flip_disagreement_unchecked(base, x, y, rate, rng))
}

pub(crate) fn flip_disagreement_unchecked<R: Rng + ?Sized>(
    base: &BitString,
    x: &BitString,
    y: &BitString,
    rate: FlipRate,
    rng: &mut R,
) -> BitString {
    let t = rate.sampler();
    let mut out = base.clone();
    for ((o, a), b) in out.words_mut().iter_mut().zip(x.words()).zip(y.words()) {
        let lanes = a ^ b;
        if lanes != 0 {
            *o ^= bernoulli_lanes(t, lanes, rng);
        }
    }
    out
}

/// Arity-1: flips every position independently with probability `rate`.
pub fn standard_bit_mutation<R: Rng + ?Sized>(
    x: &BitString,
    rate: FlipRate,
    rng: &mut R,
) -> BitString {
    let t = rate.sampler();
    let len = x.len();
    let mut out = x.clone();
    let words = out.words_mut();
    let last = words.len().saturating_sub(1);
    for (i, w) in words.iter_mut().enumerate() {
        let lanes = if i == last && !len.is_multiple_of(64) {
            (1u64 << (len % 64)) - 1
        } else {
            u64::MAX
        };
        *w ^= bernoulli_lanes(t, lanes, rng);
    }
    out
}

/// Arity-3, deterministic: flips `w` exactly where `a` and `b` coincide.
pub fn flip_where_equal(w: &BitString, a: &BitString, b: &BitString) -> Result<BitString> {
    same_len(w.len(), &[a, b])?;
    Ok(w.xor(&a.equal_mask(b)))
}

/// Arity-3, deterministic: flips `t` at the positions where `t`, `a` and `b`
/// all hold the same bit. Used to discard candidates from a tracker string.
pub fn flip_where_all_agree(t: &BitString, a: &BitString, b: &BitString) -> Result<BitString> {
    same_len(t.len(), &[a, b])?;
    let mut out = t.clone();
    retain_candidates_in_place(&mut out, a, b);
    Ok(out)
}

pub(crate) fn retain_candidates_in_place(t: &mut BitString, a: &BitString, b: &BitString) {
    let len = t.len();
    for ((tw, aw), bw) in t.words_mut().iter_mut().zip(a.words()).zip(b.words()) {
        let all_same = !(*tw ^ aw) & !(aw ^ bw);
        *tw ^= all_same;
    }
    // flipping past `len` would break the tail invariant
    let used = len % 64;
    if used != 0 {
        if let Some(last) = t.words_mut().last_mut() {
            *last &= (1u64 << used) - 1;
        }
    }
}

/// `B(x, y)`: positions where `x` and `y` coincide, ascending.
pub fn agreement_set(x: &BitString, y: &BitString) -> Result<Vec<usize>> {
    y.ensure_len(x.len())?;
    Ok(x.equal_mask(y).ones_positions().collect())
}

/// `x xor e_I`. Not unbiased when `positions` are chosen by index; only the
/// unrestricted binary-search baseline uses it.
pub fn flip_positions(x: &BitString, positions: &[usize]) -> Result<BitString> {
    let mut out = x.clone();
    for &p in positions {
        if p >= x.len() {
            return Err(Error::PositionOutOfRange {
                position: p,
                len: x.len(),
            });
        }
        out.flip(p);
    }
    Ok(out)
}

/// Name, arity and parameters of an operator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OperatorDescriptor {
    pub name: &'static str,
    pub arity: usize,
    pub parameters: Vec<(&'static str, FlipRate)>,
    /// Whether the operator is claimed to be unbiased (XOR- and permutation-invariant).
    pub unbiased: bool,
}

/// The operator catalogue, in a form that supports exact distributions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Variation {
    UniformSample,
    Identity,
    Complement,
    StandardBitMutation(FlipRate),
    FlipDisagreement(FlipRate),
    FlipWhereEqual,
    FlipWhereAllAgree,
    FlipPositions(Vec<usize>),
}

impl Variation {
    pub fn descriptor(&self) -> OperatorDescriptor {
        let (name, arity, parameters, unbiased) = match self {
            Variation::UniformSample => ("uniform_sample", 0, vec![], true),
            Variation::Identity => ("identity", 1, vec![], true),
            Variation::Complement => ("complement", 1, vec![], true),
            Variation::StandardBitMutation(p) => {
                ("standard_bit_mutation", 1, vec![("p", *p)], true)
            }
            Variation::FlipDisagreement(p) => {
                ("flip_disagreement_independently", 3, vec![("p", *p)], true)
            }
            Variation::FlipWhereEqual => ("flip_where_equal", 3, vec![], true),
            Variation::FlipWhereAllAgree => ("flip_where_all_agree", 3, vec![], true),
            Variation::FlipPositions(_) => ("flip_positions", 1, vec![], false),
        };
        OperatorDescriptor {
            name,
            arity,
            parameters,
            unbiased,
        }
    }

    pub fn arity(&self) -> usize {
        self.descriptor().arity
    }

    /// Samples the operator on `args` (length must equal the arity).
    pub fn apply<R: Rng + ?Sized>(
        &self,
        n: usize,
        args: &[&BitString],
        rng: &mut R,
    ) -> Result<BitString> {
        self.check_args(n, args)?;
        match self {
            Variation::UniformSample => Ok(uniform_sample(n, rng)),
            Variation::Identity => Ok(args[0].clone()),
            Variation::Complement => Ok(complement(args[0])),
            Variation::StandardBitMutation(p) => Ok(standard_bit_mutation(args[0], *p, rng)),
            Variation::FlipDisagreement(p) => {
                flip_disagreement_independently(args[0], args[1], args[2], *p, rng)
            }
            Variation::FlipWhereEqual => flip_where_equal(args[0], args[1], args[2]),
            Variation::FlipWhereAllAgree => flip_where_all_agree(args[0], args[1], args[2]),
            Variation::FlipPositions(ps) => flip_positions(args[0], ps),
        }
    }

    /// Exact output distribution, indexed by [`BitString::to_index`].
    /// Supports `n <= 16`.
    pub fn distribution(&self, n: usize, args: &[&BitString]) -> Result<Vec<f64>> {
        if n > 16 {
            return Err(Error::InvalidArgument(format!(
                "exact distributions need n <= 16, got {n}"
            )));
        }
        self.check_args(n, args)?;
        let size = 1usize << n;
        let point = |x: BitString| {
            let mut d = vec![0.0; size];
            d[x.to_index() as usize] = 1.0;
            d
        };
        let product = |base: &BitString, flip_prob: &dyn Fn(usize) -> f64| {
            let q: Vec<f64> = (0..n).map(flip_prob).collect();
            (0..size as u64)
                .map(|idx| {
                    let out = BitString::from_index(n, idx);
                    (0..n)
                        .map(|i| {
                            if out.get(i) != base.get(i) {
                                q[i]
                            } else {
                                1.0 - q[i]
                            }
                        })
                        .product()
                })
                .collect::<Vec<f64>>()
        };
        Ok(match self {
            Variation::UniformSample => vec![1.0 / size as f64; size],
            Variation::Identity => point(args[0].clone()),
            Variation::Complement => point(complement(args[0])),
            Variation::StandardBitMutation(p) => {
                let p = p.as_f64();
                product(args[0], &|_| p)
            }
            Variation::FlipDisagreement(p) => {
                let p = p.as_f64();
                let (x, y) = (args[1], args[2]);
                product(args[0], &|i| if x.get(i) != y.get(i) { p } else { 0.0 })
            }
            Variation::FlipWhereEqual => point(flip_where_equal(args[0], args[1], args[2])?),
            Variation::FlipWhereAllAgree => point(flip_where_all_agree(args[0], args[1], args[2])?),
            Variation::FlipPositions(ps) => point(flip_positions(args[0], ps)?),
        })
    }

    fn check_args(&self, n: usize, args: &[&BitString]) -> Result<()> {
        let arity = self.arity();
        if args.len() != arity {
            return Err(Error::InvalidArgument(format!(
                "{} takes {arity} strings, got {}",
                self.descriptor().name,
                args.len()
            )));
        }
        same_len(n, args)
    }
}

/// Tolerance used by [`xor_invariant`] and [`permutation_invariant`].
pub const INVARIANCE_TOL: f64 = 1e-12;

fn max_gap(a: &[f64], b: &[f64], remap: impl Fn(u64) -> u64) -> f64 {
    a.iter()
        .enumerate()
        .map(|(i, &pa)| (pa - b[remap(i as u64) as usize]).abs())
        .fold(0.0, f64::max)
}

/// Largest `|D(out | args) - D(out xor s | args xor s)|` over all outputs and
/// every shift in `shifts`.
pub fn xor_invariance_gap(
    op: &Variation,
    n: usize,
    args: &[&BitString],
    shifts: &[BitString],
) -> Result<f64> {
    let base = op.distribution(n, args)?;
    let mut gap: f64 = 0.0;
    for s in shifts {
        let shifted: Vec<BitString> = args.iter().map(|a| a.xor(s)).collect();
        let refs: Vec<&BitString> = shifted.iter().collect();
        let d = op.distribution(n, &refs)?;
        let s_idx = s.to_index();
        gap = gap.max(max_gap(&base, &d, |o| o ^ s_idx));
    }
    Ok(gap)
}

/// Largest `|D(out | args) - D(sigma(out) | sigma(args))|` over all outputs and
/// every `sigma` in `perms`.
pub fn permutation_invariance_gap(
    op: &Variation,
    n: usize,
    args: &[&BitString],
    perms: &[Permutation],
) -> Result<f64> {
    let base = op.distribution(n, args)?;
    let mut gap: f64 = 0.0;
    for sigma in perms {
        let moved: Vec<BitString> = args.iter().map(|a| a.permuted(sigma)).collect();
        let refs: Vec<&BitString> = moved.iter().collect();
        let d = op.distribution(n, &refs)?;
        let image: Vec<u64> = (0..1u64 << n)
            .map(|o| BitString::from_index(n, o).permuted(sigma).to_index())
            .collect();
        gap = gap.max(max_gap(&base, &d, |o| image[o as usize]));
    }
    Ok(gap)
}

pub fn xor_invariant(
    op: &Variation,
    n: usize,
    args: &[&BitString],
    shifts: &[BitString],
) -> Result<bool> {
    Ok(xor_invariance_gap(op, n, args, shifts)? <= INVARIANCE_TOL)
}

pub fn permutation_invariant(
    op: &Variation,
    n: usize,
    args: &[&BitString],
    perms: &[Permutation],
) -> Result<bool> {
    Ok(permutation_invariance_gap(op, n, args, perms)? <= INVARIANCE_TOL)
}
