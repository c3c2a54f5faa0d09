//! Problem instances `LO_{z,sigma}` and the query-counting oracle that guards them.
//!
//! Algorithms only ever hold an [`OracleSession`]; the hidden target string
//! and permutation stay inside the [`Instance`].

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitstring::{BitString, Permutation};
use crate::error::{Error, Result};

/// A hidden pair `(z, sigma)` defining `LO_{z,sigma}(x)`: the length of the
/// longest prefix, taken in the order `sigma(1), sigma(2), ...`, on which `x`
/// agrees with `z`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr", into = "InstanceRepr")]
pub struct Instance {
    z: BitString,
    sigma: Permutation,
    // position -> index in sigma-order
    rank: Vec<u32>,
    prefix: PrefixMasks,
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Instance")
            .field("z", &self.z)
            .field("sigma", &self.sigma)
            .finish()
    }
}

/// Masks of the positions with sigma-rank below `j * stride`, for
/// `j = 1..count`, stored back to back. They let the oracle find the first
/// disagreement by binary search with word operations.
#[derive(Clone, Default, PartialEq, Eq)]
struct PrefixMasks {
    stride: usize,
    words_per_mask: usize,
    masks: Vec<u64>,
}

impl PrefixMasks {
    const MIN_N: usize = 512;
    const MAX_MASKS: usize = 256;

    fn build(sigma: &Permutation) -> Self {
        let n = sigma.len();
        if n < Self::MIN_N {
            return Self::default();
        }
        let stride = n.div_ceil(Self::MAX_MASKS).max(64);
        let words_per_mask = n.div_ceil(64);
        let count = n.div_ceil(stride) - 1;
        let mut masks = Vec::with_capacity(count * words_per_mask);
        let mut current = vec![0u64; words_per_mask];
        for j in 0..count {
            for &p in &sigma.as_slice()[j * stride..(j + 1) * stride] {
                current[p as usize >> 6] |= 1 << (p & 63);
            }
            masks.extend_from_slice(&current);
        }
        Self {
            stride,
            words_per_mask,
            masks,
        }
    }

    fn count(&self) -> usize {
        self.masks.len().checked_div(self.words_per_mask).unwrap_or(0)
    }
}

impl Instance {
    pub fn new(z: BitString, sigma: Permutation) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if z.len() != sigma.len() {
            return Err(Error::LengthMismatch {
                expected: z.len(),
                actual: sigma.len(),
            });
        }
        let rank = sigma.inverse();
        let prefix = PrefixMasks::build(&sigma);
        Ok(Self {
            z,
            sigma,
            rank,
            prefix,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// The hidden target. Only instrumentation and tests should look at it.
    pub fn target(&self) -> &BitString {
        &self.z
    }

    /// The hidden permutation. Only instrumentation and tests should look at it.
    pub fn sigma(&self) -> &Permutation {
        &self.sigma
    }

    /// 0-based index of `position` in sigma-order.
    pub fn rank_of_position(&self, position: usize) -> usize {
        self.rank[position] as usize
    }

    /// Fitness of `x`, or an error if the length is wrong.
    pub fn evaluate(&self, x: &BitString) -> Result<usize> {
        x.ensure_len(self.n())?;
        Ok(self.fitness(x))
    }

    /// Position in sigma-order of the first disagreement with `z`. Few
    /// disagreements are handled by a minimum over their ranks; otherwise the
    /// prefix masks narrow the search to one stride, which is then scanned.
    pub(crate) fn fitness(&self, x: &BitString) -> usize {
        let n = self.n();
        let xw = x.words();
        let zw = self.z.words();
        let differing: usize = xw
            .iter()
            .zip(zw)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum();
        if differing == 0 {
            return n;
        }
        if differing <= 64 {
            let mut best = u32::MAX;
            for (wi, (a, b)) in xw.iter().zip(zw).enumerate() {
                let mut d = a ^ b;
                while d != 0 {
                    best = best.min(self.rank[wi * 64 + d.trailing_zeros() as usize]);
                    d &= d - 1;
                }
            }
            return best as usize;
        }
        let (from, to) = match self.prefix.count() {
            0 => (0, n),
            count => {
                let hits = |j: usize| {
                    let w = self.prefix.words_per_mask;
                    self.prefix.masks[j * w..(j + 1) * w]
                        .iter()
                        .zip(xw.iter().zip(zw))
                        .any(|(m, (a, b))| m & (a ^ b) != 0)
                };
                let (mut lo, mut hi) = (0, count);
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if hits(mid) {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                let stride = self.prefix.stride;
                (lo * stride, ((lo + 1) * stride).min(n))
            }
        };
        for (r, &p) in self.sigma.as_slice()[from..to].iter().enumerate() {
            let p = p as usize;
            if ((xw[p >> 6] ^ zw[p >> 6]) >> (p & 63)) & 1 == 1 {
                return from + r;
            }
        }
        unreachable!("a differing position lies in the scanned range")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::MalformedInstance(e.to_string()))
    }
}

/// Serialized form: `{"n": 4, "z": "0110", "sigma": [3, 1, 4, 2]}`.
/// `z` lists position 1 first; `sigma` holds 1-based positions.
#[derive(Serialize, Deserialize)]
struct InstanceRepr {
    n: usize,
    z: String,
    sigma: Vec<usize>,
}

impl TryFrom<InstanceRepr> for Instance {
    type Error = Error;

    fn try_from(r: InstanceRepr) -> Result<Self> {
        let z: BitString = r.z.parse()?;
        if z.len() != r.n {
            return Err(Error::MalformedInstance(format!(
                "z has {} bits but n = {}",
                z.len(),
                r.n
            )));
        }
        let sigma = Permutation::from_one_based(&r.sigma)?;
        Instance::new(z, sigma)
    }
}

impl From<Instance> for InstanceRepr {
    fn from(i: Instance) -> Self {
        Self {
            n: i.n(),
            z: i.z.to_string(),
            sigma: i.sigma.to_one_based(),
        }
    }
}

/// Draws `z` uniformly from `{0,1}^n` and `sigma` uniformly from `S_n`.
pub fn make_instance<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Instance> {
    if n == 0 {
        return Err(Error::ZeroDimension);
    }
    let z = BitString::random(n, rng);
    let sigma = Permutation::random(n, rng);
    Instance::new(z, sigma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Answers are fitness values.
    Value,
    /// Answers are dense ranks of the latest fitness among all fitness values
    /// seen so far (smallest = 1, ties share a rank).
    Ranking,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Value => "value",
            Mode::Ranking => "ranking",
        }
    }
}

/// A single run's view of an instance: answers queries and counts them.
pub struct OracleSession {
    instance: Arc<Instance>,
    mode: Mode,
    query_count: u64,
    optimum_query_index: Option<u64>,
    value_history: Vec<i64>,
    // sorted distinct entries of value_history
    distinct: Vec<i64>,
    budget: Option<u64>,
    transform: Option<fn(usize) -> i64>,
    log: Option<Vec<BitString>>,
}

impl OracleSession {
    pub fn new(instance: impl Into<Arc<Instance>>, mode: Mode) -> Self {
        Self {
            instance: instance.into(),
            mode,
            query_count: 0,
            optimum_query_index: None,
            value_history: Vec::new(),
            distinct: Vec::new(),
            budget: None,
            transform: None,
            log: None,
        }
    }

    /// Refuses every query past the `budget`-th with [`Error::BudgetExhausted`].
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    /// Ranks are computed over `map(fitness)` instead of the fitness itself.
    /// `map` must be strictly increasing; used to check that ranking-mode
    /// behavior only depends on the order of fitness values.
    pub fn with_monotone_transform(mut self, map: fn(usize) -> i64) -> Self {
        self.transform = Some(map);
        self
    }

    /// Keep a copy of every queried string.
    pub fn with_query_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn n(&self) -> usize {
        self.instance.n()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    /// 1-based index of the first query whose fitness was `n`.
    pub fn optimum_query_index(&self) -> Option<u64> {
        self.optimum_query_index
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    /// Fitness values (after the optional transform) in query order.
    /// Always empty in value mode.
    pub fn value_history(&self) -> &[i64] {
        &self.value_history
    }

    pub fn query_log(&self) -> Option<&[BitString]> {
        self.log.as_deref()
    }

    /// The instance behind this session. Instrumentation only.
    pub fn instance(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn query(&mut self, x: &BitString) -> Result<usize> {
        x.ensure_len(self.n())?;
        if let Some(budget) = self.budget {
            if self.query_count >= budget {
                return Err(Error::BudgetExhausted { budget });
            }
        }
        let fitness = self.instance.fitness(x);
        self.query_count += 1;
        if fitness == self.n() && self.optimum_query_index.is_none() {
            self.optimum_query_index = Some(self.query_count);
        }
        if let Some(log) = &mut self.log {
            log.push(x.clone());
        }
        match self.mode {
            Mode::Value => Ok(fitness),
            Mode::Ranking => {
                let v = self.transform.map_or(fitness as i64, |f| f(fitness));
                self.value_history.push(v);
                if let Err(at) = self.distinct.binary_search(&v) {
                    self.distinct.insert(at, v);
                }
                self.rank_of(v)
            }
        }
    }

    /// `1 + |{distinct u in history : u < value}|`.
    pub fn rank_of(&self, value: i64) -> Result<usize> {
        if self.mode != Mode::Ranking {
            return Err(Error::WrongMode {
                expected: "ranking",
            });
        }
        Ok(1 + self.distinct.partition_point(|&u| u < value))
    }
}
