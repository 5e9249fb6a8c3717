//! Seed derivation and per-pair random streams.
//!
//! Every random stream is a ChaCha8 generator seeded with
//! `derive_seed(&[master, trial, tag, ..])`, where `derive_seed` folds its
//! inputs through the SplitMix64 finalizer. The pair `{a, b}` always uses the
//! stream `(master, trial, PAIR, min(a, b), max(a, b))`, independently of the
//! order in which pairs are first touched, so a replay table and a live
//! oracle built from the same key hand out the same answers.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::oracle::GEOMETRIC_CAP;

const TAG_PAIR: u64 = 0x7061_6972;
const TAG_SLATE: u64 = 0x736c_6174;
const TAG_ALGO: u64 = 0x616c_676f;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3, |h, &p| splitmix(h ^ splitmix(p)))
}

/// Identifies the randomness of one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub trial: u64,
}

impl StreamKey {
    pub fn new(seed: u64, trial: u64) -> Self {
        StreamKey { seed, trial }
    }

    pub fn pair_rng(&self, a: usize, b: usize) -> ChaCha8Rng {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        ChaCha8Rng::seed_from_u64(derive_seed(&[self.seed, self.trial, TAG_PAIR, lo as u64, hi as u64]))
    }

    pub fn slate_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(&[self.seed, self.trial, TAG_SLATE]))
    }

    /// Stream for the learner's own coin flips (pivots and the like).
    pub fn algo_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(&[self.seed, self.trial, TAG_ALGO]))
    }

    /// Key for a retry of the same trial.
    pub fn retry(&self, attempt: u64) -> StreamKey {
        if attempt == 0 {
            *self
        } else {
            StreamKey { seed: derive_seed(&[self.seed, attempt]), trial: self.trial }
        }
    }
}

/// Lazily created pair streams for one trial.
#[derive(Debug)]
pub(crate) struct PairStreams {
    key: StreamKey,
    streams: HashMap<(usize, usize), ChaCha8Rng>,
}

impl PairStreams {
    pub(crate) fn new(key: StreamKey) -> Self {
        PairStreams { key, streams: HashMap::new() }
    }

    fn rng(&mut self, a: usize, b: usize) -> &mut ChaCha8Rng {
        let k = if a < b { (a, b) } else { (b, a) };
        let key = self.key;
        self.streams.entry(k).or_insert_with(|| key.pair_rng(a, b))
    }

    /// One query; `p_lo` is the probability that the smaller item wins.
    pub(crate) fn single(&mut self, a: usize, b: usize, p_lo: f64) -> usize {
        let lo_wins = self.rng(a, b).random::<f64>() < p_lo;
        match (lo_wins, a < b) {
            (true, true) | (false, false) => a,
            _ => b,
        }
    }

    /// Wins of `a` among `q` queries; `p_a` is the probability `a` wins.
    pub(crate) fn wins(&mut self, a: usize, b: usize, p_a: f64, q: u128) -> u128 {
        if q == 1 {
            let p_lo = if a < b { p_a } else { 1.0 - p_a };
            return u128::from(self.single(a, b, p_lo) == a);
        }
        let lo_first = a < b;
        let p_lo = if lo_first { p_a } else { 1.0 - p_a };
        let lo_wins = binomial(self.rng(a, b), q, p_lo);
        if lo_first {
            lo_wins
        } else {
            q - lo_wins
        }
    }

    /// Losses of `t` before its `k`-th win; `p_t` is the probability `t` wins.
    pub(crate) fn losses(&mut self, t: usize, o: usize, p_t: f64, k: u128) -> Result<u128> {
        if k == 0 {
            return Ok(0);
        }
        if p_t <= 0.0 {
            return Err(Error::GeometricCap { u: t, v: o });
        }
        let rng = self.rng(t, o);
        if k <= 32 {
            let mut total = 0;
            for _ in 0..k {
                let y = u128::from(geometric(rng, p_t));
                if y > GEOMETRIC_CAP {
                    return Err(Error::GeometricCap { u: t, v: o });
                }
                total += y;
            }
            return Ok(total);
        }
        Ok(negative_binomial(rng, k, p_t))
    }
}

fn geometric(rng: &mut ChaCha8Rng, p: f64) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    Geometric::new(p).expect("probability in (0, 1)").sample(rng)
}

fn normal_count(rng: &mut ChaCha8Rng, mean: f64, sd: f64, max: f64) -> u128 {
    let z: f64 = StandardNormal.sample(rng);
    (mean + sd * z).round().clamp(0.0, max) as u128
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u128 {
    if lambda <= 0.0 {
        0
    } else if lambda < 1e12 {
        Poisson::new(lambda).expect("finite positive rate").sample(rng) as u128
    } else {
        normal_count(rng, lambda, lambda.sqrt(), f64::MAX)
    }
}

/// Binomial(q, p). Exact for `q < 2^64`; beyond that the minority count is
/// drawn from its Poisson or normal limit.
pub(crate) fn binomial(rng: &mut ChaCha8Rng, q: u128, p: f64) -> u128 {
    if q == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return q;
    }
    if let Ok(q64) = u64::try_from(q) {
        return Binomial::new(q64, p).expect("probability in (0, 1)").sample(rng) as u128;
    }
    let (minority, flip) = if p <= 0.5 { (p, false) } else { (1.0 - p, true) };
    let lambda = q as f64 * minority;
    let x = if lambda < 1e9 {
        poisson(rng, lambda).min(q)
    } else {
        normal_count(rng, lambda, (lambda * (1.0 - minority)).sqrt(), q as f64).min(q)
    };
    if flip {
        q - x
    } else {
        x
    }
}

/// Number of failures before the `k`-th success, drawn as a gamma-mixed
/// Poisson.
pub(crate) fn negative_binomial(rng: &mut ChaCha8Rng, k: u128, p: f64) -> u128 {
    if p >= 1.0 {
        return 0;
    }
    let scale = (1.0 - p) / p;
    let lambda = Gamma::new(k as f64, scale).expect("positive shape and scale").sample(rng);
    poisson(rng, lambda)
}
