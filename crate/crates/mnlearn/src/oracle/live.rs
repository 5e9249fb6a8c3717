use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::stream::PairStreams;
use super::{check_pair, Oracle, QueryLedger, StreamKey};
use crate::error::Result;
use crate::model::{check_slate, Model};

/// A simulated oracle answering from a ground-truth model.
///
/// Pair queries draw from the pair's own stream; larger slates share one
/// slate stream.
#[derive(Debug)]
pub struct LiveOracle {
    model: Model,
    key: StreamKey,
    pairs: PairStreams,
    slate_rng: ChaCha8Rng,
    ledger: QueryLedger,
}

impl LiveOracle {
    pub fn new(model: Model, key: StreamKey) -> Self {
        LiveOracle { pairs: PairStreams::new(key), slate_rng: key.slate_rng(), model, key, ledger: QueryLedger::new() }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    pub(crate) fn ledger_mut(&mut self) -> &mut QueryLedger {
        &mut self.ledger
    }
}

impl Oracle for LiveOracle {
    fn n(&self) -> usize {
        self.model.n()
    }

    fn max_sample(&mut self, slate: &[usize]) -> Result<usize> {
        check_slate(slate, self.n())?;
        self.ledger.record(slate, 1);
        Ok(match slate.len() {
            1 => slate[0],
            2 => {
                let (a, b) = (slate[0], slate[1]);
                let p_lo = self.model.pair_win_prob(a.min(b), a.max(b));
                self.pairs.single(a, b, p_lo)
            }
            _ => {
                let dist = self.model.slate_distribution_unchecked(slate);
                let u: f64 = self.slate_rng.random();
                let mut acc = 0.0;
                let mut last = 0;
                for (k, &p) in dist.iter().enumerate() {
                    if p > 0.0 {
                        last = k;
                        acc += p;
                        if u < acc {
                            return Ok(slate[k]);
                        }
                    }
                }
                slate[last]
            }
        })
    }

    fn pair_wins(&mut self, a: usize, b: usize, queries: u128) -> Result<u128> {
        check_pair(a, b, self.n())?;
        let p = self.model.pair_win_prob(a, b);
        let wins = self.pairs.wins(a, b, p, queries);
        self.ledger.record_pair(a, b, queries);
        Ok(wins)
    }

    fn pair_losses(&mut self, target: usize, other: usize, wins: u128) -> Result<u128> {
        check_pair(target, other, self.n())?;
        let p = self.model.pair_win_prob(target, other);
        let losses = self.pairs.losses(target, other, p, wins)?;
        self.ledger.record_pair(target, other, losses + wins);
        Ok(losses)
    }

    fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }
}
