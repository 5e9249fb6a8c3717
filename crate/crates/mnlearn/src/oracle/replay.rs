use std::collections::HashMap;

use super::stream::PairStreams;
use super::transcript::Triple;
use super::{check_pair, LiveOracle, Oracle, QueryLedger, StreamKey};
use crate::error::{Error, Result};
use crate::model::{check_slate, Model};

/// `m` pre-sampled answers for every pair.
///
/// The table fixes, for each pair, a stream whose first `m` answers are the
/// table's contents; answers are revealed lazily, in order, which has the
/// same joint law as sampling them all up front because the reader only ever
/// sees a prefix of each sequence.
#[derive(Clone, Debug)]
pub struct ReplayTable {
    model: Model,
    key: StreamKey,
    m: u128,
}

/// Issues the non-adaptive batch: `m` queries to every pair, charged to the
/// live oracle's ledger at once.
pub fn build_replay_table(oracle: &mut LiveOracle, m: u128) -> Result<ReplayTable> {
    if m == 0 {
        return Err(Error::arg("replay table needs m >= 1"));
    }
    let n = oracle.n();
    let ledger = oracle.ledger_mut();
    for a in 0..n {
        for b in a + 1..n {
            ledger.record_pair(a, b, m);
        }
    }
    Ok(ReplayTable { model: oracle.model().clone(), key: oracle.key(), m })
}

impl ReplayTable {
    pub fn m(&self) -> u128 {
        self.m
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    /// The table's answers for `{a, b}` as a reader issuing single queries
    /// sees them. Aggregated reads draw their counts from the same pair
    /// stream, so they follow the same law but are not tallies of this
    /// sequence.
    pub fn answers(&self, a: usize, b: usize) -> Result<Vec<usize>> {
        check_pair(a, b, self.n())?;
        let m = usize::try_from(self.m).map_err(|_| Error::arg("table too large to materialize"))?;
        let mut streams = PairStreams::new(self.key);
        let p_lo = self.model.pair_win_prob(a.min(b), a.max(b));
        Ok((0..m).map(|_| streams.single(a, b, p_lo)).collect())
    }

    /// All answers as `(u, v, winner)` triples with `u < v`, pairs in
    /// lexicographic order. Refuses tables with more than `limit` answers.
    pub fn transcript(&self, limit: u128) -> Result<Vec<Triple>> {
        let n = self.n() as u128;
        let size = self.m * (n * n.saturating_sub(1) / 2);
        if size > limit {
            return Err(Error::arg(format!("table holds {size} answers, above the transcript limit {limit}")));
        }
        let mut out = Vec::with_capacity(size as usize);
        for a in 0..self.n() {
            for b in a + 1..self.n() {
                out.extend(self.answers(a, b)?.into_iter().map(|w| (a, b, w)));
            }
        }
        Ok(out)
    }
}

/// Answers pair queries from a [`ReplayTable`] without touching the live
/// oracle. Its ledger counts answers revealed.
#[derive(Debug)]
pub struct ReplayOracle {
    table: ReplayTable,
    pairs: PairStreams,
    cursors: HashMap<(usize, usize), u128>,
    ledger: QueryLedger,
}

impl ReplayOracle {
    pub fn new(table: ReplayTable) -> Self {
        ReplayOracle { pairs: PairStreams::new(table.key), table, cursors: HashMap::new(), ledger: QueryLedger::new() }
    }

    pub fn table(&self) -> &ReplayTable {
        &self.table
    }

    pub fn cursor(&self, a: usize, b: usize) -> u128 {
        self.cursors.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    }

    /// Next answer for `{a, b}`.
    pub fn replay_sample(&mut self, a: usize, b: usize) -> Result<usize> {
        self.max_sample(&[a, b])
    }

    fn advance(&mut self, a: usize, b: usize, by: u128) -> Result<()> {
        let m = self.table.m;
        let c = self.cursors.entry((a.min(b), a.max(b))).or_insert(0);
        if by > m - *c {
            return Err(Error::BudgetExhausted { u: a.min(b), v: a.max(b), m });
        }
        *c += by;
        self.ledger.record_pair(a, b, by);
        Ok(())
    }
}

impl Oracle for ReplayOracle {
    fn n(&self) -> usize {
        self.table.n()
    }

    fn max_sample(&mut self, slate: &[usize]) -> Result<usize> {
        check_slate(slate, self.n())?;
        if slate.len() != 2 {
            return Err(Error::NonPairQuery(slate.len()));
        }
        let (a, b) = (slate[0], slate[1]);
        self.advance(a, b, 1)?;
        let p_lo = self.table.model.pair_win_prob(a.min(b), a.max(b));
        Ok(self.pairs.single(a, b, p_lo))
    }

    fn pair_wins(&mut self, a: usize, b: usize, queries: u128) -> Result<u128> {
        check_pair(a, b, self.n())?;
        self.advance(a, b, queries)?;
        let p = self.table.model.pair_win_prob(a, b);
        Ok(self.pairs.wins(a, b, p, queries))
    }

    fn pair_losses(&mut self, target: usize, other: usize, wins: u128) -> Result<u128> {
        check_pair(target, other, self.n())?;
        let p = self.table.model.pair_win_prob(target, other);
        let losses = self.pairs.losses(target, other, p, wins)?;
        self.advance(target, other, losses + wins)?;
        Ok(losses)
    }

    fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }
}
