//! The MaxSample oracle interface, query accounting, and replay.
//!
//! Besides single queries, the [`Oracle`] trait exposes two aggregated pair
//! operations. `pair_wins(a, b, q)` issues `q` queries to `{a, b}` and
//! reports how many `a` won; `pair_losses(t, o, k)` keeps querying `{t, o}`
//! until `t` has won `k` times and reports how many times it lost. Every
//! query is charged to the ledger. The default implementations loop over
//! [`Oracle::max_sample`]; the simulated oracles draw the same quantities
//! directly from their binomial and negative binomial laws, which is what
//! makes the large query budgets of the learners tractable.

mod ledger;
mod live;
mod replay;
mod scripted;
mod stream;
pub mod transcript;

pub use ledger::{LedgerSummary, QueryLedger};
pub use live::LiveOracle;
pub use replay::{build_replay_table, ReplayOracle, ReplayTable};
pub use scripted::ScriptedOracle;
pub use stream::{derive_seed, StreamKey};

use crate::error::{Error, Result};

/// Iteration cap of a single geometric draw.
pub const GEOMETRIC_CAP: u128 = 1_000_000_000;

pub trait Oracle {
    /// Number of items in the universe.
    fn n(&self) -> usize;

    /// One query: returns the winner of `slate`.
    fn max_sample(&mut self, slate: &[usize]) -> Result<usize>;

    /// Issues `queries` queries to `{a, b}` and returns how many `a` won.
    fn pair_wins(&mut self, a: usize, b: usize, queries: u128) -> Result<u128> {
        check_pair(a, b, self.n())?;
        let mut wins = 0;
        for _ in 0..queries {
            if self.max_sample(&[a, b])? == a {
                wins += 1;
            }
        }
        Ok(wins)
    }

    /// Queries `{target, other}` until `target` has won `wins` times and
    /// returns the number of queries `other` won in the meantime.
    fn pair_losses(&mut self, target: usize, other: usize, wins: u128) -> Result<u128> {
        check_pair(target, other, self.n())?;
        let mut losses = 0;
        for _ in 0..wins {
            let mut run = 0;
            while self.max_sample(&[target, other])? != target {
                run += 1;
                if run > GEOMETRIC_CAP {
                    return Err(Error::GeometricCap { u: target, v: other });
                }
            }
            losses += run;
        }
        Ok(losses)
    }

    fn ledger(&self) -> &QueryLedger;
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn n(&self) -> usize {
        (**self).n()
    }

    fn max_sample(&mut self, slate: &[usize]) -> Result<usize> {
        (**self).max_sample(slate)
    }

    fn pair_wins(&mut self, a: usize, b: usize, queries: u128) -> Result<u128> {
        (**self).pair_wins(a, b, queries)
    }

    fn pair_losses(&mut self, target: usize, other: usize, wins: u128) -> Result<u128> {
        (**self).pair_losses(target, other, wins)
    }

    fn ledger(&self) -> &QueryLedger {
        (**self).ledger()
    }
}

pub(crate) fn check_pair(a: usize, b: usize, n: usize) -> Result<()> {
    for x in [a, b] {
        if x >= n {
            return Err(Error::ItemOutOfRange { item: x, n });
        }
    }
    if a == b {
        return Err(Error::arg(format!("pair query needs two distinct items, got ({a}, {b})")));
    }
    Ok(())
}
