use super::{Oracle, QueryLedger};
use crate::error::Result;
use crate::model::check_slate;

/// An oracle whose answers come from a caller-supplied function, for
/// adversarial and deterministic scenarios.
pub struct ScriptedOracle<F> {
    n: usize,
    answer: F,
    ledger: QueryLedger,
}

impl<F: FnMut(&[usize]) -> usize> ScriptedOracle<F> {
    pub fn new(n: usize, answer: F) -> Self {
        ScriptedOracle { n, answer, ledger: QueryLedger::new() }
    }
}

impl<F: FnMut(&[usize]) -> usize> Oracle for ScriptedOracle<F> {
    fn n(&self) -> usize {
        self.n
    }

    fn max_sample(&mut self, slate: &[usize]) -> Result<usize> {
        check_slate(slate, self.n)?;
        self.ledger.record(slate, 1);
        Ok((self.answer)(slate))
    }

    fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }
}
