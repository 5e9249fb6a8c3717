use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

/// Query counts: total, per unordered pair (size-2 slates only), and per
/// slate size.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryLedger {
    total: u128,
    per_pair: HashMap<(usize, usize), u128>,
    per_size: BTreeMap<usize, u128>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, slate: &[usize], count: u128) {
        if slate.len() == 2 {
            self.record_pair(slate[0], slate[1], count);
        } else {
            self.total += count;
            *self.per_size.entry(slate.len()).or_default() += count;
        }
    }

    pub fn record_pair(&mut self, a: usize, b: usize, count: u128) {
        if count == 0 {
            return;
        }
        self.total += count;
        *self.per_size.entry(2).or_default() += count;
        *self.per_pair.entry(key(a, b)).or_default() += count;
    }

    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn pair(&self, a: usize, b: usize) -> u128 {
        self.per_pair.get(&key(a, b)).copied().unwrap_or(0)
    }

    /// Largest per-pair count, with the pair that attains it (smallest pair
    /// on ties).
    pub fn max_pair(&self) -> Option<((usize, usize), u128)> {
        self.per_pair
            .iter()
            .map(|(&p, &c)| (p, c))
            .max_by(|x, y| x.1.cmp(&y.1).then(y.0.cmp(&x.0)))
    }

    pub fn max_pair_count(&self) -> u128 {
        self.max_pair().map_or(0, |(_, c)| c)
    }

    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), u128)> + '_ {
        self.per_pair.iter().map(|(&p, &c)| (p, c))
    }

    pub fn per_size(&self) -> &BTreeMap<usize, u128> {
        &self.per_size
    }

    pub fn summary(&self) -> LedgerSummary {
        LedgerSummary {
            total: self.total,
            max_pair: self.max_pair_count(),
            pairs_touched: self.per_pair.len(),
            per_size: self.per_size.iter().map(|(&k, &v)| (k, v)).collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LedgerSummary {
    pub total: u128,
    pub max_pair: u128,
    pub pairs_touched: usize,
    pub per_size: Vec<(usize, u128)>,
}
