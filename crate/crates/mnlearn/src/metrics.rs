//! Distances between choice models, reporting, and result rows.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_open_unit, Error, Result};
use crate::model::{LogWeightMnl, Model};
use crate::oracle::{LedgerSummary, Oracle, QueryLedger};

/// Largest universe for exhaustive slate enumeration.
pub const EXACT_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DistanceMode {
    Exact,
    /// Lower bound from this many slates.
    Sampled(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceReport {
    pub mode: DistanceMode,
    /// Largest l1 distance over the slates examined.
    pub d1: f64,
    /// Largest l-infinity distance over the slates examined.
    pub dinf: f64,
    /// Slate attaining `d1`.
    pub argmax_slate: Vec<usize>,
    /// Slate attaining `dinf`.
    pub argmax_slate_inf: Vec<usize>,
}

fn slate_gaps(a: &Model, b: &Model, slate: &[usize]) -> (f64, f64) {
    let pa = a.slate_distribution_unchecked(slate);
    let pb = b.slate_distribution_unchecked(slate);
    pa.iter().zip(&pb).fold((0.0, 0.0), |(l1, li), (x, y)| {
        let d = (x - y).abs();
        (l1 + d, f64::max(li, d))
    })
}

fn mask_slate(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

#[derive(Clone, Copy)]
struct Best {
    d1: f64,
    at1: u64,
    dinf: f64,
    atinf: u64,
}

impl Best {
    const NONE: Best = Best { d1: -1.0, at1: 0, dinf: -1.0, atinf: 0 };

    fn merge(self, o: Best) -> Best {
        let pick = |x: f64, ax: u64, y: f64, ay: u64| if y > x || (y == x && ay < ax) { (y, ay) } else { (x, ax) };
        let (d1, at1) = pick(self.d1, self.at1, o.d1, o.at1);
        let (dinf, atinf) = pick(self.dinf, self.atinf, o.dinf, o.atinf);
        Best { d1, at1, dinf, atinf }
    }
}

fn check_same_n(a: &Model, b: &Model) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::arg(format!("models have {} and {} items", a.n(), b.n())));
    }
    Ok(())
}

/// Maximum over all `2^n - 1` slates. Refuses `n > EXACT_CAP`.
pub fn distance_exact(a: &Model, b: &Model) -> Result<DistanceReport> {
    distance_exact_capped(a, b, EXACT_CAP)
}

pub fn distance_exact_capped(a: &Model, b: &Model, cap: usize) -> Result<DistanceReport> {
    check_same_n(a, b)?;
    let n = a.n();
    if n > cap || n >= 63 {
        return Err(Error::TooLargeForExact { n, cap });
    }
    let best = (1u64..1 << n)
        .into_par_iter()
        .map(|mask| {
            let (d1, dinf) = slate_gaps(a, b, &mask_slate(mask, n));
            Best { d1, at1: mask, dinf, atinf: mask }
        })
        .reduce(|| Best::NONE, Best::merge);
    Ok(DistanceReport {
        mode: DistanceMode::Exact,
        d1: best.d1,
        dinf: best.dinf,
        argmax_slate: mask_slate(best.at1, n),
        argmax_slate_inf: mask_slate(best.atinf, n),
    })
}

/// Slates examined by [`distance_sampled`]: the `n - 1` prefixes of `a`'s
/// lightest-first weight order of size at least 2 (the last one is the full
/// slate), then every pair if the remaining budget allows it, then uniform
/// random subsets of size at least 2 up to `k` slates in total.
pub fn sample_slates<R: Rng + ?Sized>(a: &Model, k: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let n = a.n();
    let order = a.weight_order();
    let mut slates: Vec<Vec<usize>> = (2..=n).map(|len| order[..len].to_vec()).collect();
    if n == 1 {
        slates.push(vec![0]);
    }
    let pairs = n * (n - 1) / 2;
    if k >= slates.len() + pairs {
        for u in 0..n {
            for v in u + 1..n {
                slates.push(vec![u, v]);
            }
        }
    }
    while slates.len() < k && n >= 2 {
        let s: Vec<usize> = (0..n).filter(|_| rng.random::<bool>()).collect();
        if s.len() >= 2 {
            slates.push(s);
        }
    }
    slates
}

/// Lower bound on the distances from the slates of [`sample_slates`].
pub fn distance_sampled<R: Rng + ?Sized>(a: &Model, b: &Model, k: usize, rng: &mut R) -> Result<DistanceReport> {
    check_same_n(a, b)?;
    if k == 0 {
        return Err(Error::arg("sampled distance needs at least one slate"));
    }
    let slates = sample_slates(a, k, rng);
    let (mut d1, mut dinf) = (-1.0, -1.0);
    let (mut at1, mut atinf) = (0, 0);
    for (idx, s) in slates.iter().enumerate() {
        let (x, y) = slate_gaps(a, b, s);
        if x > d1 {
            (d1, at1) = (x, idx);
        }
        if y > dinf {
            (dinf, atinf) = (y, idx);
        }
    }
    Ok(DistanceReport {
        mode: DistanceMode::Sampled(slates.len()),
        d1,
        dinf,
        argmax_slate: slates[at1].clone(),
        argmax_slate_inf: slates[atinf].clone(),
    })
}

/// Two MNLs that agree on every pair to within `eps / n` but differ by at
/// least `eps / 9` on the full slate: item 0 weighs `n` in both, the others
/// weigh 1 in the first and `1 + eps` in the second.
pub fn separation_fixture(n: usize, eps: f64) -> Result<(LogWeightMnl, LogWeightMnl)> {
    if n < 2 {
        return Err(Error::arg("separation fixture needs n >= 2"));
    }
    check_open_unit("eps", eps)?;
    let heavy = (n as f64).ln();
    let m1 = (0..n).map(|i| if i == 0 { heavy } else { 0.0 }).collect();
    let m2 = (0..n).map(|i| if i == 0 { heavy } else { eps.ln_1p() }).collect();
    Ok((LogWeightMnl::new(m1)?, LogWeightMnl::new(m2)?))
}

pub fn ledger_report(ledger: &QueryLedger) -> LedgerSummary {
    ledger.summary()
}

/// Samples per slate used by [`estimates_on_all_slates`].
pub fn all_slates_queries(n: usize, eps: f64, delta: f64) -> u128 {
    (2.0 / (eps * eps) * (n as f64 * 3f64.ln() + (2.0 / delta).ln())).ceil() as u128
}

/// Empirical winner frequencies on every non-empty slate, from
/// [`all_slates_queries`] queries each. Slates are listed by bitmask.
pub fn estimates_on_all_slates(oracle: &mut dyn Oracle, eps: f64, delta: f64) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
    check_open_unit("eps", eps)?;
    check_open_unit("delta", delta)?;
    let n = oracle.n();
    if n > EXACT_CAP {
        return Err(Error::TooLargeForExact { n, cap: EXACT_CAP });
    }
    let q = all_slates_queries(n, eps, delta);
    let mut out = Vec::with_capacity((1 << n) - 1);
    for mask in 1u64..1 << n {
        let slate = mask_slate(mask, n);
        let mut counts = vec![0u128; slate.len()];
        for _ in 0..q {
            let w = oracle.max_sample(&slate)?;
            counts[slate.iter().position(|&x| x == w).expect("winner lies in the slate")] += 1;
        }
        out.push((slate, counts.iter().map(|&c| c as f64 / q as f64).collect()));
    }
    Ok(out)
}

/// Largest l1 error of slate-wise estimates against a model.
pub fn max_slate_error(estimates: &[(Vec<usize>, Vec<f64>)], model: &Model) -> f64 {
    estimates
        .iter()
        .map(|(s, p)| model.slate_distribution_unchecked(s).iter().zip(p).map(|(x, y)| (x - y).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Version line written before the CSV header.
pub const CSV_SCHEMA: &str = "# mnlearn results schema v1";

pub const CSV_COLUMNS: [&str; 10] =
    ["n", "eps", "delta", "algo", "trial", "d1", "dinf", "total_queries", "max_pair_queries", "seconds"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
    pub algo: String,
    pub trial: u64,
    pub d1: f64,
    pub dinf: f64,
    pub total_queries: u128,
    pub max_pair_queries: u128,
    pub seconds: f64,
}

pub fn write_csv<W: Write>(mut out: W, rows: &[CsvRow]) -> Result<()> {
    writeln!(out, "{CSV_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.eps.to_string(),
            r.delta.to_string(),
            r.algo.clone(),
            r.trial.to_string(),
            r.d1.to_string(),
            r.dinf.to_string(),
            r.total_queries.to_string(),
            r.max_pair_queries.to_string(),
            format!("{:.6}", r.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}
