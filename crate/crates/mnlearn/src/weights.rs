//! Weight extraction from an estimation forest, and the three learners.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};
use crate::forest::{build_balanced_estimation_forest, build_estimation_forest, EstimationForest};
use crate::model::LogWeightMnl;
use crate::oracle::{build_replay_table, LiveOracle, Oracle, ReplayOracle};

/// Cluster separation used by the learners.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Assigns log-weights along each tree of the forest, visiting trees from
/// the heaviest center down. Every tree after the first is shifted so that
/// its heaviest item weighs `eps / n` times the lightest weight assigned so
/// far. Makes no oracle queries.
pub fn generate_weights(forest: &EstimationForest) -> Result<LogWeightMnl> {
    let n = forest.n();
    let adj = forest.adjacency();
    let mut w: Vec<Option<f64>> = vec![None; n];
    let mut w_min = 0.0f64;
    let range_cap = n as f64 * (300.0 * n as f64 / forest.eps).ln();
    let last = forest.graph.centers.len().saturating_sub(1);
    for (k, &c) in forest.graph.centers.iter().enumerate().rev() {
        if w[c].is_some() {
            continue;
        }
        w[c] = Some(0.0);
        let mut tree = vec![c];
        let mut stack = vec![c];
        while let Some(u) = stack.pop() {
            let wu = w[u].unwrap();
            for &(x, l) in &adj[u] {
                if w[x].is_none() {
                    w[x] = Some(wu + l);
                    tree.push(x);
                    stack.push(x);
                }
            }
        }
        let top = tree.iter().map(|&x| w[x].unwrap()).fold(f64::NEG_INFINITY, f64::max);
        let bottom = tree.iter().map(|&x| w[x].unwrap()).fold(f64::INFINITY, f64::min);
        if top - bottom > range_cap {
            return Err(Error::Invariant(format!("tree at center {c} spans a log-range of {}", top - bottom)));
        }
        if k != last {
            let shift = forest.eps.ln() - top - (n as f64).ln() + w_min;
            for &x in &tree {
                w[x] = Some(w[x].unwrap() + shift);
            }
        }
        w_min = tree.iter().map(|&x| w[x].unwrap()).fold(w_min, f64::min);
    }
    let log_w = w
        .into_iter()
        .enumerate()
        .map(|(i, x)| x.ok_or_else(|| Error::Invariant(format!("item {i} not reached by the forest"))))
        .collect::<Result<Vec<f64>>>()?;
    LogWeightMnl::new(log_w)
}

/// A learned model with the forest it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Learned {
    pub model: LogWeightMnl,
    pub forest: EstimationForest,
}

fn split_eps(eps: f64, delta: f64) -> Result<f64> {
    check_open_unit("eps", eps)?;
    check_open_unit("delta", delta)?;
    Ok(eps / 13.0 / 9.0)
}

/// Learns an MNL within `d1 <= eps` with probability `1 - delta`, using
/// `O(n log n)` queries for constant `eps` and `delta`.
pub fn learn_adaptive<R: Rng + ?Sized>(oracle: &mut dyn Oracle, eps: f64, delta: f64, rng: &mut R) -> Result<Learned> {
    let forest_eps = split_eps(eps, delta)?;
    let forest = build_estimation_forest(oracle, DEFAULT_ALPHA, forest_eps, delta, rng)?;
    Ok(Learned { model: generate_weights(&forest)?, forest })
}

/// Like [`learn_adaptive`], but queries every pair only polylogarithmically
/// often.
pub fn learn_balanced<R: Rng + ?Sized>(oracle: &mut dyn Oracle, eps: f64, delta: f64, rng: &mut R) -> Result<Learned> {
    let forest_eps = split_eps(eps, delta)?;
    let forest = build_balanced_estimation_forest(oracle, DEFAULT_ALPHA, forest_eps, delta, rng)?;
    Ok(Learned { model: generate_weights(&forest)?, forest })
}

/// Queries every pair `m` times in one batch, then runs [`learn_balanced`]
/// against the recorded answers. Fails with `BudgetExhausted` when `m` is
/// below what the balanced learner needs on some pair.
pub fn learn_nonadaptive<R: Rng + ?Sized>(
    oracle: &mut LiveOracle,
    eps: f64,
    delta: f64,
    m: u128,
    rng: &mut R,
) -> Result<Learned> {
    split_eps(eps, delta)?;
    let table = build_replay_table(oracle, m)?;
    learn_balanced(&mut ReplayOracle::new(table), eps, delta, rng)
}
