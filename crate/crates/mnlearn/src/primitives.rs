//! Statistical building blocks: pair comparison, ratio estimation, geometric
//! counting, and the balanced median-of-means ratio estimator.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};
use crate::oracle::Oracle;
use crate::ordering::ClusterGraph;

/// An estimate of a weight ratio `w_i / w_j`, finite values in log domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RatioEstimate {
    Zero,
    Finite(f64),
    Infinite,
}

impl RatioEstimate {
    /// The estimate of `w_j / w_i`.
    pub fn recip(self) -> Self {
        match self {
            RatioEstimate::Zero => RatioEstimate::Infinite,
            RatioEstimate::Finite(x) => RatioEstimate::Finite(-x),
            RatioEstimate::Infinite => RatioEstimate::Zero,
        }
    }

    /// `max{self, exp(floor)}`.
    pub fn at_least(self, floor: f64) -> Self {
        match self {
            RatioEstimate::Zero => RatioEstimate::Finite(floor),
            RatioEstimate::Finite(x) => RatioEstimate::Finite(x.max(floor)),
            RatioEstimate::Infinite => RatioEstimate::Infinite,
        }
    }

    pub fn log(self) -> Option<f64> {
        match self {
            RatioEstimate::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, RatioEstimate::Finite(_))
    }

    /// Whether the estimate is strictly above `exp(log_tau)`.
    pub fn exceeds(self, log_tau: f64) -> bool {
        match self {
            RatioEstimate::Zero => false,
            RatioEstimate::Finite(x) => x > log_tau,
            RatioEstimate::Infinite => true,
        }
    }
}

fn ceil_count(x: f64) -> u128 {
    x.ceil() as u128
}

/// Queries made by one [`compare`] call.
pub fn compare_queries(c: f64, eps: f64, delta: f64) -> u128 {
    ceil_count(20.0 / (c * eps * eps) * (6.0 / delta).ln())
}

/// Empirical win frequencies of `i` and `j` over `compare_queries(c, eps,
/// delta)` queries to `{i, j}`, with a frequency below `c/2` reported as 0.
pub fn compare(oracle: &mut dyn Oracle, i: usize, j: usize, c: f64, eps: f64, delta: f64) -> Result<(f64, f64)> {
    check_open_unit("c", c)?;
    check_open_unit("eps", eps)?;
    check_open_unit("delta", delta)?;
    let m = compare_queries(c, eps, delta);
    let wins_i = oracle.pair_wins(i, j, m)?;
    let p_i = wins_i as f64 / m as f64;
    let p_j = (m - wins_i) as f64 / m as f64;
    if p_i < c / 2.0 {
        Ok((0.0, p_j))
    } else if p_j < c / 2.0 {
        Ok((p_i, 0.0))
    } else {
        Ok((p_i, p_j))
    }
}

fn check_half_open(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x <= 0.5 {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must lie in (0, 1/2], got {x}")))
    }
}

/// Queries made by one [`estimate_ratio`] call.
pub fn estimate_ratio_queries(alpha: f64, eps: f64, delta: f64) -> u128 {
    compare_queries(alpha / (alpha + 1.0), eps / 3.0, delta)
}

pub fn estimate_ratio(
    oracle: &mut dyn Oracle,
    i: usize,
    j: usize,
    alpha: f64,
    eps: f64,
    delta: f64,
) -> Result<RatioEstimate> {
    check_half_open("alpha", alpha)?;
    check_half_open("eps", eps)?;
    check_half_open("delta", delta)?;
    let (p_i, p_j) = compare(oracle, i, j, alpha / (alpha + 1.0), eps / 3.0, delta)?;
    Ok(if p_i == 0.0 {
        RatioEstimate::Zero
    } else if p_j == 0.0 {
        RatioEstimate::Infinite
    } else {
        RatioEstimate::Finite(p_i.ln() - p_j.ln())
    })
}

/// Number of queries to `{u, v}` won by `v` before `u` first wins.
pub fn get_geometric(oracle: &mut dyn Oracle, u: usize, v: usize) -> Result<u128> {
    oracle.pair_losses(u, v, 1)
}

/// Sizes used by [`balanced_estimate_ratio`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalancedEstimateParams {
    pub b1: f64,
    pub n_alpha_eps: f64,
    /// Number of groups.
    pub m: u128,
    /// Group size.
    pub n: u128,
    /// Draws per item of the far cluster.
    pub xi: u128,
}

impl BalancedEstimateParams {
    pub fn new(a1: f64, a2: f64, eps: f64, alpha: f64, delta: f64, cluster_size: usize) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.2) {
            return Err(Error::arg(format!("balanced estimation needs eps in (0, 1/5), got {eps}")));
        }
        if !(alpha > 0.0 && a1 > 0.0 && a2 > 0.0) {
            return Err(Error::arg("alpha, A1 and A2 must be positive"));
        }
        check_open_unit("delta", delta)?;
        if cluster_size == 0 {
            return Err(Error::arg("empty cluster"));
        }
        let b1 = (2.0 * eps / (1.0 - eps - 0.75)).max(6.0 / (1.0 - eps)).max(24.0 * eps / (23.0 - 4.0 * eps));
        let n_alpha_eps = b1 * b1 / (alpha * eps * eps);
        let m = ceil_count(8.0 * (2.0 / delta).ln());
        let n = ceil_count(2.0 * a1 * (1.0 + a1 / a2) * n_alpha_eps);
        let size = cluster_size as u128;
        let xi = (m * n).div_ceil(size);
        Ok(BalancedEstimateParams { b1, n_alpha_eps, m, n, xi })
    }

    /// High-probability bound on the queries one call makes to a single
    /// pair `{c_i, s}`: `2 xi / p + (2 / p^2) ln(10 |C_j| / delta) + 1` with
    /// `p = A2 / (A1 + A2)`.
    pub fn per_pair_bound(&self, a1: f64, a2: f64, delta: f64, cluster_size: usize) -> f64 {
        let p = a2 / (a1 + a2);
        2.0 * self.xi as f64 / p + 2.0 / (p * p) * (10.0 * cluster_size as f64 / delta).ln() + 1.0
    }
}

/// Median-of-means estimate of `w_{c_i} / w_{c_j}` that spreads its queries
/// over the pairs `{c_i, s}`, `s` in cluster `j`. Never returns `Zero`.
#[allow(clippy::too_many_arguments)]
pub fn balanced_estimate_ratio(
    oracle: &mut dyn Oracle,
    graph: &ClusterGraph,
    i: usize,
    j: usize,
    a1: f64,
    a2: f64,
    eps: f64,
    alpha: f64,
    delta: f64,
) -> Result<RatioEstimate> {
    let t = graph.len();
    if i >= t || j >= t || i == j {
        return Err(Error::arg(format!("cluster indices ({i}, {j}) invalid for {t} clusters")));
    }
    let cluster = &graph.clusters[j];
    let params = BalancedEstimateParams::new(a1, a2, eps, alpha, delta, cluster.len())?;
    let (groups, size, xi) = (params.m, params.n, params.xi);
    let used = groups * size;
    let c_i = graph.centers[i];
    let mut sums = vec![0.0f64; groups as usize];
    for (k, &s) in cluster.iter().enumerate() {
        let r_js = (-graph.log_ratio_to_center(s)).exp();
        let end = (k as u128 + 1) * xi;
        let mut pos = k as u128 * xi;
        while pos < end {
            let (stop, group) = if pos >= used {
                (end, None)
            } else {
                let g = pos / size;
                (end.min((g + 1) * size), Some(g as usize))
            };
            let losses = oracle.pair_losses(c_i, s, stop - pos)?;
            if let Some(g) = group {
                sums[g] += r_js * losses as f64;
            }
            pos = stop;
        }
    }
    let mut means: Vec<f64> = sums.iter().map(|s| s / size as f64).collect();
    means.sort_by(f64::total_cmp);
    let y = means[(means.len() - 1) / 2];
    Ok(if y <= 0.75 * alpha { RatioEstimate::Infinite } else { RatioEstimate::Finite(-y.ln()) })
}
