//! Estimation forests: the adaptive builder, the pair-balanced builder, and a
//! ground-truth validator.

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};
use crate::model::{logsumexp, LogWeightMnl};
use crate::oracle::Oracle;
use crate::ordering::{cluster_sort, quicksort_clustering, within, ClusterGraph};
use crate::primitives::{balanced_estimate_ratio, estimate_ratio, RatioEstimate};

/// Path-length parameter of the forests built here.
pub const PATH_LENGTH: usize = 5;

/// A directed edge estimate `log r(u, v)`; `log r(v, u)` is its negation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestEdge {
    pub u: usize,
    pub v: usize,
    pub log_r: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialState {
    /// `Z_i = alpha Z_{i-1} + |C_i|`, `Z_0 = 0`, listed from `Z_1`.
    pub z: Vec<f64>,
    pub beta: Vec<f64>,
    /// Look-back window of the balanced builder.
    pub lambda: Option<usize>,
}

impl PotentialState {
    fn z_of(graph: &ClusterGraph, alpha: f64) -> Vec<f64> {
        let mut prev = 0.0;
        graph
            .clusters
            .iter()
            .map(|c| {
                prev = alpha * prev + c.len() as f64;
                prev
            })
            .collect()
    }
}

/// Call counts kept by the builders, indexed by the lower cluster `j`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    /// Adaptive builder: ratio estimates with `j` as the lighter center.
    pub ratio_calls: Vec<u32>,
    /// Balanced builder: scan calls `(i, j)` made for this `j`.
    pub scan_calls: Vec<u32>,
    /// Balanced builder: fill-in calls `(j', j)` made for this `j`.
    pub fill_calls: Vec<u32>,
}

/// A forest over the items whose edges carry ratio estimates, together with
/// the cluster graph it extends (the star edges of the graph are forest
/// edges too).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationForest {
    pub graph: ClusterGraph,
    /// Center-to-center edges, `u` the heavier center.
    pub center_edges: Vec<ForestEdge>,
    pub t: usize,
    pub eps: f64,
    pub alpha: f64,
    pub potential: PotentialState,
    pub stats: BuildStats,
}

impl EstimationForest {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// All forest edges: star edges first, then center edges.
    pub fn edges(&self) -> impl Iterator<Item = ForestEdge> + '_ {
        self.graph
            .star_edges()
            .map(|(u, v, log_r)| ForestEdge { u, v, log_r })
            .chain(self.center_edges.iter().copied())
    }

    /// `log r(u, v)` if `{u, v}` is an edge.
    pub fn log_r(&self, u: usize, v: usize) -> Option<f64> {
        self.edges().find_map(|e| {
            if (e.u, e.v) == (u, v) {
                Some(e.log_r)
            } else if (e.v, e.u) == (u, v) {
                Some(-e.log_r)
            } else {
                None
            }
        })
    }

    /// For each item `u`, its neighbours `x` with `log r(x, u)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n()];
        for e in self.edges() {
            adj[e.v].push((e.u, e.log_r));
            adj[e.u].push((e.v, -e.log_r));
        }
        adj
    }

    /// Component index of every item and the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; self.n()];
        let mut count = 0;
        for root in 0..self.n() {
            if comp[root] != usize::MAX {
                continue;
            }
            comp[root] = count;
            let mut stack = vec![root];
            while let Some(u) = stack.pop() {
                for &(x, _) in &adj[u] {
                    if comp[x] == usize::MAX {
                        comp[x] = count;
                        stack.push(x);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    /// Invariants that hold by construction: a valid cluster graph, an
    /// acyclic edge set, components made of whole consecutive clusters, the
    /// floor `log r(c_i, c_j) >= (i - j) ln(1/alpha)` on center edges, and the
    /// potential recurrence with `sum Z_i <= n / (1 - alpha)`.
    pub fn check_structure(&self) -> std::result::Result<(), String> {
        self.graph.check_structure()?;
        let n = self.n();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in self.edges() {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            if a == b {
                return Err(format!("edge ({}, {}) closes a cycle", e.u, e.v));
            }
            parent[a] = b;
            if !e.log_r.is_finite() {
                return Err(format!("edge ({}, {}) is not finite", e.u, e.v));
            }
        }
        let (comp, count) = self.components();
        let mut lo = vec![usize::MAX; count];
        let mut hi = vec![0; count];
        let mut size = vec![0usize; count];
        for (i, cluster) in self.graph.clusters.iter().enumerate() {
            let k = comp[cluster[0]];
            if cluster.iter().any(|&u| comp[u] != k) {
                return Err(format!("cluster {i} is split across components"));
            }
            lo[k] = lo[k].min(i);
            hi[k] = hi[k].max(i);
            size[k] += 1;
        }
        if (0..count).any(|k| hi[k] - lo[k] + 1 != size[k]) {
            return Err("a component is not a run of consecutive clusters".into());
        }
        let floor_unit = (1.0 / self.alpha).ln();
        for e in &self.center_edges {
            let (i, j) = (self.graph.gamma[e.u], self.graph.gamma[e.v]);
            if i <= j || self.graph.centers[i] != e.u || self.graph.centers[j] != e.v {
                return Err(format!("center edge ({}, {}) is not oriented heavier-to-lighter", e.u, e.v));
            }
            if e.log_r < (i - j) as f64 * floor_unit {
                return Err(format!("center edge ({}, {}) is below its floor", e.u, e.v));
            }
        }
        let z = PotentialState::z_of(&self.graph, self.alpha);
        if z != self.potential.z {
            return Err("potential recurrence mismatch".into());
        }
        let sum: f64 = z.iter().sum();
        if sum > n as f64 / (1.0 - self.alpha) * (1.0 + 1e-12) {
            return Err(format!("sum of potentials {sum} exceeds n / (1 - alpha)"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forests always serialize")
    }
}

fn check_builder_args(alpha: f64, eps: f64, delta: f64) -> Result<()> {
    check_open_unit("alpha", alpha)?;
    check_open_unit("eps", eps)?;
    check_open_unit("delta", delta)
}

/// Adaptive builder. Clusters with [`cluster_sort`], then walks the centers
/// from the heaviest down with two pointers, linking `c_i` to `c_j` whenever
/// the floored estimate of `w_{c_i} / w_{c_j}` is finite.
pub fn build_estimation_forest<R: Rng + ?Sized>(
    oracle: &mut dyn Oracle,
    alpha: f64,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<EstimationForest> {
    check_builder_args(alpha, eps, delta)?;
    let n = oracle.n();
    let eps1 = eps / 10.0;
    let graph = cluster_sort(oracle, alpha, eps1, delta / 3.0, rng)?;
    let t = graph.len();
    let z = PotentialState::z_of(&graph, alpha);
    let beta: Vec<f64> = z.iter().map(|z| alpha * alpha * eps / (8.0 * z)).collect();
    let er_delta = delta / (6.0 * n as f64);
    let floor_unit = (1.0 / alpha).ln();

    let mut stats = BuildStats { ratio_calls: vec![0; t], ..Default::default() };
    let mut edges = Vec::new();
    let mut linked = HashSet::new();
    if t >= 2 {
        let (mut i, mut j) = (t - 1, t as isize - 2);
        while j >= 0 {
            let ju = j as usize;
            stats.ratio_calls[ju] += 1;
            let r = estimate_ratio(oracle, graph.centers[i], graph.centers[ju], beta[ju], eps1, er_delta)?
                .at_least((i - ju) as f64 * floor_unit);
            if let RatioEstimate::Finite(x) = r {
                if !linked.insert((i, ju)) {
                    return Err(Error::Invariant(format!("center edge ({i}, {ju}) added twice")));
                }
                edges.push(ForestEdge { u: graph.centers[i], v: graph.centers[ju], log_r: x });
                j -= 1;
            } else if i == ju + 1 {
                i = ju;
                j -= 1;
            } else {
                i = ju + 1;
            }
        }
    }
    Ok(EstimationForest {
        graph,
        center_edges: edges,
        t: PATH_LENGTH,
        eps,
        alpha,
        potential: PotentialState { z, beta, lambda: None },
        stats,
    })
}

/// One request made by the balanced builder to its ratio estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalancedCall {
    pub i: usize,
    pub j: usize,
    pub a1: f64,
    pub a2: f64,
    pub eps: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Whether this is a fill-in call relating an intermediate center to
    /// the first finite one.
    pub fill: bool,
}

/// Pair-balanced builder. Clusters with [`quicksort_clustering`]; every ratio
/// between centers is estimated with [`balanced_estimate_ratio`], so each
/// pair is queried polylogarithmically often.
pub fn build_balanced_estimation_forest<R: Rng + ?Sized>(
    oracle: &mut dyn Oracle,
    alpha: f64,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<EstimationForest> {
    build_balanced_estimation_forest_with(oracle, alpha, eps, delta, rng, &mut |o, g, c| {
        balanced_estimate_ratio(o, g, c.i, c.j, c.a1, c.a2, c.eps, c.alpha, c.delta)
    })
}

/// [`build_balanced_estimation_forest`] with a substitutable ratio estimator.
pub fn build_balanced_estimation_forest_with<R, F>(
    oracle: &mut dyn Oracle,
    alpha: f64,
    eps: f64,
    delta: f64,
    rng: &mut R,
    estimator: &mut F,
) -> Result<EstimationForest>
where
    R: Rng + ?Sized,
    F: FnMut(&mut dyn Oracle, &ClusterGraph, BalancedCall) -> Result<RatioEstimate>,
{
    check_builder_args(alpha, eps, delta)?;
    let n = oracle.n();
    let eps1 = eps / 10.0;
    let eps2 = eps1 / 30.0;
    let graph = quicksort_clustering(oracle, alpha, eps2, delta / 4.0, rng)?;
    let t = graph.len();
    let lambda = ((49.0 * n as f64 / (alpha * eps1)).ln() / (1.0 / alpha).ln()).ceil().max(1.0) as usize;
    let beta: Vec<f64> =
        graph.clusters.iter().map(|c| alpha * alpha * eps1 / (49.0 * c.len() as f64 * lambda as f64)).collect();
    let z = PotentialState::z_of(&graph, alpha);
    let ber_delta = delta / (4.0 * n as f64 * n as f64);
    let floor_unit = (1.0 / alpha).ln();
    let call = |i, j, beta: f64, fill| BalancedCall {
        i,
        j,
        a1: 7.0 / alpha,
        a2: 1.0 / alpha,
        eps: eps2,
        alpha: beta,
        delta: ber_delta,
        fill,
    };

    let mut stats = BuildStats { scan_calls: vec![0; t], fill_calls: vec![0; t], ..Default::default() };
    let mut edges = Vec::new();
    let mut i = t.saturating_sub(1);
    while i > 0 {
        let mut found: Option<(usize, f64)> = None;
        let mut j = i.saturating_sub(lambda);
        while j < i && found.is_none() {
            stats.scan_calls[j] += 1;
            let r = estimator(oracle, &graph, call(i, j, beta[j], false))?.at_least((i - j) as f64 * floor_unit);
            if let RatioEstimate::Finite(x) = r {
                found = Some((j, x));
                edges.push(ForestEdge { u: graph.centers[i], v: graph.centers[j], log_r: x });
            }
            j += 1;
        }
        match found {
            None => i -= 1,
            Some((jm, r_im)) => {
                for j in (jm + 1..i).rev() {
                    stats.fill_calls[jm] += 1;
                    let rho = match estimator(oracle, &graph, call(j, jm, beta[jm] / 9.0, true))? {
                        RatioEstimate::Finite(x) => x,
                        _ => return Err(Error::BalancedFailure { j, j_m: jm }),
                    };
                    let x = (r_im - rho).max((i - j) as f64 * floor_unit);
                    edges.push(ForestEdge { u: graph.centers[i], v: graph.centers[j], log_r: x });
                }
                i = jm;
            }
        }
    }
    Ok(EstimationForest {
        graph,
        center_edges: edges,
        t: PATH_LENGTH,
        eps,
        alpha,
        potential: PotentialState { z, beta, lambda: Some(lambda) },
        stats,
    })
}

/// A violated estimation-forest condition, with the witnessing ordered pair
/// `(u, v)`, `gamma(u) >= gamma(v)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ForestViolation {
    /// Close pair whose path estimate is not `(1 +- eps)` accurate.
    PathRatio { u: usize, v: usize },
    /// Far pair in one component whose lighter prefix is not negligible.
    FarDominance { u: usize, v: usize },
    /// Far pair in one component whose estimated lighter prefix is not
    /// negligible.
    FarEstimateDominance { u: usize, v: usize },
    /// Disconnected pair whose lighter prefix is not negligible.
    DisconnectedDominance { u: usize, v: usize },
    /// Disconnected pair whose components interleave in cluster order.
    ComponentOrder { u: usize, v: usize },
    /// Same-cluster pair at distance above `t`.
    SameClusterFar { u: usize, v: usize },
}

impl ForestViolation {
    /// Which of the four forest conditions is violated.
    pub fn condition(&self) -> u8 {
        match self {
            ForestViolation::PathRatio { .. } => 1,
            ForestViolation::FarDominance { .. } | ForestViolation::FarEstimateDominance { .. } => 2,
            ForestViolation::DisconnectedDominance { .. } | ForestViolation::ComponentOrder { .. } => 3,
            ForestViolation::SameClusterFar { .. } => 4,
        }
    }
}

/// Exhaustive ground-truth check of the estimation-forest conditions over
/// every ordered pair `(u, v)` with `gamma(u) >= gamma(v)`.
pub fn validate_forest(forest: &EstimationForest, truth: &LogWeightMnl) -> Result<Vec<ForestViolation>> {
    let n = forest.n();
    if truth.n() != n {
        return Err(Error::arg(format!("forest has {n} items, model has {}", truth.n())));
    }
    let gamma = &forest.graph.gamma;
    let t_clusters = forest.graph.len();
    let adj = forest.adjacency();
    let (comp, count) = forest.components();
    let lw = truth.log_weights();
    let log_eps = forest.eps.ln() + 1e-9;

    // Rooted potentials: log r(P(u, v)) = pot[u] - pot[v] inside a component.
    let mut pot = vec![f64::NAN; n];
    for root in 0..n {
        if !pot[root].is_nan() {
            continue;
        }
        pot[root] = 0.0;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            for &(x, l) in &adj[u] {
                if pot[x].is_nan() {
                    pot[x] = pot[u] + l;
                    stack.push(x);
                }
            }
        }
    }

    // Log of the true weight of all clusters up to g.
    let mut light = Vec::with_capacity(t_clusters);
    let mut acc = f64::NEG_INFINITY;
    for c in &forest.graph.clusters {
        acc = logsumexp([acc].into_iter().chain(c.iter().map(|&s| lw[s])));
        light.push(acc);
    }
    // Per component, log of the summed potentials of clusters up to g.
    let mut est_light = vec![vec![f64::NEG_INFINITY; t_clusters]; count];
    for (g, c) in forest.graph.clusters.iter().enumerate() {
        let k = comp[c[0]];
        est_light[k][g] = logsumexp(c.iter().map(|&s| pot[s]));
    }
    for row in &mut est_light {
        for g in 1..t_clusters {
            row[g] = logsumexp([row[g - 1], row[g]].into_iter());
        }
    }
    let mut gmin = vec![usize::MAX; count];
    let mut gmax = vec![0; count];
    for u in 0..n {
        gmin[comp[u]] = gmin[comp[u]].min(gamma[u]);
        gmax[comp[u]] = gmax[comp[u]].max(gamma[u]);
    }

    let mut out = Vec::new();
    let mut dist = vec![usize::MAX; n];
    for u in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[u] = 0;
        let mut queue = VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &adj[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        for v in 0..n {
            if v == u || gamma[u] < gamma[v] {
                continue;
            }
            let d = dist[v];
            if gamma[u] == gamma[v] && d > forest.t {
                out.push(ForestViolation::SameClusterFar { u, v });
            }
            if d <= forest.t {
                let est = pot[u] - pot[v];
                let real = lw[u] - lw[v];
                if !within(est, real, forest.eps) || !within(-est, -real, forest.eps) {
                    out.push(ForestViolation::PathRatio { u, v });
                }
            } else if d != usize::MAX {
                if light[gamma[v]] - lw[u] > log_eps {
                    out.push(ForestViolation::FarDominance { u, v });
                }
                if est_light[comp[u]][gamma[v]] - pot[u] > log_eps {
                    out.push(ForestViolation::FarEstimateDominance { u, v });
                }
            } else {
                if light[gamma[v]] - lw[u] > log_eps {
                    out.push(ForestViolation::DisconnectedDominance { u, v });
                }
                if gmin[comp[u]] <= gmax[comp[v]] {
                    out.push(ForestViolation::ComponentOrder { u, v });
                }
            }
        }
    }
    Ok(out)
}
