//! Noisy orderings and cluster graphs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};
use crate::model::LogWeightMnl;
use crate::oracle::Oracle;
use crate::primitives::{estimate_ratio, RatioEstimate};

/// An item sequence in which, up to the factor `1 - eps_o`, later items are
/// at least as heavy as earlier ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ordering {
    pub sequence: Vec<usize>,
    pub eps_o: f64,
}

impl Ordering {
    /// Checks `(1 - eps_o) w_{s_i} <= w_{s_j}` for all `i < j`.
    pub fn is_valid_for(&self, truth: &LogWeightMnl) -> bool {
        let slack = (1.0 - self.eps_o).ln();
        let mut heaviest = f64::NEG_INFINITY;
        for &s in &self.sequence {
            let w = truth.log_weight(s);
            if heaviest + slack > w + 1e-12 {
                return false;
            }
            heaviest = heaviest.max(w);
        }
        true
    }
}

/// Queries per pivot comparison in [`epsilon_ordering`].
pub fn ordering_queries(n: usize, eps_o: f64, delta: f64) -> u128 {
    let n = n as f64;
    (18.0 / (eps_o * eps_o) * (4.0 * n * n / delta).ln()).ceil() as u128
}

/// Randomized quicksort, lightest first. Each pivot comparison is a
/// majority vote over [`ordering_queries`] queries; ties go to the pivot.
pub fn epsilon_ordering<R: Rng + ?Sized>(
    oracle: &mut dyn Oracle,
    eps_o: f64,
    delta: f64,
    rng: &mut R,
) -> Result<Ordering> {
    check_open_unit("eps_o", eps_o)?;
    check_open_unit("delta", delta)?;
    let n = oracle.n();
    let k = ordering_queries(n, eps_o, delta);
    enum Task {
        Sort(Vec<usize>),
        Emit(usize),
    }
    let mut sequence = Vec::with_capacity(n);
    let mut stack = vec![Task::Sort((0..n).collect())];
    while let Some(task) = stack.pop() {
        match task {
            Task::Emit(x) => sequence.push(x),
            Task::Sort(items) if items.len() <= 1 => sequence.extend(items),
            Task::Sort(items) => {
                let pivot = items[rng.random_range(0..items.len())];
                let (mut lighter, mut heavier) = (Vec::new(), Vec::new());
                for &s in &items {
                    if s == pivot {
                        continue;
                    }
                    if 2 * oracle.pair_wins(s, pivot, k)? > k {
                        heavier.push(s);
                    } else {
                        lighter.push(s);
                    }
                }
                stack.push(Task::Sort(heavier));
                stack.push(Task::Emit(pivot));
                stack.push(Task::Sort(lighter));
            }
        }
    }
    Ok(Ordering { sequence, eps_o })
}

/// Ordered clustering with a star of ratio estimates inside each cluster.
/// Clusters run from lightest to heaviest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterGraph {
    pub clusters: Vec<Vec<usize>>,
    pub centers: Vec<usize>,
    /// `log r(u, c)` towards the center `c` of `u`'s cluster; `None` for
    /// centers, whose self-ratio is implicitly 1.
    pub star: Vec<Option<f64>>,
    /// Cluster index of every item.
    pub gamma: Vec<usize>,
    pub a1: f64,
    pub a2: f64,
    pub eps: f64,
    /// Zero estimates met where the guarantees exclude them.
    pub zero_events: usize,
}

impl ClusterGraph {
    pub fn new(
        n: usize,
        clusters: Vec<Vec<usize>>,
        centers: Vec<usize>,
        star: Vec<Option<f64>>,
        (a1, a2, eps): (f64, f64, f64),
    ) -> Self {
        let mut gamma = vec![usize::MAX; n];
        for (i, c) in clusters.iter().enumerate() {
            for &u in c {
                gamma[u] = i;
            }
        }
        ClusterGraph { clusters, centers, star, gamma, a1, a2, eps, zero_events: 0 }
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    /// Number of clusters.
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn center_of(&self, u: usize) -> usize {
        self.centers[self.gamma[u]]
    }

    /// `log r(u, c_{gamma(u)})`, 0 at the center.
    pub fn log_ratio_to_center(&self, u: usize) -> f64 {
        self.star[u].unwrap_or(0.0)
    }

    /// Star edges `(u, c, log r(u, c))`.
    pub fn star_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).filter_map(move |u| self.star[u].map(|x| (u, self.center_of(u), x)))
    }

    /// Partition, center and star-edge invariants that hold by construction.
    pub fn check_structure(&self) -> std::result::Result<(), String> {
        let n = self.n();
        if self.centers.len() != self.clusters.len() {
            return Err("center count differs from cluster count".into());
        }
        let mut seen = vec![false; n];
        for (i, c) in self.clusters.iter().enumerate() {
            if c.is_empty() {
                return Err(format!("cluster {i} is empty"));
            }
            if !c.contains(&self.centers[i]) {
                return Err(format!("center of cluster {i} lies outside it"));
            }
            for &u in c {
                if u >= n || seen[u] {
                    return Err(format!("item {u} is missing or repeated"));
                }
                seen[u] = true;
                if self.gamma[u] != i {
                    return Err(format!("gamma({u}) disagrees with the clusters"));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err("clusters do not cover every item".into());
        }
        for u in 0..n {
            let is_center = self.centers[self.gamma[u]] == u;
            match self.star[u] {
                None if !is_center => return Err(format!("item {u} has no star edge")),
                Some(_) if is_center => return Err(format!("center {u} has a star edge")),
                Some(x) if !x.is_finite() => return Err(format!("star edge of {u} is not finite")),
                _ => {}
            }
        }
        Ok(())
    }

    /// Ground-truth check of the cluster-graph conditions: within-cluster
    /// ratios in `[1/A1, A1]`, center ratios at least `A2` across clusters,
    /// and `(1 +- eps)` accurate star edges in both directions.
    pub fn violations(&self, truth: &LogWeightMnl) -> Vec<String> {
        let tol = 1e-12;
        let w = |u: usize| truth.log_weight(u);
        let mut out = Vec::new();
        let la1 = self.a1.ln();
        for u in 0..self.n() {
            let d = w(u) - w(self.center_of(u));
            if d.abs() > la1 + tol {
                out.push(format!("item {u} is outside the A1 band of its center"));
            }
        }
        let la2 = self.a2.ln();
        for i in 0..self.len() {
            for j in 0..i {
                if w(self.centers[i]) - w(self.centers[j]) < la2 - tol {
                    out.push(format!("centers of clusters {i} and {j} are closer than A2"));
                }
            }
        }
        for (u, c, x) in self.star_edges() {
            let truth_log = w(u) - w(c);
            if !within(x, truth_log, self.eps) || !within(-x, -truth_log, self.eps) {
                out.push(format!("star edge ({u}, {c}) is not (1 +- eps) accurate"));
            }
        }
        out
    }
}

/// Whether `exp(est)` lies in `(1 +- eps) exp(truth)`.
pub(crate) fn within(est: f64, truth: f64, eps: f64) -> bool {
    let d = est - truth;
    d <= (1.0 + eps).ln() + 1e-12 && d >= (1.0 - eps).ln() - 1e-12
}

/// Clusters a `1/3`-ordering greedily: an item joins the current cluster
/// unless its estimated ratio to the cluster center exceeds
/// `tau = 3 (1 + eps) / (2 alpha)`. Gives a `(2/alpha, 1/alpha, eps)` cluster
/// graph with probability at least `1 - delta`.
pub fn cluster_sort<R: Rng + ?Sized>(
    oracle: &mut dyn Oracle,
    alpha: f64,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<ClusterGraph> {
    check_open_unit("alpha", alpha)?;
    check_open_unit("delta", delta)?;
    if !(eps > 0.0 && eps < 1.0 / 7.0) {
        return Err(Error::arg(format!("cluster_sort needs eps in (0, 1/7), got {eps}")));
    }
    let n = oracle.n();
    let log_tau = (3.0 * (1.0 + eps) / (2.0 * alpha)).ln();
    let er_alpha = 2.0 * alpha / 3.0;
    let er_delta = delta / (2.0 * n as f64);
    let zero_log = (er_alpha / (3.0 * er_alpha + 4.0)).ln();
    let s = epsilon_ordering(oracle, 1.0 / 3.0, delta / 2.0, rng)?.sequence;

    let mut clusters = Vec::new();
    let mut centers = Vec::new();
    let mut star = vec![None; n];
    let mut zero_events = 0;
    let mut j = 0;
    for l in 1..n {
        let c = s[j];
        let r = estimate_ratio(oracle, s[l], c, er_alpha, eps, er_delta)?;
        if r.exceeds(log_tau) {
            clusters.push(s[j..l].to_vec());
            centers.push(c);
            j = l;
        } else {
            star[s[l]] = Some(match r {
                RatioEstimate::Finite(x) => x,
                _ => {
                    zero_events += 1;
                    zero_log
                }
            });
        }
    }
    if n > 0 {
        clusters.push(s[j..].to_vec());
        centers.push(s[j]);
    }
    let mut g = ClusterGraph::new(n, clusters, centers, star, (2.0 / alpha, 1.0 / alpha, eps));
    g.zero_events = zero_events;
    Ok(g)
}

/// Quicksort-style clustering: a random pivot absorbs every item whose ratio
/// estimate is finite, items estimated far heavier or lighter are clustered
/// recursively after or before it. Each pair is estimated at most once.
/// Gives a `(7/alpha, 1/alpha, eps)` cluster graph with probability at least
/// `1 - delta`.
pub fn quicksort_clustering<R: Rng + ?Sized>(
    oracle: &mut dyn Oracle,
    alpha: f64,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<ClusterGraph> {
    check_open_unit("alpha", alpha)?;
    check_open_unit("eps", eps)?;
    check_open_unit("delta", delta)?;
    let n = oracle.n();
    let er_delta = delta / (n as f64 * n as f64);
    enum Task {
        Split(Vec<usize>),
        Emit(usize, Vec<usize>),
    }
    let mut clusters = Vec::new();
    let mut centers = Vec::new();
    let mut star = vec![None; n];
    let mut stack = vec![Task::Split((0..n).collect())];
    while let Some(task) = stack.pop() {
        match task {
            Task::Emit(c, members) => {
                centers.push(c);
                clusters.push(members);
            }
            Task::Split(items) if items.is_empty() => {}
            Task::Split(items) => {
                let c = items[rng.random_range(0..items.len())];
                let (mut lighter, mut close, mut heavier) = (Vec::new(), vec![c], Vec::new());
                for &s in &items {
                    if s == c {
                        continue;
                    }
                    match estimate_ratio(oracle, c, s, alpha, eps, er_delta)? {
                        RatioEstimate::Finite(x) => {
                            star[s] = Some(-x);
                            close.push(s);
                        }
                        RatioEstimate::Zero => heavier.push(s),
                        RatioEstimate::Infinite => lighter.push(s),
                    }
                }
                stack.push(Task::Split(heavier));
                stack.push(Task::Emit(c, close));
                stack.push(Task::Split(lighter));
            }
        }
    }
    Ok(ClusterGraph::new(n, clusters, centers, star, (7.0 / alpha, 1.0 / alpha, eps)))
}
