//! MNL and matching pseudo-MNL instances, their slate distributions, and
//! instance generators.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An MNL over items `0..n`, stored as natural-log weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMnl")]
pub struct LogWeightMnl {
    #[serde(rename = "log_weights")]
    log_w: Vec<f64>,
}

impl LogWeightMnl {
    pub fn new(log_w: Vec<f64>) -> Result<Self> {
        let m = LogWeightMnl { log_w };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.log_w.is_empty() {
            return Err(Error::arg("an MNL needs at least one item"));
        }
        if let Some(i) = self.log_w.iter().position(|x| !x.is_finite()) {
            return Err(Error::arg(format!("log weight of item {i} is not finite")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.log_w.len()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    pub fn log_weight(&self, i: usize) -> f64 {
        self.log_w[i]
    }

    pub fn slate_distribution(&self, slate: &[usize]) -> Result<Vec<f64>> {
        check_slate(slate, self.n())?;
        Ok(self.slate_distribution_unchecked(slate))
    }

    pub(crate) fn slate_distribution_unchecked(&self, slate: &[usize]) -> Vec<f64> {
        let lse = logsumexp(slate.iter().map(|&i| self.log_w[i]));
        slate.iter().map(|&i| (self.log_w[i] - lse).exp()).collect()
    }

    /// Probability that `a` wins the slate `{a, b}`.
    pub fn pair_win_prob(&self, a: usize, b: usize) -> f64 {
        let d = self.log_w[b] - self.log_w[a];
        if d > 0.0 {
            let e = (-d).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + d.exp())
        }
    }
}

/// The paired limit instance: items are matched into pairs by `pi`, the
/// highest pair touching a slate always wins it, and inside a pair the second
/// item wins with probability `p[pair]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPseudo")]
pub struct MatchingPseudoMnl {
    p: Vec<f64>,
    pi: Vec<usize>,
    #[serde(skip)]
    pair_of: Vec<usize>,
}

impl MatchingPseudoMnl {
    pub fn new(p: Vec<f64>, pi: Vec<usize>) -> Result<Self> {
        let mut m = MatchingPseudoMnl { p, pi, pair_of: Vec::new() };
        m.finish()?;
        Ok(m)
    }

    fn finish(&mut self) -> Result<()> {
        let n = self.pi.len();
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::arg(format!("pseudo-MNL needs an even positive item count, got {n}")));
        }
        if self.p.len() != n / 2 {
            return Err(Error::arg(format!("pseudo-MNL with {n} items needs {} probabilities, got {}", n / 2, self.p.len())));
        }
        if let Some(x) = self.p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::arg(format!("pair probability {x} outside [0, 1]")));
        }
        let mut pair_of = vec![usize::MAX; n];
        for (pos, &item) in self.pi.iter().enumerate() {
            if item >= n || pair_of[item] != usize::MAX {
                return Err(Error::arg("pi is not a permutation"));
            }
            pair_of[item] = pos / 2;
        }
        self.pair_of = pair_of;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn pi(&self) -> &[usize] {
        &self.pi
    }

    /// Index of the pair that contains `item`.
    pub fn pair_of(&self, item: usize) -> usize {
        self.pair_of[item]
    }

    pub fn slate_distribution(&self, slate: &[usize]) -> Result<Vec<f64>> {
        check_slate(slate, self.n())?;
        Ok(self.slate_distribution_unchecked(slate))
    }

    pub(crate) fn slate_distribution_unchecked(&self, slate: &[usize]) -> Vec<f64> {
        let top = slate.iter().map(|&i| self.pair_of[i]).max().unwrap();
        let (lo, hi) = (self.pi[2 * top], self.pi[2 * top + 1]);
        let both = slate.contains(&lo) && slate.contains(&hi);
        slate
            .iter()
            .map(|&i| {
                if self.pair_of[i] != top {
                    0.0
                } else if !both {
                    1.0
                } else if i == hi {
                    self.p[top]
                } else {
                    1.0 - self.p[top]
                }
            })
            .collect()
    }

    pub fn pair_win_prob(&self, a: usize, b: usize) -> f64 {
        self.slate_distribution_unchecked(&[a, b])[0]
    }
}

#[derive(Deserialize)]
struct RawMnl {
    log_weights: Vec<f64>,
}

impl TryFrom<RawMnl> for LogWeightMnl {
    type Error = Error;

    fn try_from(raw: RawMnl) -> Result<Self> {
        LogWeightMnl::new(raw.log_weights)
    }
}

#[derive(Deserialize)]
struct RawPseudo {
    p: Vec<f64>,
    pi: Vec<usize>,
}

impl TryFrom<RawPseudo> for MatchingPseudoMnl {
    type Error = Error;

    fn try_from(raw: RawPseudo) -> Result<Self> {
        MatchingPseudoMnl::new(raw.p, raw.pi)
    }
}

/// Either kind of ground-truth model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Mnl(LogWeightMnl),
    PseudoMnl(MatchingPseudoMnl),
}

impl Model {
    pub fn n(&self) -> usize {
        match self {
            Model::Mnl(m) => m.n(),
            Model::PseudoMnl(m) => m.n(),
        }
    }

    pub fn slate_distribution(&self, slate: &[usize]) -> Result<Vec<f64>> {
        check_slate(slate, self.n())?;
        Ok(self.slate_distribution_unchecked(slate))
    }

    pub(crate) fn slate_distribution_unchecked(&self, slate: &[usize]) -> Vec<f64> {
        match self {
            Model::Mnl(m) => m.slate_distribution_unchecked(slate),
            Model::PseudoMnl(m) => m.slate_distribution_unchecked(slate),
        }
    }

    /// Probability that `a` wins the slate `{a, b}`.
    pub fn pair_win_prob(&self, a: usize, b: usize) -> f64 {
        match self {
            Model::Mnl(m) => m.pair_win_prob(a, b),
            Model::PseudoMnl(m) => m.pair_win_prob(a, b),
        }
    }

    pub fn as_mnl(&self) -> Option<&LogWeightMnl> {
        match self {
            Model::Mnl(m) => Some(m),
            Model::PseudoMnl(_) => None,
        }
    }

    /// Items from lightest to heaviest. Pseudo-MNL items are ordered by pair
    /// index, then by position inside the pair.
    pub fn weight_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n()).collect();
        match self {
            Model::Mnl(m) => order.sort_by(|&a, &b| m.log_w[a].total_cmp(&m.log_w[b]).then(a.cmp(&b))),
            Model::PseudoMnl(m) => order = m.pi.clone(),
        }
        order
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("models always serialize")
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Model::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

impl From<LogWeightMnl> for Model {
    fn from(m: LogWeightMnl) -> Self {
        Model::Mnl(m)
    }
}

impl From<MatchingPseudoMnl> for Model {
    fn from(m: MatchingPseudoMnl) -> Self {
        Model::PseudoMnl(m)
    }
}

pub(crate) fn check_slate(slate: &[usize], n: usize) -> Result<()> {
    if slate.is_empty() {
        return Err(Error::EmptySlate);
    }
    for (k, &i) in slate.iter().enumerate() {
        if i >= n {
            return Err(Error::ItemOutOfRange { item: i, n });
        }
        if slate[..k].contains(&i) {
            return Err(Error::arg(format!("item {i} appears twice in the slate")));
        }
    }
    Ok(())
}

pub fn logsumexp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Instance families for simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceKind {
    Uniform,
    /// `log w_i = i ln rho` for `i = 1..=n`.
    GeometricRatio { rho: f64 },
    /// `w_i = i^(-gamma)` for `i = 1..=n`.
    PowerLaw { gamma: f64 },
    /// The last `max(1, n/3)` items have weight `k`, the rest weight 1.
    TwoScale { k: f64 },
    Explicit { log_weights: Vec<f64> },
    /// Matching pseudo-MNL; a missing `pi` is drawn uniformly from the seed.
    PseudoMnl { p: Vec<f64>, pi: Option<Vec<usize>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: usize,
    pub kind: InstanceKind,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(n: usize, kind: InstanceKind, seed: u64) -> Self {
        InstanceSpec { n, kind, seed }
    }
}

pub fn generate_instance(spec: &InstanceSpec) -> Result<Model> {
    let n = spec.n;
    let idx = |i: usize| (i + 1) as f64;
    let log_w: Vec<f64> = match &spec.kind {
        InstanceKind::Uniform => vec![0.0; n],
        InstanceKind::GeometricRatio { rho } => {
            if !(*rho > 0.0 && rho.is_finite()) {
                return Err(Error::arg(format!("geometric ratio must be positive, got {rho}")));
            }
            (0..n).map(|i| idx(i) * rho.ln()).collect()
        }
        InstanceKind::PowerLaw { gamma } => {
            if !gamma.is_finite() {
                return Err(Error::arg("power-law exponent must be finite"));
            }
            (0..n).map(|i| -gamma * idx(i).ln()).collect()
        }
        InstanceKind::TwoScale { k } => {
            if !(*k > 0.0 && k.is_finite()) {
                return Err(Error::arg(format!("two-scale factor must be positive, got {k}")));
            }
            let heavy = (n / 3).max(1);
            (0..n).map(|i| if i + heavy >= n { k.ln() } else { 0.0 }).collect()
        }
        InstanceKind::Explicit { log_weights } => {
            if log_weights.len() != n {
                return Err(Error::arg(format!("explicit instance has {} weights but n = {n}", log_weights.len())));
            }
            log_weights.clone()
        }
        InstanceKind::PseudoMnl { p, pi } => {
            let pi = match pi {
                Some(pi) => pi.clone(),
                None => {
                    let mut pi: Vec<usize> = (0..n).collect();
                    pi.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
                    pi
                }
            };
            if pi.len() != n {
                return Err(Error::arg(format!("permutation has {} entries but n = {n}", pi.len())));
            }
            return Ok(Model::PseudoMnl(MatchingPseudoMnl::new(p.clone(), pi)?));
        }
    };
    Ok(Model::Mnl(LogWeightMnl::new(log_w)?))
}

impl FromStr for InstanceKind {
    type Err = Error;

    /// Parses `uniform`, `geometric:RHO`, `power-law:GAMMA`, `two-scale:K`,
    /// `explicit:W1,W2,..` (log weights) and `pseudo-mnl:P1,P2,..[/PI1,PI2,..]`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let num = |a: Option<&str>, default: f64| -> Result<f64> {
            match a {
                None => Ok(default),
                Some(a) => a.trim().parse().map_err(|_| Error::arg(format!("bad number {a:?} in instance {s:?}"))),
            }
        };
        let list = |a: &str| -> Result<Vec<f64>> {
            a.split(',')
                .map(|x| x.trim().parse().map_err(|_| Error::arg(format!("bad number {x:?} in instance {s:?}"))))
                .collect()
        };
        Ok(match name {
            "uniform" => InstanceKind::Uniform,
            "geometric" | "geometric-ratio" => InstanceKind::GeometricRatio { rho: num(arg, 2.0)? },
            "power-law" => InstanceKind::PowerLaw { gamma: num(arg, 1.0)? },
            "two-scale" => InstanceKind::TwoScale { k: num(arg, 1e6)? },
            "explicit" => InstanceKind::Explicit {
                log_weights: list(arg.ok_or_else(|| Error::arg("explicit instance needs weights"))?)?,
            },
            "pseudo-mnl" => {
                let arg = arg.ok_or_else(|| Error::arg("pseudo-mnl instance needs probabilities"))?;
                let (p, pi) = match arg.split_once('/') {
                    Some((p, pi)) => {
                        let pi = pi
                            .split(',')
                            .map(|x| x.trim().parse().map_err(|_| Error::arg(format!("bad item {x:?} in permutation"))))
                            .collect::<Result<Vec<usize>>>()?;
                        (p, Some(pi))
                    }
                    None => (arg, None),
                };
                InstanceKind::PseudoMnl { p: list(p)?, pi }
            }
            _ => return Err(Error::arg(format!("unknown instance kind {name:?}"))),
        })
    }
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            InstanceKind::Uniform => write!(f, "uniform"),
            InstanceKind::GeometricRatio { rho } => write!(f, "geometric:{rho}"),
            InstanceKind::PowerLaw { gamma } => write!(f, "power-law:{gamma}"),
            InstanceKind::TwoScale { k } => write!(f, "two-scale:{k}"),
            InstanceKind::Explicit { log_weights } => write!(f, "explicit:{}", join(log_weights)),
            InstanceKind::PseudoMnl { p, pi } => {
                write!(f, "pseudo-mnl:{}", join(p))?;
                if let Some(pi) = pi {
                    let pi: Vec<String> = pi.iter().map(|x| x.to_string()).collect();
                    write!(f, "/{}", pi.join(","))?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_weights_on_adjacent_pair() {
        let m = LogWeightMnl::new((1..=6).map(|i| i as f64 * 2f64.ln()).collect()).unwrap();
        let d = m.slate_distribution(&[2, 3]).unwrap();
        assert!((d[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((d[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn light_pair_splits_evenly() {
        let eps: f64 = 0.2;
        let m = LogWeightMnl::new(vec![(1.0 - eps).ln(), (eps / 2.0).ln(), (eps / 2.0).ln()]).unwrap();
        let d = m.slate_distribution(&[1, 2]).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-12 && (d[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singleton_slate_is_certain() {
        let m = LogWeightMnl::new(vec![0.3, -2.0, 5.0]).unwrap();
        assert_eq!(m.slate_distribution(&[1]).unwrap(), vec![1.0]);
    }

    #[test]
    fn pseudo_identity_first_pair() {
        let m = MatchingPseudoMnl::new(vec![0.7, 0.3], vec![0, 1, 2, 3]).unwrap();
        let d = m.slate_distribution(&[0, 1]).unwrap();
        assert!((d[0] - 0.3).abs() < 1e-15 && (d[1] - 0.7).abs() < 1e-15);
        assert_eq!(m.slate_distribution(&[0, 2]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn bad_slates_rejected() {
        let m = LogWeightMnl::new(vec![0.0, 0.0]).unwrap();
        assert!(matches!(m.slate_distribution(&[]), Err(Error::EmptySlate)));
        assert!(matches!(m.slate_distribution(&[2]), Err(Error::ItemOutOfRange { item: 2, n: 2 })));
        assert!(m.slate_distribution(&[1, 1]).is_err());
    }

    #[test]
    fn extreme_scale_does_not_overflow() {
        let m = LogWeightMnl::new(vec![0.0, 0.0, 1e6f64.ln() * 200.0]).unwrap();
        let d = m.slate_distribution(&[0, 1, 2]).unwrap();
        assert!(d.iter().all(|x| x.is_finite()));
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn instance_kind_parses() {
        assert_eq!("geometric:2".parse::<InstanceKind>().unwrap(), InstanceKind::GeometricRatio { rho: 2.0 });
        let k: InstanceKind = "pseudo-mnl:0.7,0.3/3,2,1,0".parse().unwrap();
        assert_eq!(k, InstanceKind::PseudoMnl { p: vec![0.7, 0.3], pi: Some(vec![3, 2, 1, 0]) });
        assert_eq!(k.to_string().parse::<InstanceKind>().unwrap(), k);
        assert!("nope".parse::<InstanceKind>().is_err());
    }
}
