//! End-to-end acceptance suite. Prints one line per criterion and exits
//! non-zero if a criterion fails, unless it is listed in `KNOWN_GAPS`.

use std::process::ExitCode;
use std::time::Instant;

use mnlearn::forest::build_estimation_forest;
use mnlearn::metrics::separation_fixture;
use mnlearn::model::InstanceKind;
use mnlearn::oracle::build_replay_table;
use mnlearn::ordering::ClusterGraph;
use mnlearn::primitives::{
    balanced_estimate_ratio, compare, estimate_ratio, get_geometric, BalancedEstimateParams, RatioEstimate,
};
use mnlearn::{
    distance_exact, generate_instance, generate_weights, learn_adaptive, learn_balanced, learn_nonadaptive,
    validate_forest, InstanceSpec, LiveOracle, LogWeightMnl, MatchingPseudoMnl, Model, Oracle, ReplayOracle,
    StreamKey,
};
use rayon::prelude::*;

/// Criteria whose failure is reported but does not fail the suite; each has
/// a written analysis alongside the project's design notes.
const KNOWN_GAPS: &[&str] = &["A3-adaptive"];

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn instance(n: usize, kind: &str) -> Model {
    generate_instance(&InstanceSpec::new(n, kind.parse::<InstanceKind>().unwrap(), 0)).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

fn growth(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[1] / w[0]).collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")
}

/// Largest failure rate tolerated for a guarantee with failure probability
/// `delta` over `trials` runs.
fn failure_bound(delta: f64, trials: usize) -> f64 {
    delta + 3.0 * (delta / trials as f64).sqrt()
}

fn a1() -> Vec<Outcome> {
    let (eps, delta) = (0.5, 0.05);
    let mut parts = Vec::new();
    let mut pass = true;
    for (f, kind) in ["uniform", "geometric:2", "power-law:1"].into_iter().enumerate() {
        let truth = instance(8, kind);
        let ok = (0..100u64)
            .into_par_iter()
            .filter(|&t| {
                let key = StreamKey::new(1000 + f as u64, t);
                let mut o = LiveOracle::new(truth.clone(), key);
                let l = learn_adaptive(&mut o, eps, delta, &mut key.algo_rng()).unwrap();
                distance_exact(&truth, &l.model.into()).unwrap().d1 <= eps
            })
            .count();
        pass &= ok >= 90;
        parts.push(format!("{kind} {ok}/100"));
    }
    vec![Outcome { id: "A1", pass, detail: format!("exact d1 <= 0.5: {} (need >= 90 each)", parts.join(", ")) }]
}

fn max_pair_by_n(kind: &str, ns: &[usize], adaptive: bool, seed: u64) -> Vec<Vec<(f64, f64)>> {
    ns.iter()
        .map(|&n| {
            let truth = instance(n, kind);
            (0..5u64)
                .into_par_iter()
                .map(|t| {
                    let key = StreamKey::new(seed, t);
                    let mut o = LiveOracle::new(truth.clone(), key);
                    let mut rng = key.algo_rng();
                    if adaptive {
                        learn_adaptive(&mut o, 0.3, 0.1, &mut rng).unwrap();
                    } else {
                        learn_balanced(&mut o, 0.3, 0.1, &mut rng).unwrap();
                    }
                    (o.ledger().total() as f64, o.ledger().max_pair_count() as f64)
                })
                .collect()
        })
        .collect()
}

fn a2() -> Vec<Outcome> {
    let runs = max_pair_by_n("power-law:1", &[128, 256, 512, 1024], true, 2000);
    let med: Vec<f64> = runs.iter().map(|r| median(r.iter().map(|x| x.0).collect())).collect();
    let g = growth(&med);
    let pass = g.iter().all(|&x| (1.8..=2.7).contains(&x));
    vec![Outcome { id: "A2", pass, detail: format!("median total growth per doubling [{}] (need in [1.8, 2.7])", fmt_list(&g)) }]
}

fn a3() -> Vec<Outcome> {
    let ns = [64, 128, 256];
    // A per-pair cap is a worst case, so each size is summarised by the
    // largest per-pair count over its trials.
    let worst = |runs: Vec<Vec<(f64, f64)>>| -> Vec<f64> {
        runs.iter().map(|r| r.iter().map(|x| x.1).fold(0.0, f64::max)).collect()
    };
    let mut out = Vec::new();
    let mut details = Vec::new();
    let mut pass = true;
    for (k, kind) in ["power-law:1", "geometric:0.6"].into_iter().enumerate() {
        let g = growth(&worst(max_pair_by_n(kind, &ns, false, 3000 + k as u64)));
        pass &= g.iter().all(|&x| x <= 1.6);
        details.push(format!("{kind} [{}]", fmt_list(&g)));
    }
    out.push(Outcome {
        id: "A3-balanced",
        pass,
        detail: format!("balanced max-per-pair growth per doubling {} (need <= 1.6)", details.join(", ")),
    });
    let g = growth(&worst(max_pair_by_n("geometric:0.6", &ns, true, 3100)));
    out.push(Outcome {
        id: "A3-adaptive",
        pass: g.iter().all(|&x| x >= 1.7),
        detail: format!("adaptive max-per-pair growth per doubling on w_i = 0.6^i [{}] (need >= 1.7)", fmt_list(&g)),
    });
    out
}

fn a4() -> Vec<Outcome> {
    let (n, eps, delta) = (6, 0.5, 0.1);
    let truth = instance(n, "power-law:1");
    let cap = (0..20u64)
        .into_par_iter()
        .map(|t| {
            let key = StreamKey::new(4000, t);
            let mut o = LiveOracle::new(truth.clone(), key);
            learn_balanced(&mut o, eps, delta, &mut key.algo_rng()).unwrap();
            o.ledger().max_pair_count()
        })
        .max()
        .unwrap();
    let m = 2 * cap;
    let results: Vec<(bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|t| {
            let key = StreamKey::new(4001, t);
            let mut o = LiveOracle::new(truth.clone(), key);
            let l = learn_nonadaptive(&mut o, eps, delta, m, &mut key.algo_rng()).unwrap();
            let led = o.ledger();
            let batch = led.total() == m * 15
                && led.per_size().len() == 1
                && led.per_size().get(&2) == Some(&(m * 15))
                && led.pairs().count() == 15
                && led.pairs().all(|(_, c)| c == m);
            (batch, distance_exact(&truth, &l.model.into()).unwrap().d1 <= eps)
        })
        .collect();
    let batch_ok = results.iter().all(|r| r.0);
    let acc = results.iter().filter(|r| r.1).count();
    vec![Outcome {
        id: "A4",
        pass: batch_ok && acc >= 90,
        detail: format!(
            "m = 2 x {cap}; single batch of m*15 pair queries in every trial: {batch_ok}; exact d1 <= 0.5 in {acc}/100 (need >= 90)"
        ),
    }]
}

/// A two-cluster graph: cluster 0 holds items 0..k with exact star ratios
/// `light[s]` to its center 0; cluster 1 is the single item k.
fn two_cluster_graph(light: &[f64]) -> ClusterGraph {
    let k = light.len();
    let star = (0..=k).map(|s| if s == 0 || s == k { None } else { Some(light[s] - light[0]) }).collect();
    ClusterGraph::new(k + 1, vec![(0..k).collect(), vec![k]], vec![0, k], star, (14.0, 2.0, 0.1))
}

fn a5() -> Vec<Outcome> {
    let delta = 0.1;
    let mut lines = Vec::new();
    let mut pass = true;
    let mut suite = |name: &str, trials: usize, ok: usize| {
        let rate = (trials - ok) as f64 / trials as f64;
        let bound = failure_bound(delta, trials);
        pass &= rate <= bound;
        lines.push(format!("{name} {rate:.3}<={bound:.3}"));
    };
    let pair = |w: f64| -> Model { LogWeightMnl::new(vec![w.ln(), 0.0]).unwrap().into() };
    let run = |model: &Model, trials: usize, seed: u64, f: &(dyn Fn(&mut LiveOracle) -> bool + Sync)| -> usize {
        (0..trials as u64)
            .into_par_iter()
            .filter(|&t| f(&mut LiveOracle::new(model.clone(), StreamKey::new(seed, t))))
            .count()
    };

    // compare: a rarely winning item is reported as 0.
    let c = 0.5;
    let p = c / 8.0;
    let m = pair(p / (1.0 - p));
    suite("compare-zero", 500, run(&m, 500, 5000, &|o| compare(o, 0, 1, c, 0.1, delta).unwrap().0 == 0.0));
    // compare: an even pair is estimated within (1 +- eps).
    let m = pair(1.0);
    let eps = 0.1;
    let close = |x: f64| (x - 0.5).abs() <= eps * 0.5;
    suite(
        "compare-even",
        500,
        run(&m, 500, 5001, &|o| {
            let (a, b) = compare(o, 0, 1, 0.25, eps, delta).unwrap();
            close(a) && close(b)
        }),
    );
    // estimate_ratio: the three regimes at alpha = 1/2.
    let alpha = 0.5;
    let m = pair(alpha / (4.0 * (3.0 * alpha + 4.0)));
    suite(
        "ratio-zero",
        500,
        run(&m, 500, 5002, &|o| estimate_ratio(o, 0, 1, alpha, eps, delta).unwrap() == RatioEstimate::Zero),
    );
    let m = pair(1.0);
    suite(
        "ratio-finite",
        500,
        run(&m, 500, 5003, &|o| match estimate_ratio(o, 0, 1, alpha, eps, delta).unwrap() {
            RatioEstimate::Finite(x) => x.exp() >= 1.0 - eps && x.exp() <= 1.0 + eps,
            _ => false,
        }),
    );
    let m = pair(4.0 * (3.0 * alpha + 4.0) / alpha);
    suite(
        "ratio-infinite",
        500,
        run(&m, 500, 5004, &|o| estimate_ratio(o, 0, 1, alpha, eps, delta).unwrap() == RatioEstimate::Infinite),
    );

    // balanced_estimate_ratio on a fixed two-cluster graph.
    let light = [0.0, 0.3f64.ln(), (-0.2f64).exp().ln()];
    let graph = two_cluster_graph(&light);
    let (a1, a2, beps, balpha) = (14.0, 2.0, 0.1, 0.5);
    let model_with = |ratio: f64| -> Model {
        LogWeightMnl::new(light.iter().copied().chain([light[0] + ratio.ln()]).collect()).unwrap().into()
    };
    let params = BalancedEstimateParams::new(a1, a2, beps, balpha, delta, 3).unwrap();
    let bound = params.per_pair_bound(a1, a2, delta, 3);
    let m = model_with(9.0 / balpha);
    suite(
        "balanced-infinite",
        200,
        run(&m, 200, 5005, &|o| {
            balanced_estimate_ratio(o, &graph, 1, 0, a1, a2, beps, balpha, delta).unwrap() == RatioEstimate::Infinite
        }),
    );
    let ratio = 1.0 / balpha;
    let m = model_with(ratio);
    suite(
        "balanced-finite",
        200,
        run(&m, 200, 5006, &|o| match balanced_estimate_ratio(o, &graph, 1, 0, a1, a2, beps, balpha, delta).unwrap() {
            RatioEstimate::Finite(x) => x.exp() >= (1.0 - 10.0 * beps) * ratio && x.exp() <= (1.0 + 10.0 * beps) * ratio,
            _ => false,
        }),
    );
    suite(
        "balanced-load",
        200,
        run(&m, 200, 5007, &|o| {
            balanced_estimate_ratio(o, &graph, 1, 0, a1, a2, beps, balpha, delta).unwrap();
            (0..3).all(|s| o.ledger().pair(3, s) as f64 <= bound)
        }),
    );

    // get_geometric: mean of N draws within 3 sigma / sqrt(N) of w_v / w_u.
    let draws = 100_000u64;
    for (k, r) in [0.5f64, 1.0, 2.0].into_iter().enumerate() {
        let m = pair(1.0 / r);
        let mut o = LiveOracle::new(m, StreamKey::new(5100 + k as u64, 0));
        let mut sum = 0.0;
        for _ in 0..draws {
            sum += get_geometric(&mut o, 0, 1).unwrap() as f64;
        }
        let mean = sum / draws as f64;
        let tol = 3.0 * (r * (1.0 + r)).sqrt() / (draws as f64).sqrt();
        let ok = (mean - r).abs() <= tol;
        pass &= ok;
        lines.push(format!("geometric({r}) mean {mean:.4} +- {tol:.4} {}", if ok { "ok" } else { "off" }));
    }
    vec![Outcome { id: "A5", pass, detail: lines.join("; ") }]
}

fn a6() -> Vec<Outcome> {
    let kinds = ["power-law:1", "power-law:3", "geometric:0.6", "two-scale:1000000"];
    let results: Vec<(Result<(), String>, bool)> = (0..100u64)
        .into_par_iter()
        .map(|t| {
            let truth = instance(32, kinds[t as usize % kinds.len()]);
            let key = StreamKey::new(6000, t);
            let mut o = LiveOracle::new(truth.clone(), key);
            let f = build_estimation_forest(&mut o, 0.5, 0.3, 0.1, &mut key.algo_rng()).unwrap();
            let antisym = f.edges().all(|e| f.log_r(e.v, e.u) == Some(-e.log_r));
            let structure = f.check_structure().and_then(|_| if antisym { Ok(()) } else { Err("antisymmetry".into()) });
            (structure, validate_forest(&f, truth.as_mnl().unwrap()).unwrap().is_empty())
        })
        .collect();
    let broken: Vec<String> = results.iter().filter_map(|r| r.0.clone().err()).collect();
    let clean = results.iter().filter(|r| r.1).count();
    vec![Outcome {
        id: "A6",
        pass: broken.is_empty() && clean >= 90,
        detail: format!(
            "structural invariants hold in {}/100; validate_forest empty in {clean}/100 (need >= 90)",
            100 - broken.len()
        ),
    }]
}

/// Exact rational `|a/b - c/d|` compared against `p/q`: returns whether
/// `|a/b - c/d| <= p/q` (or `>=` when `at_least`).
fn frac_cmp(a: i128, b: i128, c: i128, d: i128, p: i128, q: i128, at_least: bool) -> bool {
    let num = (a * d - c * b).abs() * q;
    let den = b * d * p;
    if at_least {
        num >= den
    } else {
        num <= den
    }
}

fn a7() -> Vec<Outcome> {
    let n = 16i128;
    // eps = 1/5; weights scaled by 5: item 0 weighs 5n, the others 5 or 6.
    let (heavy, w1, w2) = (5 * n, 5i128, 6i128);
    let (m1, m2) = separation_fixture(16, 0.2).unwrap();
    let fixture_ok = (0..16).all(|i| {
        let (x, y) = if i == 0 { (heavy, heavy) } else { (w1, w2) };
        ((m1.log_weight(i) - m1.log_weight(1)).exp() - x as f64 / w1 as f64).abs() < 1e-12
            && ((m2.log_weight(i) - m2.log_weight(1)).exp() - y as f64 / w2 as f64).abs() < 1e-12
    });
    // Pairs {0, k}: item 0 wins heavy/(heavy+5) versus heavy/(heavy+6);
    // pairs of light items agree exactly.
    let pair_ok = frac_cmp(heavy, heavy + w1, heavy, heavy + w2, 1, 5 * n, false);
    // Full slate, item 0: heavy/(heavy+(n-1)5) versus heavy/(heavy+(n-1)6).
    let full_ok = frac_cmp(heavy, heavy + (n - 1) * w1, heavy, heavy + (n - 1) * w2, 1, 45, true);
    let r = distance_exact(&m1.into(), &m2.into()).unwrap();
    vec![Outcome {
        id: "A7",
        pass: fixture_ok && pair_ok && full_ok,
        detail: format!(
            "fixture weights {fixture_ok}; pair gaps <= eps/n {pair_ok}; full-slate gap >= eps/9 {full_ok} (dinf {:.4})",
            r.dinf
        ),
    }]
}

fn a8() -> Vec<Outcome> {
    let truth: Model = MatchingPseudoMnl::new(vec![0.7, 0.3, 0.5, 0.9], (0..8).collect()).unwrap().into();
    let ok = (0..100u64)
        .into_par_iter()
        .filter(|&t| {
            let key = StreamKey::new(8000, t);
            let mut o = LiveOracle::new(truth.clone(), key);
            let l = learn_adaptive(&mut o, 0.5, 0.1, &mut key.algo_rng()).unwrap();
            distance_exact(&truth, &l.model.into()).unwrap().dinf <= 0.5
        })
        .count();
    vec![Outcome { id: "A8", pass: ok >= 90, detail: format!("exact dinf <= 0.5 in {ok}/100 (need >= 90)") }]
}

fn a9() -> Vec<Outcome> {
    let truth = instance(8, "power-law:1");
    let mut identical = true;
    for t in 0..5u64 {
        let key = StreamKey::new(9000, t);
        let mut live = LiveOracle::new(truth.clone(), key);
        let a = learn_balanced(&mut live, 0.5, 0.1, &mut key.algo_rng()).unwrap();
        let m = live.ledger().max_pair_count();
        let mut batch = LiveOracle::new(truth.clone(), key);
        let mut replay = ReplayOracle::new(build_replay_table(&mut batch, m).unwrap());
        let b = learn_balanced(&mut replay, 0.5, 0.1, &mut key.algo_rng()).unwrap();
        let bits = |l: &LogWeightMnl| l.log_weights().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        identical &= bits(&a.model) == bits(&b.model);
    }
    let key = StreamKey::new(9001, 0);
    let mut o = LiveOracle::new(truth, key);
    let l = learn_adaptive(&mut o, 0.5, 0.1, &mut key.algo_rng()).unwrap();
    let before = o.ledger().total();
    generate_weights(&l.forest).unwrap();
    let delta = o.ledger().total() - before;
    let zero = delta == 0;
    vec![Outcome {
        id: "A9",
        pass: identical && zero,
        detail: format!("live/replay log-weights bit-identical over 5 seeds: {identical}; generate_weights ledger delta {delta}"),
    }]
}

type Suite = (&'static str, fn() -> Vec<Outcome>);

fn main() -> ExitCode {
    let suites: [Suite; 9] =
        [("A1", a1), ("A2", a2), ("A3", a3), ("A4", a4), ("A5", a5), ("A6", a6), ("A7", a7), ("A8", a8), ("A9", a9)];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = false;
    for (name, f) in suites {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        for o in f() {
            let known = KNOWN_GAPS.contains(&o.id);
            let tag = if o.pass { "PASS" } else { "FAIL" };
            let note = if !o.pass && known { " [known gap, not counted]" } else { "" };
            println!("{} {tag} {} ({:.1}s){note}", o.id, o.detail, start.elapsed().as_secs_f64());
            failed |= !o.pass && !known;
        }
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
