use std::time::Instant;

use mnlearn::metrics::{
    all_slates_queries, distance_exact_capped, estimates_on_all_slates, ledger_report, max_slate_error, sample_slates,
    separation_fixture, write_csv, CsvRow, DistanceMode, CSV_COLUMNS, CSV_SCHEMA, EXACT_CAP,
};
use mnlearn::oracle::build_replay_table;
use mnlearn::{
    distance_exact, distance_sampled, Error, LiveOracle, LogWeightMnl, MatchingPseudoMnl, Model, Oracle, QueryLedger,
    StreamKey,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn weights(w: &[f64]) -> Model {
    LogWeightMnl::new(w.iter().map(|x| x.ln()).collect()).unwrap().into()
}

#[test]
fn pair_models_differ_on_their_only_pair() {
    let d = distance_exact(&weights(&[1.0, 2.0]), &weights(&[1.0, 3.0])).unwrap();
    // (1/3, 2/3) against (1/4, 3/4).
    assert!((d.d1 - 1.0 / 6.0).abs() < 1e-15);
    assert!((d.dinf - 1.0 / 12.0).abs() < 1e-15);
    assert_eq!(d.argmax_slate, vec![0, 1]);
    assert_eq!(d.mode, DistanceMode::Exact);
}

#[test]
fn full_slate_agreement_hides_a_pair_gap() {
    let eps = 0.2;
    let a = weights(&[1.0 - eps, eps / 2.0, eps / 2.0]);
    let b = weights(&[1.0 - eps, 3.0 * eps / 4.0, eps / 4.0]);
    let full: f64 = a
        .slate_distribution(&[0, 1, 2])
        .unwrap()
        .iter()
        .zip(b.slate_distribution(&[0, 1, 2]).unwrap())
        .map(|(x, y)| (x - y).abs())
        .sum();
    assert!((full - eps / 2.0).abs() < 1e-12);
    let d = distance_exact(&a, &b).unwrap();
    assert!((d.d1 - 0.5).abs() < 1e-12);
    assert!(d.dinf >= 0.25 - 1e-12);
    assert_eq!(d.argmax_slate, vec![1, 2]);
}

#[test]
fn separation_fixture_is_close_on_pairs_and_far_on_the_full_slate() {
    let (n, eps) = (50, 0.2);
    let (a, b) = separation_fixture(n, eps).unwrap();
    let (a, b): (Model, Model) = (a.into(), b.into());
    for v in 1..n {
        let gap = (a.pair_win_prob(0, v) - b.pair_win_prob(0, v)).abs();
        assert!(gap <= eps / n as f64);
    }
    let start = Instant::now();
    let d = distance_sampled(&a, &b, 1000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert!(d.dinf >= eps / 9.0, "{}", d.dinf);
    assert_eq!(d.mode, DistanceMode::Sampled(1000));
    assert!(separation_fixture(1, eps).is_err());
}

#[test]
fn separation_fixture_matches_its_closed_form() {
    let (n, eps) = (16usize, 0.2);
    let (a, b) = separation_fixture(n, eps).unwrap();
    let (a, b): (Model, Model) = (a.into(), b.into());
    let mut pair_gap = 0.0f64;
    for u in 0..n {
        for v in u + 1..n {
            pair_gap = pair_gap.max((a.pair_win_prob(u, v) - b.pair_win_prob(u, v)).abs());
        }
    }
    assert!(pair_gap <= 0.0125);
    let nf = n as f64;
    let closed = nf / (2.0 * nf - 1.0) - nf / ((2.0 + eps) * nf - (1.0 + eps));
    let all: Vec<usize> = (0..n).collect();
    let gap = a.slate_distribution(&all).unwrap()[0] - b.slate_distribution(&all).unwrap()[0];
    assert!((gap - closed).abs() < 1e-12);
    assert!(gap >= eps / 9.0);
    let d = distance_sampled(&a, &b, 20, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert!(d.dinf >= eps / 9.0);
    // The gap vanishes with eps.
    let (a, b) = separation_fixture(n, 1e-9).unwrap();
    assert!(distance_exact(&a.into(), &b.into()).unwrap().dinf < 1e-9);
}

#[test]
fn sampled_slates_start_with_the_weight_prefixes() {
    let a = weights(&[5.0, 1.0, 3.0, 2.0]);
    let s = sample_slates(&a, 3, &mut ChaCha8Rng::seed_from_u64(2));
    assert_eq!(s, vec![vec![1, 3], vec![1, 3, 2], vec![1, 3, 2, 0]]);
    let s = sample_slates(&a, 9, &mut ChaCha8Rng::seed_from_u64(2));
    assert_eq!(s.len(), 9);
    assert_eq!(s[3..], [vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    let s = sample_slates(&a, 40, &mut ChaCha8Rng::seed_from_u64(2));
    assert_eq!(s.len(), 40);
    assert!(s.iter().all(|x| x.len() >= 2 && x.windows(2).all(|p| p[0] != p[1])));
}

#[test]
fn distances_check_sizes() {
    let a = weights(&[1.0; 3]);
    assert!(distance_exact(&a, &weights(&[1.0; 4])).is_err());
    let big = weights(&[1.0; EXACT_CAP + 1]);
    assert!(matches!(distance_exact(&big, &big), Err(Error::TooLargeForExact { .. })));
    assert!(matches!(distance_exact_capped(&a, &a, 2), Err(Error::TooLargeForExact { n: 3, cap: 2 })));
    assert!(distance_sampled(&a, &a, 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn pseudo_models_are_measured_too() {
    let p: Model = MatchingPseudoMnl::new(vec![0.9], vec![0, 1]).unwrap().into();
    let u = weights(&[1.0, 1.0]);
    let d = distance_exact(&p, &u).unwrap();
    assert!((d.dinf - 0.4).abs() < 1e-12);
    assert!((d.d1 - 0.8).abs() < 1e-12);
}

#[test]
fn slate_estimates_cover_every_slate() {
    let (n, eps, delta) = (8, 0.2, 0.1);
    let model = weights(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    let mut o = LiveOracle::new(model.clone(), StreamKey::new(3, 0));
    let est = estimates_on_all_slates(&mut o, eps, delta).unwrap();
    let q = all_slates_queries(n, eps, delta);
    assert_eq!(q, (2.0 / (eps * eps) * (n as f64 * 3f64.ln() + (2.0f64 / delta).ln())).ceil() as u128);
    assert_eq!(est.len(), 255);
    assert_eq!(o.ledger().total(), 255 * q);
    for (s, p) in &est {
        assert_eq!(s.len(), p.len());
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert!(max_slate_error(&est, &model) <= eps);
}

#[test]
fn ledger_reports_summarize() {
    let empty = ledger_report(&QueryLedger::new());
    assert_eq!((empty.total, empty.max_pair, empty.pairs_touched), (0, 0, 0));
    assert!(empty.per_size.is_empty());
    let mut o = LiveOracle::new(weights(&[1.0; 3]), StreamKey::new(4, 0));
    build_replay_table(&mut o, 2).unwrap();
    let r = ledger_report(o.ledger());
    assert_eq!((r.total, r.max_pair, r.pairs_touched), (6, 2, 3));
    assert_eq!(r.per_size, vec![(2, 6)]);
}

#[test]
fn csv_has_a_schema_line_and_fixed_columns() {
    let row = CsvRow {
        n: 6,
        eps: 0.5,
        delta: 0.1,
        algo: "adaptive".into(),
        trial: 3,
        d1: 0.25,
        dinf: 0.125,
        total_queries: u128::MAX,
        max_pair_queries: 7,
        seconds: 1.5,
    };
    let mut buf = Vec::new();
    write_csv(&mut buf, &[row]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_SCHEMA);
    assert_eq!(lines[1], CSV_COLUMNS.join(","));
    assert_eq!(lines[2], format!("6,0.5,0.1,adaptive,3,0.25,0.125,{},7,1.500000", u128::MAX));
}

fn model(max_n: usize) -> impl Strategy<Value = Model> {
    prop::collection::vec(-4.0f64..4.0, 1..=max_n).prop_map(|w| LogWeightMnl::new(w).unwrap().into())
}

fn model_pair(max_n: usize) -> impl Strategy<Value = (Model, Model)> {
    (1..=max_n).prop_flat_map(|n| {
        let m = || prop::collection::vec(-4.0f64..4.0, n).prop_map(|w| Model::from(LogWeightMnl::new(w).unwrap()));
        (m(), m())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn distances_are_symmetric_and_ordered((a, b) in model_pair(8)) {
        let ab = distance_exact(&a, &b).unwrap();
        let ba = distance_exact(&b, &a).unwrap();
        prop_assert!((ab.d1 - ba.d1).abs() < 1e-12);
        prop_assert!((ab.dinf - ba.dinf).abs() < 1e-12);
        prop_assert!(ab.dinf <= ab.d1 + 1e-15);
        prop_assert!(ab.d1 <= 2.0 * ab.dinf + 1e-12 || ab.argmax_slate.len() > 2);
        prop_assert!(ab.d1 <= 2.0);
    }

    #[test]
    fn identical_models_are_at_distance_zero(a in model(8)) {
        let d = distance_exact(&a, &a).unwrap();
        prop_assert_eq!((d.d1, d.dinf), (0.0, 0.0));
    }

    #[test]
    fn sampling_never_overestimates((a, b) in model_pair(12), k in 1usize..200, seed in any::<u64>()) {
        let exact = distance_exact(&a, &b).unwrap();
        let s = distance_sampled(&a, &b, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(s.d1 <= exact.d1 + 1e-12);
        prop_assert!(s.dinf <= exact.dinf + 1e-12);
    }
}
