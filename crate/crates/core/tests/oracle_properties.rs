mod common;

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use tracelink::evaluation::{cohen_kappa, compute_metrics, fisher_exact_two_sided, tfidf_pair_similarities, threshold_sweep};
use tracelink::model::{Label, PairKey, Variation};
use tracelink::retrieval::{retrieve_examples, Metric, RetrievalConfig, RetrievalDatabase};

fn table() -> impl Strategy<Value = [[u64; 2]; 2]> {
    [[0u64..25, 0u64..25], [0u64..25, 0u64..25]].prop_filter("non-empty", |t| t.iter().flatten().sum::<u64>() > 0)
}

proptest! {
    #[test]
    fn metrics_equal_the_tally(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (preds, truth) = random_prediction_set(&mut rng);
        let map: BTreeMap<PairKey, Label> = preds.iter().cloned().collect();
        let got = compute_metrics(&map, &truth).unwrap();
        prop_assert!(metrics_match(&got, &brute_force_metrics(&preds, &truth)));
        prop_assert_eq!(got.confusion.total() as usize, preds.len());
    }

    #[test]
    fn fisher_matches_enumeration_and_is_transpose_invariant(t in table()) {
        let p = fisher_exact_two_sided(&t).unwrap();
        let want = fisher_by_enumeration(t);
        prop_assert!((p - want).abs() <= 1e-12 * want, "{} vs {}", p, want);
        let tt = [[t[0][0], t[1][0]], [t[0][1], t[1][1]]];
        prop_assert!((fisher_exact_two_sided(&tt).unwrap() - p).abs() <= 1e-12 * p);
        prop_assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn kappa_matches_the_closed_form(t in table()) {
        match (cohen_kappa(&t), kappa_closed_form(t)) {
            (Ok(r), Some(k)) => {
                prop_assert!((r.kappa - k).abs() < 1e-12);
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r.kappa));
            }
            (Err(_), None) => {}
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
        }
    }

    #[test]
    fn sweep_best_is_the_curve_maximum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = toy_pairs(&mut rng);
        let sims = tfidf_pair_similarities(&pairs).unwrap();
        let truth: Vec<Label> = pairs.iter().map(|p| p.label).collect();
        let r = threshold_sweep(&sims, &truth).unwrap();
        let max = r.curve.iter().filter_map(|p| p.macro_f1).fold(f64::NEG_INFINITY, f64::max);
        if let Some(b) = r.best_macro_f1 {
            prop_assert!((b - max).abs() < 1e-9);
        }
        let (t, m) = brute_force_sweep(&sims, &truth);
        prop_assert_eq!(r.best_threshold, t);
        prop_assert_eq!(r.best_macro_f1.map(|x| (x * 1e6).round()), m.map(|x| (x * 1e6).round()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn retrieval_matches_brute_force(seed in any::<u64>(), k in 1usize..=8, cosine in any::<bool>(), excl in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let db = random_db(&mut rng, &prototypes(), &golden_query().1);
        let rdb = RetrievalDatabase::from_parts(db.examples.clone(), db.vectors.iter().map(|v| to_vector(v)).collect()).unwrap();
        let query: Vec<f64> = (0..db.vectors[0].len()).map(|i| (i % 3 + 1) as f64).collect();
        let metric = if cosine { Metric::Cosine } else { Metric::Euclidean };
        let exclusion: HashSet<String> = db.examples.iter().step_by(7).map(|e| e.example_id.clone()).collect();
        let variation_exclusion = Variation::KNOWN.get(excl).copied();
        let cfg = RetrievalConfig { k, metric, exclusion: exclusion.iter().cloned().collect(), variation_exclusion };
        let got = retrieve_examples(&rdb, &to_vector(&query), &cfg).unwrap();
        let (v, i) = brute_force_top_k(&db, &query, k, metric, &exclusion, variation_exclusion);
        prop_assert_eq!(got.valid.iter().map(|s| s.id().to_string()).collect::<Vec<_>>(), v);
        prop_assert_eq!(got.invalid.iter().map(|s| s.id().to_string()).collect::<Vec<_>>(), i);
    }
}
