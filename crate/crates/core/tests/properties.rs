use hypersparse::cooc::{ppmi_reweight, CoocMatrix};
use hypersparse::eval::{
    accuracy_of, best_threshold, mcnemar_exact, mcnemar_from_counts, split_dataset, LabeledPair,
    Relation, Split,
};
use hypersparse::scoring::{
    apinc_score, balapinc, decide, lin_score, slqs_from_entropies, Decision, RankedFeatureList,
};
use hypersparse::solver::{nonneg_soft_threshold, project_unit_ball};
use ndarray::Array1;
use proptest::prelude::*;

fn sparse_vector() -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::vec((0usize..40, 0.0f64..5.0), 0..25)
}

fn ranked() -> impl Strategy<Value = RankedFeatureList> {
    (sparse_vector(), 1usize..30).prop_map(|(v, k)| RankedFeatureList::from_sparse(&v, k))
}

fn labeled(labels: &[bool]) -> Vec<LabeledPair> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &pos)| {
            let rel = if pos { Relation::Hyper } else { Relation::Hypo };
            LabeledPair::new(format!("f{i}"), format!("e{i}"), rel)
        })
        .collect()
}

proptest! {
    #[test]
    fn lin_is_exactly_symmetric(u in ranked(), v in ranked()) {
        prop_assert_eq!(lin_score(&u, &v), lin_score(&v, &u));
    }

    #[test]
    fn scores_lie_in_unit_interval(u in ranked(), v in ranked()) {
        for s in [lin_score(&u, &v), apinc_score(&u, &v), balapinc(&u, &v)] {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&s), "score {}", s);
        }
    }

    #[test]
    fn self_lin_is_one(u in ranked()) {
        prop_assume!(!u.is_empty());
        prop_assert!((lin_score(&u, &u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn included_list_entails_more(v in ranked(), cut in 1usize..10) {
        // u keeps the head of v, so its support is a strict subset
        prop_assume!(v.len() > cut);
        let u = v.truncated(cut);
        prop_assert!(apinc_score(&u, &v) > apinc_score(&v, &u));
    }

    #[test]
    fn truncation_never_grows(u in ranked(), k in 0usize..30) {
        let t = u.truncated(k);
        prop_assert_eq!(t.len(), k.min(u.len()));
        prop_assert_eq!(t.entries(), &u.entries()[..t.len()]);
    }

    #[test]
    fn slqs_scale_invariant(e_u in 0.01f64..5.0, e_v in 0.01f64..5.0, c in 0.1f64..10.0) {
        let a = slqs_from_entropies(e_u, e_v).unwrap();
        let b = slqs_from_entropies(c * e_u, c * e_v).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn slqs_sign_follows_entropy_order(e_u in 0.01f64..5.0, e_v in 0.01f64..5.0) {
        let s = slqs_from_entropies(e_u, e_v).unwrap();
        prop_assert_eq!(s > 0.0, e_u < e_v);
    }

    #[test]
    fn decision_is_strict(score in -2.0f64..2.0, t in -2.0f64..2.0) {
        let d = decide(score, t);
        prop_assert_eq!(d == Decision::Positive, score > t);
        prop_assert_eq!(decide(t, t), Decision::Negative);
    }

    #[test]
    fn accuracy_of_complement(labels in prop::collection::vec(any::<bool>(), 1..60),
                              preds in prop::collection::vec(any::<bool>(), 60)) {
        let gold = labeled(&labels);
        let p: Vec<Option<bool>> = preds[..labels.len()].iter().map(|&b| Some(b)).collect();
        let flipped: Vec<Option<bool>> = p.iter().map(|b| b.map(|b| !b)).collect();
        let (a, cov) = accuracy_of(&p, &gold).unwrap();
        let (b, _) = accuracy_of(&flipped, &gold).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
        prop_assert_eq!(cov, 1.0);
    }

    #[test]
    fn tuned_threshold_beats_majority(points in prop::collection::vec((-3.0f64..3.0, any::<bool>()), 1..80)) {
        let (t, correct) = best_threshold(&points).unwrap();
        let pos = points.iter().filter(|p| p.1).count();
        prop_assert!(correct >= pos.max(points.len() - pos));
        let recount = points.iter().filter(|p| (p.0 > t) == p.1).count();
        prop_assert_eq!(recount, correct);
    }

    #[test]
    fn mcnemar_symmetric(b in 0usize..200, c in 0usize..200) {
        prop_assume!(b + c > 0);
        let x = mcnemar_from_counts(b, c);
        let y = mcnemar_from_counts(c, b);
        prop_assert_eq!(x.statistic, y.statistic);
        prop_assert_eq!(x.p_value, y.p_value);
        prop_assert!((0.0..=1.0).contains(&x.p_value));
        prop_assert_eq!(mcnemar_exact(b, c), mcnemar_exact(c, b));
        prop_assert!(mcnemar_exact(b, c) <= 1.0);
    }

    #[test]
    fn split_partitions_and_stratifies(labels in prop::collection::vec(any::<bool>(), 3..120), seed in any::<u64>()) {
        let pairs = labeled(&labels);
        let n = pairs.len();
        let ds = split_dataset(pairs.clone(), seed).unwrap();
        let (dev, test) = (ds.dev(), ds.test());
        prop_assert_eq!(dev.len(), n / 3);
        prop_assert_eq!(dev.len() + test.len(), n);
        for p in &pairs {
            prop_assert_eq!(dev.contains(p) as u8 + test.contains(p) as u8, 1);
        }
        let pos = labels.iter().filter(|&&b| b).count() as f64;
        let dev_pos = dev.iter().filter(|p| p.is_positive()).count() as f64;
        prop_assert!((dev_pos - pos * (n / 3) as f64 / n as f64).abs() <= 1.0);
        prop_assert_eq!(split_dataset(pairs, seed).unwrap().split, ds.split.clone());
        prop_assert!(ds.split.iter().all(|s| matches!(s, Split::Dev | Split::Test)));
    }

    #[test]
    fn ppmi_nonnegative_and_sparser(cells in prop::collection::vec(prop::collection::vec(0u32..20, 6), 1..8)) {
        let dense: Vec<Vec<f64>> = cells.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        prop_assume!(dense.iter().flatten().any(|&v| v > 0.0));
        let counts = CoocMatrix::from_dense(&dense);
        let ppmi = ppmi_reweight(&counts).unwrap();
        prop_assert!(ppmi.nnz() <= counts.nnz());
        for (r, c, v) in ppmi.iter() {
            prop_assert!(v > 0.0);
            prop_assert!(counts.get(r, c) > 0.0);
        }
    }

    #[test]
    fn prox_operators_feasible(v in prop::collection::vec(-5.0f64..5.0, 1..12), tau in 0.0f64..2.0) {
        let a = Array1::from(v);
        let s = nonneg_soft_threshold(a.view(), tau);
        prop_assert!(s.iter().zip(a.iter()).all(|(&x, &y)| x >= 0.0 && x <= y.max(0.0)));
        let p = project_unit_ball(a.view());
        prop_assert!(p.dot(&p) <= 1.0 + 1e-12);
        if a.dot(&a) <= 1.0 {
            prop_assert_eq!(p, a);
        }
    }
}
