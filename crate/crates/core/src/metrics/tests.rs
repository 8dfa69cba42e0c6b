use super::*;
use crate::matching::{quantile_match, stochastic_fair_match};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

#[test]
fn dp_gap_counts_positives() {
    assert_eq!(dp_gap(&[0.6, 0.7], &[0.6, 0.7], 0.5).unwrap(), 0.0);
    assert!(close(dp_gap(&[0.6, 0.7], &[0.4, 0.7], 0.5).unwrap(), 0.5));
    assert!(matches!(dp_gap(&[], &[0.1], 0.5), Err(Error::Empty(_))));
}

#[test]
fn dp_bar_gap_examples() {
    assert!(close(dp_bar_gap(&[0.2, 0.4], &[0.3, 0.7]).unwrap(), 0.2));
    assert!(close(dp_bar_gap(&[0.9], &[0.1]).unwrap(), 0.8));
}

#[test]
fn wasserstein_examples() {
    assert_eq!(wasserstein_dp(&[0.3, 0.1], &[0.1, 0.3]).unwrap(), 0.0);
    assert!(close(wasserstein_dp(&[0.2, 0.8], &[0.3, 0.9]).unwrap(), 0.1));
    // Mass 1/2 at 0.5 moves to 0.4 and 0.6.
    assert!(close(wasserstein_dp(&[0.5], &[0.4, 0.6]).unwrap(), 0.1));
}

#[test]
fn wasserstein_matches_lp_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let n0 = rng.random_range(1..=8);
        let n1 = rng.random_range(1..=8);
        let a: Vec<f64> = (0..n0).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..n1).map(|_| rng.random::<f64>()).collect();
        let w = wasserstein_dp(&a, &b).unwrap();
        let lp = stochastic_fair_match(&a, &b).unwrap().total_cost;
        assert!((w - lp).abs() <= 1e-9, "{w} vs {lp}");
    }
}

#[test]
fn wasserstein_equals_quantile_mdp() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in 1..20 {
        let a: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let q = quantile_match(&a, &b).unwrap().mdp;
        assert!((wasserstein_dp(&a, &b).unwrap() - q).abs() <= 1e-9);
    }
}

#[test]
fn tv_examples() {
    assert_eq!(tv_dp(&[0.1, 0.9], &[0.9, 0.1], 100).unwrap(), 0.0);
    assert!(close(tv_dp(&[0.05], &[0.95], 100).unwrap(), 1.0));
    assert!(tv_dp(&[0.1], &[0.1], 0).is_err());
}

#[test]
fn tv_matches_common_atom_count() {
    // Atoms sit in distinct bins, so TV = 1 - (multiset overlap) / n.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let atoms = [0.05, 0.35, 0.55, 0.95];
    for _ in 0..100 {
        let n = rng.random_range(1..8);
        let a: Vec<f64> = (0..n).map(|_| atoms[rng.random_range(0..4)]).collect();
        let b: Vec<f64> = (0..n).map(|_| atoms[rng.random_range(0..4)]).collect();
        let common: usize = atoms
            .iter()
            .map(|t| {
                a.iter()
                    .filter(|&x| x == t)
                    .count()
                    .min(b.iter().filter(|&x| x == t).count())
            })
            .sum();
        let tv = tv_dp(&a, &b, 10).unwrap();
        assert!((tv - (1.0 - common as f64 / n as f64)).abs() < 1e-12);
    }
}

#[test]
fn ks_examples() {
    assert_eq!(ks_dp(&[0.4, 0.2], &[0.2, 0.4]).unwrap(), 0.0);
    assert_eq!(ks_dp(&[0.1], &[0.9]).unwrap(), 1.0);
    // CDF gaps at 0.1, 0.2, 0.25, 0.3, 0.35: 1/3, 2/3, 1/6, 1/2, 0.
    assert!(close(ks_dp(&[0.1, 0.2, 0.3], &[0.25, 0.35]).unwrap(), 2.0 / 3.0));
}

#[test]
fn subset_full_mask_is_dp_bar() {
    let scores = [0.1, 0.4, 0.8, 0.3, 0.9];
    let groups = [0, 1, 0, 1, 1];
    let full = subset_dp_bar(&scores, &groups, &[true; 5]).unwrap();
    let dp_bar = dp_bar_gap(&[0.1, 0.8], &[0.4, 0.3, 0.9]).unwrap();
    assert_eq!(full, dp_bar);
    let err = subset_dp_bar(&scores, &groups, &[false, true, false, true, true]);
    assert!(matches!(err, Err(Error::UndefinedSubset { group: 0 })));
}

#[test]
fn hyperplane_subsets_are_reproducible() {
    let rows: Vec<Vec<f64>> = (0..30)
        .map(|i| vec![i as f64 / 30.0 - 0.5, (i % 7) as f64 - 3.0])
        .collect();
    let data = Dataset::from_rows(&rows, vec![0; 30], (0..30).map(|i| (i % 2) as u8).collect(), "t").unwrap();
    let a = random_hyperplane_subsets(&data, 20, 4);
    assert_eq!(a, random_hyperplane_subsets(&data, 20, 4));
    assert_eq!(a.len(), 20);
    assert_ne!(a, random_hyperplane_subsets(&data, 20, 5));
}

#[test]
fn eo_hand_counted() {
    let scores = [0.9, 0.2, 0.6, 0.1, 0.8, 0.7, 0.6, 0.4];
    let labels = [1, 1, 0, 0, 1, 1, 0, 0];
    let groups = [0, 0, 0, 0, 1, 1, 1, 1];
    let g = eo_gaps(&scores, &labels, &groups, 0.5).unwrap();
    // TPR 1/2 vs 1, FPR 1/2 vs 1/2.
    assert!(close(g.tpr_gap, 0.5));
    assert!(close(g.fpr_gap, 0.0));
    assert!(close(g.eo, 0.25));
    let perfect = eo_gaps(&[1.0, 0.0, 1.0, 0.0], &[1, 0, 1, 0], &[0, 0, 1, 1], 0.5).unwrap();
    assert_eq!((perfect.tpr_gap, perfect.fpr_gap, perfect.eo), (0.0, 0.0, 0.0));
    assert!(matches!(
        eo_gaps(&[0.1, 0.2], &[1, 1], &[0, 1], 0.5),
        Err(Error::EmptyCell { .. })
    ));
}

#[test]
fn spearman_examples() {
    let a = [0.1, 0.5, 0.3, 0.9];
    assert!(close(spearman_rank_corr(&a, &a).unwrap(), 1.0));
    let rev: Vec<f64> = a.iter().map(|x| -x).collect();
    assert!(close(spearman_rank_corr(&a, &rev).unwrap(), -1.0));
    // Ranks [1,2,3,4,5] vs [1,2,3.5,5,3.5].
    let r = spearman_rank_corr(&[1.0, 2.0, 3.0, 4.0, 5.0], &[5.0, 6.0, 7.0, 8.0, 7.0]).unwrap();
    assert!(close(r, 8.0 / 95f64.sqrt()));
    assert!(spearman_rank_corr(&[1.0, 1.0], &[0.0, 1.0]).is_err());
}

#[test]
fn flip_confusion_hand_case() {
    let f = flip_confusion(&[0.7, 0.3, 0.6, 0.2], &[0.4, 0.6, 0.7, 0.1], &[0, 0, 1, 1], 0.5).unwrap();
    assert_eq!(f.group0.counts, [[0, 1], [1, 0]]);
    assert_eq!(f.group1.counts, [[1, 0], [0, 1]]);
    assert_eq!(f.undesirable_flips, 1);
    let same = flip_confusion(&[0.7, 0.3], &[0.7, 0.3], &[0, 1], 0.5).unwrap();
    assert_eq!(same.undesirable_flips, 0);
}

#[test]
fn boxplot_summary_hand_case() {
    let s = BoxplotSummary::from_values(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 100.0]).unwrap();
    assert_eq!((s.q1, s.median, s.q3, s.iqr), (3.0, 5.0, 7.0, 4.0));
    assert_eq!(s.outliers, 1);
    assert_eq!(s.max, 100.0);
    let c = BoxplotSummary::from_values(&[0.0; 10]).unwrap();
    assert_eq!((c.std, c.outliers), (0.0, 0));
}

#[test]
fn csv_row_follows_header() {
    let r = FairnessReport {
        accuracy: 0.8,
        dp: 0.1,
        dp_bar: 0.05,
        wdp: 0.06,
        tvdp: 0.2,
        ksdp: 0.15,
        tpr_gap: 0.1,
        fpr_gap: 0.0,
        eo: 0.05,
        mdp: None,
        transport_cost: Some(0.5),
        consistency: None,
        tau: 0.5,
    };
    let row = r.csv_row(1.0);
    assert_eq!(row.split(',').count(), SWEEP_CSV_HEADER.split(',').count());
    assert_eq!(row, "1,0.8,0.1,0.05,0.06,0.2,0.15,0.05,,0.5");
}

fn scores_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 1..12)
}

proptest! {
    #[test]
    fn dp_bar_below_wasserstein(a in scores_strategy(), b in scores_strategy()) {
        prop_assert!(dp_bar_gap(&a, &b).unwrap() <= wasserstein_dp(&a, &b).unwrap() + 1e-12);
    }

    #[test]
    fn measures_ignore_row_order(a in scores_strategy(), b in scores_strategy(), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut pa, mut pb) = (a.clone(), b.clone());
        use rand::seq::SliceRandom;
        pa.shuffle(&mut rng);
        pb.shuffle(&mut rng);
        prop_assert_eq!(ks_dp(&a, &b).unwrap(), ks_dp(&pa, &pb).unwrap());
        prop_assert_eq!(tv_dp(&a, &b, 100).unwrap(), tv_dp(&pa, &pb, 100).unwrap());
        prop_assert!((wasserstein_dp(&a, &b).unwrap() - wasserstein_dp(&pa, &pb).unwrap()).abs() < 1e-12);
        prop_assert!((dp_bar_gap(&a, &b).unwrap() - dp_bar_gap(&pa, &pb).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn distances_vanish_on_identical_multisets(a in scores_strategy(), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = a.clone();
        use rand::seq::SliceRandom;
        b.shuffle(&mut rng);
        prop_assert_eq!(ks_dp(&a, &b).unwrap(), 0.0);
        prop_assert_eq!(tv_dp(&a, &b, 100).unwrap(), 0.0);
        prop_assert!(wasserstein_dp(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn quantile_mdp_beats_any_pairing(a in prop::collection::vec(0.0f64..=1.0, 2..10), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|_| rng.random::<f64>()).collect();
        let mut perm: Vec<usize> = (0..a.len()).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng);
        let other = a.iter().zip(&perm).map(|(x, &j)| (x - b[j]).abs()).sum::<f64>() / a.len() as f64;
        let q = quantile_match(&a, &b).unwrap().mdp;
        prop_assert!(q <= other + 1e-12);
        prop_assert!((wasserstein_dp(&a, &b).unwrap() - q).abs() < 1e-9);
    }
}
