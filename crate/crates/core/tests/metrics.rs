use ddsd_core::{compute_eer, compute_fa_at_fr, det_points, EvalReport, ScoredSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Threshold sweep that counts every class member at every candidate threshold.
fn brute_force_curve(entries: &[(f64, bool)]) -> Vec<(f64, f64, f64)> {
    let mut thresholds: Vec<f64> = entries.iter().map(|e| e.0).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    let pos = entries.iter().filter(|e| e.1).count() as f64;
    let neg = entries.len() as f64 - pos;
    thresholds
        .into_iter()
        .map(|t| {
            let fr = entries.iter().filter(|e| e.1 && e.0 < t).count() as f64;
            let fa = entries.iter().filter(|e| !e.1 && e.0 >= t).count() as f64;
            (t, 100.0 * fr / pos, 100.0 * fa / neg)
        })
        .collect()
}

fn brute_force_eer(entries: &[(f64, bool)]) -> f64 {
    let curve = brute_force_curve(entries);
    for k in 0..curve.len() - 1 {
        let (_, fr_a, fa_a) = curve[k];
        let (_, fr_b, fa_b) = curve[k + 1];
        let (da, db) = (fa_a - fr_a, fa_b - fr_b);
        if da == 0.0 {
            return fa_a;
        }
        if da > 0.0 && db <= 0.0 {
            return fa_a + (fa_b - fa_a) * da / (da - db);
        }
    }
    unreachable!("curve ends at FA 0, FR 100")
}

fn brute_force_fa(entries: &[(f64, bool)], target: f64) -> f64 {
    let curve = brute_force_curve(entries);
    let mut j = 0;
    for (k, p) in curve.iter().enumerate() {
        if p.1 <= target {
            j = k;
        }
    }
    let (_, fr_a, fa_a) = curve[j];
    if fr_a == target || j + 1 == curve.len() {
        return fa_a;
    }
    let (_, fr_b, fa_b) = curve[j + 1];
    fa_a + (target - fr_a) / (fr_b - fr_a) * (fa_b - fa_a)
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, levels: u32) -> Vec<(f64, bool)> {
    let mut e: Vec<(f64, bool)> = (0..n)
        .map(|_| (f64::from(rng.random_range(0..levels)) / f64::from(levels), rng.random()))
        .collect();
    e[0].1 = true;
    e[1].1 = false;
    e
}

#[test]
fn matches_brute_force_on_random_small_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..1000 {
        let n = rng.random_range(2..=50);
        let levels = if k % 2 == 0 { 10 } else { 1_000_000 };
        let entries = random_set(&mut rng, n, levels);
        let set = ScoredSet::new(entries.clone());
        assert_eq!(compute_eer(&set).unwrap(), brute_force_eer(&entries), "set {k}");
        assert_eq!(
            compute_fa_at_fr(&set, 10.0).unwrap().0,
            brute_force_fa(&entries, 10.0),
            "set {k}"
        );
    }
}

#[test]
fn six_point_toy_set() {
    let entries = vec![
        (0.9, true),
        (0.8, false),
        (0.7, true),
        (0.4, false),
        (0.3, true),
        (0.1, false),
    ];
    let set = ScoredSet::new(entries.clone());
    let eer = compute_eer(&set).unwrap();
    assert_eq!(eer, brute_force_eer(&entries));
    assert!((eer - 100.0 / 3.0).abs() < 1e-12);
}

#[test]
fn eight_point_toy_set_fa() {
    let entries = vec![
        (0.95, true),
        (0.9, true),
        (0.85, false),
        (0.8, true),
        (0.6, false),
        (0.5, true),
        (0.3, false),
        (0.2, false),
    ];
    let set = ScoredSet::new(entries.clone());
    let (fa, threshold) = compute_fa_at_fr(&set, 10.0).unwrap();
    assert_eq!(fa, brute_force_fa(&entries, 10.0));
    // 10% FR lies 40% of the way from (t 0.5, FR 0, FA 50) to (t 0.6, FR 25, FA 50).
    assert!((fa - 50.0).abs() < 1e-12);
    assert!((threshold - 0.54).abs() < 1e-12);
    let (fa50, _) = compute_fa_at_fr(&set, 50.0).unwrap();
    assert_eq!(fa50, brute_force_fa(&entries, 50.0));
}

#[test]
fn perfect_separation() {
    let set = ScoredSet::new(vec![(0.9, true), (0.8, true), (0.2, false), (0.1, false)]);
    assert_eq!(compute_eer(&set).unwrap(), 0.0);
    assert_eq!(compute_fa_at_fr(&set, 10.0).unwrap().0, 0.0);
}

#[test]
fn random_classifier_anchors() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut entries = Vec::new();
    for _ in 0..10_000 {
        entries.push((rng.random::<f64>(), true));
        entries.push((rng.random::<f64>(), false));
    }
    let set = ScoredSet::new(entries);
    let eer = compute_eer(&set).unwrap();
    let fa = compute_fa_at_fr(&set, 10.0).unwrap().0;
    assert!((eer - 50.0).abs() <= 3.0, "EER {eer}");
    assert!((fa - 90.0).abs() <= 3.0, "FA {fa}");
}

#[test]
fn single_class_is_an_error() {
    let set = ScoredSet::new(vec![(0.1, true), (0.2, true)]);
    assert!(compute_eer(&set).is_err());
    assert!(compute_fa_at_fr(&set, 10.0).is_err());
    assert!(compute_eer(&ScoredSet::new(vec![(f64::NAN, true), (0.2, false)])).is_err());
}

#[test]
fn ties_count_as_accepted() {
    let set = ScoredSet::new(vec![(0.5, true), (0.5, false)]);
    let pts = det_points(&set).unwrap();
    assert_eq!((pts[0].fr, pts[0].fa), (0.0, 100.0));
    assert_eq!((pts[1].fr, pts[1].fa), (100.0, 0.0));
}

#[test]
fn report_formats() {
    let set = ScoredSet::new(vec![(0.9, true), (0.8, true), (0.2, false), (0.1, false)]);
    let r = EvalReport::evaluate("toy", &set).unwrap();
    assert_eq!(r.summary_line(), "EER 0.00, FA@10%FR 0.00");
    let csv = r.det_csv();
    assert!(csv.starts_with("threshold,FR%,FA%\n"));
    assert_eq!(csv.lines().count(), 1 + 5);
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["n_directed"], 2);
    assert!(r.to_text().contains("EER [%]: 0.00"));
}

fn arb_set() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..60).prop_map(|mut v| {
        v[0].1 = true;
        v[1].1 = false;
        v
    })
}

proptest! {
    #[test]
    fn det_curve_is_monotone(entries in arb_set()) {
        let pts = det_points(&ScoredSet::new(entries)).unwrap();
        for w in pts.windows(2) {
            prop_assert!(w[1].threshold > w[0].threshold);
            prop_assert!(w[1].fa <= w[0].fa);
            prop_assert!(w[1].fr >= w[0].fr);
        }
    }

    #[test]
    fn metrics_in_range_and_match_oracle(entries in arb_set()) {
        let set = ScoredSet::new(entries.clone());
        let eer = compute_eer(&set).unwrap();
        let fa = compute_fa_at_fr(&set, 10.0).unwrap().0;
        prop_assert!((0.0..=100.0).contains(&eer));
        prop_assert!((0.0..=100.0).contains(&fa));
        prop_assert_eq!(eer, brute_force_eer(&entries));
        prop_assert_eq!(fa, brute_force_fa(&entries, 10.0));
    }

    #[test]
    fn strictly_increasing_transform_keeps_metrics(entries in arb_set()) {
        let set = ScoredSet::new(entries.clone());
        let mapped = ScoredSet::new(entries.iter().map(|(s, l)| ((3.0 * s).exp() - 7.0, *l)).collect());
        prop_assert_eq!(compute_eer(&set).unwrap(), compute_eer(&mapped).unwrap());
        prop_assert_eq!(compute_fa_at_fr(&set, 10.0).unwrap().0, compute_fa_at_fr(&mapped, 10.0).unwrap().0);
    }

    #[test]
    fn negating_scores_and_swapping_labels_keeps_eer(
        scores in prop::collection::hash_set(0u32..1_000_000, 2..60),
        labels in prop::collection::vec(any::<bool>(), 60),
    ) {
        let mut entries: Vec<(f64, bool)> = scores.into_iter().zip(labels).map(|(s, l)| (f64::from(s), l)).collect();
        entries[0].1 = true;
        entries[1].1 = false;
        let flipped: Vec<(f64, bool)> = entries.iter().map(|(s, l)| (-s, !l)).collect();
        let a = compute_eer(&ScoredSet::new(entries)).unwrap();
        let b = compute_eer(&ScoredSet::new(flipped)).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }
}
