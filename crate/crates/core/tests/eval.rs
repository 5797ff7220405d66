use bandseek::eval::{
    char_accuracy, default_thresholds, evaluate, greedy_match, pr_curve, DEFAULT_IOU,
};
use bandseek::geometry::iou;
use bandseek::orchestrator::{Mode, RecognitionResult, RecognizedObject, ScoredBox};
use bandseek::provider::SessionLedger;
use bandseek::synth::{layout_scene, Annotation, Difficulty, ObjectKind, SceneSpec};
use bandseek::BBox;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn levenshtein_oracle(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + (a[i - 1] != b[j - 1]) as usize;
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Largest one-to-one matching with IoU ≥ `thr`, by exhaustive search.
fn max_matching(preds: &[BBox], gts: &[BBox], thr: f64) -> usize {
    fn go(p: usize, used: u32, preds: &[BBox], gts: &[BBox], thr: f64) -> usize {
        if p == preds.len() {
            return 0;
        }
        let mut best = go(p + 1, used, preds, gts, thr);
        for (g, gt) in gts.iter().enumerate() {
            if used & (1 << g) == 0 && iou(&preds[p], gt) >= thr {
                best = best.max(1 + go(p + 1, used | (1 << g), preds, gts, thr));
            }
        }
        best
    }
    go(0, 0, preds, gts, thr)
}

fn arb_box() -> impl Strategy<Value = BBox> {
    (0u8..20, 0u8..20, 1u8..10, 1u8..10)
        .prop_map(|(x, y, w, h)| BBox::new(x as f64, y as f64, w as f64, h as f64))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn char_accuracy_matches_edit_distance(a in "[A-Z0-9]{0,8}", b in "[A-Z0-9]{0,8}") {
        let longest = a.len().max(b.len());
        let want = if longest == 0 { 1.0 } else { 1.0 - levenshtein_oracle(&a, &b) as f64 / longest as f64 };
        prop_assert!((char_accuracy(&a, &b) - want).abs() < 1e-12);
        prop_assert_eq!(char_accuracy(&a, &b), char_accuracy(&b, &a));
    }

    #[test]
    fn greedy_is_a_valid_maximal_matching(
        preds in prop::collection::vec((arb_box(), 0u8..10), 0..7),
        gts in prop::collection::vec(arb_box(), 0..7),
        thr in prop::sample::select(vec![0.1, 0.3, 0.5]),
    ) {
        let preds: Vec<(BBox, f64)> = preds.into_iter().map(|(b, s)| (b, s as f64 / 10.0)).collect();
        let assign = greedy_match(&preds, &gts, thr);
        let mut used = vec![false; gts.len()];
        for (p, g) in assign.iter().enumerate() {
            if let Some(g) = *g {
                prop_assert!(!used[g]);
                used[g] = true;
                prop_assert!(iou(&preds[p].0, &gts[g]) >= thr);
            }
        }
        // maximal: no unmatched pair could still be added
        for (p, g) in assign.iter().enumerate() {
            if g.is_none() {
                prop_assert!((0..gts.len()).all(|g| used[g] || iou(&preds[p].0, &gts[g]) < thr));
            }
        }
        let got = assign.iter().flatten().count();
        let best = max_matching(&preds.iter().map(|p| p.0).collect::<Vec<_>>(), &gts, thr);
        prop_assert!(2 * got >= best);
    }
}

/// Detections for a real scene layout: each plate seen with jitter or
/// missed, plus a few false positives in empty corners.
fn noisy_results(
    indices: std::ops::Range<u32>,
    seed: u64,
) -> (Vec<RecognitionResult>, Vec<Annotation>) {
    let spec = SceneSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut results, mut anns) = (Vec::new(), Vec::new());
    for i in indices {
        let layout = layout_scene(&spec, i).unwrap();
        let a = layout.annotations();
        let mut objects = Vec::new();
        for p in a.iter().filter(|a| a.object_kind == ObjectKind::Plate) {
            if rng.random_bool(0.2) {
                continue;
            }
            let mut j = |v: f64, s: f64| v + rng.random_range(-0.15..0.15) * s;
            let b = p.bbox;
            let seen = BBox::new(j(b.x, b.w), j(b.y, b.h), b.w, b.h);
            let mut text: Vec<char> = p.text.clone().unwrap().chars().collect();
            if rng.random_bool(0.4) {
                let k = rng.random_range(0..text.len());
                text[k] = if text[k] == 'Q' { 'O' } else { 'Q' };
            }
            objects.push(RecognizedObject {
                car: None,
                plate: Some(ScoredBox {
                    bbox: seen,
                    score: rng.random_range(0.3..1.0),
                }),
                text: Some(text.into_iter().collect()),
                char_scores: vec![],
            });
        }
        for k in 0..rng.random_range(0..3) {
            objects.push(RecognizedObject {
                car: None,
                plate: Some(ScoredBox {
                    bbox: BBox::new(2.0 + 30.0 * k as f64, 2.0, 20.0, 5.0),
                    score: 0.35,
                }),
                text: Some("ZZZZZZ".into()),
                char_scores: vec![],
            });
        }
        results.push(RecognitionResult {
            image_id: layout.image_id(),
            mode: Mode::SingleStage,
            image_width: spec.width,
            image_height: spec.height,
            objects,
            ledger: SessionLedger::default(),
        });
        anns.extend(a);
    }
    (results, anns)
}

#[test]
fn greedy_equals_optimal_on_realistic_scenes() {
    let (results, anns) = noisy_results(0..200, 1);
    for r in &results {
        let preds: Vec<(BBox, f64)> = r
            .objects
            .iter()
            .filter_map(|o| o.plate)
            .map(|p| (p.bbox, p.score))
            .collect();
        let gts: Vec<BBox> = anns
            .iter()
            .filter(|a| a.image_id == r.image_id && a.object_kind == ObjectKind::Plate)
            .map(|a| a.bbox)
            .collect();
        assert!(preds.len() <= 10 && gts.len() <= 10);
        let got = greedy_match(&preds, &gts, DEFAULT_IOU)
            .iter()
            .flatten()
            .count();
        let best = max_matching(
            &preds.iter().map(|p| p.0).collect::<Vec<_>>(),
            &gts,
            DEFAULT_IOU,
        );
        assert_eq!(got, best, "{}", r.image_id);
    }
}

#[test]
fn tier_metrics_match_an_independent_count() {
    let (results, anns) = noisy_results(0..120, 2);
    let report = evaluate(&results, &anns, DEFAULT_IOU);
    // plates are disjoint and each has at most one nearby detection, so a
    // plate is found iff some detection overlaps it at IoU ≥ 0.5
    let mut want = [(0usize, 0usize, 0.0f64); 4];
    for a in anns.iter().filter(|a| a.object_kind == ObjectKind::Plate) {
        let r = results.iter().find(|r| r.image_id == a.image_id).unwrap();
        let hit = r
            .objects
            .iter()
            .find(|o| iou(&o.plate.unwrap().bbox, &a.bbox) >= 0.5)
            .map(|o| char_accuracy(o.text.as_deref().unwrap(), a.text.as_deref().unwrap()));
        let t = Difficulty::ALL
            .iter()
            .position(|d| *d == a.difficulty)
            .unwrap();
        for k in [t, 3] {
            want[k].0 += 1;
            want[k].1 += hit.is_some() as usize;
            want[k].2 += hit.unwrap_or(0.0);
        }
    }
    for (k, name) in ["Easy", "Medium", "Hard", "overall"].iter().enumerate() {
        let m = report.tier(name).unwrap();
        let (n, found, chars) = want[k];
        assert_eq!(m.plates, n, "{name}");
        assert_eq!(m.car_recall, None);
        if n > 0 {
            assert!(
                (m.plate_recall.unwrap() - found as f64 / n as f64).abs() < 1e-12,
                "{name}"
            );
            assert!(
                (m.char_accuracy.unwrap() - chars / n as f64).abs() < 1e-12,
                "{name}"
            );
        }
    }
    let dets: usize = results.iter().map(|r| r.objects.len()).sum();
    assert_eq!(report.plate_detections, dets);
    assert!((report.plate_precision - want[3].1 as f64 / dets as f64).abs() < 1e-12);
}

#[test]
fn perfect_detector_has_unit_precision_and_area() {
    let (mut results, anns) = noisy_results(0..30, 3);
    for r in &mut results {
        r.objects = anns
            .iter()
            .filter(|a| a.image_id == r.image_id && a.object_kind == ObjectKind::Plate)
            .map(|a| RecognizedObject {
                car: None,
                plate: Some(ScoredBox {
                    bbox: a.bbox,
                    score: 0.9,
                }),
                text: a.text.clone(),
                char_scores: vec![],
            })
            .collect();
    }
    let curve = pr_curve(
        "perfect",
        &results,
        &anns,
        &default_thresholds(),
        DEFAULT_IOU,
    );
    for p in &curve.points {
        assert_eq!(p.precision, 1.0);
        assert_eq!(p.recall, if p.threshold <= 0.9 { 1.0 } else { 0.0 });
        assert_eq!(p.no_detections, p.threshold > 0.9);
    }
    assert!((curve.auc - 1.0).abs() < 1e-12);
    let report = evaluate(&results, &anns, DEFAULT_IOU);
    assert_eq!(report.overall().char_accuracy, Some(1.0));
    assert_eq!(report.plate_precision, 1.0);
}

#[test]
fn recall_falls_and_detections_shrink_as_threshold_rises() {
    let (results, anns) = noisy_results(0..60, 4);
    let curve = pr_curve("noisy", &results, &anns, &default_thresholds(), DEFAULT_IOU);
    assert_eq!(curve.points.len(), 19);
    for w in curve.points.windows(2) {
        assert!(w[1].recall <= w[0].recall);
        assert!(w[1].detections <= w[0].detections);
        assert!(w[1].matched <= w[0].matched);
    }
    assert!(curve.auc > 0.0 && curve.auc <= 1.0);
}
