//! Reference implementations and property checks shared by the geometry
//! tests and the acceptance harness.
#![allow(dead_code)]

use bandseek::geometry::{self, expand_margin, nms, smooth_l1};
use bandseek::provider::{level_cost, CostMode, LedgerEntry, RequestKind, SessionLedger};
use bandseek::raster::EncodingKind;
use bandseek::{BBox, Detection, Frame};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::Rng;

pub fn ref_iou(a: &BBox, b: &BBox) -> f64 {
    let (ax1, ay1) = (a.x + a.w, a.y + a.h);
    let (bx1, by1) = (b.x + b.w, b.y + b.h);
    let iw = (ax1.min(bx1) - a.x.max(b.x)).max(0.0);
    let ih = (ay1.min(by1) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.w * a.h + b.w * b.h - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// The greedy result is the only subset that (a) has no same-class pair at
/// or above the threshold and (b) for every excluded detection contains a
/// higher-ranked same-class detection overlapping it at or above the
/// threshold. Enumerates all subsets and returns that one, in rank order.
pub fn brute_force_nms(dets: &[Detection], thr: f64) -> Vec<usize> {
    let n = dets.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| geometry::rank(&dets[a], &dets[b]));
    let mut pos = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        pos[i] = r;
    }
    let clash = |i: usize, j: usize| {
        dets[i].class_id == dets[j].class_id && ref_iou(&dets[i].bbox, &dets[j].bbox) >= thr
    };
    let mut found = Vec::new();
    for mask in 0u32..(1 << n) {
        let inside = |i: usize| mask & (1 << i) != 0;
        let independent =
            (0..n).all(|i| (0..n).all(|j| i == j || !(inside(i) && inside(j) && clash(i, j))));
        let covered = (0..n)
            .filter(|&i| !inside(i))
            .all(|i| (0..n).any(|j| inside(j) && pos[j] < pos[i] && clash(i, j)));
        if independent && covered {
            found.push(mask);
        }
    }
    assert_eq!(found.len(), 1, "greedy fixpoint must be unique");
    let mut kept: Vec<usize> = (0..n).filter(|&i| found[0] & (1 << i) != 0).collect();
    kept.sort_by_key(|&i| pos[i]);
    kept
}

pub fn arb_grid_box() -> impl Strategy<Value = BBox> {
    // coarse grid so that exact overlaps and ties show up
    (0u8..12, 0u8..12, 1u8..8, 1u8..8)
        .prop_map(|(x, y, w, h)| BBox::new(x as f64, y as f64, w as f64, h as f64))
}

pub fn arb_det() -> impl Strategy<Value = Detection> {
    (arb_grid_box(), 1u32..3, 0u8..6).prop_map(|(b, c, s)| Detection::new(b, c, s as f64 / 5.0))
}

pub fn arb_nms_input() -> impl Strategy<Value = (Vec<Detection>, f64)> {
    (
        prop::collection::vec(arb_det(), 0..=8),
        prop::sample::select(vec![0.0, 0.1, 0.3, 0.5, 0.7, 1.0]),
    )
}

pub fn arb_frame() -> impl Strategy<Value = Frame> {
    (-5e3f64..5e3, -5e3f64..5e3, 1e-3f64..1e2).prop_map(|(x, y, s)| Frame::new(x, y, s))
}

pub fn arb_real_box() -> impl Strategy<Value = BBox> {
    (-1e3f64..1e4, -1e3f64..1e4, 0.0f64..5e3, 0.0f64..5e3)
        .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h))
}

pub fn arb_margin_input() -> impl Strategy<Value = (BBox, BBox, f64, f64)> {
    (arb_real_box(), arb_real_box(), 0.0f64..=1.0, 0.0f64..=1.0)
}

fn close(a: &BBox, b: &BBox, tol: f64) -> bool {
    a.to_array()
        .iter()
        .zip(b.to_array())
        .all(|(p, q)| (p - q).abs() <= tol * (1.0 + q.abs()))
}

pub fn check_nms((dets, thr): (Vec<Detection>, f64)) -> Result<(), TestCaseError> {
    let got = nms(&dets, thr);
    let want: Vec<Detection> = brute_force_nms(&dets, thr)
        .into_iter()
        .map(|i| dets[i].clone())
        .collect();
    prop_assert_eq!(got, want);
    Ok(())
}

pub fn check_frame_round_trip((f, b): (Frame, BBox)) -> Result<(), TestCaseError> {
    prop_assert!(close(&f.from_parent(&f.to_parent(&b)), &b, 1e-9));
    prop_assert!(close(&f.to_parent(&f.from_parent(&b)), &b, 1e-9));
    Ok(())
}

pub fn check_smooth_l1(x: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(smooth_l1(x), smooth_l1(-x));
    let h = 1e-7;
    prop_assert!((smooth_l1(x + h) - smooth_l1(x)).abs() <= h * (x.abs() + h).max(1.0) + 1e-15);
    // between zero, the quadratic and the absolute value
    prop_assert!(smooth_l1(x) <= 0.5 * x * x + 1e-15);
    prop_assert!(smooth_l1(x) <= x.abs());
    prop_assert!(smooth_l1(x) >= 0.0);
    Ok(())
}

pub fn check_margin((b, c, m1, m2): (BBox, BBox, f64, f64)) -> Result<(), TestCaseError> {
    let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
    let small = expand_margin(&b, lo, &c).unwrap();
    let big = expand_margin(&b, hi, &c).unwrap();
    for r in [&small, &big] {
        prop_assert!(c.contains_eps(&r.bbox, 1e-9));
    }
    if !small.empty {
        prop_assert!(!big.empty);
        prop_assert!(big.bbox.contains_eps(&small.bbox, 1e-9));
    }
    if c.contains(&b) && b.w > 0.0 && b.h > 0.0 {
        prop_assert!(!small.empty);
        prop_assert!(small.bbox.contains_eps(&b, 1e-9));
    }
    Ok(())
}

fn raw8_entry(stage: String, w: u64, h: u64, overhead: u64) -> LedgerEntry {
    LedgerEntry {
        stage,
        kind: RequestKind::Region,
        image_id: "x".into(),
        width: w as u32,
        height: h as u32,
        encoding: EncodingKind::Raw8,
        pixels_sent: w * h,
        payload_bytes: 12 + 3 * w * h,
        wire_bytes: 12 + 3 * w * h + overhead,
    }
}

/// Random RAW8 ledger: pixels_eq1 must equal ρ·Σ w·h, and at ρ = 3 the
/// RAW8 payload bytes minus headers. Returns the failure, if any.
pub fn check_random_ledger(rng: &mut impl Rng) -> Result<(), String> {
    let rho = [1.0, 3.0, rng.random_range(0.5..4.0)][rng.random_range(0..3)];
    let mut l = SessionLedger::new(rho);
    for i in 0..rng.random_range(0..40) {
        let (w, h) = (rng.random_range(1..5000u64), rng.random_range(1..5000u64));
        l.push(raw8_entry(
            format!("s{}", i % 3),
            w,
            h,
            rng.random_range(40..120),
        ));
    }
    let pixels: u128 = l
        .entries
        .iter()
        .map(|e| e.width as u128 * e.height as u128)
        .sum();
    // totals stay far below 2^53, so the f64 product is exact
    if l.cost(CostMode::PixelsEq1) != l.rho * pixels as f64 {
        return Err(format!(
            "pixels_eq1 {} != {} x {pixels}",
            l.cost(CostMode::PixelsEq1),
            l.rho
        ));
    }
    if l.rho == 3.0 {
        let raw: u128 = l
            .entries
            .iter()
            .map(|e| (e.payload_bytes - 12) as u128)
            .sum();
        if l.cost(CostMode::PixelsEq1) != raw as f64 {
            return Err("RAW8 payload disagrees with pixels_eq1".into());
        }
    }
    let wire: u64 = l.entries.iter().map(|e| e.wire_bytes).sum();
    if l.cost(CostMode::WireBytes) != wire as f64 {
        return Err("wire_bytes disagrees with frame sum".into());
    }
    Ok(())
}

/// Ledger built from equal-sized levels: cost must equal ρ Σ N_i n_i m_i.
pub fn check_level_reduction(rng: &mut impl Rng) -> Result<(), String> {
    let rho = rng.random_range(0.5..4.0f64).round();
    let levels: Vec<(u64, u64, u64)> = (0..rng.random_range(1..5))
        .map(|_| {
            (
                rng.random_range(0..6),
                rng.random_range(1..3000),
                rng.random_range(1..3000),
            )
        })
        .collect();
    let mut l = SessionLedger::new(rho);
    for (i, &(n, w, h)) in levels.iter().enumerate() {
        for _ in 0..n {
            l.push(raw8_entry(format!("level{i}"), w, h, 88));
        }
    }
    let expected = rho * levels.iter().map(|&(n, w, h)| n * w * h).sum::<u64>() as f64;
    if level_cost(rho, &levels) != expected || l.cost(CostMode::PixelsEq1) != expected {
        return Err(format!("levels {levels:?}: expected {expected}"));
    }
    Ok(())
}
