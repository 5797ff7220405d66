use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::greedy_match;
use crate::error::Result;
use crate::orchestrator::RecognitionResult;
use crate::synth::{Annotation, ObjectKind};
use crate::BBox;

/// 0.05, 0.10, ..., 0.95.
pub fn default_thresholds() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub detections: usize,
    pub matched: usize,
    /// Precision is reported as 1 when nothing passes the threshold.
    pub no_detections: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub label: String,
    pub plates: usize,
    pub points: Vec<PrPoint>,
    pub auc: f64,
}

/// Plate-detection precision/recall of `results` at each score threshold.
/// Results should come from a run whose own plate threshold is at or below
/// the smallest one here.
pub fn pr_curve(
    label: &str,
    results: &[RecognitionResult],
    annotations: &[Annotation],
    thresholds: &[f64],
    iou_threshold: f64,
) -> PrCurve {
    let mut per_image: Vec<(Vec<(BBox, f64)>, Vec<BBox>)> = Vec::with_capacity(results.len());
    for r in results {
        let preds = r
            .objects
            .iter()
            .filter_map(|o| o.plate)
            .map(|p| (p.bbox, p.score))
            .collect();
        let gts = annotations
            .iter()
            .filter(|a| a.image_id == r.image_id && a.object_kind == ObjectKind::Plate)
            .map(|a| a.bbox)
            .collect();
        per_image.push((preds, gts));
    }
    let plates: usize = per_image.iter().map(|(_, g)| g.len()).sum();
    let points = thresholds
        .iter()
        .map(|&t| {
            let (mut detections, mut matched) = (0, 0);
            for (preds, gts) in &per_image {
                let kept: Vec<(BBox, f64)> = preds.iter().copied().filter(|p| p.1 >= t).collect();
                detections += kept.len();
                matched += greedy_match(&kept, gts, iou_threshold)
                    .iter()
                    .flatten()
                    .count();
            }
            PrPoint {
                threshold: t,
                precision: if detections == 0 {
                    1.0
                } else {
                    matched as f64 / detections as f64
                },
                recall: if plates == 0 {
                    0.0
                } else {
                    matched as f64 / plates as f64
                },
                detections,
                matched,
                no_detections: detections == 0,
            }
        })
        .collect::<Vec<_>>();
    PrCurve {
        label: label.into(),
        plates,
        auc: auc(&points),
        points,
    }
}

/// Trapezoidal area under precision over recall, from recall 0 (at the
/// precision of the lowest-recall point) to the highest recall reached.
pub fn auc(points: &[PrPoint]) -> f64 {
    let mut pts: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|p| (p.recall, p.precision, p.threshold))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.2.total_cmp(&a.2)));
    let Some(first) = pts.first() else { return 0.0 };
    let mut area = first.0 * first.1;
    for w in pts.windows(2) {
        area += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0;
    }
    area
}

pub fn write_pr_csv(curves: &[PrCurve], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label",
        "threshold",
        "precision",
        "recall",
        "detections",
        "matched",
    ])?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.label.clone(),
                format!("{:.2}", p.threshold),
                format!("{:.6}", p.precision),
                format!("{:.6}", p.recall),
                p.detections.to_string(),
                p.matched.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
