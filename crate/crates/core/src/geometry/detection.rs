use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{iou, BBox};
use crate::scalar::Real;

/// Estimated sub-object location with its confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct SubEstimate<T> {
    #[serde(rename = "box")]
    pub bbox: BBox<T>,
    pub score: T,
}

/// One detector output. Class 0 is background and never emitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct Detection<T> {
    #[serde(rename = "box")]
    pub bbox: BBox<T>,
    pub class_id: u32,
    pub score: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_estimate: Option<SubEstimate<T>>,
}

impl<T: Real> Detection<T> {
    pub fn new(bbox: BBox<T>, class_id: u32, score: T) -> Self {
        Self {
            bbox,
            class_id,
            score,
            sub_estimate: None,
        }
    }

    pub fn with_sub_estimate(mut self, bbox: BBox<T>, score: T) -> Self {
        self.sub_estimate = Some(SubEstimate { bbox, score });
        self
    }
}

/// Descending score, then ascending x, then ascending y.
pub fn rank<T: Real>(a: &Detection<T>, b: &Detection<T>) -> Ordering {
    let key = |v: T| v.to_f64_lossy();
    key(b.score)
        .total_cmp(&key(a.score))
        .then_with(|| key(a.bbox.x).total_cmp(&key(b.bbox.x)))
        .then_with(|| key(a.bbox.y).total_cmp(&key(b.bbox.y)))
}

/// Greedy per-class non-maximum suppression.
///
/// A detection survives iff its IoU with every already kept detection of the
/// same class is below `iou_threshold`. Output is in rank order.
pub fn nms<T: Real>(dets: &[Detection<T>], iou_threshold: T) -> Vec<Detection<T>> {
    let mut order: Vec<&Detection<T>> = dets.iter().collect();
    order.sort_by(|a, b| rank(a, b));
    let mut kept: Vec<Detection<T>> = Vec::with_capacity(order.len());
    for d in order {
        let suppressed = kept
            .iter()
            .any(|k| k.class_id == d.class_id && iou(&k.bbox, &d.bbox) >= iou_threshold);
        if !suppressed {
            kept.push(d.clone());
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: f64, y: f64, w: f64, h: f64, score: f64) -> Detection<f64> {
        Detection::new(BBox::new(x, y, w, h), 1, score)
    }

    #[test]
    fn single_detection_passes_through() {
        let d = vec![det(1.0, 1.0, 4.0, 4.0, 0.4)];
        assert_eq!(nms(&d, 0.5), d);
    }

    #[test]
    fn identical_boxes_keep_best() {
        let d = vec![
            det(0.0, 0.0, 10.0, 10.0, 0.8),
            det(0.0, 0.0, 10.0, 10.0, 0.9),
        ];
        let kept = nms(&d, 0.5);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 0.9);
    }

    #[test]
    fn classes_do_not_suppress_each_other() {
        let mut other = det(0.0, 0.0, 10.0, 10.0, 0.5);
        other.class_id = 2;
        let d = vec![det(0.0, 0.0, 10.0, 10.0, 0.9), other];
        assert_eq!(nms(&d, 0.3).len(), 2);
    }

    #[test]
    fn ties_break_on_position() {
        let d = vec![
            det(5.0, 0.0, 1.0, 1.0, 0.5),
            det(1.0, 3.0, 1.0, 1.0, 0.5),
            det(1.0, 0.0, 1.0, 1.0, 0.5),
        ];
        let kept = nms(&d, 0.5);
        let xy: Vec<(f64, f64)> = kept.iter().map(|k| (k.bbox.x, k.bbox.y)).collect();
        assert_eq!(xy, vec![(1.0, 0.0), (1.0, 3.0), (5.0, 0.0)]);
    }
}
