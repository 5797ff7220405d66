use crate::geometry::iou;
use crate::BBox;

/// `1 − levenshtein / max(len)`, in characters. Two empty strings agree.
pub fn char_accuracy(pred: &str, gt: &str) -> f64 {
    let longest = pred.chars().count().max(gt.chars().count());
    if longest == 0 {
        return 1.0;
    }
    (1.0 - strsim::levenshtein(pred, gt) as f64 / longest as f64).clamp(0.0, 1.0)
}

/// One-to-one greedy matching. Predictions are visited by descending score
/// (ties by index) and take the unmatched ground-truth box they overlap
/// most, if that overlap reaches `iou_threshold`. Returns, per prediction,
/// the index of its ground-truth box.
pub fn greedy_match(preds: &[(BBox, f64)], gts: &[BBox], iou_threshold: f64) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].1.total_cmp(&preds[a].1).then(a.cmp(&b)));
    let mut taken = vec![false; gts.len()];
    let mut out = vec![None; preds.len()];
    for p in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let o = iou(&preds[p].0, gt);
            if o >= iou_threshold && best.is_none_or(|(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            out[p] = Some(g);
        }
    }
    out
}

/// Inverts a prediction → ground truth assignment.
pub fn matched_gts(assignment: &[Option<usize>], n_gts: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; n_gts];
    for (p, g) in assignment.iter().enumerate() {
        if let Some(g) = g {
            out[*g] = Some(p);
        }
    }
    out
}

pub fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// either side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut num, mut dx, mut dy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mx) * (b - my);
        dx += (a - mx) * (a - mx);
        dy += (b - my) * (b - my);
    }
    (dx > 0.0 && dy > 0.0).then(|| num / (dx * dy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}
