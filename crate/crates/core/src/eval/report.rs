use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::metrics::{char_accuracy, greedy_match, matched_gts, ratio};
use crate::orchestrator::{Mode, RecognitionResult};
use crate::provider::CostMode;
use crate::synth::{Annotation, Difficulty, ObjectKind};
use crate::BBox;

pub const DEFAULT_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierMetrics {
    /// "Easy", "Medium", "Hard" or "overall".
    pub tier: String,
    pub cars: usize,
    pub plates: usize,
    /// `None` for runs that report no car boxes, or when there are no cars.
    pub car_recall: Option<f64>,
    pub plate_recall: Option<f64>,
    /// Mean over ground-truth plates; unmatched plates count 0.
    pub char_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Option<Mode>,
    pub images: usize,
    pub iou_threshold: f64,
    pub tiers: Vec<TierMetrics>,
    pub car_detections: usize,
    pub plate_detections: usize,
    /// 1 when nothing was detected; see `no_plate_detections`.
    pub plate_precision: f64,
    pub no_plate_detections: bool,
    pub car_precision: Option<f64>,
    /// Transmitted pixels over full-resolution pixels, averaged per image.
    pub mean_pixels_fraction: f64,
    pub mean_pixels: f64,
    pub rho: f64,
    pub mean_cost_pixels_eq1: f64,
    pub mean_cost_wire_bytes: f64,
}

impl EvalReport {
    pub fn tier(&self, name: &str) -> Option<&TierMetrics> {
        self.tiers.iter().find(|t| t.tier == name)
    }

    pub fn overall(&self) -> &TierMetrics {
        self.tier("overall")
            .expect("report always has an overall row")
    }

    pub fn mean_cost(&self, mode: CostMode) -> f64 {
        match mode {
            CostMode::PixelsEq1 => self.mean_cost_pixels_eq1,
            CostMode::WireBytes => self.mean_cost_wire_bytes,
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    cars: usize,
    cars_found: usize,
    plates: usize,
    plates_found: usize,
    chars: f64,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.cars += o.cars;
        self.cars_found += o.cars_found;
        self.plates += o.plates;
        self.plates_found += o.plates_found;
        self.chars += o.chars;
    }

    fn metrics(&self, tier: &str, has_cars: bool) -> TierMetrics {
        TierMetrics {
            tier: tier.into(),
            cars: self.cars,
            plates: self.plates,
            car_recall: if has_cars {
                ratio(self.cars_found, self.cars)
            } else {
                None
            },
            plate_recall: ratio(self.plates_found, self.plates),
            char_accuracy: (self.plates > 0).then(|| self.chars / self.plates as f64),
        }
    }
}

fn tier_index(d: Difficulty) -> usize {
    Difficulty::ALL
        .iter()
        .position(|t| *t == d)
        .expect("tier listed")
}

/// Scores `results` against ground truth. Only images that have a result
/// are counted.
pub fn evaluate(
    results: &[RecognitionResult],
    annotations: &[Annotation],
    iou_threshold: f64,
) -> EvalReport {
    let mut by_image: HashMap<&str, Vec<&Annotation>> = HashMap::new();
    for a in annotations {
        by_image.entry(a.image_id.as_str()).or_default().push(a);
    }
    let mut tiers = [Tally::default(); 3];
    let (mut car_dets, mut plate_dets, mut cars_matched, mut plates_matched) = (0, 0, 0, 0);
    let mut has_cars = false;
    let (mut frac, mut pixels, mut eq1, mut wire) = (0.0, 0.0, 0.0, 0.0);
    let mut rho = None;

    for r in results {
        let gt = by_image
            .get(r.image_id.as_str())
            .map(Vec::as_slice)
            .unwrap_or_default();
        let gt_cars: Vec<&Annotation> = gt
            .iter()
            .copied()
            .filter(|a| a.object_kind == ObjectKind::Car)
            .collect();
        let gt_plates: Vec<&Annotation> = gt
            .iter()
            .copied()
            .filter(|a| a.object_kind == ObjectKind::Plate)
            .collect();

        let cars: Vec<(BBox, f64)> = r
            .objects
            .iter()
            .filter_map(|o| o.car)
            .map(|c| (c.bbox, c.score))
            .collect();
        has_cars |= r.mode != Mode::SingleStage;
        car_dets += cars.len();
        let car_assign = greedy_match(
            &cars,
            &gt_cars.iter().map(|a| a.bbox).collect::<Vec<_>>(),
            iou_threshold,
        );
        cars_matched += car_assign.iter().flatten().count();
        for (g, hit) in matched_gts(&car_assign, gt_cars.len()).iter().enumerate() {
            let t = &mut tiers[tier_index(gt_cars[g].difficulty)];
            t.cars += 1;
            t.cars_found += hit.is_some() as usize;
        }

        let plated: Vec<_> = r.objects.iter().filter(|o| o.plate.is_some()).collect();
        let plates: Vec<(BBox, f64)> = plated
            .iter()
            .map(|o| o.plate.map(|p| (p.bbox, p.score)).unwrap())
            .collect();
        plate_dets += plates.len();
        let plate_assign = greedy_match(
            &plates,
            &gt_plates.iter().map(|a| a.bbox).collect::<Vec<_>>(),
            iou_threshold,
        );
        plates_matched += plate_assign.iter().flatten().count();
        for (g, hit) in matched_gts(&plate_assign, gt_plates.len())
            .iter()
            .enumerate()
        {
            let a = gt_plates[g];
            let t = &mut tiers[tier_index(a.difficulty)];
            t.plates += 1;
            if let Some(p) = hit {
                t.plates_found += 1;
                let read = plated[*p].text.as_deref().unwrap_or("");
                t.chars += char_accuracy(read, a.text.as_deref().unwrap_or(""));
            }
        }

        let full = r.image_width as f64 * r.image_height as f64;
        let sent = r.ledger.total_pixels() as f64;
        frac += if full > 0.0 { sent / full } else { 0.0 };
        pixels += sent;
        eq1 += r.ledger.cost(CostMode::PixelsEq1);
        wire += r.ledger.cost(CostMode::WireBytes);
        rho.get_or_insert(r.ledger.rho);
    }

    let n = results.len().max(1) as f64;
    let mut rows: Vec<TierMetrics> = Difficulty::ALL
        .iter()
        .zip(&tiers)
        .map(|(d, t)| t.metrics(d.as_str(), has_cars))
        .collect();
    let mut all = Tally::default();
    tiers.iter().for_each(|t| all.add(t));
    rows.push(all.metrics("overall", has_cars));

    EvalReport {
        mode: results.first().map(|r| r.mode),
        images: results.len(),
        iou_threshold,
        tiers: rows,
        car_detections: car_dets,
        plate_detections: plate_dets,
        plate_precision: ratio(plates_matched, plate_dets).unwrap_or(1.0),
        no_plate_detections: plate_dets == 0,
        car_precision: if has_cars {
            ratio(cars_matched, car_dets)
        } else {
            None
        },
        mean_pixels_fraction: frac / n,
        mean_pixels: pixels / n,
        rho: rho.unwrap_or(crate::provider::DEFAULT_RHO),
        mean_cost_pixels_eq1: eq1 / n,
        mean_cost_wire_bytes: wire / n,
    }
}
