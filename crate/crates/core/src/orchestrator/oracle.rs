//! Ground-truth driven detector emulating a trained network: objects below a
//! per-tier presented size are missed, boxes and scores are jittered, and
//! car detections carry a plate estimate whose error shrinks with resolution.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::detector::{project_visible, DetectContext, Detector, CLASS_CAR, CLASS_PLATE};
use crate::error::{Error, Result};
use crate::geometry::rank;
use crate::raster::ImageBuffer;
use crate::scalar::clamp;
use crate::synth::{Annotation, Difficulty, ObjectKind};
use crate::{BBox, Detection};

/// Minimum fraction of an object that must be inside the image to be seen.
const MIN_VISIBLE: f64 = 0.5;
/// Box jitter is a normal truncated at this many sigmas.
const JITTER_TRUNCATION: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerTier {
    pub easy: f64,
    pub medium: f64,
    pub hard: f64,
}

impl PerTier {
    pub fn get(&self, d: Difficulty) -> f64 {
        match d {
            Difficulty::Easy => self.easy,
            Difficulty::Medium => self.medium,
            Difficulty::Hard => self.hard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    /// Presented long edge (pixels) below which an object is missed.
    pub min_detectable_px: PerTier,
    /// Box jitter as a fraction of the box dimension.
    pub jitter_sigma: f64,
    pub miss_rate: PerTier,
    /// Expected false positives per detector call.
    pub fp_rate: f64,
    /// Half-width of the uniform score perturbation.
    pub score_noise: f64,
    pub sub_noise_base: f64,
    pub seed: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            min_detectable_px: PerTier {
                easy: 24.0,
                medium: 40.0,
                hard: 64.0,
            },
            jitter_sigma: 0.05,
            miss_rate: PerTier {
                easy: 0.0,
                medium: 0.05,
                hard: 0.15,
            },
            fp_rate: 0.3,
            score_noise: 0.05,
            sub_noise_base: 0.5,
            seed: 0x0ac1e,
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            self.miss_rate.easy,
            self.miss_rate.medium,
            self.miss_rate.hard,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("miss_rate must lie in [0, 1]".into()));
        }
        let non_negative = [
            self.jitter_sigma,
            self.fp_rate,
            self.score_noise,
            self.sub_noise_base,
            self.min_detectable_px.easy,
            self.min_detectable_px.medium,
            self.min_detectable_px.hard,
        ];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(
                "oracle sigmas, rates and sizes must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Confidence of a plate estimate at a given presented plate size.
    pub fn sub_confidence(&self, presented_long_px: f64) -> f64 {
        clamp(
            1.0 - self.sub_noise_base / presented_long_px.max(1.0),
            0.05,
            0.99,
        )
    }
}

/// Deterministic RNG for a named stream.
pub fn keyed_rng(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    };
    seed.to_le_bytes().into_iter().for_each(&mut eat);
    for p in parts {
        eat(0xff);
        p.bytes().for_each(&mut eat);
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn jitter(b: &BBox, sigma: f64, rng: &mut impl Rng) -> BBox {
    let mut n = || normal(rng).clamp(-JITTER_TRUNCATION, JITTER_TRUNCATION) * sigma;
    let (dx, dy, sw, sh) = (n(), n(), n(), n());
    BBox::new(
        b.x + dx * b.w,
        b.y + dy * b.h,
        b.w * (1.0 + sw),
        b.h * (1.0 + sh),
    )
}

/// Plate estimate from ground truth seen at `presented_scale` (presented
/// pixels per source pixel). Returns the estimate in the source frame and
/// its confidence.
pub fn oracle_sub_estimate(
    gt_plate: &BBox,
    presented_scale: f64,
    params: &OracleParams,
    rng: &mut impl Rng,
) -> (BBox, f64) {
    let presented = gt_plate.long_edge() * presented_scale;
    let rel = params.sub_noise_base / presented.max(1.0);
    let (sx, sy) = (rel * gt_plate.w, rel * gt_plate.h);
    let (dx, dy, dw, dh) = (
        normal(rng) * sx,
        normal(rng) * sy,
        normal(rng) * sx,
        normal(rng) * sy,
    );
    let est = BBox::new(
        gt_plate.x + dx,
        gt_plate.y + dy,
        (gt_plate.w + dw).max(0.1 * gt_plate.w),
        (gt_plate.h + dh).max(0.1 * gt_plate.h),
    );
    (est, params.sub_confidence(presented))
}

pub struct OracleDetector {
    params: OracleParams,
    truth: HashMap<String, Vec<Annotation>>,
}

impl OracleDetector {
    pub fn new(
        params: OracleParams,
        annotations: impl IntoIterator<Item = Annotation>,
    ) -> Result<Self> {
        params.validate()?;
        let mut truth: HashMap<String, Vec<Annotation>> = HashMap::new();
        for a in annotations {
            truth.entry(a.image_id.clone()).or_default().push(a);
        }
        Ok(Self { params, truth })
    }

    pub fn params(&self) -> &OracleParams {
        &self.params
    }

    fn false_positives(
        &self,
        img: &ImageBuffer,
        ctx: &DetectContext<'_>,
        class_id: u32,
    ) -> Vec<Detection> {
        if self.params.fp_rate <= 0.0 {
            return Vec::new();
        }
        let class = class_id.to_string();
        // keyed by placement too, so sibling regions get independent draws
        let f = &ctx.frame;
        let place = format!("{:.4},{:.4},{:.6}", f.offset_x, f.offset_y, f.scale);
        let mut rng = keyed_rng(
            self.params.seed,
            &[ctx.image_id, ctx.stage, &class, &place, "fp"],
        );
        let n = Poisson::new(self.params.fp_rate)
            .map(|p| p.sample(&mut rng) as usize)
            .unwrap_or(0);
        let (iw, ih) = (img.width() as f64, img.height() as f64);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let aspect = if class_id == CLASS_PLATE {
                4.7
            } else {
                rng.random_range(1.15..1.45)
            };
            let w = (rng.random_range(0.08..0.4) * iw).max(2.0);
            let h = (w / aspect).min(ih);
            let x = rng.random_range(0.0..=(iw - w).max(0.0));
            let y = rng.random_range(0.0..=(ih - h).max(0.0));
            let bbox = BBox::new(x, y, w.min(iw), h);
            let mut det = Detection::new(bbox, class_id, rng.random_range(0.05..0.5));
            if class_id == CLASS_CAR {
                let pw = bbox.w * rng.random_range(0.15..0.3);
                let est = BBox::new(bbox.x + 0.3 * bbox.w, bbox.y + 0.7 * bbox.h, pw, pw / 4.7);
                det = det.with_sub_estimate(est, rng.random_range(0.05..0.5));
            }
            out.push(det);
        }
        out
    }
}

impl Detector for OracleDetector {
    fn detect(
        &self,
        img: &ImageBuffer,
        ctx: &DetectContext<'_>,
        class_id: u32,
    ) -> Result<Vec<Detection>> {
        let kind = match class_id {
            CLASS_CAR => ObjectKind::Car,
            CLASS_PLATE => ObjectKind::Plate,
            _ => return Ok(Vec::new()),
        };
        let p = &self.params;
        let visible = ctx.visible(img);
        let scale = ctx.frame.scale;
        let anns = self
            .truth
            .get(ctx.image_id)
            .map(Vec::as_slice)
            .unwrap_or_default();
        let mut out = Vec::new();
        for a in anns.iter().filter(|a| a.object_kind == kind) {
            let Some(inside) = a.bbox.intersection(&visible) else {
                continue;
            };
            if inside.area() < MIN_VISIBLE * a.bbox.area() {
                continue;
            }
            let min_px = p.min_detectable_px.get(a.difficulty);
            let presented = a.bbox.long_edge() * scale;
            if presented < min_px {
                continue;
            }
            // Misses are drawn per object, independent of resolution and stage.
            if keyed_rng(p.seed, &[ctx.image_id, &a.id, "miss"]).random::<f64>()
                < p.miss_rate.get(a.difficulty)
            {
                continue;
            }
            let mut rng = keyed_rng(p.seed, &[ctx.image_id, &a.id, ctx.stage, "det"]);
            let jittered = jitter(&a.bbox, p.jitter_sigma, &mut rng);
            let base = clamp(presented / (2.0 * min_px.max(1e-9)), 0.05, 0.99);
            let noise = if p.score_noise > 0.0 {
                rng.random_range(-p.score_noise..=p.score_noise)
            } else {
                0.0
            };
            let score = clamp(base + noise, 0.0, 1.0);
            let Some(local) = project_visible(&jittered, img, &ctx.frame, 0.0) else {
                continue;
            };
            let mut det = Detection::new(local, class_id, score);
            if kind == ObjectKind::Car {
                let plate = anns.iter().find(|c| {
                    c.object_kind == ObjectKind::Plate && c.parent_id.as_deref() == Some(&a.id)
                });
                if let Some(plate) = plate {
                    let (est, conf) = oracle_sub_estimate(&plate.bbox, scale, p, &mut rng);
                    det = det.with_sub_estimate(ctx.frame.from_parent(&est), conf);
                }
            }
            out.push(det);
        }
        out.extend(self.false_positives(img, ctx, class_id));
        out.sort_by(rank);
        Ok(out)
    }
}
