//! Connected-component detector for the synthetic scenes: cars are large
//! saturated blobs, plates are bright low-chroma blobs of plate shape.

use super::detector::{DetectContext, Detector, CLASS_CAR, CLASS_PLATE};
use super::vision::{components, Component};
use crate::error::Result;
use crate::geometry::{nms, rank};
use crate::raster::ImageBuffer;
use crate::scalar::clamp;
use crate::{BBox, Detection};

#[derive(Debug, Clone, PartialEq)]
pub struct CcDetector {
    /// Minimum `max(r,g,b) - min(r,g,b)` of car paint.
    pub car_chroma: u8,
    /// Minimum gray level of plate background.
    pub plate_gray: u8,
    pub plate_max_chroma: u8,
    pub min_side_px: usize,
}

impl Default for CcDetector {
    fn default() -> Self {
        Self {
            car_chroma: 50,
            plate_gray: 185,
            plate_max_chroma: 45,
            min_side_px: 4,
        }
    }
}

fn chroma(p: &[u8]) -> u8 {
    p.iter().max().unwrap() - p.iter().min().unwrap()
}

fn to_box(c: &Component) -> BBox {
    BBox::new(
        c.x0 as f64,
        c.y0 as f64,
        c.width() as f64,
        c.height() as f64,
    )
}

impl CcDetector {
    fn cars(&self, img: &ImageBuffer) -> Vec<Detection> {
        let mask: Vec<bool> = img
            .data()
            .chunks_exact(3)
            .map(|p| chroma(p) >= self.car_chroma)
            .collect();
        let (w, h) = (img.width() as usize, img.height() as usize);
        components(&mask, w, h)
            .into_iter()
            .filter(|c| c.width() >= self.min_side_px && c.height() >= self.min_side_px)
            .filter_map(|c| {
                let aspect = c.width() as f64 / c.height() as f64;
                // a car body minus windshield and plate covers ~3/4 of its box
                if !(0.8..=2.5).contains(&aspect) || c.fill() < 0.4 {
                    return None;
                }
                let score = clamp(c.fill() / 0.75, 0.05, 0.99);
                Some(Detection::new(to_box(&c), CLASS_CAR, score))
            })
            .collect()
    }

    fn plates(&self, img: &ImageBuffer) -> Vec<Detection> {
        let gray = img.to_gray();
        let mask: Vec<bool> = img
            .data()
            .chunks_exact(3)
            .zip(&gray)
            .map(|(p, &g)| g >= self.plate_gray && chroma(p) <= self.plate_max_chroma)
            .collect();
        let (w, h) = (img.width() as usize, img.height() as usize);
        components(&mask, w, h)
            .into_iter()
            .filter(|c| c.width() >= self.min_side_px && c.height() >= 2)
            .filter_map(|c| {
                let aspect = c.width() as f64 / c.height() as f64;
                if !(2.5..=8.0).contains(&aspect) || c.fill() < 0.45 {
                    return None;
                }
                let shape = 1.0 - ((aspect - 4.7).abs() / 4.7).min(1.0);
                let score = clamp(0.5 * shape + 0.5 * c.fill(), 0.05, 0.99);
                Some(Detection::new(to_box(&c), CLASS_PLATE, score))
            })
            .collect()
    }
}

impl Detector for CcDetector {
    fn detect(
        &self,
        img: &ImageBuffer,
        _ctx: &DetectContext<'_>,
        class_id: u32,
    ) -> Result<Vec<Detection>> {
        let mut dets = match class_id {
            CLASS_CAR => self.cars(img),
            CLASS_PLATE => self.plates(img),
            _ => Vec::new(),
        };
        dets = nms(&dets, 0.5);
        dets.sort_by(rank);
        Ok(dets)
    }
}
