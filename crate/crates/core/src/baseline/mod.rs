//! JPEG baseline with ground-truth plate localization: every resolution ×
//! quality pair, its mean bytes and the OCR accuracy it still allows.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::char_accuracy;
use crate::geometry::expand_margin;
use crate::orchestrator::ocr_plate;
use crate::provider::ImageStore;
use crate::raster::{
    crop, decode, encode, resize_longest_edge, Encoding, EncodingKind, ImageBuffer,
};
use crate::synth::{Annotation, ObjectKind};
use crate::{BBox, Frame};

pub const DEFAULT_RESOLUTIONS: [u32; 6] = [500, 1000, 1500, 2000, 3000, 4000];
pub const DEFAULT_QUALITIES: [u8; 8] = [1, 5, 10, 15, 20, 25, 50, 75];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub resolutions: Vec<u32>,
    pub qualities: Vec<u8>,
    /// Same plate padding the cascades use, clamped to the car.
    pub ocr_padding: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            resolutions: DEFAULT_RESOLUTIONS.to_vec(),
            qualities: DEFAULT_QUALITIES.to_vec(),
            ocr_padding: 0.15,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolutions.is_empty() || self.qualities.is_empty() {
            return Err(Error::Config(
                "baseline grid needs resolutions and qualities".into(),
            ));
        }
        if self.resolutions.contains(&0) {
            return Err(Error::Config("resolution 0".into()));
        }
        if let Some(q) = self.qualities.iter().find(|q| !(1..=100).contains(*q)) {
            return Err(Error::Config(format!("JPEG quality {q} outside 1..=100")));
        }
        if !(0.0..=1.0).contains(&self.ocr_padding) {
            return Err(Error::Config("ocr_padding outside [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub resolution: u32,
    pub quality: u8,
    pub images: usize,
    pub plates: usize,
    pub mean_bytes: f64,
    pub char_accuracy: f64,
}

impl GridPoint {
    pub fn label(&self) -> String {
        format!("jpeg_r{}_q{}", self.resolution, self.quality)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub points: Vec<GridPoint>,
    /// Images left out because a plate had no text.
    pub skipped_images: usize,
}

impl GridOutcome {
    pub fn point(&self, resolution: u32, quality: u8) -> Option<&GridPoint> {
        self.points
            .iter()
            .find(|p| p.resolution == resolution && p.quality == quality)
    }

    pub fn best_accuracy(&self) -> Option<&GridPoint> {
        self.points
            .iter()
            .max_by(|a, b| a.char_accuracy.total_cmp(&b.char_accuracy))
    }
}

struct Target {
    text: String,
    region: BBox,
}

/// Padded plate regions for one image, or `None` if a plate lacks text.
fn targets(anns: &[&Annotation], padding: f64, extent: &BBox) -> Result<Option<Vec<Target>>> {
    let cars: HashMap<&str, &BBox> = anns
        .iter()
        .filter(|a| a.object_kind == ObjectKind::Car)
        .map(|a| (a.id.as_str(), &a.bbox))
        .collect();
    let mut out = Vec::new();
    for a in anns.iter().filter(|a| a.object_kind == ObjectKind::Plate) {
        let Some(text) = a.text.clone() else {
            return Ok(None);
        };
        let container = a
            .parent_id
            .as_deref()
            .and_then(|p| cars.get(p).copied())
            .unwrap_or(extent);
        let region = expand_margin(&a.bbox, padding, container)?;
        out.push(Target {
            text,
            region: region.bbox,
        });
    }
    Ok(Some(out))
}

/// Per (r, q): encoded bytes and summed plate accuracy for one image.
fn image_grid(
    img: &ImageBuffer,
    targets: &[Target],
    cfg: &BaselineConfig,
) -> Result<Vec<(u64, f64)>> {
    let mut out = Vec::with_capacity(cfg.resolutions.len() * cfg.qualities.len());
    for &r in &cfg.resolutions {
        let small = resize_longest_edge(img, r);
        let frame = Frame::new(0.0, 0.0, small.long_edge() as f64 / img.long_edge() as f64);
        for &q in &cfg.qualities {
            let bytes = encode(&small, Encoding::Jpeg(q))?;
            let seen = decode(&bytes, EncodingKind::Jpeg)?;
            let mut acc = 0.0;
            for t in targets {
                let read = crop(&seen, &frame.from_parent(&t.region))
                    .map(|c| ocr_plate(&c).text)
                    .unwrap_or_default();
                acc += char_accuracy(&read, &t.text);
            }
            out.push((bytes.len() as u64, acc));
        }
    }
    Ok(out)
}

/// One image's share of the grid: plate count and, per (r, q) in config
/// order, encoded bytes and summed plate accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub plates: usize,
    pub cells: Vec<(u64, f64)>,
}

/// Grid cells for one stored image. `None` when a plate has no text.
pub fn grid_for_image(
    store: &dyn ImageStore,
    image_id: &str,
    annotations: &[&Annotation],
    cfg: &BaselineConfig,
) -> Result<Option<ImageGrid>> {
    let (w, h) = store.dims(image_id)?;
    let extent = BBox::new(0.0, 0.0, w as f64, h as f64);
    let Some(targets) = targets(annotations, cfg.ocr_padding, &extent)? else {
        log::warn!("{image_id}: plate without text, skipped");
        return Ok(None);
    };
    let img = store.load(image_id)?;
    Ok(Some(ImageGrid {
        plates: targets.len(),
        cells: image_grid(&img, &targets, cfg)?,
    }))
}

/// Corpus means from per-image cells, summed in the given order.
pub fn merge_grid(cfg: &BaselineConfig, per_image: &[Option<ImageGrid>]) -> Result<GridOutcome> {
    let cells = cfg.resolutions.len() * cfg.qualities.len();
    let (mut images, mut plates) = (0usize, 0usize);
    let mut bytes = vec![0u64; cells];
    let mut acc = vec![0.0; cells];
    for g in per_image.iter().flatten() {
        if g.cells.len() != cells {
            return Err(Error::Config(
                "image grid does not match the configuration".into(),
            ));
        }
        images += 1;
        plates += g.plates;
        for (i, (b, a)) in g.cells.iter().enumerate() {
            bytes[i] += b;
            acc[i] += a;
        }
    }
    if images == 0 {
        return Err(Error::Corpus("no usable images for the JPEG grid".into()));
    }
    let mut points = Vec::with_capacity(cells);
    for (ri, &r) in cfg.resolutions.iter().enumerate() {
        for (qi, &q) in cfg.qualities.iter().enumerate() {
            let i = ri * cfg.qualities.len() + qi;
            points.push(GridPoint {
                resolution: r,
                quality: q,
                images,
                plates,
                mean_bytes: bytes[i] as f64 / images as f64,
                char_accuracy: if plates == 0 {
                    0.0
                } else {
                    acc[i] / plates as f64
                },
            });
        }
    }
    Ok(GridOutcome {
        points,
        skipped_images: per_image.len() - images,
    })
}

/// Encodes every store image at every grid point and reads the
/// ground-truth plates back out of the decoded pixels.
pub fn run_jpeg_grid(
    store: &dyn ImageStore,
    annotations: &[Annotation],
    cfg: &BaselineConfig,
) -> Result<GridOutcome> {
    cfg.validate()?;
    let mut by_image: HashMap<&str, Vec<&Annotation>> = HashMap::new();
    for a in annotations {
        by_image.entry(a.image_id.as_str()).or_default().push(a);
    }
    let per_image: Vec<Option<ImageGrid>> = store
        .ids()
        .par_iter()
        .map(|id| {
            let anns = by_image
                .get(id.as_str())
                .map(Vec::as_slice)
                .unwrap_or_default();
            grid_for_image(store, id, anns, cfg)
        })
        .collect::<Result<_>>()?;
    merge_grid(cfg, &per_image)
}

pub fn write_grid_csv(points: &[GridPoint], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "resolution",
        "quality",
        "images",
        "plates",
        "mean_bytes",
        "char_accuracy",
    ])?;
    for p in points {
        w.write_record([
            p.resolution.to_string(),
            p.quality.to_string(),
            p.images.to_string(),
            p.plates.to_string(),
            format!("{:.1}", p.mean_bytes),
            format!("{:.6}", p.char_accuracy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A cascade run placed on the cost/accuracy plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub label: String,
    pub mean_cost_bytes: f64,
    pub char_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub label: String,
    pub mean_cost_bytes: f64,
    pub log10_megabytes: f64,
    pub char_accuracy: f64,
}

/// Grid points followed by the cascade points, cost in log10 megabytes.
pub fn frontier(grid: &[GridPoint], cascades: &[SummaryPoint]) -> Vec<FrontierRow> {
    let row = |label: String, bytes: f64, acc: f64| FrontierRow {
        label,
        mean_cost_bytes: bytes,
        log10_megabytes: (bytes / 1e6).log10(),
        char_accuracy: acc,
    };
    grid.iter()
        .map(|p| row(p.label(), p.mean_bytes, p.char_accuracy))
        .chain(
            cascades
                .iter()
                .map(|c| row(c.label.clone(), c.mean_cost_bytes, c.char_accuracy)),
        )
        .collect()
}

pub fn write_frontier_csv(rows: &[FrontierRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label",
        "mean_cost_bytes",
        "log10_megabytes",
        "char_accuracy",
    ])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            format!("{:.1}", r.mean_cost_bytes),
            format!("{:.6}", r.log10_megabytes),
            format!("{:.6}", r.char_accuracy),
        ])?;
    }
    w.flush()?;
    Ok(())
}
