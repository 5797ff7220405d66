use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::annotation::{Annotation, Difficulty, ObjectKind};
use super::font::{self, GLYPH_H, GLYPH_W};
use crate::error::{Error, Result};
use crate::raster::{ImageBuffer, PixelRect};

/// Attempts allowed for placing all cars of one scene.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// Plate-height thresholds (pixels) separating the difficulty tiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultyRule {
    pub easy_min_px: f64,
    pub medium_min_px: f64,
}

impl Default for DifficultyRule {
    fn default() -> Self {
        Self {
            easy_min_px: 48.0,
            medium_min_px: 24.0,
        }
    }
}

impl DifficultyRule {
    pub fn classify(&self, plate_height_px: f64) -> Difficulty {
        if plate_height_px >= self.easy_min_px {
            Difficulty::Easy
        } else if plate_height_px >= self.medium_min_px {
            Difficulty::Medium
        } else {
            Difficulty::Hard
        }
    }
}

/// Parameters of the synthetic corpus. Ranges are inclusive `(min, max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub cars_per_image: (u32, u32),
    /// Car width in pixels; cars are wider than tall so this is the long edge.
    pub car_long_edge: (u32, u32),
    /// Car width over height.
    pub car_aspect: (f64, f64),
    pub plate_width_fraction: (f64, f64),
    pub plate_aspect: f64,
    pub clutter_count: (u32, u32),
    pub difficulty_rule: DifficultyRule,
    pub text_len: (usize, usize),
    /// Amplitude of the per-pixel sensor grain, in 8-bit levels.
    pub grain: u8,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0x5eed_0001,
            width: 4000,
            height: 3000,
            cars_per_image: (1, 4),
            car_long_edge: (400, 1600),
            car_aspect: (1.15, 1.45),
            plate_width_fraction: (0.15, 0.30),
            plate_aspect: 4.7,
            clutter_count: (5, 20),
            difficulty_rule: DifficultyRule::default(),
            text_len: (6, 7),
            grain: 20,
        }
    }
}

fn check_range<T: PartialOrd + std::fmt::Debug>(name: &str, r: (T, T)) -> Result<()> {
    if r.0 <= r.1 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name}: empty range {r:?}")))
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 64 || self.height < 64 {
            return Err(Error::Config(format!(
                "scene {}x{} smaller than 64 px",
                self.width, self.height
            )));
        }
        check_range("cars_per_image", self.cars_per_image)?;
        check_range("car_long_edge", self.car_long_edge)?;
        check_range("car_aspect", self.car_aspect)?;
        check_range("plate_width_fraction", self.plate_width_fraction)?;
        check_range("clutter_count", self.clutter_count)?;
        check_range("text_len", self.text_len)?;
        if self.car_aspect.0 < 1.0 {
            return Err(Error::Config("car_aspect must be >= 1".into()));
        }
        if self.car_long_edge.1 > self.width
            || (self.car_long_edge.1 as f64 / self.car_aspect.0) > self.height as f64
        {
            return Err(Error::Config("largest car does not fit the scene".into()));
        }
        let (f0, f1) = self.plate_width_fraction;
        if !(f0 > 0.0 && f1 <= 0.8) {
            return Err(Error::Config(
                "plate_width_fraction must lie in (0, 0.8]".into(),
            ));
        }
        if !(self.plate_aspect >= 1.0 && self.plate_aspect.is_finite()) {
            return Err(Error::Config("plate_aspect must be >= 1".into()));
        }
        if self.text_len.0 == 0 {
            return Err(Error::Config("text_len must be positive".into()));
        }
        let min_plate_w = (self.car_long_edge.0 as f64 * f0).round();
        if min_plate_w < (font::text_width(self.text_len.1) + 2) as f64
            || min_plate_w / self.plate_aspect < (GLYPH_H + 2) as f64
        {
            return Err(Error::Config("smallest plate cannot hold its text".into()));
        }
        let rule = &self.difficulty_rule;
        if !(rule.easy_min_px >= rule.medium_min_px) {
            return Err(Error::Config(
                "difficulty_rule thresholds out of order".into(),
            ));
        }
        Ok(())
    }
}

pub fn image_id(index: u32) -> String {
    format!("scene_{index}")
}

/// Inverse of [`image_id`].
pub fn scene_index(image_id: &str) -> Option<u32> {
    image_id.strip_prefix("scene_")?.parse().ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateLayout {
    pub rect: PixelRect,
    pub text: String,
    /// Font pixel size in image pixels.
    pub glyph_scale: u32,
    pub text_origin: (u32, u32),
    pub color: [u8; 3],
    pub ink: [u8; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarLayout {
    pub rect: PixelRect,
    pub color: [u8; 3],
    pub windshield: PixelRect,
    pub windshield_color: [u8; 3],
    pub plate: PlateLayout,
    pub difficulty: Difficulty,
}

/// Geometry and colors of one scene; rendering is a pure function of it.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayout {
    pub index: u32,
    pub width: u32,
    pub height: u32,
    pub cars: Vec<CarLayout>,
    pub clutter: Vec<(PixelRect, [u8; 3])>,
    pub grain: u8,
    texture_seed: u64,
}

// Independent random streams per scene.
const STREAM_LAYOUT: u64 = 1;
const STREAM_TEXTURE: u64 = 2;

/// Amplitude of the finest background octave.
const OCTAVE_FINE: i32 = 18;

fn scene_rng(seed: u64, index: u32, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((index as u64) << 8 | stream);
    rng
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = (h / 60.0) % 6.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|u| ((u + m) * 255.0).round().clamp(0.0, 255.0) as u8)
}

fn low_chroma(rng: &mut impl Rng, lo: u8, hi: u8, tint: i32) -> [u8; 3] {
    let base = rng.random_range(lo..=hi) as i32;
    [0, 0, 0].map(|_: u8| (base + rng.random_range(-tint..=tint)).clamp(0, 255) as u8)
}

fn disjoint(a: &PixelRect, b: &PixelRect, gap: u32) -> bool {
    a.x + a.w + gap <= b.x
        || b.x + b.w + gap <= a.x
        || a.y + a.h + gap <= b.y
        || b.y + b.h + gap <= a.y
}

/// Lays out scene `index`: car placement, plates, texts and colors.
pub fn layout_scene(spec: &SceneSpec, index: u32) -> Result<SceneLayout> {
    spec.validate()?;
    let mut rng = scene_rng(spec.seed, index, STREAM_LAYOUT);
    let n_cars = rng.random_range(spec.cars_per_image.0..=spec.cars_per_image.1);

    let mut rects: Vec<PixelRect> = Vec::with_capacity(n_cars as usize);
    let mut attempts = 0;
    while rects.len() < n_cars as usize {
        if attempts == MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::PlacementFailed { attempts });
        }
        attempts += 1;
        let w = rng.random_range(spec.car_long_edge.0..=spec.car_long_edge.1);
        let aspect = rng.random_range(spec.car_aspect.0..=spec.car_aspect.1);
        let h = ((w as f64 / aspect).round() as u32).clamp(1, spec.height);
        let x = rng.random_range(0..=spec.width - w);
        let y = rng.random_range(0..=spec.height - h);
        let r = PixelRect { x, y, w, h };
        if rects.iter().all(|o| disjoint(o, &r, 8)) {
            rects.push(r);
        }
    }

    let mut cars = Vec::with_capacity(rects.len());
    for rect in rects {
        let hue = rng.random_range(0.0..360.0);
        let color = hsv_to_rgb(
            hue,
            rng.random_range(0.6..0.95),
            rng.random_range(0.42..0.65),
        );
        let (cw, ch) = (rect.w as f64, rect.h as f64);
        let windshield = PixelRect {
            x: rect.x + (0.15 * cw).round() as u32,
            y: rect.y + (0.12 * ch).round() as u32,
            w: (0.70 * cw).round() as u32,
            h: (0.30 * ch).round() as u32,
        };
        let windshield_color = low_chroma(&mut rng, 30, 55, 4);

        let frac = rng.random_range(spec.plate_width_fraction.0..=spec.plate_width_fraction.1);
        let pw = (frac * cw).round() as u32;
        let ph = ((pw as f64 / spec.plate_aspect).round() as u32).max(1);
        let rel_x = rng.random_range(0.08..=(0.92 - pw as f64 / cw).max(0.08));
        let rel_y = rng.random_range(0.62..=0.78);
        let plate_rect = PixelRect {
            x: rect.x + (rel_x * cw).round() as u32,
            y: rect.y + (rel_y * ch).round() as u32,
            w: pw,
            h: ph,
        };

        let len = rng.random_range(spec.text_len.0..=spec.text_len.1);
        let alphabet: Vec<char> = font::ALPHABET.chars().collect();
        let text: String = (0..len)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())])
            .collect();
        let tw_units = font::text_width(len) as f64;
        let scale = (0.72 * ph as f64 / GLYPH_H as f64)
            .min(0.9 * pw as f64 / tw_units)
            .floor()
            .max(1.0) as u32;
        let tw = font::text_width(len) as u32 * scale;
        let th = GLYPH_H as u32 * scale;
        let text_origin = (
            plate_rect.x + plate_rect.w.saturating_sub(tw) / 2,
            plate_rect.y + plate_rect.h.saturating_sub(th) / 2,
        );
        let plate = PlateLayout {
            rect: plate_rect,
            text,
            glyph_scale: scale,
            text_origin,
            color: low_chroma(&mut rng, 225, 245, 3),
            ink: low_chroma(&mut rng, 15, 40, 3),
        };
        cars.push(CarLayout {
            rect,
            color,
            windshield,
            windshield_color,
            difficulty: spec.difficulty_rule.classify(ph as f64),
            plate,
        });
    }

    let n_clutter = rng.random_range(spec.clutter_count.0..=spec.clutter_count.1);
    let clutter = (0..n_clutter)
        .map(|_| {
            let w = rng.random_range(40..=600.min(spec.width));
            let h = rng.random_range(40..=600.min(spec.height));
            let r = PixelRect {
                x: rng.random_range(0..=spec.width - w),
                y: rng.random_range(0..=spec.height - h),
                w,
                h,
            };
            (r, low_chroma(&mut rng, 45, 185, 10))
        })
        .collect();

    Ok(SceneLayout {
        index,
        width: spec.width,
        height: spec.height,
        cars,
        clutter,
        grain: spec.grain,
        texture_seed: spec.seed,
    })
}

impl SceneLayout {
    pub fn image_id(&self) -> String {
        image_id(self.index)
    }

    /// Ground truth: each car followed by its plate.
    pub fn annotations(&self) -> Vec<Annotation> {
        let image_id = self.image_id();
        let mut out = Vec::with_capacity(self.cars.len() * 2);
        for (j, car) in self.cars.iter().enumerate() {
            let car_id = format!("{image_id}:car{j}");
            out.push(Annotation {
                id: car_id.clone(),
                image_id: image_id.clone(),
                object_kind: ObjectKind::Car,
                bbox: car.rect.to_bbox(),
                parent_id: None,
                text: None,
                difficulty: car.difficulty,
            });
            out.push(Annotation {
                id: format!("{image_id}:plate{j}"),
                image_id: image_id.clone(),
                object_kind: ObjectKind::Plate,
                bbox: car.plate.rect.to_bbox(),
                parent_id: Some(car_id),
                text: Some(car.plate.text.clone()),
                difficulty: car.difficulty,
            });
        }
        out
    }

    pub fn render(&self) -> ImageBuffer {
        let mut img = ImageBuffer::filled(self.width, self.height, [0, 0, 0]);
        let mut rng = scene_rng(self.texture_seed, self.index, STREAM_TEXTURE);
        paint_background(&mut img, &mut rng);
        for (r, c) in &self.clutter {
            fill(&mut img, r, *c);
        }
        for car in &self.cars {
            let radius = (0.12 * car.rect.w.min(car.rect.h) as f64).round() as u32;
            fill_rounded(&mut img, &car.rect, radius, car.color);
            fill(&mut img, &car.windshield, car.windshield_color);
            let p = &car.plate;
            fill(&mut img, &p.rect, p.color);
            draw_text(&mut img, &p.text, p.text_origin, p.glyph_scale, p.ink);
        }
        add_grain(&mut img, &mut rng, self.grain);
        img
    }
}

/// Lays out and renders scene `index`.
pub fn generate_scene(spec: &SceneSpec, index: u32) -> Result<(ImageBuffer, Vec<Annotation>)> {
    let layout = layout_scene(spec, index)?;
    Ok((layout.render(), layout.annotations()))
}

fn fill(img: &mut ImageBuffer, r: &PixelRect, c: [u8; 3]) {
    img.fill_rect(
        r.x as i64,
        r.y as i64,
        (r.x + r.w) as i64,
        (r.y + r.h) as i64,
        c,
    );
}

fn fill_rounded(img: &mut ImageBuffer, r: &PixelRect, radius: u32, c: [u8; 3]) {
    let rad = radius.min(r.w / 2).min(r.h / 2) as i64;
    for dy in 0..r.h as i64 {
        // distance into the corner band, measured from the nearer edge
        let vy = if dy < rad {
            rad - dy
        } else if dy >= r.h as i64 - rad {
            dy - (r.h as i64 - rad) + 1
        } else {
            0
        };
        let inset = if vy > 0 {
            let f = (vy as f64 - 0.5) / rad as f64;
            (rad as f64 * (1.0 - (1.0 - f * f).max(0.0).sqrt())).round() as i64
        } else {
            0
        };
        let y = r.y as i64 + dy;
        img.fill_rect(r.x as i64 + inset, y, (r.x + r.w) as i64 - inset, y + 1, c);
    }
}

fn draw_text(img: &mut ImageBuffer, text: &str, origin: (u32, u32), scale: u32, ink: [u8; 3]) {
    let s = scale as i64;
    for (i, ch) in text.chars().enumerate() {
        let Some(rows) = font::glyph(ch) else {
            continue;
        };
        let gx = origin.0 as i64 + (i * font::ADVANCE) as i64 * s;
        for row in 0..GLYPH_H {
            for col in 0..GLYPH_W {
                if font::ink(rows, col, row) {
                    let x = gx + col as i64 * s;
                    let y = origin.1 as i64 + row as i64 * s;
                    img.fill_rect(x, y, x + s, y + s, ink);
                }
            }
        }
    }
}

/// Low-chroma value noise: a coarse illumination layer plus finer
/// ground-texture octaves.
fn paint_background(img: &mut ImageBuffer, rng: &mut ChaCha8Rng) {
    let (w, h) = (img.width() as usize, img.height() as usize);
    // (cell size, value range, per-channel tint)
    let octaves: [(usize, (i32, i32), i32); 3] = [
        (160, (70, 150), 8),
        (24, (-14, 14), 3),
        (3, (-OCTAVE_FINE, OCTAVE_FINE), 2),
    ];
    let mut acc = vec![0f32; w * h * 3];
    for &(cell, (lo, hi), tint) in &octaves {
        let gw = w / cell + 2;
        let gh = h / cell + 2;
        let lattice: Vec<[f32; 3]> = (0..gw * gh)
            .map(|_| {
                let v = rng.random_range(lo..=hi) as f32;
                [0, 0, 0].map(|_: u8| v + rng.random_range(-tint..=tint) as f32)
            })
            .collect();
        let smooth = |t: f32| t * t * (3.0 - 2.0 * t);
        let xs: Vec<(usize, f32)> = (0..w)
            .map(|x| {
                let f = x as f32 / cell as f32;
                (f as usize, smooth(f - f.floor()))
            })
            .collect();
        let mut line = vec![[0f32; 3]; gw];
        for y in 0..h {
            let fy = y as f32 / cell as f32;
            let iy = fy as usize;
            let sy = smooth(fy - iy as f32);
            for (gx, l) in line.iter_mut().enumerate() {
                let a = lattice[iy * gw + gx];
                let b = lattice[(iy + 1) * gw + gx];
                *l = [0, 1, 2].map(|k| a[k] + (b[k] - a[k]) * sy);
            }
            let row = &mut acc[y * w * 3..(y + 1) * w * 3];
            for (x, &(ix, sx)) in xs.iter().enumerate() {
                let (a, b) = (line[ix], line[ix + 1]);
                for k in 0..3 {
                    row[x * 3 + k] += a[k] + (b[k] - a[k]) * sx;
                }
            }
        }
    }
    for (o, v) in img.data_mut().iter_mut().zip(&acc) {
        *o = v.round().clamp(0.0, 255.0) as u8;
    }
}

/// Triangular per-channel noise in `[-amp, amp]`.
fn add_grain(img: &mut ImageBuffer, rng: &mut ChaCha8Rng, amp: u8) {
    if amp == 0 {
        return;
    }
    let amp = amp as i32;
    for px in img.data_mut().chunks_exact_mut(3) {
        let bits: u64 = rng.random();
        for (k, v) in px.iter_mut().enumerate() {
            let a = (bits >> (16 * k)) as u8 as i32;
            let b = (bits >> (16 * k + 8)) as u8 as i32;
            let n = (a + b - 255) * amp / 255;
            *v = (*v as i32 + n).clamp(0, 255) as u8;
        }
    }
}
