//! Template OCR for plates rendered with the built-in 5×7 font.

use serde::{Deserialize, Serialize};

use super::vision::{components, histogram, otsu};
use crate::raster::ImageBuffer;
use crate::synth::font::{self, GLYPH_H, GLYPH_W};

/// Minimum gray-level separation between the two Otsu classes.
const MIN_CONTRAST: f64 = 40.0;
/// Separation above which the light class is split again (plate vs body paint).
const SECOND_MODE_GAP: f64 = 60.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OcrResult {
    pub text: String,
    /// Per character, `(ncc + 1) / 2` of the winning template.
    pub char_scores: Vec<f64>,
}

struct Templates(Vec<(char, [f64; GLYPH_W * GLYPH_H])>);

impl Templates {
    fn build() -> Self {
        Self(
            font::glyphs()
                .map(|(c, rows)| {
                    let mut t = [0.0; GLYPH_W * GLYPH_H];
                    for r in 0..GLYPH_H {
                        for col in 0..GLYPH_W {
                            t[r * GLYPH_W + col] = if font::ink(rows, col, r) { 1.0 } else { 0.0 };
                        }
                    }
                    (c, t)
                })
                .collect(),
        )
    }

    fn best(&self, sample: &[f64; GLYPH_W * GLYPH_H]) -> (char, f64) {
        let mut best = ('?', f64::NEG_INFINITY);
        for (c, t) in &self.0 {
            let s = ncc(sample, t);
            if s > best.1 {
                best = (*c, s);
            }
        }
        best
    }
}

fn ncc(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    if da <= 1e-12 || db <= 1e-12 {
        0.0
    } else {
        num / (da * db).sqrt()
    }
}

/// Reads the plate text in `img`, which may include some surrounding car body.
pub fn ocr_plate(img: &ImageBuffer) -> OcrResult {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w < 3 || h < 3 {
        return OcrResult::default();
    }
    let gray = img.to_gray();
    match plate_area(&gray, w, h) {
        Some(area) => read_area(&gray, w, area),
        None => OcrResult::default(),
    }
}

/// Threshold isolating the plate background: Otsu, refined once more when
/// the bright class itself is bimodal.
fn light_threshold(gray: &[u8]) -> Option<u8> {
    let hist = histogram(gray);
    let (t1, m0, m1) = otsu(&hist)?;
    if m1 - m0 < MIN_CONTRAST {
        return None;
    }
    let mut upper = [0u64; 256];
    upper[t1 as usize + 1..].copy_from_slice(&hist[t1 as usize + 1..]);
    if let Some((t2, a, b)) = otsu(&upper) {
        let n: u64 = upper.iter().sum();
        let hi: u64 = upper[t2 as usize + 1..].iter().sum();
        let lo = n - hi;
        if b - a > SECOND_MODE_GAP && hi * 20 >= n && lo * 20 >= n {
            return Some(t2);
        }
    }
    Some(t1)
}

/// Inclusive `(x0, y0, x1, y1)` of the plate background.
fn plate_area(gray: &[u8], w: usize, h: usize) -> Option<(usize, usize, usize, usize)> {
    let t = light_threshold(gray)?;
    let mask: Vec<bool> = gray.iter().map(|&v| v > t).collect();
    let c = components(&mask, w, h).into_iter().max_by_key(|c| c.area)?;
    if c.area < 4 {
        return None;
    }
    let (mut x0, mut y0, mut x1, mut y1) = (c.x0, c.y0, c.x1, c.y1);
    // edge pixels are usually blended with whatever surrounds the plate
    if x1 - x0 >= 8 {
        x0 += 1;
        x1 -= 1;
    }
    if y1 - y0 >= 6 {
        y0 += 1;
        y1 -= 1;
    }
    Some((x0, y0, x1, y1))
}

fn read_area(
    gray: &[u8],
    stride: usize,
    (x0, y0, x1, y1): (usize, usize, usize, usize),
) -> OcrResult {
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    let sub: Vec<u8> = (y0..=y1)
        .flat_map(|y| gray[y * stride + x0..=y * stride + x1].iter().copied())
        .collect();
    let Some((t, ink_mean, bg_mean)) = otsu(&histogram(&sub)) else {
        return OcrResult::default();
    };
    if bg_mean - ink_mean < MIN_CONTRAST {
        return OcrResult::default();
    }
    let dark: Vec<f64> = sub
        .iter()
        .map(|&g| ((bg_mean - g as f64) / (bg_mean - ink_mean)).clamp(0.0, 1.0))
        .collect();
    let ink: Vec<bool> = sub.iter().map(|&g| g <= t).collect();

    let row_counts: Vec<usize> = (0..h)
        .map(|y| ink[y * w..(y + 1) * w].iter().filter(|&&v| v).count())
        .collect();
    let max_row = row_counts.iter().copied().max().unwrap_or(0);
    if max_row == 0 {
        return OcrResult::default();
    }
    let row_thr = (max_row as f64 * 0.1).ceil().max(1.0) as usize;
    let Some((top, bottom)) = longest_run(row_counts.iter().map(|&c| c >= row_thr)) else {
        return OcrResult::default();
    };
    let band_h = bottom - top + 1;
    let k = band_h as f64 / GLYPH_H as f64;

    let col_counts: Vec<usize> = (0..w)
        .map(|x| (top..=bottom).filter(|&y| ink[y * w + x]).count())
        .collect();
    let col_thr = ((band_h as f64 * 0.1).floor() as usize).max(1);
    let mut segments = Vec::new();
    let mut start = None;
    for x in 0..=w {
        let on = x < w && col_counts[x] >= col_thr;
        match (on, start) {
            (true, None) => start = Some(x),
            (false, Some(s)) => {
                segments.push((s, x - 1));
                start = None;
            }
            _ => {}
        }
    }
    let min_mass = 0.5 * k * k;
    segments.retain(|&(a, b)| {
        let mass: usize = col_counts[a..=b].iter().sum();
        (b - a + 1) as f64 >= 0.5 * k || mass as f64 >= min_mass
    });

    let templates = Templates::build();
    let mut out = OcrResult::default();
    for (a, b) in segments {
        let sw = (b - a + 1) as f64;
        let n = (((sw + k) / (font::ADVANCE as f64 * k)).round() as usize).max(1);
        let pitch = (sw + k) / n as f64;
        for i in 0..n {
            let left = a as f64 + i as f64 * pitch;
            let cx = left + (pitch - k) / 2.0;
            let cell_x0 = cx - 2.5 * k;
            let mut sample = [0.0; GLYPH_W * GLYPH_H];
            for r in 0..GLYPH_H {
                for c in 0..GLYPH_W {
                    let sx = cell_x0 + c as f64 * k;
                    let sy = top as f64 + r as f64 * k;
                    sample[r * GLYPH_W + c] = area_mean(&dark, w, h, sx, sy, sx + k, sy + k);
                }
            }
            let (ch, score) = templates.best(&sample);
            out.text.push(ch);
            out.char_scores.push(((score + 1.0) / 2.0).clamp(0.0, 1.0));
        }
    }
    out
}

fn longest_run(flags: impl Iterator<Item = bool>) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    let mut last = 0;
    for (i, on) in flags.enumerate() {
        last = i;
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.is_none_or(|(a, b)| i - s > b - a + 1) {
                    best = Some((s, i - 1));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if best.is_none_or(|(a, b)| last + 1 - s > b - a + 1) {
            best = Some((s, last));
        }
    }
    best
}

/// Mean of `values` over the continuous rectangle `[x0, x1) × [y0, y1)`,
/// counting pixels outside the grid as zero.
fn area_mean(values: &[f64], w: usize, h: usize, x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let area = (x1 - x0) * (y1 - y0);
    if area <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let (px0, px1) = (
        x0.floor().max(0.0) as usize,
        (x1.ceil().max(0.0) as usize).min(w),
    );
    let (py0, py1) = (
        y0.floor().max(0.0) as usize,
        (y1.ceil().max(0.0) as usize).min(h),
    );
    for py in py0..py1 {
        let cy = (y1.min(py as f64 + 1.0) - y0.max(py as f64)).max(0.0);
        for px in px0..px1 {
            let cx = (x1.min(px as f64 + 1.0) - x0.max(px as f64)).max(0.0);
            sum += cx * cy * values[py * w + px];
        }
    }
    sum / area
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(text: &str, scale: u32, margin: u32) -> ImageBuffer {
        let tw = font::text_width(text.len()) as u32 * scale;
        let th = GLYPH_H as u32 * scale;
        let mut img = ImageBuffer::filled(tw + 2 * margin, th + 2 * margin, [235, 235, 235]);
        for (i, ch) in text.chars().enumerate() {
            let rows = font::glyph(ch).unwrap();
            for r in 0..GLYPH_H {
                for c in 0..GLYPH_W {
                    if font::ink(rows, c, r) {
                        let x = margin + (i * font::ADVANCE + c) as u32 * scale;
                        let y = margin + r as u32 * scale;
                        img.fill_rect(
                            x as i64,
                            y as i64,
                            (x + scale) as i64,
                            (y + scale) as i64,
                            [20, 20, 20],
                        );
                    }
                }
            }
        }
        img
    }

    #[test]
    fn reads_every_glyph_at_several_scales() {
        for scale in [1, 2, 3, 7] {
            for chunk in font::ALPHABET.as_bytes().chunks(7) {
                let text = std::str::from_utf8(chunk).unwrap();
                let r = ocr_plate(&render(text, scale, 3 * scale));
                assert_eq!(r.text, text, "scale {scale}");
                assert!(r.char_scores.iter().all(|&s| s > 0.9));
            }
        }
    }

    #[test]
    fn blank_reads_empty() {
        let r = ocr_plate(&ImageBuffer::filled(60, 15, [230, 230, 230]));
        assert_eq!(r, OcrResult::default());
        assert_eq!(ocr_plate(&ImageBuffer::filled(2, 2, [0, 0, 0])).text, "");
    }

    #[test]
    fn surrounding_paint_is_ignored() {
        let plate = render("K7Q2XB", 2, 4);
        let mut img = ImageBuffer::filled(plate.width() + 40, plate.height() + 30, [150, 150, 40]);
        for y in 0..plate.height() {
            for x in 0..plate.width() {
                img.put_pixel(x + 20, y + 15, plate.pixel(x, y));
            }
        }
        assert_eq!(ocr_plate(&img).text, "K7Q2XB");
    }

    #[test]
    fn ncc_bounds() {
        let a = [0.0, 1.0, 0.0, 1.0];
        assert!((ncc(&a, &a) - 1.0).abs() < 1e-12);
        assert!((ncc(&a, &[1.0, 0.0, 1.0, 0.0]) + 1.0).abs() < 1e-12);
        assert_eq!(ncc(&a, &[0.5; 4]), 0.0);
    }

    #[test]
    fn area_mean_fractional() {
        let v = [1.0, 0.0, 0.0, 0.0];
        assert!((area_mean(&v, 2, 2, 0.0, 0.0, 2.0, 2.0) - 0.25).abs() < 1e-12);
        assert!((area_mean(&v, 2, 2, 0.5, 0.0, 1.5, 1.0) - 0.5).abs() < 1e-12);
        assert!((area_mean(&v, 2, 2, -1.0, 0.0, 1.0, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn longest_run_cases() {
        assert_eq!(
            longest_run([false, true, true, false, true].into_iter()),
            Some((1, 2))
        );
        assert_eq!(
            longest_run([true, false, true, true, true].into_iter()),
            Some((2, 4))
        );
        assert_eq!(longest_run([false, false].into_iter()), None);
    }
}
