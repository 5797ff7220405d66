use std::borrow::Cow;

use super::{ImageBuffer, CHANNELS};

/// Output size when fitting the longest edge to `target`; `None` when the
/// image already fits (images are never upsampled).
pub fn longest_edge_dims(width: u32, height: u32, target: u32) -> Option<(u32, u32)> {
    let target = target.max(1);
    let long = width.max(height);
    if target >= long {
        return None;
    }
    let short = width.min(height);
    let scaled = ((short as f64 * target as f64 / long as f64).round() as u32).max(1);
    Some(if width >= height {
        (target, scaled)
    } else {
        (scaled, target)
    })
}

/// Box-filter downsample so the longest edge equals `target`.
///
/// Returns the input untouched when it already fits.
pub fn resize_longest_edge(img: &ImageBuffer, target: u32) -> Cow<'_, ImageBuffer> {
    match longest_edge_dims(img.width, img.height, target) {
        None => Cow::Borrowed(img),
        Some((w, h)) => Cow::Owned(resize_to(img, w, h)),
    }
}

/// Source span and per-pixel coverage weights for each output sample.
struct Taps {
    start: Vec<usize>,
    weights: Vec<Vec<f32>>,
}

fn box_taps(src: usize, dst: usize) -> Taps {
    let ratio = src as f64 / dst as f64;
    let mut start = Vec::with_capacity(dst);
    let mut weights = Vec::with_capacity(dst);
    for j in 0..dst {
        let lo = j as f64 * ratio;
        let hi = ((j + 1) as f64 * ratio).min(src as f64);
        let first = lo.floor() as usize;
        let last = (hi.ceil() as usize).min(src);
        let mut w: Vec<f32> = (first..last)
            .map(|i| {
                let a = (i as f64).max(lo);
                let b = ((i + 1) as f64).min(hi);
                (b - a).max(0.0) as f32
            })
            .collect();
        let sum: f32 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= sum);
        start.push(first);
        weights.push(w);
    }
    Taps { start, weights }
}

/// Area-averaging resample to exactly `width × height`. Intended for
/// downsampling; upsampling degenerates to nearest neighbour.
pub fn resize_to(img: &ImageBuffer, width: u32, height: u32) -> ImageBuffer {
    assert!(width > 0 && height > 0);
    if width == img.width && height == img.height {
        return img.clone();
    }
    let (sw, sh) = (img.width as usize, img.height as usize);
    let (dw, dh) = (width as usize, height as usize);
    let hx = box_taps(sw, dw);
    let vy = box_taps(sh, dh);

    // horizontal pass into f32 rows
    let mut tmp = vec![0f32; sh * dw * CHANNELS];
    for y in 0..sh {
        let src = &img.data[y * sw * CHANNELS..(y + 1) * sw * CHANNELS];
        let out = &mut tmp[y * dw * CHANNELS..(y + 1) * dw * CHANNELS];
        for j in 0..dw {
            let (mut r, mut g, mut b) = (0f32, 0f32, 0f32);
            for (k, w) in hx.weights[j].iter().enumerate() {
                let p = (hx.start[j] + k) * CHANNELS;
                r += w * src[p] as f32;
                g += w * src[p + 1] as f32;
                b += w * src[p + 2] as f32;
            }
            out[j * CHANNELS] = r;
            out[j * CHANNELS + 1] = g;
            out[j * CHANNELS + 2] = b;
        }
    }

    let mut data = vec![0u8; dh * dw * CHANNELS];
    let mut acc = vec![0f32; dw * CHANNELS];
    for i in 0..dh {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for (k, w) in vy.weights[i].iter().enumerate() {
            let row =
                &tmp[(vy.start[i] + k) * dw * CHANNELS..(vy.start[i] + k + 1) * dw * CHANNELS];
            for (a, v) in acc.iter_mut().zip(row) {
                *a += w * v;
            }
        }
        for (o, a) in data[i * dw * CHANNELS..(i + 1) * dw * CHANNELS]
            .iter_mut()
            .zip(&acc)
        {
            *o = a.round().clamp(0.0, 255.0) as u8;
        }
    }
    ImageBuffer {
        width,
        height,
        data,
    }
}
