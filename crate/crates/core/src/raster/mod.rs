//! RGB8 image buffers, longest-edge box-filter resizing, integer-aligned
//! cropping, and the pixel codecs used on the wire and on disk.

mod codec;
mod resize;

use serde::{Deserialize, Serialize};

pub use codec::{decode, encode, Encoding, EncodingKind, RAW8_HEADER_LEN, RAW8_MAGIC};
pub use resize::{longest_edge_dims, resize_longest_edge, resize_to};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Frame};
use crate::scalar::Real;

pub const CHANNELS: usize = 3;

/// Row-major interleaved RGB8 image.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ImageBuffer({}x{})", self.width, self.height)
    }
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!("zero dimension {width}x{height}")));
        }
        let expected = width as usize * height as usize * CHANNELS;
        if data.len() != expected {
            return Err(Error::Image(format!(
                "data length {} does not match {width}x{height}x3 = {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let data = rgb.repeat(width as usize * height as usize);
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn pixel_count(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn long_edge(&self) -> u32 {
        self.width.max(self.height)
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Mutable pixel bytes; the length is fixed by the dimensions.
    #[inline]
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * CHANNELS
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.index(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.index(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn row_mut(&mut self, y: u32) -> &mut [u8] {
        let stride = self.width as usize * CHANNELS;
        let start = y as usize * stride;
        &mut self.data[start..start + stride]
    }

    /// Fills `[x0, x1) × [y0, y1)`, clipped to the image.
    pub fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, rgb: [u8; 3]) {
        let (w, h) = (self.width as i64, self.height as i64);
        let (x0, x1) = (x0.clamp(0, w), x1.clamp(0, w));
        let (y0, y1) = (y0.clamp(0, h), y1.clamp(0, h));
        for y in y0..y1 {
            let row = self.row_mut(y as u32);
            for px in row[x0 as usize * 3..x1 as usize * 3].chunks_exact_mut(3) {
                px.copy_from_slice(&rgb);
            }
        }
    }

    /// Rec. 601 luma.
    pub fn to_gray(&self) -> Vec<u8> {
        self.data
            .chunks_exact(3)
            .map(|p| {
                ((299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32 + 500) / 1000) as u8
            })
            .collect()
    }

    pub fn extent<T: Real>(&self) -> BBox<T> {
        BBox::new(
            T::zero(),
            T::zero(),
            T::lit(self.width as f64),
            T::lit(self.height as f64),
        )
    }
}

/// Integer pixel rectangle inside an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelRect {
    /// Covers `b` (origin floored, far edge ceiled) and clamps to
    /// `width × height`. `None` if nothing is left.
    pub fn covering<T: Real>(b: &BBox<T>, width: u32, height: u32) -> Option<Self> {
        let x0 = b.x.to_f64_lossy().floor().max(0.0);
        let y0 = b.y.to_f64_lossy().floor().max(0.0);
        let x1 = b.right().to_f64_lossy().ceil().min(width as f64);
        let y1 = b.bottom().to_f64_lossy().ceil().min(height as f64);
        if !(x1 > x0 && y1 > y0) {
            return None;
        }
        Some(Self {
            x: x0 as u32,
            y: y0 as u32,
            w: (x1 - x0) as u32,
            h: (y1 - y0) as u32,
        })
    }

    pub fn to_bbox<T: Real>(&self) -> BBox<T> {
        BBox::new(
            T::lit(self.x as f64),
            T::lit(self.y as f64),
            T::lit(self.w as f64),
            T::lit(self.h as f64),
        )
    }

    /// Frame mapping crop-local pixels back onto the source image.
    pub fn frame<T: Real>(&self) -> Frame<T> {
        Frame::new(T::lit(self.x as f64), T::lit(self.y as f64), T::one())
    }
}

/// Exact sub-rectangle covering `b`, plus where it came from.
pub fn crop_region<T: Real>(img: &ImageBuffer, b: &BBox<T>) -> Result<(ImageBuffer, PixelRect)> {
    let rect = PixelRect::covering(b, img.width, img.height).ok_or(Error::EmptyRegion)?;
    let mut data = Vec::with_capacity(rect.w as usize * rect.h as usize * CHANNELS);
    let stride = img.width as usize * CHANNELS;
    for y in rect.y..rect.y + rect.h {
        let start = y as usize * stride + rect.x as usize * CHANNELS;
        data.extend_from_slice(&img.data[start..start + rect.w as usize * CHANNELS]);
    }
    Ok((
        ImageBuffer {
            width: rect.w,
            height: rect.h,
            data,
        },
        rect,
    ))
}

pub fn crop<T: Real>(img: &ImageBuffer, b: &BBox<T>) -> Result<ImageBuffer> {
    crop_region(img, b).map(|(c, _)| c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> ImageBuffer {
        let mut img = ImageBuffer::filled(w, h, [0, 0, 0]);
        for y in 0..h {
            for x in 0..w {
                img.put_pixel(
                    x,
                    y,
                    [
                        (x * 7 % 256) as u8,
                        (y * 13 % 256) as u8,
                        ((x + y) % 256) as u8,
                    ],
                );
            }
        }
        img
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(ImageBuffer::new(0, 4, vec![]).is_err());
        assert!(ImageBuffer::new(2, 2, vec![0; 11]).is_err());
        assert!(ImageBuffer::new(2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn full_crop_is_identical() {
        let img = gradient(17, 9);
        let c = crop(&img, &img.extent::<f64>()).unwrap();
        assert_eq!(c, img);
    }

    #[test]
    fn unit_crop_is_top_left_pixel() {
        let img = gradient(5, 5);
        let c = crop(&img, &BBox::new(0.0, 0.0, 1.0, 1.0)).unwrap();
        assert_eq!((c.width(), c.height()), (1, 1));
        assert_eq!(c.pixel(0, 0), img.pixel(0, 0));
    }

    #[test]
    fn fractional_box_is_covered() {
        let img = gradient(20, 20);
        let (c, rect) = crop_region(&img, &BBox::new(2.5, 3.2, 4.0, 1.1)).unwrap();
        assert_eq!(
            rect,
            PixelRect {
                x: 2,
                y: 3,
                w: 5,
                h: 2
            }
        );
        assert_eq!(c.pixel(0, 0), img.pixel(2, 3));
    }

    #[test]
    fn empty_region_errors() {
        let img = gradient(4, 4);
        assert!(matches!(
            crop(&img, &BBox::new(10.0, 10.0, 2.0, 2.0)),
            Err(Error::EmptyRegion)
        ));
        assert!(matches!(
            crop(&img, &BBox::new(1.0, 1.0, 0.0, 2.0)),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn nested_crop_equals_composed_crop() {
        let img = gradient(64, 48);
        let outer = BBox::new(10.3, 5.7, 30.0, 25.0);
        let (a, rect_a) = crop_region(&img, &outer).unwrap();
        let inner = BBox::new(3.0, 4.0, 9.0, 6.0);
        let nested = crop(&a, &inner).unwrap();
        let composed = rect_a.frame::<f64>().to_parent(&inner);
        assert_eq!(nested, crop(&img, &composed).unwrap());
    }

    #[test]
    fn gray_of_white_is_white() {
        let img = ImageBuffer::filled(2, 1, [255, 255, 255]);
        assert_eq!(img.to_gray(), vec![255, 255]);
    }
}
