use std::io::Cursor;

use image::{ExtendedColorType, ImageEncoder, ImageFormat};
use serde::{Deserialize, Serialize};

use super::ImageBuffer;
use crate::error::{Error, Result};

pub const RAW8_MAGIC: &[u8; 4] = b"RAW8";
/// Magic plus big-endian u32 width and height.
pub const RAW8_HEADER_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    Raw8,
    Ppm,
    Png,
    Jpeg,
}

/// Pixel encoding; only JPEG carries a quality (1–100).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Encoding {
    #[default]
    Raw8,
    Ppm,
    Png,
    Jpeg(u8),
}

impl Encoding {
    pub fn jpeg(quality: u8) -> Result<Self> {
        Self::from_parts(EncodingKind::Jpeg, Some(quality))
    }

    pub fn from_parts(kind: EncodingKind, quality: Option<u8>) -> Result<Self> {
        match (kind, quality) {
            (EncodingKind::Jpeg, Some(q)) if (1..=100).contains(&q) => Ok(Self::Jpeg(q)),
            (EncodingKind::Jpeg, Some(q)) => {
                Err(Error::Config(format!("JPEG quality {q} outside 1-100")))
            }
            (EncodingKind::Jpeg, None) => {
                Err(Error::Config("JPEG encoding needs a quality".into()))
            }
            (_, Some(_)) => Err(Error::Config(format!("{kind:?} takes no quality"))),
            (EncodingKind::Raw8, None) => Ok(Self::Raw8),
            (EncodingKind::Ppm, None) => Ok(Self::Ppm),
            (EncodingKind::Png, None) => Ok(Self::Png),
        }
    }

    pub fn kind(&self) -> EncodingKind {
        match self {
            Self::Raw8 => EncodingKind::Raw8,
            Self::Ppm => EncodingKind::Ppm,
            Self::Png => EncodingKind::Png,
            Self::Jpeg(_) => EncodingKind::Jpeg,
        }
    }

    pub fn quality(&self) -> Option<u8> {
        match self {
            Self::Jpeg(q) => Some(*q),
            _ => None,
        }
    }
}

pub fn encode(img: &ImageBuffer, enc: Encoding) -> Result<Vec<u8>> {
    match enc {
        Encoding::Raw8 => {
            let mut out = Vec::with_capacity(RAW8_HEADER_LEN + img.data.len());
            out.extend_from_slice(RAW8_MAGIC);
            out.extend_from_slice(&img.width.to_be_bytes());
            out.extend_from_slice(&img.height.to_be_bytes());
            out.extend_from_slice(&img.data);
            Ok(out)
        }
        Encoding::Ppm => {
            let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
            out.extend_from_slice(&img.data);
            Ok(out)
        }
        Encoding::Png => {
            let mut out = Vec::new();
            image::codecs::png::PngEncoder::new_with_quality(
                &mut out,
                image::codecs::png::CompressionType::Fast,
                image::codecs::png::FilterType::Adaptive,
            )
            .write_image(&img.data, img.width, img.height, ExtendedColorType::Rgb8)
            .map_err(|e| Error::Encode(e.to_string()))?;
            Ok(out)
        }
        Encoding::Jpeg(q) => {
            let mut out = Vec::new();
            image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, q)
                .write_image(&img.data, img.width, img.height, ExtendedColorType::Rgb8)
                .map_err(|e| Error::Encode(e.to_string()))?;
            Ok(out)
        }
    }
}

fn decode_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Decode {
        offset,
        message: message.into(),
    }
}

pub fn decode(bytes: &[u8], kind: EncodingKind) -> Result<ImageBuffer> {
    match kind {
        EncodingKind::Raw8 => decode_raw8(bytes),
        EncodingKind::Ppm => decode_ppm(bytes),
        EncodingKind::Png => decode_with_image(bytes, ImageFormat::Png),
        EncodingKind::Jpeg => decode_with_image(bytes, ImageFormat::Jpeg),
    }
}

fn decode_raw8(bytes: &[u8]) -> Result<ImageBuffer> {
    if bytes.len() < RAW8_HEADER_LEN {
        return Err(decode_err(bytes.len(), "truncated RAW8 header"));
    }
    if &bytes[..4] != RAW8_MAGIC {
        return Err(decode_err(0, "bad RAW8 magic"));
    }
    let width = u32::from_be_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let height = u32::from_be_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if width == 0 {
        return Err(decode_err(4, "zero width"));
    }
    if height == 0 {
        return Err(decode_err(8, "zero height"));
    }
    let expected = width as usize * height as usize * 3;
    let body = &bytes[RAW8_HEADER_LEN..];
    if body.len() != expected {
        return Err(decode_err(
            RAW8_HEADER_LEN + body.len().min(expected),
            format!("expected {expected} pixel bytes, found {}", body.len()),
        ));
    }
    ImageBuffer::new(width, height, body.to_vec())
}

/// Reads the next whitespace-delimited header token, skipping `#` comments.
fn ppm_token(bytes: &[u8], pos: &mut usize) -> Result<(usize, u32)> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&c| c != b'\n') {
                    *pos += 1;
                }
            }
            Some(c) if c.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(decode_err(*pos, "truncated PPM header")),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|c| c.is_ascii_digit()) {
        *pos += 1;
    }
    if start == *pos {
        return Err(decode_err(start, "expected a decimal number"));
    }
    let text = std::str::from_utf8(&bytes[start..*pos]).expect("ascii digits");
    let value = text
        .parse()
        .map_err(|_| decode_err(start, "number out of range"))?;
    Ok((start, value))
}

fn decode_ppm(bytes: &[u8]) -> Result<ImageBuffer> {
    if !bytes.starts_with(b"P6") {
        return Err(decode_err(0, "not a binary PPM (P6)"));
    }
    let mut pos = 2;
    let (wpos, width) = ppm_token(bytes, &mut pos)?;
    let (hpos, height) = ppm_token(bytes, &mut pos)?;
    let (mpos, maxval) = ppm_token(bytes, &mut pos)?;
    if width == 0 {
        return Err(decode_err(wpos, "zero width"));
    }
    if height == 0 {
        return Err(decode_err(hpos, "zero height"));
    }
    if maxval != 255 {
        return Err(decode_err(mpos, format!("unsupported maxval {maxval}")));
    }
    if !bytes.get(pos).is_some_and(|c| c.is_ascii_whitespace()) {
        return Err(decode_err(pos, "missing separator before pixel data"));
    }
    pos += 1;
    let expected = width as usize * height as usize * 3;
    let body = &bytes[pos..];
    if body.len() < expected {
        return Err(decode_err(
            bytes.len(),
            format!("expected {expected} pixel bytes, found {}", body.len()),
        ));
    }
    ImageBuffer::new(width, height, body[..expected].to_vec())
}

fn decode_with_image(bytes: &[u8], format: ImageFormat) -> Result<ImageBuffer> {
    let img = image::ImageReader::with_format(Cursor::new(bytes), format)
        .decode()
        .map_err(|e| decode_err(0, e.to_string()))?
        .into_rgb8();
    let (w, h) = img.dimensions();
    ImageBuffer::new(w, h, img.into_raw())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(w: u32, h: u32) -> ImageBuffer {
        let data = (0..w * h * 3).map(|i| (i * 37 % 251) as u8).collect();
        ImageBuffer::new(w, h, data).unwrap()
    }

    #[test]
    fn raw8_of_2x2_is_header_plus_twelve_bytes() {
        let bytes = encode(&sample(2, 2), Encoding::Raw8).unwrap();
        assert_eq!(bytes.len(), RAW8_HEADER_LEN + 12);
        assert_eq!(&bytes[..12], b"RAW8\0\0\0\x02\0\0\0\x02");
    }

    #[test]
    fn lossless_round_trips() {
        let img = sample(13, 7);
        for enc in [Encoding::Raw8, Encoding::Ppm, Encoding::Png] {
            let back = decode(&encode(&img, enc).unwrap(), enc.kind()).unwrap();
            assert_eq!(back, img, "{enc:?}");
        }
    }

    #[test]
    fn jpeg_decodes_to_same_size() {
        let img = sample(33, 20);
        let bytes = encode(&img, Encoding::jpeg(75).unwrap()).unwrap();
        let back = decode(&bytes, EncodingKind::Jpeg).unwrap();
        assert_eq!((back.width(), back.height()), (33, 20));
    }

    #[test]
    fn quality_only_for_jpeg() {
        assert!(Encoding::from_parts(EncodingKind::Png, Some(3)).is_err());
        assert!(Encoding::from_parts(EncodingKind::Jpeg, None).is_err());
        assert!(Encoding::jpeg(0).is_err());
        assert!(Encoding::jpeg(101).is_err());
        assert_eq!(Encoding::jpeg(100).unwrap().quality(), Some(100));
    }

    #[test]
    fn malformed_raw8_reports_offsets() {
        let good = encode(&sample(2, 2), Encoding::Raw8).unwrap();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            decode(&bad_magic, EncodingKind::Raw8),
            Err(Error::Decode { offset: 0, .. })
        ));
        assert!(matches!(
            decode(&good[..5], EncodingKind::Raw8),
            Err(Error::Decode { offset: 5, .. })
        ));
        assert!(matches!(
            decode(&good[..20], EncodingKind::Raw8),
            Err(Error::Decode { offset: 20, .. })
        ));
    }

    #[test]
    fn malformed_ppm_reports_offsets() {
        assert!(matches!(
            decode(b"P5\n1 1\n255\n", EncodingKind::Ppm),
            Err(Error::Decode { offset: 0, .. })
        ));
        assert!(matches!(
            decode(b"P6\n1 x\n255\n", EncodingKind::Ppm),
            Err(Error::Decode { offset: 5, .. })
        ));
        assert!(matches!(
            decode(b"P6 # c\n1 1 15 abc", EncodingKind::Ppm),
            Err(Error::Decode { offset: 11, .. })
        ));
        let ok = decode(b"P6 # comment\n1 1\n255\n\x01\x02\x03", EncodingKind::Ppm).unwrap();
        assert_eq!(ok.pixel(0, 0), [1, 2, 3]);
    }

    #[test]
    fn garbage_png_is_a_decode_error() {
        assert!(matches!(
            decode(b"not a png", EncodingKind::Png),
            Err(Error::Decode { .. })
        ));
    }
}
