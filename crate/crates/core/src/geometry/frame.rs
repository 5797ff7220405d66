use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::BBox;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Placement of a presented image inside its parent (full-resolution) image.
///
/// A point `p` in presented pixels sits at `offset + p / scale` in the
/// parent, where `scale` is presented pixels per parent pixel. Serialized as
/// `[offset_x, offset_y, scale]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame<T> {
    pub offset_x: T,
    pub offset_y: T,
    pub scale: T,
}

impl<T: Real> Frame<T> {
    pub fn identity() -> Self {
        Self {
            offset_x: T::zero(),
            offset_y: T::zero(),
            scale: T::one(),
        }
    }

    pub fn try_new(offset_x: T, offset_y: T, scale: T) -> Result<Self> {
        if !(offset_x.is_finite() && offset_y.is_finite() && scale.is_finite()) {
            return Err(Error::Geometry("non-finite frame".into()));
        }
        if scale <= T::zero() {
            return Err(Error::Geometry(format!(
                "frame scale must be > 0, got {scale}"
            )));
        }
        Ok(Self {
            offset_x,
            offset_y,
            scale,
        })
    }

    pub fn new(offset_x: T, offset_y: T, scale: T) -> Self {
        Self::try_new(offset_x, offset_y, scale).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn to_parent(&self, b: &BBox<T>) -> BBox<T> {
        BBox {
            x: self.offset_x + b.x / self.scale,
            y: self.offset_y + b.y / self.scale,
            w: b.w / self.scale,
            h: b.h / self.scale,
        }
    }

    pub fn from_parent(&self, b: &BBox<T>) -> BBox<T> {
        BBox {
            x: (b.x - self.offset_x) * self.scale,
            y: (b.y - self.offset_y) * self.scale,
            w: b.w * self.scale,
            h: b.h * self.scale,
        }
    }

    /// Frame of `child` (expressed in this frame's presented coordinates)
    /// relative to this frame's parent.
    pub fn compose(&self, child: &Frame<T>) -> Frame<T> {
        Frame {
            offset_x: self.offset_x + child.offset_x / self.scale,
            offset_y: self.offset_y + child.offset_y / self.scale,
            scale: self.scale * child.scale,
        }
    }
}

impl<T: Real> Default for Frame<T> {
    fn default() -> Self {
        Self::identity()
    }
}

pub fn to_parent_frame<T: Real>(b: &BBox<T>, frame: &Frame<T>) -> BBox<T> {
    frame.to_parent(b)
}

pub fn from_parent_frame<T: Real>(b: &BBox<T>, frame: &Frame<T>) -> BBox<T> {
    frame.from_parent(b)
}

impl<T: Real + Serialize> Serialize for Frame<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.offset_x, self.offset_y, self.scale].serialize(s)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for Frame<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [ox, oy, s] = <[T; 3]>::deserialize(d)?;
        Self::try_new(ox, oy, s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_frame_is_noop() {
        let b = BBox::new(3.5, 7.0, 10.0, 2.0);
        assert_eq!(to_parent_frame(&b, &Frame::identity()), b);
        assert_eq!(from_parent_frame(&b, &Frame::identity()), b);
    }

    #[test]
    fn half_scale_offset_frame() {
        let f = Frame::new(100.0, 50.0, 0.5);
        let local = BBox::new(10.0, 10.0, 20.0, 10.0);
        let parent = to_parent_frame(&local, &f);
        assert_eq!(parent, BBox::new(120.0, 70.0, 40.0, 20.0));
        assert_eq!(from_parent_frame(&parent, &f), local);
    }

    #[test]
    fn compose_matches_sequential_mapping() {
        let outer = Frame::<f64>::new(40.0, 10.0, 0.25);
        let inner = Frame::new(8.0, 4.0, 2.0);
        let b = BBox::new(1.0, 2.0, 3.0, 4.0);
        let two_step = outer.to_parent(&inner.to_parent(&b));
        let one_step = outer.compose(&inner).to_parent(&b);
        for (a, c) in two_step.to_array().iter().zip(one_step.to_array()) {
            assert!((a - c).abs() < 1e-12f64);
        }
    }

    #[test]
    fn zero_scale_rejected() {
        assert!(Frame::try_new(0.0, 0.0, 0.0).is_err());
        assert!(serde_json::from_str::<Frame<f64>>("[0, 0, -1]").is_err());
    }
}
