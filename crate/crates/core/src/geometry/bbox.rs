use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Axis-aligned box: left edge, top edge, width, height.
///
/// Serialized as the array `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BBox<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T: Real> BBox<T> {
    pub fn try_new(x: T, y: T, w: T, h: T) -> Result<Self> {
        let all_finite = x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite();
        if !all_finite {
            return Err(Error::Geometry(format!(
                "non-finite box ({x}, {y}, {w}, {h})"
            )));
        }
        if w < T::zero() || h < T::zero() {
            return Err(Error::Geometry(format!("negative extent ({w}, {h})")));
        }
        Ok(Self { x, y, w, h })
    }

    /// Panics on non-finite fields or negative extent.
    pub fn new(x: T, y: T, w: T, h: T) -> Self {
        Self::try_new(x, y, w, h).unwrap_or_else(|e| panic!("{e}"))
    }

    /// Box spanning `[x0, x1) × [y0, y1)`; reversed corners collapse to zero extent.
    pub fn from_corners(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self {
            x: x0,
            y: y0,
            w: (x1 - x0).max(T::zero()),
            h: (y1 - y0).max(T::zero()),
        }
    }

    #[inline]
    pub fn right(&self) -> T {
        self.x + self.w
    }

    #[inline]
    pub fn bottom(&self) -> T {
        self.y + self.h
    }

    #[inline]
    pub fn area(&self) -> T {
        self.w * self.h
    }

    #[inline]
    pub fn long_edge(&self) -> T {
        self.w.max(self.h)
    }

    pub fn center(&self) -> (T, T) {
        (self.x + self.w * T::half(), self.y + self.h * T::half())
    }

    pub fn is_empty(&self) -> bool {
        self.w <= T::zero() || self.h <= T::zero()
    }

    /// Overlap of two boxes, `None` when it has no area.
    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 > x0 && y1 > y0 {
            Some(Self::from_corners(x0, y0, x1, y1))
        } else {
            None
        }
    }

    pub fn contains(&self, other: &Self) -> bool {
        self.contains_eps(other, T::zero())
    }

    /// Containment with slack `eps` on every side.
    pub fn contains_eps(&self, other: &Self, eps: T) -> bool {
        other.x >= self.x - eps
            && other.y >= self.y - eps
            && other.right() <= self.right() + eps
            && other.bottom() <= self.bottom() + eps
    }

    /// Intersection with the image extent `[0, width) × [0, height)`.
    pub fn clip_to(&self, width: T, height: T) -> Option<Self> {
        self.intersection(&Self::from_corners(T::zero(), T::zero(), width, height))
    }

    pub fn cast<U: Real>(&self) -> BBox<U> {
        BBox {
            x: U::lit(self.x.to_f64_lossy()),
            y: U::lit(self.y.to_f64_lossy()),
            w: U::lit(self.w.to_f64_lossy()),
            h: U::lit(self.h.to_f64_lossy()),
        }
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// Intersection over union; zero when the union has no area.
pub fn iou<T: Real>(a: &BBox<T>, b: &BBox<T>) -> T {
    let inter = a.intersection(b).map(|i| i.area()).unwrap_or_else(T::zero);
    let union = a.area() + b.area() - inter;
    if union <= T::zero() {
        T::zero()
    } else {
        (inter / union).min(T::one())
    }
}

impl<T: Real + Serialize> Serialize for BBox<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for BBox<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y, w, h] = <[T; 4]>::deserialize(d)?;
        Self::try_new(x, y, w, h).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts unit cells of a fine grid covered by both boxes; exact for boxes
    /// whose corners lie on the grid.
    fn grid_iou(a: &BBox<f64>, b: &BBox<f64>, step: f64) -> f64 {
        let covers = |bx: &BBox<f64>, cx: f64, cy: f64| {
            cx >= bx.x && cx < bx.right() && cy >= bx.y && cy < bx.bottom()
        };
        let (mut inter, mut union) = (0u64, 0u64);
        let n = (10.0 / step) as i64;
        for i in -n..n {
            for j in -n..n {
                let (cx, cy) = ((i as f64 + 0.5) * step, (j as f64 + 0.5) * step);
                let (ia, ib) = (covers(a, cx, cy), covers(b, cx, cy));
                inter += (ia && ib) as u64;
                union += (ia || ib) as u64;
            }
        }
        inter as f64 / union as f64
    }

    #[test]
    fn iou_identity_and_disjoint() {
        let a = BBox::new(3.0, 4.0, 5.0, 6.0);
        assert_eq!(iou(&a, &a), 1.0);
        let b = BBox::new(20.0, 20.0, 1.0, 1.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_partial_overlap_matches_cell_count() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        let b = BBox::new(1.0, 1.0, 2.0, 2.0);
        // intersection 1, union 4 + 4 - 1 = 7
        let oracle = grid_iou(&a, &b, 0.25);
        assert!((oracle - 1.0 / 7.0).abs() < 1e-12);
        assert!((iou(&a, &b) - oracle).abs() < 1e-12);
    }

    #[test]
    fn degenerate_boxes_have_zero_iou() {
        let a = BBox::new(1.0, 1.0, 0.0, 0.0);
        assert_eq!(iou(&a, &a), 0.0);
        let b = BBox::new(1.0, 1.0, 0.0, 5.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn rejects_invalid_boxes() {
        assert!(BBox::try_new(0.0, 0.0, -1.0, 1.0).is_err());
        assert!(BBox::try_new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(serde_json::from_str::<BBox<f64>>("[0, 0, -2, 1]").is_err());
        let b: BBox<f32> = serde_json::from_str("[1, 2, 3, 4]").unwrap();
        assert_eq!(b, BBox::new(1.0, 2.0, 3.0, 4.0));
    }
}
