use serde::{Deserialize, Serialize};

use super::BBox;
use crate::error::{Error, Result};
use crate::scalar::{clamp, Real};

/// Result of [`expand_margin`]. `empty` is set when the expanded box missed
/// the container entirely; `bbox` is then a zero-size box on the container
/// boundary nearest to the request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct MarginBox<T> {
    #[serde(rename = "box")]
    pub bbox: BBox<T>,
    pub empty: bool,
}

/// Grows `b` by `m·w` on the left and right and `m·h` on top and bottom,
/// then intersects with `container`.
///
/// With `m = 1 − p` for a sub-object confidence `p`, a confident estimate is
/// requested as-is and a doubtful one with up to three times its extent.
pub fn expand_margin<T: Real>(b: &BBox<T>, m: T, container: &BBox<T>) -> Result<MarginBox<T>> {
    if !(m >= T::zero() && m <= T::one()) {
        return Err(Error::Domain(format!("margin must lie in [0, 1], got {m}")));
    }
    let dx = m * b.w;
    let dy = m * b.h;
    let grown = BBox::from_corners(b.x - dx, b.y - dy, b.right() + dx, b.bottom() + dy);
    match grown.intersection(container) {
        Some(bbox) => Ok(MarginBox { bbox, empty: false }),
        None => {
            let x = clamp(grown.x, container.x, container.right());
            let y = clamp(grown.y, container.y, container.bottom());
            Ok(MarginBox {
                bbox: BBox {
                    x,
                    y,
                    w: T::zero(),
                    h: T::zero(),
                },
                empty: true,
            })
        }
    }
}
