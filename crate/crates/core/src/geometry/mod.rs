//! Boxes, coordinate frames, overlap and suppression, margin expansion, and
//! the per-ROI loss terms used to score sub-object estimates.
//!
//! Everything here is generic over [`Real`](crate::scalar::Real) so the same
//! code runs on `f32` (detector outputs) and `f64` (ledger/frame bookkeeping).
//! Boxes are `(x, y, w, h)` in the pixel frame of the image they were
//! produced from; a [`Frame`] maps that image back onto full resolution.

mod bbox;
mod detection;
mod frame;
mod loss;
mod margin;

pub use bbox::{iou, BBox};
pub use detection::{nms, rank, Detection, SubEstimate};
pub use frame::{from_parent_frame, to_parent_frame, Frame};
pub use loss::{localization_loss, log_loss, roi_loss, smooth_l1, RoiOutput, RoiTruth};
pub use margin::{expand_margin, MarginBox};
