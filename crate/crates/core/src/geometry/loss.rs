use super::BBox;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// `0.5x²` inside the unit interval, `|x| − 0.5` outside.
pub fn smooth_l1<T: Real>(x: T) -> T {
    let a = x.abs();
    if a < T::one() {
        T::half() * x * x
    } else {
        a - T::half()
    }
}

/// Sum of [`smooth_l1`] over the four coordinate differences, gated on the
/// ROI belonging to a real (non-background) class.
pub fn localization_loss<T: Real>(pred: &BBox<T>, gt: &BBox<T>, class_present: bool) -> T {
    if !class_present {
        return T::zero();
    }
    pred.to_array()
        .iter()
        .zip(gt.to_array())
        .map(|(p, g)| smooth_l1(*p - g))
        .fold(T::zero(), |acc, v| acc + v)
}

/// Negative log-likelihood of the true class.
pub fn log_loss<T: Real>(score: T) -> Result<T> {
    if !(score > T::zero() && score <= T::one()) {
        return Err(Error::Domain(format!(
            "log loss needs a probability in (0, 1], got {score}"
        )));
    }
    Ok(-score.ln())
}

/// Four-head output for one ROI: probability assigned to the true object
/// class and object box, probability assigned to the true sub-object class
/// and sub-object box.
#[derive(Debug, Clone, Copy)]
pub struct RoiOutput<T> {
    pub object_prob: T,
    pub object_box: BBox<T>,
    pub sub_prob: T,
    pub sub_box: BBox<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct RoiTruth<T> {
    pub object_class: u32,
    pub sub_class: u32,
    pub object_box: BBox<T>,
    pub sub_box: BBox<T>,
}

/// Object class loss + sub-object class loss + both localization losses.
pub fn roi_loss<T: Real>(out: &RoiOutput<T>, gt: &RoiTruth<T>) -> Result<T> {
    Ok(log_loss(out.object_prob)?
        + log_loss(out.sub_prob)?
        + localization_loss(&out.object_box, &gt.object_box, gt.object_class >= 1)
        + localization_loss(&out.sub_box, &gt.sub_box, gt.sub_class >= 1))
}
