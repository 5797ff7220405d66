use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::raster::ImageBuffer;
use crate::{BBox, Detection, Frame};

pub const CLASS_CAR: u32 = 1;
pub const CLASS_PLATE: u32 = 2;

/// Tag used for ledger stages and logs.
pub fn class_name(class_id: u32) -> String {
    match class_id {
        CLASS_CAR => "car".into(),
        CLASS_PLATE => "plate".into(),
        other => format!("class{other}"),
    }
}

/// What a detector knows about the image it is looking at.
#[derive(Debug, Clone, Copy)]
pub struct DetectContext<'a> {
    pub image_id: &'a str,
    /// Ledger tag of the request that produced the image.
    pub stage: &'a str,
    /// Maps the image onto the full-resolution source.
    pub frame: Frame,
}

impl DetectContext<'_> {
    /// The part of the source covered by an image of `img`'s size.
    pub fn visible(&self, img: &ImageBuffer) -> BBox {
        self.frame.to_parent(&img.extent())
    }
}

/// Structured detector output in the image's local frame. Sub-object
/// estimates are optional.
pub trait Detector: Send + Sync {
    fn detect(
        &self,
        img: &ImageBuffer,
        ctx: &DetectContext<'_>,
        class_id: u32,
    ) -> Result<Vec<Detection>>;
}

#[derive(Clone, Default)]
pub struct DetectorRegistry {
    detectors: BTreeMap<String, Arc<dyn Detector>>,
}

impl DetectorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, id: impl Into<String>, d: Arc<dyn Detector>) -> &mut Self {
        self.detectors.insert(id.into(), d);
        self
    }

    pub fn get(&self, id: &str) -> Result<&Arc<dyn Detector>> {
        self.detectors
            .get(id)
            .ok_or_else(|| Error::UnknownDetector(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.detectors.keys().map(String::as_str)
    }

    pub fn detect(
        &self,
        id: &str,
        img: &ImageBuffer,
        ctx: &DetectContext<'_>,
        class_id: u32,
    ) -> Result<Vec<Detection>> {
        self.get(id)?.detect(img, ctx, class_id)
    }
}

/// Maps a full-resolution box into the local frame of `img`, clipped to it.
/// `None` when less than `min_visible` of the box area is inside.
pub(crate) fn project_visible(
    b: &BBox,
    img: &ImageBuffer,
    frame: &Frame,
    min_visible: f64,
) -> Option<BBox> {
    let visible = frame.to_parent(&img.extent());
    let inter = b.intersection(&visible)?;
    if b.area() <= 0.0 || inter.area() / b.area() < min_visible {
        return None;
    }
    frame.from_parent(&inter).intersection(&img.extent())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_detector() {
        let reg = DetectorRegistry::new();
        let img = ImageBuffer::filled(4, 4, [0; 3]);
        let ctx = DetectContext {
            image_id: "x",
            stage: "overview",
            frame: Frame::identity(),
        };
        assert!(matches!(
            reg.detect("nope", &img, &ctx, 1),
            Err(Error::UnknownDetector(_))
        ));
    }

    #[test]
    fn projection_respects_visibility() {
        let img = ImageBuffer::filled(50, 50, [0; 3]);
        let frame = Frame::new(100.0, 100.0, 0.5);
        // the image covers [100, 200)² of the source
        let inside = BBox::new(120.0, 120.0, 20.0, 10.0);
        assert_eq!(
            project_visible(&inside, &img, &frame, 0.5),
            Some(BBox::new(10.0, 10.0, 10.0, 5.0))
        );
        let mostly_out = BBox::new(180.0, 100.0, 60.0, 10.0);
        assert_eq!(project_visible(&mostly_out, &img, &frame, 0.5), None);
        assert!(project_visible(&mostly_out, &img, &frame, 0.3).is_some());
    }

    #[test]
    fn class_names() {
        assert_eq!(class_name(CLASS_CAR), "car");
        assert_eq!(class_name(CLASS_PLATE), "plate");
        assert_eq!(class_name(9), "class9");
    }
}
