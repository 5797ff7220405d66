//! Replays detections produced elsewhere (e.g. a real network) from a JSON
//! lines sidecar. Boxes in the sidecar are in the full-resolution frame.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::detector::{project_visible, DetectContext, Detector};
use crate::error::{Error, Result};
use crate::geometry::{rank, SubEstimate};
use crate::raster::ImageBuffer;
use crate::{BBox, Detection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalRecord {
    pub image_id: String,
    /// Restricts the record to one stage tag; absent matches every stage.
    #[serde(default)]
    pub stage: Option<String>,
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
    #[serde(default)]
    pub sub_estimate: Option<SubEstimate<f64>>,
}

#[derive(Debug, Default)]
pub struct ExternalDetector {
    records: HashMap<String, Vec<ExternalRecord>>,
}

impl ExternalDetector {
    pub fn new(records: impl IntoIterator<Item = ExternalRecord>) -> Self {
        let mut map: HashMap<String, Vec<ExternalRecord>> = HashMap::new();
        for r in records {
            map.entry(r.image_id.clone()).or_default().push(r);
        }
        Self { records: map }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: ExternalRecord = serde_json::from_str(&line).map_err(|e| Error::Annotation {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            if !(0.0..=1.0).contains(&r.score) {
                return Err(Error::Annotation {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("score {} outside [0, 1]", r.score),
                });
            }
            records.push(r);
        }
        Ok(Self::new(records))
    }
}

impl Detector for ExternalDetector {
    fn detect(
        &self,
        img: &ImageBuffer,
        ctx: &DetectContext<'_>,
        class_id: u32,
    ) -> Result<Vec<Detection>> {
        let mut out = Vec::new();
        for r in self
            .records
            .get(ctx.image_id)
            .map(Vec::as_slice)
            .unwrap_or_default()
        {
            if r.class_id != class_id || r.stage.as_deref().is_some_and(|s| s != ctx.stage) {
                continue;
            }
            let Some(local) = project_visible(&r.bbox, img, &ctx.frame, 0.5) else {
                continue;
            };
            let mut det = Detection::new(local, class_id, r.score);
            if let Some(sub) = r.sub_estimate {
                det = det.with_sub_estimate(ctx.frame.from_parent(&sub.bbox), sub.score);
            }
            out.push(det);
        }
        out.sort_by(rank);
        Ok(out)
    }
}
