use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::detector::{CLASS_CAR, CLASS_PLATE};
use crate::error::{Error, Result};
use crate::raster::{Encoding, EncodingKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Recursive,
    Multistage,
    #[serde(alias = "single")]
    SingleStage,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Recursive => "recursive",
            Mode::Multistage => "multistage",
            Mode::SingleStage => "single_stage",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recursive" => Ok(Mode::Recursive),
            "multistage" => Ok(Mode::Multistage),
            "single" | "single_stage" => Ok(Mode::SingleStage),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    AllAboveThreshold,
    Top1PerParent,
}

/// Longest-edge budget that may also be "native".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Edge {
    #[default]
    Native,
    Px(u32),
}

impl Edge {
    pub fn max_edge(&self) -> Option<u32> {
        match self {
            Edge::Native => None,
            Edge::Px(p) => Some(*p),
        }
    }
}

impl Serialize for Edge {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Edge::Native => s.serialize_str("native"),
            Edge::Px(p) => s.serialize_u32(*p),
        }
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Px(u32),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Px(0) => Err(serde::de::Error::custom("edge must be positive")),
            Raw::Px(p) => Ok(Edge::Px(p)),
            Raw::Word(w) if w == "native" => Ok(Edge::Native),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected pixels or \"native\", got {w:?}"
            ))),
        }
    }
}

fn default_threshold() -> f64 {
    0.3
}

fn default_nms() -> f64 {
    0.3
}

fn default_selection() -> Selection {
    Selection::AllAboveThreshold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub detector_id: String,
    pub class_id: u32,
    #[serde(default = "default_threshold")]
    pub score_threshold: f64,
    /// Longest edge of the image this stage detects on.
    pub max_edge: u32,
    #[serde(default = "default_selection")]
    pub selection: Selection,
    #[serde(default = "default_nms")]
    pub nms_iou: f64,
}

impl StageConfig {
    pub fn new(detector_id: &str, class_id: u32, max_edge: u32, selection: Selection) -> Self {
        Self {
            detector_id: detector_id.into(),
            class_id,
            score_threshold: default_threshold(),
            max_edge,
            selection,
            nms_iou: default_nms(),
        }
    }
}

fn default_padding() -> f64 {
    0.15
}

fn default_encoding() -> EncodingKind {
    EncodingKind::Raw8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadePlan {
    pub mode: Mode,
    pub stages: Vec<StageConfig>,
    #[serde(default)]
    pub ocr_max_edge: Edge,
    /// Margin added around the detected plate before the OCR request, as a
    /// fraction of its size, clamped to the region it was found in.
    #[serde(default = "default_padding")]
    pub ocr_padding: f64,
    /// Encoding requested for every transmission.
    #[serde(default = "default_encoding")]
    pub encoding: EncodingKind,
    #[serde(default)]
    pub quality: Option<u8>,
}

impl CascadePlan {
    fn with_stages(mode: Mode, stages: Vec<StageConfig>) -> Self {
        Self {
            mode,
            stages,
            ocr_max_edge: Edge::Native,
            ocr_padding: default_padding(),
            encoding: default_encoding(),
            quality: None,
        }
    }

    /// Cars on a 500 px overview, plates on 300 px car regions.
    pub fn recursive(detector_id: &str) -> Self {
        Self::with_stages(
            Mode::Recursive,
            vec![
                StageConfig::new(detector_id, CLASS_CAR, 500, Selection::AllAboveThreshold),
                StageConfig::new(detector_id, CLASS_PLATE, 300, Selection::Top1PerParent),
            ],
        )
    }

    /// Cars with plate estimates on a 600 px overview, plate check on
    /// 200 px estimate regions.
    pub fn multistage(detector_id: &str) -> Self {
        Self::with_stages(
            Mode::Multistage,
            vec![
                StageConfig::new(detector_id, CLASS_CAR, 600, Selection::AllAboveThreshold),
                StageConfig::new(detector_id, CLASS_PLATE, 200, Selection::Top1PerParent),
            ],
        )
    }

    /// Plates straight from a 500 px overview.
    pub fn single_stage(detector_id: &str) -> Self {
        Self::with_stages(
            Mode::SingleStage,
            vec![StageConfig::new(
                detector_id,
                CLASS_PLATE,
                500,
                Selection::AllAboveThreshold,
            )],
        )
    }

    pub fn for_mode(mode: Mode, detector_id: &str) -> Self {
        match mode {
            Mode::Recursive => Self::recursive(detector_id),
            Mode::Multistage => Self::multistage(detector_id),
            Mode::SingleStage => Self::single_stage(detector_id),
        }
    }

    pub fn encoding(&self) -> Result<Encoding> {
        Encoding::from_parts(self.encoding, self.quality)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.stages.len();
        let ok = match self.mode {
            Mode::Recursive => n >= 2,
            Mode::Multistage => n == 2,
            Mode::SingleStage => n == 1,
        };
        if !ok {
            return Err(Error::Config(format!(
                "{} plan cannot have {n} stages",
                self.mode.as_str()
            )));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.score_threshold) {
                return Err(Error::Config(format!(
                    "stage {i}: score_threshold outside [0, 1]"
                )));
            }
            if !(0.0..=1.0).contains(&s.nms_iou) {
                return Err(Error::Config(format!("stage {i}: nms_iou outside [0, 1]")));
            }
            if s.max_edge == 0 {
                return Err(Error::Config(format!(
                    "stage {i}: max_edge must be positive"
                )));
            }
            if s.class_id == 0 {
                return Err(Error::Config(format!("stage {i}: class 0 is background")));
            }
        }
        if !(0.0..=1.0).contains(&self.ocr_padding) {
            return Err(Error::Config("ocr_padding outside [0, 1]".into()));
        }
        self.encoding()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for mode in [Mode::Recursive, Mode::Multistage, Mode::SingleStage] {
            CascadePlan::for_mode(mode, "oracle").validate().unwrap();
        }
    }

    #[test]
    fn stage_counts_enforced() {
        let mut p = CascadePlan::recursive("oracle");
        p.stages.truncate(1);
        assert!(p.validate().is_err());
        let mut p = CascadePlan::multistage("oracle");
        p.stages.push(p.stages[1].clone());
        assert!(p.validate().is_err());
        let mut p = CascadePlan::single_stage("oracle");
        p.stages[0].score_threshold = 1.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let text = r#"{"mode":"single","stages":[{"detector_id":"oracle","class_id":2,"max_edge":500}],"ocr_max_edge":120}"#;
        let p: CascadePlan = serde_json::from_str(text).unwrap();
        assert_eq!(p.mode, Mode::SingleStage);
        assert_eq!(p.stages[0].score_threshold, 0.3);
        assert_eq!(p.stages[0].nms_iou, 0.3);
        assert_eq!(p.ocr_max_edge, Edge::Px(120));
        let back: CascadePlan = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        let native = serde_json::to_value(CascadePlan::recursive("oracle")).unwrap();
        assert_eq!(native["ocr_max_edge"], "native");
        assert!(serde_json::from_str::<Edge>("\"huge\"").is_err());
        assert!(serde_json::from_str::<Edge>("0").is_err());
    }

    #[test]
    fn jpeg_transport_needs_quality() {
        let mut p = CascadePlan::recursive("oracle");
        p.encoding = EncodingKind::Jpeg;
        assert!(p.validate().is_err());
        p.quality = Some(75);
        p.validate().unwrap();
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("single".parse::<Mode>().unwrap(), Mode::SingleStage);
        assert!("twostage".parse::<Mode>().is_err());
    }
}
