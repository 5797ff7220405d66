//! Analyst side: detectors, template OCR and the cascade procedures.

pub mod ocr;
pub mod vision;

pub use ocr::{ocr_plate, OcrResult};
pub mod detector;
pub mod oracle;

pub use detector::{class_name, DetectContext, Detector, DetectorRegistry, CLASS_CAR, CLASS_PLATE};
pub use oracle::{oracle_sub_estimate, OracleDetector, OracleParams, PerTier};
pub mod cc;
pub mod external;

pub use cc::CcDetector;
pub use external::{ExternalDetector, ExternalRecord};
pub mod cascade;
pub mod plan;

pub use cascade::{
    run, run_multistage, run_recursive, run_single_stage, RecognitionResult, RecognizedObject,
    ScoredBox,
};
pub use plan::{CascadePlan, Edge, Mode, Selection, StageConfig};
