use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::detector::{DetectContext, DetectorRegistry};
use super::ocr::ocr_plate;
use super::plan::{CascadePlan, Mode, Selection, StageConfig};
use crate::error::{Error, Result};
use crate::geometry::expand_margin;
use crate::provider::{Client, Received, SessionLedger};
use crate::raster::Encoding;
use crate::{BBox, Detection};

pub const STAGE_OVERVIEW: &str = "overview";
pub const STAGE_CAR: &str = "car";
pub const STAGE_PLATE_ESTIMATE: &str = "plate_estimate";
pub const STAGE_PLATE: &str = "plate";

/// A box in the full-resolution frame and the score it was accepted with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognizedObject {
    pub car: Option<ScoredBox>,
    pub plate: Option<ScoredBox>,
    pub text: Option<String>,
    #[serde(default)]
    pub char_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResult {
    pub image_id: String,
    pub mode: Mode,
    pub image_width: u32,
    pub image_height: u32,
    pub objects: Vec<RecognizedObject>,
    /// Everything the provider sent for this run.
    pub ledger: SessionLedger,
}

impl RecognitionResult {
    pub fn plates(&self) -> impl Iterator<Item = &RecognizedObject> {
        self.objects.iter().filter(|o| o.plate.is_some())
    }
}

/// Runs `plan` on one image over an open session.
pub fn run<S: Read + Write>(
    plan: &CascadePlan,
    detectors: &DetectorRegistry,
    image_id: &str,
    client: &mut Client<S>,
) -> Result<RecognitionResult> {
    match plan.mode {
        Mode::Recursive => run_recursive(plan, detectors, image_id, client),
        Mode::Multistage => run_multistage(plan, detectors, image_id, client),
        Mode::SingleStage => run_single_stage(plan, detectors, image_id, client),
    }
}

fn expect_mode(plan: &CascadePlan, mode: Mode) -> Result<()> {
    plan.validate()?;
    if plan.mode != mode {
        return Err(Error::Config(format!(
            "{} plan passed to the {} cascade",
            plan.mode.as_str(),
            mode.as_str()
        )));
    }
    Ok(())
}

struct Run<'a, S> {
    plan: &'a CascadePlan,
    detectors: &'a DetectorRegistry,
    image_id: &'a str,
    client: &'a mut Client<S>,
    encoding: Encoding,
    since: usize,
}

impl<'a, S: Read + Write> Run<'a, S> {
    fn start(
        plan: &'a CascadePlan,
        detectors: &'a DetectorRegistry,
        image_id: &'a str,
        client: &'a mut Client<S>,
    ) -> Result<Self> {
        for s in &plan.stages {
            detectors.get(&s.detector_id)?;
        }
        Ok(Self {
            encoding: plan.encoding()?,
            since: client.images_received(),
            plan,
            detectors,
            image_id,
            client,
        })
    }

    fn overview(&mut self, stage: &StageConfig) -> Result<Received> {
        self.client.overview(
            self.image_id,
            Some(stage.max_edge),
            self.encoding,
            STAGE_OVERVIEW,
        )
    }

    fn region(&mut self, b: &BBox, max_edge: Option<u32>, tag: &str) -> Result<Received> {
        self.client
            .region(self.image_id, b, max_edge, self.encoding, tag)
    }

    /// Detects on `rx`, applies the stage's threshold, NMS and selection,
    /// and maps boxes (and sub-estimates) to full resolution, clipped to the
    /// part of the source `rx` shows.
    fn detect(&self, stage: &StageConfig, rx: &Received, tag: &str) -> Result<Vec<Detection>> {
        let ctx = DetectContext {
            image_id: self.image_id,
            stage: tag,
            frame: rx.frame,
        };
        let visible = ctx.visible(&rx.image);
        let raw = self
            .detectors
            .detect(&stage.detector_id, &rx.image, &ctx, stage.class_id)?;
        let above: Vec<Detection> = raw
            .into_iter()
            .filter(|d| d.class_id == stage.class_id && d.score >= stage.score_threshold)
            .collect();
        let mut kept = crate::geometry::nms(&above, stage.nms_iou);
        if stage.selection == Selection::Top1PerParent {
            kept.truncate(1);
        }
        Ok(kept
            .into_iter()
            .filter_map(|mut d| {
                d.bbox = rx.frame.to_parent(&d.bbox).intersection(&visible)?;
                if let Some(sub) = d.sub_estimate.as_mut() {
                    sub.bbox = rx.frame.to_parent(&sub.bbox);
                }
                Some(d)
            })
            .collect())
    }

    /// Requests the plate at OCR resolution with padding kept inside
    /// `container`, and reads it.
    fn read_plate(&mut self, plate: &BBox, container: &BBox) -> Result<(Option<String>, Vec<f64>)> {
        let pad = self.plan.ocr_padding;
        let region = expand_margin(plate, pad, container)?;
        if region.empty {
            return Ok((None, Vec::new()));
        }
        let rx = self.region(&region.bbox, self.plan.ocr_max_edge.max_edge(), STAGE_PLATE)?;
        let ocr = ocr_plate(&rx.image);
        Ok((Some(ocr.text), ocr.char_scores))
    }

    fn finish(
        self,
        overview: &Received,
        objects: Vec<RecognizedObject>,
    ) -> Result<RecognitionResult> {
        let ledger = self.client.ledger(self.since)?;
        Ok(RecognitionResult {
            image_id: self.image_id.to_string(),
            mode: self.plan.mode,
            image_width: overview.source_width,
            image_height: overview.source_height,
            objects,
            ledger,
        })
    }
}

fn scored(d: &Detection) -> ScoredBox {
    ScoredBox {
        bbox: d.bbox,
        score: d.score,
    }
}

/// Overview → objects → regions of each object → ... → top plate per car →
/// plate crop → OCR. Every stage after the first looks inside the boxes
/// accepted by the one before.
pub fn run_recursive<S: Read + Write>(
    plan: &CascadePlan,
    detectors: &DetectorRegistry,
    image_id: &str,
    client: &mut Client<S>,
) -> Result<RecognitionResult> {
    expect_mode(plan, Mode::Recursive)?;
    let mut run = Run::start(plan, detectors, image_id, client)?;
    let (first, rest) = plan.stages.split_first().expect("validated");
    let overview = run.overview(first)?;
    let cars = run.detect(first, &overview, STAGE_OVERVIEW)?;
    log::debug!("{image_id}: {} cars on overview", cars.len());

    let mut objects = Vec::with_capacity(cars.len());
    for car in &cars {
        // Walk down the chain, keeping the best detection at each level.
        let mut parent = car.clone();
        let mut parent_tag = super::detector::class_name(first.class_id);
        let mut found = true;
        for stage in rest {
            let rx = run.region(&parent.bbox, Some(stage.max_edge), &parent_tag)?;
            match run.detect(stage, &rx, &parent_tag)?.into_iter().next() {
                Some(d) => {
                    parent_tag = super::detector::class_name(stage.class_id);
                    parent = d;
                }
                None => {
                    found = false;
                    break;
                }
            }
        }
        if !found {
            objects.push(RecognizedObject {
                car: Some(scored(car)),
                plate: None,
                text: None,
                char_scores: Vec::new(),
            });
            continue;
        }
        let Some(plate_box) = parent.bbox.intersection(&car.bbox) else {
            continue;
        };
        let (text, char_scores) = run.read_plate(&plate_box, &car.bbox)?;
        objects.push(RecognizedObject {
            car: Some(scored(car)),
            plate: Some(ScoredBox {
                bbox: plate_box,
                score: parent.score,
            }),
            text,
            char_scores,
        });
    }
    run.finish(&overview, objects)
}

/// Overview with per-car plate estimates → margin-expanded estimate region
/// → plate verification → plate crop → OCR. Cars whose estimate region
/// holds no plate above threshold are dropped.
pub fn run_multistage<S: Read + Write>(
    plan: &CascadePlan,
    detectors: &DetectorRegistry,
    image_id: &str,
    client: &mut Client<S>,
) -> Result<RecognitionResult> {
    expect_mode(plan, Mode::Multistage)?;
    let mut run = Run::start(plan, detectors, image_id, client)?;
    let (car_stage, verify) = (&plan.stages[0], &plan.stages[1]);
    let overview = run.overview(car_stage)?;
    let cars = run.detect(car_stage, &overview, STAGE_OVERVIEW)?;

    let mut objects = Vec::with_capacity(cars.len());
    for car in &cars {
        // Without an estimate the whole car is the region (p_s = 0).
        let (estimate, p_s) = match car.sub_estimate {
            Some(s) => (s.bbox, s.score.clamp(0.0, 1.0)),
            None => (car.bbox, 0.0),
        };
        let region = expand_margin(&estimate, 1.0 - p_s, &car.bbox)?;
        if region.empty {
            continue;
        }
        let rx = run.region(&region.bbox, Some(verify.max_edge), STAGE_PLATE_ESTIMATE)?;
        let Some(plate) = run
            .detect(verify, &rx, STAGE_PLATE_ESTIMATE)?
            .into_iter()
            .next()
        else {
            continue;
        };
        let Some(plate_box) = plate.bbox.intersection(&car.bbox) else {
            continue;
        };
        let (text, char_scores) = run.read_plate(&plate_box, &region.bbox)?;
        objects.push(RecognizedObject {
            car: Some(scored(car)),
            plate: Some(ScoredBox {
                bbox: plate_box,
                score: plate.score,
            }),
            text,
            char_scores,
        });
    }
    run.finish(&overview, objects)
}

/// Plates straight off the overview, each read at OCR resolution.
pub fn run_single_stage<S: Read + Write>(
    plan: &CascadePlan,
    detectors: &DetectorRegistry,
    image_id: &str,
    client: &mut Client<S>,
) -> Result<RecognitionResult> {
    expect_mode(plan, Mode::SingleStage)?;
    let mut run = Run::start(plan, detectors, image_id, client)?;
    let stage = &plan.stages[0];
    let overview = run.overview(stage)?;
    let plates = run.detect(stage, &overview, STAGE_OVERVIEW)?;
    let extent = BBox::new(
        0.0,
        0.0,
        overview.source_width as f64,
        overview.source_height as f64,
    );

    let mut objects = Vec::with_capacity(plates.len());
    for plate in &plates {
        let (text, char_scores) = run.read_plate(&plate.bbox, &extent)?;
        objects.push(RecognizedObject {
            car: None,
            plate: Some(scored(plate)),
            text,
            char_scores,
        });
    }
    run.finish(&overview, objects)
}
