use std::io::Write;

use serde::{Deserialize, Serialize};

use super::report::{evaluate, EvalReport};
use crate::error::{Error, Result};
use crate::orchestrator::{CascadePlan, Edge, Mode, RecognitionResult};
use crate::synth::Annotation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Longest edge of the first-stage overview.
    OverviewEdge,
    /// Longest edge of the second-stage regions (car or plate estimate).
    RegionEdge,
    /// Longest edge of the plate crop handed to OCR.
    OcrEdge,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::OverviewEdge => "overview_edge",
            SweepVariable::RegionEdge => "region_edge",
            SweepVariable::OcrEdge => "ocr_edge",
        }
    }

    /// `template` with the variable set to `value`.
    pub fn apply(&self, template: &CascadePlan, value: Edge) -> Result<CascadePlan> {
        let mut plan = template.clone();
        let px = |what: &str| match value {
            Edge::Px(p) => Ok(p),
            Edge::Native => Err(Error::Config(format!("{what} cannot be native"))),
        };
        match self {
            SweepVariable::OverviewEdge => plan.stages[0].max_edge = px("overview_edge")?,
            SweepVariable::RegionEdge => {
                if plan.mode == Mode::SingleStage {
                    return Err(Error::Config(
                        "single-stage plans have no region stage".into(),
                    ));
                }
                plan.stages[1].max_edge = px("region_edge")?;
            }
            SweepVariable::OcrEdge => plan.ocr_max_edge = value,
        }
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: Edge,
    pub car_recall: Option<f64>,
    pub plate_recall: Option<f64>,
    pub char_accuracy: Option<f64>,
    pub mean_pixels_fraction: f64,
    pub mean_cost_pixels_eq1: f64,
    pub mean_cost_wire_bytes: f64,
}

impl SweepRow {
    fn from_report(value: Edge, r: &EvalReport) -> Self {
        let o = r.overall();
        Self {
            value,
            car_recall: o.car_recall,
            plate_recall: o.plate_recall,
            char_accuracy: o.char_accuracy,
            mean_pixels_fraction: r.mean_pixels_fraction,
            mean_cost_pixels_eq1: r.mean_cost_pixels_eq1,
            mean_cost_wire_bytes: r.mean_cost_wire_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub label: String,
    pub variable: SweepVariable,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn column(&self, f: impl Fn(&SweepRow) -> Option<f64>) -> Vec<f64> {
        self.rows.iter().map(|r| f(r).unwrap_or(0.0)).collect()
    }
}

/// Runs `template` once per value through `run` and scores each run.
pub fn sweep_resolution(
    label: &str,
    template: &CascadePlan,
    variable: SweepVariable,
    values: &[Edge],
    annotations: &[Annotation],
    iou_threshold: f64,
    mut run: impl FnMut(&CascadePlan) -> Result<Vec<RecognitionResult>>,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let plan = variable.apply(template, v)?;
        let results = run(&plan)?;
        rows.push(SweepRow::from_report(
            v,
            &evaluate(&results, annotations, iou_threshold),
        ));
    }
    Ok(SweepTable {
        label: label.into(),
        variable,
        rows,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn write_sweep_csv(tables: &[SweepTable], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label",
        "variable",
        "value",
        "car_recall",
        "plate_recall",
        "char_accuracy",
        "mean_pixels_fraction",
        "mean_cost_pixels_eq1",
        "mean_cost_wire_bytes",
    ])?;
    for t in tables {
        for r in &t.rows {
            let value = match r.value {
                Edge::Native => "native".to_string(),
                Edge::Px(p) => p.to_string(),
            };
            w.write_record([
                t.label.clone(),
                t.variable.as_str().to_string(),
                value,
                opt(r.car_recall),
                opt(r.plate_recall),
                opt(r.char_accuracy),
                format!("{:.6}", r.mean_pixels_fraction),
                format!("{:.1}", r.mean_cost_pixels_eq1),
                format!("{:.1}", r.mean_cost_wire_bytes),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
