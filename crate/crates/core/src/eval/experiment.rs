//! End-to-end runs on the synthetic corpus: an in-process provider, every
//! configured cascade plan, PR curves, sweeps and the JPEG baseline, with
//! deterministic outputs.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pr::{default_thresholds, pr_curve, write_pr_csv, PrCurve};
use super::report::{evaluate, EvalReport, DEFAULT_IOU};
use super::sweep::{write_sweep_csv, SweepRow, SweepTable, SweepVariable};
use crate::baseline::{
    frontier, grid_for_image, merge_grid, write_frontier_csv, write_grid_csv, BaselineConfig,
    FrontierRow, GridOutcome, ImageGrid, SummaryPoint,
};
use crate::error::{Error, Result};
use crate::orchestrator::{
    self, CascadePlan, CcDetector, DetectorRegistry, Edge, Mode, OracleDetector, OracleParams,
    RecognitionResult,
};
use crate::provider::{spawn, Client, CostMode, ImageStore, ServerConfig, SynthStore, DEFAULT_RHO};
use crate::raster::EncodingKind;
use crate::synth::{image_id, layout_scene, Annotation, SceneSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPlan {
    pub label: String,
    pub plan: CascadePlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub label: String,
    /// Label of the plan used as template.
    pub base: String,
    pub variable: SweepVariable,
    pub values: Vec<Edge>,
}

/// Encoding used for every cascade transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transport {
    pub encoding: EncodingKind,
    #[serde(default)]
    pub quality: Option<u8>,
}

impl Default for Transport {
    fn default() -> Self {
        Self {
            encoding: EncodingKind::Jpeg,
            quality: Some(75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneSpec,
    pub oracle: OracleParams,
    /// `oracle` or `cc`; default plans use it for every stage.
    pub detector: String,
    pub rho: f64,
    pub transport: Transport,
    /// Half-open scene index ranges.
    pub test_split: (u32, u32),
    pub validation_split: (u32, u32),
    pub iou_threshold: f64,
    /// Plans run on the test split. Empty means the three default plans.
    pub plans: Vec<NamedPlan>,
    /// Plans (by label) re-run with their last plate threshold lowered to
    /// the smallest PR threshold.
    pub pr_plans: Vec<String>,
    pub pr_thresholds: Vec<f64>,
    /// Run on the validation split.
    pub sweeps: Vec<SweepSpec>,
    /// `None` skips the JPEG grid.
    pub baseline: Option<BaselineConfig>,
    /// Worker threads; `None` uses all cores. Never written out, since
    /// results do not depend on it.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

fn px(values: &[u32]) -> Vec<Edge> {
    values.iter().map(|&v| Edge::Px(v)).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            oracle: OracleParams::default(),
            detector: "oracle".into(),
            rho: DEFAULT_RHO,
            transport: Transport::default(),
            test_split: (200, 300),
            validation_split: (150, 200),
            iou_threshold: DEFAULT_IOU,
            plans: Vec::new(),
            pr_plans: vec!["recursive".into(), "single_stage".into()],
            pr_thresholds: default_thresholds(),
            sweeps: vec![
                SweepSpec {
                    label: "overview_edge".into(),
                    base: "recursive".into(),
                    variable: SweepVariable::OverviewEdge,
                    values: px(&[100, 200, 300, 400, 500, 600, 800]),
                },
                SweepSpec {
                    label: "region_edge".into(),
                    base: "recursive".into(),
                    variable: SweepVariable::RegionEdge,
                    values: px(&[100, 150, 200, 300, 400, 600]),
                },
                SweepSpec {
                    label: "ocr_edge".into(),
                    base: "recursive".into(),
                    variable: SweepVariable::OcrEdge,
                    values: [px(&[15, 20, 30, 45, 60, 90, 150]), vec![Edge::Native]].concat(),
                },
            ],
            baseline: Some(BaselineConfig::default()),
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(&fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The configured plans, or the default three, with the transport
    /// encoding applied.
    pub fn resolved_plans(&self) -> Vec<NamedPlan> {
        let plans = if self.plans.is_empty() {
            [Mode::Recursive, Mode::Multistage, Mode::SingleStage]
                .iter()
                .map(|&m| NamedPlan {
                    label: m.as_str().into(),
                    plan: CascadePlan::for_mode(m, &self.detector),
                })
                .collect()
        } else {
            self.plans.clone()
        };
        plans
            .into_iter()
            .map(|mut p| {
                p.plan.encoding = self.transport.encoding;
                p.plan.quality = self.transport.quality;
                p
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.oracle.validate()?;
        for (name, (a, b)) in [
            ("test_split", self.test_split),
            ("validation_split", self.validation_split),
        ] {
            if a > b {
                return Err(Error::Config(format!("{name} is reversed")));
            }
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config("rho must be positive".into()));
        }
        let plans = self.resolved_plans();
        for p in &plans {
            p.plan.validate()?;
        }
        let find = |label: &str| {
            plans
                .iter()
                .find(|p| p.label == label)
                .ok_or_else(|| Error::Config(format!("no plan labelled `{label}`")))
        };
        for l in &self.pr_plans {
            find(l)?;
        }
        if !self.pr_plans.is_empty() && self.pr_thresholds.is_empty() {
            return Err(Error::Config("pr_thresholds is empty".into()));
        }
        for s in &self.sweeps {
            let base = find(&s.base)?;
            for &v in &s.values {
                s.variable.apply(&base.plan, v)?;
            }
        }
        if let Some(b) = &self.baseline {
            b.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub label: String,
    pub plan: CascadePlan,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub runs: Vec<PlanReport>,
    pub pr_curves: Vec<PrCurve>,
    pub sweeps: Vec<SweepTable>,
    pub baseline: Option<GridOutcome>,
    pub frontier: Vec<FrontierRow>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn run(&self, label: &str) -> Option<&PlanReport> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn pr(&self, label: &str) -> Option<&PrCurve> {
        self.pr_curves.iter().find(|c| c.label == label)
    }

    pub fn sweep(&self, label: &str) -> Option<&SweepTable> {
        self.sweeps.iter().find(|s| s.label == label)
    }
}

pub struct Experiment {
    pub report: ExperimentReport,
    /// Per main plan, in plan order, one result per test image.
    pub results: Vec<(String, Vec<RecognitionResult>)>,
}

fn split_ids((a, b): (u32, u32)) -> Vec<String> {
    (a..b).map(image_id).collect()
}

fn with_plate_threshold(plan: &CascadePlan, t: f64) -> CascadePlan {
    let mut p = plan.clone();
    if let Some(last) = p.stages.last_mut() {
        last.score_threshold = t;
    }
    p
}

fn registry(cfg: &ExperimentConfig, annotations: &[Annotation]) -> Result<DetectorRegistry> {
    let mut reg = DetectorRegistry::new();
    reg.register(
        "oracle",
        Arc::new(OracleDetector::new(
            cfg.oracle.clone(),
            annotations.to_vec(),
        )?),
    );
    reg.register("cc", Arc::new(CcDetector::default()));
    reg.get(&cfg.detector)?;
    Ok(reg)
}

/// Runs the whole configured pipeline.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.validate()?;
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_inner(cfg)),
        None => run_inner(cfg),
    }
}

fn run_inner(cfg: &ExperimentConfig) -> Result<Experiment> {
    let test_ids = split_ids(cfg.test_split);
    let val_ids = split_ids(cfg.validation_split);
    let indices: Vec<u32> = (cfg.test_split.0..cfg.test_split.1)
        .chain(cfg.validation_split.0..cfg.validation_split.1)
        .collect();
    let annotations: Vec<Annotation> = indices
        .par_iter()
        .map(|&i| layout_scene(&cfg.scene, i).map(|l| l.annotations()))
        .collect::<Result<Vec<_>>>()?
        .concat();
    let store = Arc::new(
        SynthStore::new(cfg.scene.clone(), indices.iter().copied())?
            .with_cache(4.max(2 * rayon::current_num_threads())),
    );
    let server = spawn(
        store.clone() as Arc<dyn ImageStore>,
        "127.0.0.1:0",
        ServerConfig {
            rho: cfg.rho,
            ..ServerConfig::default()
        },
    )?;
    let addr = server.local_addr();
    let reg = registry(cfg, &annotations)?;
    let mut by_image: HashMap<&str, Vec<&Annotation>> = HashMap::new();
    for a in &annotations {
        by_image.entry(a.image_id.as_str()).or_default().push(a);
    }

    let plans = cfg.resolved_plans();
    let find = |label: &str| {
        &plans
            .iter()
            .find(|p| p.label == label)
            .expect("validated")
            .plan
    };
    let pr_floor = cfg
        .pr_thresholds
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut test_plans: Vec<CascadePlan> = plans.iter().map(|p| p.plan.clone()).collect();
    test_plans.extend(
        cfg.pr_plans
            .iter()
            .map(|l| with_plate_threshold(find(l), pr_floor)),
    );
    let mut val_plans = Vec::new();
    for s in &cfg.sweeps {
        for &v in &s.values {
            val_plans.push(s.variable.apply(find(&s.base), v)?);
        }
    }

    // One pass per image so each scene is rendered once.
    let run_all = |id: &str, plans: &[CascadePlan]| -> Result<Vec<RecognitionResult>> {
        plans
            .iter()
            .map(|plan| {
                let mut client = Client::connect(addr)?;
                client.hello(Some(cfg.rho))?;
                orchestrator::run(plan, &reg, id, &mut client)
            })
            .collect()
    };
    let test_out: Vec<(Vec<RecognitionResult>, Option<ImageGrid>)> = test_ids
        .par_iter()
        .map(|id| {
            let runs = run_all(id, &test_plans)?;
            let grid = match &cfg.baseline {
                Some(b) => {
                    let anns = by_image
                        .get(id.as_str())
                        .map(Vec::as_slice)
                        .unwrap_or_default();
                    grid_for_image(store.as_ref(), id, anns, b)?
                }
                None => None,
            };
            log::info!("{id} done");
            Ok((runs, grid))
        })
        .collect::<Result<_>>()?;
    let val_out: Vec<Vec<RecognitionResult>> = val_ids
        .par_iter()
        .map(|id| run_all(id, &val_plans))
        .collect::<Result<_>>()?;
    server.shutdown();

    let column = |rows: &[Vec<RecognitionResult>], j: usize| -> Vec<RecognitionResult> {
        rows.iter().map(|r| r[j].clone()).collect()
    };
    let test_rows: Vec<Vec<RecognitionResult>> = test_out.iter().map(|(r, _)| r.clone()).collect();

    let mut results = Vec::new();
    let mut runs = Vec::new();
    for (j, p) in plans.iter().enumerate() {
        let res = column(&test_rows, j);
        runs.push(PlanReport {
            label: p.label.clone(),
            plan: p.plan.clone(),
            report: evaluate(&res, &annotations, cfg.iou_threshold),
        });
        results.push((p.label.clone(), res));
    }
    let pr_curves = cfg
        .pr_plans
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let res = column(&test_rows, plans.len() + k);
            pr_curve(l, &res, &annotations, &cfg.pr_thresholds, cfg.iou_threshold)
        })
        .collect();
    let mut sweeps = Vec::new();
    let mut j = 0;
    for s in &cfg.sweeps {
        let mut rows = Vec::with_capacity(s.values.len());
        for &v in &s.values {
            let r = evaluate(&column(&val_out, j), &annotations, cfg.iou_threshold);
            let o = r.overall();
            rows.push(SweepRow {
                value: v,
                car_recall: o.car_recall,
                plate_recall: o.plate_recall,
                char_accuracy: o.char_accuracy,
                mean_pixels_fraction: r.mean_pixels_fraction,
                mean_cost_pixels_eq1: r.mean_cost_pixels_eq1,
                mean_cost_wire_bytes: r.mean_cost_wire_bytes,
            });
            j += 1;
        }
        sweeps.push(SweepTable {
            label: s.label.clone(),
            variable: s.variable,
            rows,
        });
    }

    let baseline = match &cfg.baseline {
        Some(b) => {
            let grids: Vec<Option<ImageGrid>> = test_out.into_iter().map(|(_, g)| g).collect();
            Some(merge_grid(b, &grids)?)
        }
        None => None,
    };
    let mut points = Vec::new();
    for r in &runs {
        let acc = r.report.overall().char_accuracy.unwrap_or(0.0);
        for mode in [CostMode::WireBytes, CostMode::PixelsEq1] {
            let tag = match mode {
                CostMode::WireBytes => "wire_bytes",
                CostMode::PixelsEq1 => "pixels_eq1",
            };
            points.push(SummaryPoint {
                label: format!("{}:{tag}", r.label),
                mean_cost_bytes: r.report.mean_cost(mode),
                char_accuracy: acc,
            });
        }
    }
    let grid_points = baseline
        .as_ref()
        .map(|g| g.points.as_slice())
        .unwrap_or_default();
    let frontier = frontier(grid_points, &points);

    Ok(Experiment {
        report: ExperimentReport {
            config: cfg.clone(),
            runs,
            pr_curves,
            sweeps,
            baseline,
            frontier,
            notes: vec![
                "The JPEG baseline is given ground-truth plate boxes; the cascades detect their own.".into(),
                "Character accuracy is 1 - levenshtein/max(len), averaged over ground-truth plates; unmatched plates score 0.".into(),
            ],
        },
        results,
    })
}

impl Experiment {
    /// Writes results.jsonl, report.json, grid.csv, frontier.csv, pr.csv
    /// and sweeps.csv into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut out = BufWriter::new(File::create(dir.join("results.jsonl"))?);
        for (_, res) in &self.results {
            for r in res {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
        }
        out.flush()?;
        let mut rep = BufWriter::new(File::create(dir.join("report.json"))?);
        serde_json::to_writer_pretty(&mut rep, &self.report)?;
        rep.write_all(b"\n")?;
        rep.flush()?;
        if let Some(g) = &self.report.baseline {
            write_grid_csv(&g.points, File::create(dir.join("grid.csv"))?)?;
        }
        write_frontier_csv(
            &self.report.frontier,
            File::create(dir.join("frontier.csv"))?,
        )?;
        write_pr_csv(&self.report.pr_curves, File::create(dir.join("pr.csv"))?)?;
        write_sweep_csv(&self.report.sweeps, File::create(dir.join("sweeps.csv"))?)?;
        Ok(())
    }
}
