use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use bandseek::baseline::{run_jpeg_grid, write_grid_csv, BaselineConfig};
use bandseek::eval::experiment::{run_experiment, ExperimentConfig, SweepSpec};
use bandseek::eval::{evaluate, pr_curve, write_sweep_csv, SweepVariable, DEFAULT_IOU};
use bandseek::orchestrator::{
    self, CascadePlan, CcDetector, DetectorRegistry, Edge, ExternalDetector, Mode, OracleDetector,
    OracleParams, RecognitionResult,
};
use bandseek::provider::{
    self, Client, DirStore, ImageStore, ServerConfig, SynthStore, DEFAULT_RHO,
};
use bandseek::raster::{encode, Encoding};
use bandseek::synth::{
    generate_scene, image_id, read_annotations, write_annotations, Annotation, SceneSpec,
};
use clap::{Parser, Subcommand, ValueEnum};

const ANNOTATIONS: &str = "annotations.jsonl";

#[derive(Parser)]
#[command(
    name = "bandseek",
    version,
    about = "Bandwidth-metered progressive region recognition"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImageFormat {
    Png,
    Ppm,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorKind {
    Oracle,
    Cc,
    External,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render synthetic scenes and their annotations into a corpus directory.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Half-open index range, e.g. 200..300.
        #[arg(long, default_value = "200..300", value_parser = parse_range)]
        scenes: (u32, u32),
        /// SceneSpec JSON; defaults when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "png")]
        format: ImageFormat,
    },
    /// Serve a corpus directory (or synthetic scenes) over TCP.
    Serve {
        #[arg(long, conflicts_with = "synthetic")]
        corpus: Option<PathBuf>,
        /// Render scenes in this index range on demand instead of reading files.
        #[arg(long, value_parser = parse_range)]
        synthetic: Option<(u32, u32)>,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: String,
        #[arg(long, default_value_t = DEFAULT_RHO)]
        rho: f64,
    },
    /// Run a cascade against a server on every image it lists.
    Run {
        #[arg(long)]
        mode: Option<String>,
        /// Directory holding annotations.jsonl, used by the oracle detector.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        server: String,
        /// CascadePlan JSON; the default plan for --mode when absent.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "oracle")]
        detector: DetectorKind,
        /// JSON-lines detections for the external detector.
        #[arg(long)]
        detections: Option<PathBuf>,
        /// OracleParams JSON.
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// JPEG resolution × quality grid with ground-truth plate boxes.
    Baseline {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long = "R", value_delimiter = ',')]
        resolutions: Option<Vec<u32>>,
        #[arg(long = "Q", value_delimiter = ',')]
        qualities: Option<Vec<u8>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a results file against annotations.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IOU)]
        iou: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resolution sweep on the validation split of a synthetic corpus.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        variable: Variable,
        /// Comma-separated pixels or `native`.
        #[arg(long, value_delimiter = ',', value_parser = parse_edge)]
        values: Vec<Edge>,
        #[arg(long, default_value = "recursive")]
        base: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// The full pipeline: cascades, PR curves, sweeps and the JPEG grid.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads; outputs do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default experiment configuration as JSON.
    DefaultConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variable {
    OverviewEdge,
    RegionEdge,
    OcrEdge,
}

impl From<Variable> for SweepVariable {
    fn from(v: Variable) -> Self {
        match v {
            Variable::OverviewEdge => SweepVariable::OverviewEdge,
            Variable::RegionEdge => SweepVariable::RegionEdge,
            Variable::OcrEdge => SweepVariable::OcrEdge,
        }
    }
}

fn parse_range(s: &str) -> std::result::Result<(u32, u32), String> {
    let (a, b) = s.split_once("..").ok_or("expected START..END")?;
    let a: u32 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: u32 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a > b {
        return Err("range is reversed".into());
    }
    Ok((a, b))
}

fn parse_edge(s: &str) -> std::result::Result<Edge, String> {
    match s.trim() {
        "native" => Ok(Edge::Native),
        v => match v.parse::<u32>() {
            Ok(0) | Err(_) => Err(format!("expected positive pixels or `native`, got {v:?}")),
            Ok(p) => Ok(Edge::Px(p)),
        },
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn scene_spec(path: Option<&Path>) -> Result<SceneSpec> {
    let spec = match path {
        Some(p) => read_json(p)?,
        None => SceneSpec::default(),
    };
    spec.validate()?;
    Ok(spec)
}

fn generate(out: &Path, (a, b): (u32, u32), spec: &SceneSpec, format: ImageFormat) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut all: Vec<Annotation> = Vec::new();
    for i in a..b {
        let (img, anns) = generate_scene(spec, i)?;
        let (enc, ext) = match format {
            ImageFormat::Png => (Encoding::Png, "png"),
            ImageFormat::Ppm => (Encoding::Ppm, "ppm"),
        };
        fs::write(
            out.join(format!("{}.{ext}", image_id(i))),
            encode(&img, enc)?,
        )?;
        all.extend(anns);
        log::info!("wrote {}", image_id(i));
    }
    write_annotations(&all, &out.join(ANNOTATIONS))?;
    fs::write(
        out.join("scene_spec.json"),
        serde_json::to_vec_pretty(spec)?,
    )?;
    println!(
        "{} scenes, {} annotations in {}",
        b - a,
        all.len(),
        out.display()
    );
    Ok(())
}

fn registry(
    kind: DetectorKind,
    corpus: Option<&Path>,
    detections: Option<&Path>,
    oracle: Option<&Path>,
) -> Result<(DetectorRegistry, &'static str)> {
    let mut reg = DetectorRegistry::new();
    let id = match kind {
        DetectorKind::Oracle => {
            let dir =
                corpus.context("the oracle detector needs --corpus with annotations.jsonl")?;
            let params: OracleParams = match oracle {
                Some(p) => read_json(p)?,
                None => OracleParams::default(),
            };
            let anns = read_annotations(&dir.join(ANNOTATIONS))?;
            reg.register("oracle", Arc::new(OracleDetector::new(params, anns)?));
            "oracle"
        }
        DetectorKind::Cc => {
            reg.register("cc", Arc::new(CcDetector::default()));
            "cc"
        }
        DetectorKind::External => {
            let path = detections.context("the external detector needs --detections")?;
            reg.register("external", Arc::new(ExternalDetector::load(path)?));
            "external"
        }
    };
    Ok((reg, id))
}

fn run_cascade(
    mode: Option<&str>,
    plan: Option<&Path>,
    reg: &DetectorRegistry,
    detector_id: &str,
    server: &str,
    out: &Path,
) -> Result<()> {
    let plan: CascadePlan = match (plan, mode) {
        (Some(p), mode) => {
            let plan: CascadePlan = read_json(p)?;
            if let Some(m) = mode {
                if m.parse::<Mode>()? != plan.mode {
                    bail!(
                        "--mode {m} disagrees with the plan file ({})",
                        plan.mode.as_str()
                    );
                }
            }
            plan
        }
        (None, Some(m)) => CascadePlan::for_mode(m.parse()?, detector_id),
        (None, None) => bail!("give --mode or --plan"),
    };
    plan.validate()?;
    let mut client: Client<TcpStream> =
        Client::connect(server).with_context(|| format!("connecting to {server}"))?;
    client.hello(None)?;
    let ids = client.list()?;
    let mut w = BufWriter::new(File::create(out)?);
    for id in &ids {
        let r = orchestrator::run(&plan, reg, id, &mut client)
            .with_context(|| format!("image {id}"))?;
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    println!("{} images, results in {}", ids.len(), out.display());
    Ok(())
}

fn read_results(path: &Path) -> Result<Vec<RecognitionResult>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

/// One report per mode found in the results, plus its PR curve.
fn eval(results: &Path, annotations: &Path, iou: f64, out: &Path) -> Result<()> {
    let results = read_results(results)?;
    let anns = read_annotations(annotations)?;
    let mut modes: Vec<Mode> = Vec::new();
    for r in &results {
        if !modes.contains(&r.mode) {
            modes.push(r.mode);
        }
    }
    let mut reports = serde_json::Map::new();
    for m in modes {
        let subset: Vec<RecognitionResult> =
            results.iter().filter(|r| r.mode == m).cloned().collect();
        let report = evaluate(&subset, &anns, iou);
        let pr = pr_curve(
            m.as_str(),
            &subset,
            &anns,
            &bandseek::eval::default_thresholds(),
            iou,
        );
        reports.insert(
            m.as_str().into(),
            serde_json::json!({ "report": report, "pr_curve": pr }),
        );
    }
    let mut f = BufWriter::new(File::create(out)?);
    serde_json::to_writer_pretty(&mut f, &reports)?;
    f.write_all(b"\n")?;
    f.flush()?;
    println!("report in {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().cmd {
        Cmd::Generate {
            out,
            scenes,
            spec,
            format,
        } => generate(&out, scenes, &scene_spec(spec.as_deref())?, format),
        Cmd::Serve {
            corpus,
            synthetic,
            spec,
            bind,
            rho,
        } => {
            let store: Arc<dyn ImageStore> = match (corpus, synthetic) {
                (Some(dir), _) => Arc::new(DirStore::open(&dir)?),
                (None, Some((a, b))) => {
                    Arc::new(SynthStore::new(scene_spec(spec.as_deref())?, a..b)?)
                }
                (None, None) => bail!("give --corpus DIR or --synthetic START..END"),
            };
            let config = ServerConfig {
                rho,
                ..ServerConfig::default()
            };
            eprintln!("serving {} images on {bind}", store.ids().len());
            provider::serve(store, bind.as_str(), config)?;
            Ok(())
        }
        Cmd::Run {
            mode,
            corpus,
            server,
            plan,
            detector,
            detections,
            oracle,
            out,
        } => {
            let (reg, id) = registry(
                detector,
                corpus.as_deref(),
                detections.as_deref(),
                oracle.as_deref(),
            )?;
            run_cascade(mode.as_deref(), plan.as_deref(), &reg, id, &server, &out)
        }
        Cmd::Baseline {
            corpus,
            annotations,
            resolutions,
            qualities,
            out,
        } => {
            let store = DirStore::open(&corpus)?;
            let anns = read_annotations(&annotations.unwrap_or_else(|| corpus.join(ANNOTATIONS)))?;
            let mut cfg = BaselineConfig::default();
            if let Some(r) = resolutions {
                cfg.resolutions = r;
            }
            if let Some(q) = qualities {
                cfg.qualities = q;
            }
            let grid = run_jpeg_grid(&store, &anns, &cfg)?;
            write_grid_csv(&grid.points, File::create(&out)?)?;
            if grid.skipped_images > 0 {
                eprintln!(
                    "warning: {} images skipped (plate without text)",
                    grid.skipped_images
                );
            }
            println!("{} grid points in {}", grid.points.len(), out.display());
            Ok(())
        }
        Cmd::Eval {
            results,
            annotations,
            iou,
            out,
        } => eval(&results, &annotations, iou, &out),
        Cmd::Sweep {
            config,
            variable,
            values,
            base,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            cfg.test_split = (cfg.test_split.0, cfg.test_split.0);
            cfg.pr_plans.clear();
            cfg.baseline = None;
            let variable = SweepVariable::from(variable);
            cfg.sweeps = vec![SweepSpec {
                label: variable.as_str().into(),
                base,
                variable,
                values,
            }];
            let e = run_experiment(&cfg)?;
            write_sweep_csv(&e.report.sweeps, File::create(&out)?)?;
            println!("sweep in {}", out.display());
            Ok(())
        }
        Cmd::Experiment {
            config,
            threads,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            cfg.threads = threads.or(cfg.threads);
            let e = run_experiment(&cfg)?;
            e.write(&out)?;
            println!("outputs in {}", out.display());
            Ok(())
        }
        Cmd::DefaultConfig => {
            let json = serde_json::to_string_pretty(&ExperimentConfig::default())?;
            // a closed pipe (`| head`) is not an error
            match writeln!(std::io::stdout(), "{json}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            }
        }
    }
}
