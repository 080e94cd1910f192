//! The `lfseg` command line.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::disparity::{estimate_disparity, save_disparity};
use crate::error::{Error, Result, Stage};
use crate::eval::{accuracy, coherence, table, EvalReport, LabelMapping};
use crate::io::{
    disparity_source, load_ground_truth, load_lightfield, load_scribbles, load_view_labels, save_ground_truth,
    save_lightfield, save_png_rgb, save_scribbles_png, save_segmentation, save_view_labels, write_json,
};
use crate::lfsp::compute_lfsp;
use crate::lightfield::Orientation;
use crate::params::Params;
use crate::pipeline::{segment, DisparitySource, Trace};
use crate::render::{boundary_mask, epi_strip, overlay};
use crate::synth::{corpus_scene, scribbles_from_ground_truth, single_plane, synth_scene, three_planes, ScribbleStyle};

#[derive(Debug, Parser)]
#[command(name = "lfseg", version, about = "Interactive light-field segmentation over superpixel graphs")]
pub struct Cli {
    /// Print the effective parameters as JSON and exit.
    #[arg(long, global = true)]
    pub dump_params: bool,
    #[command(flatten)]
    pub tuning: Tuning,
    #[command(subcommand)]
    pub command: Option<Command>,
}

/// Parameter sources, applied in order: defaults (with the lower disparity
/// weight when disparity is estimated), `--params`, then single flags.
#[derive(Debug, Clone, Args)]
pub struct Tuning {
    /// JSON file with any subset of the parameters.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Disparity source: `estimate`, `gt` or a PFM path.
    #[arg(long, global = true, default_value = "estimate")]
    pub disparity: String,
    #[arg(long, global = true)]
    pub lambda_p: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_d: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_s: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_a: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub sigma_c2: Option<f64>,
    #[arg(long, global = true)]
    pub sigma_d2: Option<f64>,
    /// Superpixel size M in pixels.
    #[arg(long, global = true)]
    pub size: Option<usize>,
    #[arg(long, global = true)]
    pub compactness: Option<f64>,
}

impl Tuning {
    pub fn resolve(&self) -> Result<Params> {
        let mut p = if self.disparity == "estimate" {
            Params::for_estimated_disparity()
        } else {
            Params::default()
        };
        if let Some(path) = &self.params {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            p = p.merged_with_json(&text).map_err(|e| Error::load(path, e.to_string()))?;
        }
        let e = &mut p.energy;
        for (slot, v) in [
            (&mut e.lambda_p, self.lambda_p),
            (&mut e.lambda_d, self.lambda_d),
            (&mut e.lambda_s, self.lambda_s),
            (&mut e.lambda_a, self.lambda_a),
            (&mut e.alpha, self.alpha),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        e.sigma_c2 = self.sigma_c2.or(e.sigma_c2);
        e.sigma_d2 = self.sigma_d2.or(e.sigma_d2);
        if let Some(m) = self.size {
            p.lfsp.size = m;
        }
        if let Some(c) = self.compactness {
            p.lfsp.compactness = c;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    ThreePlanes,
    Corpus,
    Plane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EpiOrientation {
    H,
    V,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic scene with ground truth and example scribbles.
    Synth {
        #[arg(long, value_enum, default_value = "three-planes")]
        preset: Preset,
        /// Corpus scene index.
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Views per axis.
        #[arg(long, default_value_t = 9)]
        views: usize,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        /// Gaussian noise sigma in sRGB byte units.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Disparity of the `plane` preset.
        #[arg(long, default_value_t = 1.0)]
        plane_disparity: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate central-view disparity into a PFM file.
    Disparity {
        #[arg(long)]
        lf: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute light-field superpixels and write per-view id maps.
    Superpixels {
        #[arg(long)]
        lf: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment a light field from scribbles.
    Segment {
        #[arg(long)]
        lf: PathBuf,
        /// `scribbles.png`, `scribbles.json` or a directory holding one.
        #[arg(long)]
        scribbles: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write stage timings into trace.json (not reproducible).
        #[arg(long)]
        timings: bool,
    },
    /// Score predicted label maps against ground truth.
    Eval {
        #[arg(long)]
        lf: PathBuf,
        /// Directory with `label_{u}_{v}.png`.
        #[arg(long)]
        pred: PathBuf,
        /// Directory with `gt_label_{u}_{v}.png` (and optionally `gt_disparity.pfm`).
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value = "auto")]
        mapping: String,
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Render an EPI, with the label EPI below it when labels are given.
    Epi {
        #[arg(long)]
        lf: PathBuf,
        /// Directory with `label_{u}_{v}.png`.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "h")]
        orientation: EpiOrientation,
        /// Row `y` (horizontal) or column `x` (vertical).
        #[arg(long)]
        index: usize,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the interactive HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
    },
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 2 on usage errors, 1 on pipeline failures.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(kind, msg)) => {
            let _ = Cli::command().error(kind, msg).print();
            2
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(ErrorKind, String),
    Pipeline(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Pipeline(e)
    }
}

pub fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let params = cli
        .tuning
        .resolve()
        .map_err(|e| Failure::Usage(ErrorKind::ValueValidation, e.to_string()))?;
    if cli.dump_params {
        println!("{}", params.to_json());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Failure::Usage(ErrorKind::MissingSubcommand, "a subcommand is required".into()));
    };
    match command {
        Command::Synth {
            preset,
            index,
            views,
            width,
            height,
            noise,
            plane_disparity,
            out,
        } => synth(preset, index, views, width, height, noise, plane_disparity, &out)?,
        Command::Disparity { lf, out } => {
            let field = load_lightfield(&lf).map_err(|e| e.in_stage(Stage::Load))?;
            let d = estimate_disparity(&field, &params.tensor).map_err(|e| e.in_stage(Stage::Disparity))?;
            save_disparity(&out, &d)?;
            let (lo, hi) = d.range();
            println!("disparity {}x{} in [{lo:.3}, {hi:.3}] -> {}", d.width, d.height, out.display());
        }
        Command::Superpixels { lf, out } => {
            let (field, source) = load_with_source(&lf, &cli.tuning.disparity)?;
            let disparity = match source {
                DisparitySource::Estimate => {
                    estimate_disparity(&field, &params.tensor).map_err(|e| e.in_stage(Stage::Disparity))?
                }
                DisparitySource::Given(d) => d,
            };
            let seg = compute_lfsp(&field, &disparity, &params.lfsp).map_err(|e| e.in_stage(Stage::Superpixels))?;
            save_segmentation(&out, &seg, &params.lfsp)?;
            let g = field.geometry();
            let mask = boundary_mask(seg.central(), g.width, g.height);
            let img: Vec<[u8; 3]> = field
                .central_srgb()
                .iter()
                .zip(&mask)
                .map(|(&p, &b)| if b { [255, 255, 0] } else { p })
                .collect();
            save_png_rgb(&out.join("boundaries.png"), g.width, g.height, &img)?;
            println!("{} superpixels -> {}", seg.count(), out.display());
        }
        Command::Segment {
            lf,
            scribbles,
            out,
            timings,
        } => segment_command(&lf, &scribbles, &out, &cli.tuning.disparity, &params, timings)?,
        Command::Eval {
            lf,
            pred,
            gt,
            mapping,
            json,
        } => {
            let mapping = match mapping.as_str() {
                "auto" => LabelMapping::Auto,
                "identity" => LabelMapping::Identity,
                other => return Err(Failure::Usage(ErrorKind::InvalidValue, format!("unknown mapping '{other}' (auto, identity)"))),
            };
            let report = eval_dirs(&lf, &pred, &gt, mapping)?;
            print!("{}", table(std::slice::from_ref(&report)));
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
        }
        Command::Epi {
            lf,
            labels,
            orientation,
            index,
            scale,
            out,
        } => {
            let field = load_lightfield(&lf).map_err(|e| e.in_stage(Stage::Load))?;
            let g = *field.geometry();
            let labels = labels.map(|dir| load_view_labels(&dir, "label", &g)).transpose()?;
            let (o, fixed) = match orientation {
                EpiOrientation::H => (Orientation::Horizontal, (g.central_v, index)),
                EpiOrientation::V => (Orientation::Vertical, (g.central_u, index)),
            };
            let strip = epi_strip(&field, labels.as_ref(), o, fixed, scale)?;
            save_png_rgb(&out, strip.width, strip.height, &strip.pixels)?;
        }
        Command::Serve { addr } => serve(addr)?,
    }
    Ok(())
}

#[cfg(feature = "service")]
fn serve(addr: std::net::SocketAddr) -> Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::InvalidInput(format!("tokio runtime: {e}")))?;
    rt.block_on(crate::service::serve(addr))
        .map_err(|e| Error::InvalidInput(format!("serve on {addr}: {e}")))
}

#[cfg(not(feature = "service"))]
fn serve(_addr: std::net::SocketAddr) -> Result<()> {
    Err(Error::InvalidInput("built without the `service` feature".into()))
}

#[allow(clippy::too_many_arguments)]
fn synth(
    preset: Preset,
    index: u64,
    views: usize,
    width: usize,
    height: usize,
    noise: f64,
    plane_disparity: f64,
    out: &Path,
) -> Result<()> {
    let mut spec = match preset {
        Preset::ThreePlanes => three_planes(views, views, width, height),
        Preset::Corpus => corpus_scene(index, views, views, width, height, noise),
        Preset::Plane => single_plane(views, views, width, height, plane_disparity),
    };
    spec.noise_sigma = noise;
    let (lf, gt) = synth_scene(&spec)?;
    save_lightfield(out, &lf)?;
    save_ground_truth(out, &gt)?;
    write_json(&out.join("scene.json"), &spec)?;
    let strokes = scribbles_from_ground_truth(&gt, &ScribbleStyle::dense());
    write_json(&out.join("scribbles.json"), &strokes)?;
    save_scribbles_png(&out.join("scribbles.png"), &strokes.rasterize()?)?;
    println!(
        "{} {}x{} views of {}x{}, {} labels -> {}",
        spec.name,
        views,
        views,
        width,
        height,
        gt.num_labels,
        out.display()
    );
    Ok(())
}

fn load_with_source(lf: &Path, choice: &str) -> Result<(crate::LightField, DisparitySource)> {
    let field = load_lightfield(lf).map_err(|e| e.in_stage(Stage::Load))?;
    let source = disparity_source(choice, lf, field.geometry()).map_err(|e| e.in_stage(Stage::Load))?;
    Ok((field, source))
}

/// `labels.json`: one label per superpixel.
#[derive(Debug, Serialize)]
struct LabelsFile<'a> {
    label_count: u8,
    labels: &'a [u8],
}

fn segment_command(lf: &Path, scribbles: &Path, out: &Path, choice: &str, params: &Params, timings: bool) -> Result<()> {
    let (field, source) = load_with_source(lf, choice)?;
    let map = load_scribbles(scribbles).map_err(|e| e.in_stage(Stage::Scribbles))?;
    let run = segment(&field, &source, &map, params)?;
    let labels = run.view_labels();
    save_view_labels(out, "label", &labels)?;
    write_json(
        &out.join("labels.json"),
        &LabelsFile {
            label_count: run.labels().label_count(),
            labels: run.labels().labels(),
        },
    )?;
    let mut trace = run.trace();
    let t = trace.timings.clone();
    if !timings {
        trace = strip_timings(trace);
    }
    write_json(&out.join("trace.json"), &trace)?;
    let g = field.geometry();
    let img = overlay(field.central_srgb(), labels.central(), g.width, g.height, 0.45);
    save_png_rgb(&out.join("overlay.png"), g.width, g.height, &img)?;
    println!(
        "{} superpixels, {} labels, energy {:.4} -> {:.4} in {} cycles; preprocessing {:.0} ms, interactive {:.0} ms (optimize {:.0} ms)",
        run.pre.segmentation.count(),
        run.labels().label_count(),
        trace.energy.first().copied().unwrap_or(0.0),
        trace.energy.last().copied().unwrap_or(0.0),
        trace.cycles,
        t.preprocessing_ms(),
        t.interactive_ms(),
        t.get(Stage::Optimize).unwrap_or(0.0),
    );
    Ok(())
}

fn strip_timings(mut trace: Trace) -> Trace {
    trace.timings = Default::default();
    trace.preprocessing_ms = 0.0;
    trace.interactive_ms = 0.0;
    trace.optimize_ms = 0.0;
    trace
}

/// Scores `label_*` maps in `pred` against `gt_label_*` maps in `gt`.
pub fn eval_dirs(lf: &Path, pred: &Path, gt: &Path, mapping: LabelMapping) -> Result<EvalReport> {
    let field = load_lightfield(lf).map_err(|e| e.in_stage(Stage::Load))?;
    let g = *field.geometry();
    let predicted = load_view_labels(pred, "label", &g)?;
    let truth = load_ground_truth(gt, &g)?;
    let acc = accuracy(&predicted, &truth.labels, mapping)?;
    let coh = if truth.disparity.is_empty() {
        None
    } else {
        Some(coherence(&predicted, &truth.disparity)?)
    };
    Ok(EvalReport {
        scene: field.metadata().name.clone(),
        config: pred.display().to_string(),
        accuracy: acc,
        graph: None,
        timings: None,
        ablation: None,
        coherence: coh,
    })
}
