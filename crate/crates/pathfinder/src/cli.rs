//! Command-line front end. Every run flag can also be set through a
//! `PATHFINDER_*` environment variable; explicit flags win.

use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pathfinder_core::{patch_px_for_grid, AgreementError, Scheme, SearchParams};
use thiserror::Error;

use crate::depth_io::{load_depth_image, LoadError, LoadOptions};
use crate::eval::{
    evaluate, patch_sweep, read_manifest, sweep_csv, EvalError, EvalOptions, ManifestEntry,
    ManifestError, PathfinderPredictor, DEFAULT_SWEEP_SIZES,
};
use crate::pipeline::{run_pipeline, Outcome, PipelineConfig, PipelineError};
use crate::service::{serve, ServiceConfig, StartupError, DEFAULT_PORT};
use crate::store::{agreement, read_labels, StoreError};

/// Exit status for a valid run whose scene has no free path.
pub const EXIT_BLOCKED: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "pathfinder",
    version,
    about = "Free-path direction finding on depth images"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug). PATHFINDER_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predict the walking direction for one depth image.
    Predict(PredictArgs),
    /// Score the pipeline against a labeled manifest.
    Eval(EvalArgs),
    /// Evaluate the manifest once per patch size.
    Sweep(SweepArgs),
    /// Cohen's kappa between two annotators in a label log or manifest.
    Kappa(KappaArgs),
    /// Run the labeling HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Patch side in pixels on the resampled frame.
    #[arg(long, env = "PATHFINDER_PATCH_PX", default_value_t = 15)]
    pub patch_px: usize,
    /// Grid cells per side; overrides --patch-px with ceil(frame / cells).
    #[arg(long, env = "PATHFINDER_GRID")]
    pub grid: Option<usize>,
    /// Lookahead average below which the path stops (dark horizon).
    #[arg(long, env = "PATHFINDER_DARK", default_value_t = 0.2)]
    pub dark: f64,
    /// Drop from a cell to its lookahead average that stops the path.
    #[arg(long, env = "PATHFINDER_DIFF", default_value_t = 0.2)]
    pub diff: f64,
    /// Side of the square frame images are resampled to.
    #[arg(long, env = "PATHFINDER_FRAME", default_value_t = 480)]
    pub frame: usize,
    /// Patch rows at the top of the grid where every path stops.
    #[arg(long, env = "PATHFINDER_TOP_MARGIN", default_value_t = 2)]
    pub top_margin: usize,
    /// Treat input as distance (bright = far) and flip it.
    #[arg(long, env = "PATHFINDER_INVERT")]
    pub invert: bool,
}

impl RunArgs {
    pub fn pipeline(&self) -> Result<PipelineConfig, CliError> {
        let patch_px = match self.grid {
            Some(cells) => patch_px_for_grid(self.frame, cells).ok_or_else(|| {
                CliError::Usage(format!(
                    "--grid {cells} does not fit a {0}x{0} frame",
                    self.frame
                ))
            })?,
            None => self.patch_px,
        };
        Ok(PipelineConfig {
            frame_side: self.frame,
            patch_px,
            search: SearchParams {
                top_margin_rows: self.top_margin,
                ..SearchParams::new(self.dark, self.diff)
            },
        })
    }

    pub fn load(&self) -> LoadOptions {
        LoadOptions {
            invert: self.invert,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Dof3,
    Clock,
    Degree,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Dof3 => Scheme::Dof3,
            SchemeArg::Clock => Scheme::Clock,
            SchemeArg::Degree => Scheme::Degree,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TextOrJson {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Depth image (png, pgm/pnm, f32/raw/bin with a .json sidecar, csv).
    pub image: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
    /// Direction vocabulary for text output.
    #[arg(long, env = "PATHFINDER_SCHEME", value_enum, default_value_t = SchemeArg::Clock)]
    pub scheme: SchemeArg,
    #[arg(long, env = "PATHFINDER_FORMAT", value_enum, default_value_t = TextOrJson::Text)]
    pub format: TextOrJson,
    /// In text mode, also print the feedback bundle as a JSON line.
    #[arg(long)]
    pub feedback: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSON Lines manifest of {image_id, path, clock, annotator}.
    #[arg(long, env = "PATHFINDER_LABELS")]
    pub labels: PathBuf,
    /// Directory manifest paths are relative to (default: the manifest's directory).
    #[arg(long, env = "PATHFINDER_IMAGES")]
    pub images: Option<PathBuf>,
    /// Only score labels by this annotator.
    #[arg(long)]
    pub annotator: Option<String>,
    #[command(flatten)]
    pub run: RunArgs,
    /// Spread images across threads; results are identical either way.
    #[arg(long, env = "PATHFINDER_PARALLEL")]
    pub parallel: bool,
    #[arg(long, env = "PATHFINDER_FORMAT", value_enum, default_value_t = TextOrJson::Json)]
    pub format: TextOrJson,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, env = "PATHFINDER_LABELS")]
    pub labels: PathBuf,
    #[arg(long, env = "PATHFINDER_IMAGES")]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub annotator: Option<String>,
    /// Patch sizes in pixels, evaluated in the order given.
    #[arg(long, env = "PATHFINDER_SIZES", value_delimiter = ',', default_values_t = DEFAULT_SWEEP_SIZES)]
    pub sizes: Vec<usize>,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, env = "PATHFINDER_PARALLEL")]
    pub parallel: bool,
    #[arg(long, env = "PATHFINDER_FORMAT", value_enum, default_value_t = SweepFormat::Json)]
    pub format: SweepFormat,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    /// Label log or manifest; the last label per (image, annotator) counts.
    #[arg(long, env = "PATHFINDER_LABELS")]
    pub labels: PathBuf,
    pub annotator_a: String,
    pub annotator_b: String,
    #[arg(long, env = "PATHFINDER_FORMAT", value_enum, default_value_t = TextOrJson::Json)]
    pub format: TextOrJson,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "PATHFINDER_IMAGES")]
    pub images: PathBuf,
    /// Label log, created if missing.
    #[arg(long, env = "PATHFINDER_LABELS", default_value = "labels.jsonl")]
    pub labels: PathBuf,
    #[arg(long, env = "PATHFINDER_PORT", default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, env = "PATHFINDER_HOST", default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub host: IpAddr,
    /// Static UI assets served at `/`.
    #[arg(long, env = "PATHFINDER_UI")]
    pub ui: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error(transparent)]
    Startup(#[from] StartupError),
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

/// Runs one command, writing results to `out`. Errors map to exit code 1.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Kappa(a) => cmd_kappa(&a, out),
        Command::Serve(a) => cmd_serve(&a),
    }
}

fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes")
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<ExitCode, CliError> {
    let config = a.run.pipeline()?;
    let img = load_depth_image(&a.image, a.run.load())?;
    let outcome = run_pipeline(&img, &config)?;
    let id = image_id(&a.image);
    match a.format {
        TextOrJson::Json => writeln!(out, "{}", to_json(&outcome.to_json(&id)))?,
        TextOrJson::Text => match &outcome {
            Outcome::Clear(p) => {
                writeln!(out, "{}", Scheme::from(a.scheme).render(&p.direction))?;
                if a.feedback {
                    writeln!(
                        out,
                        "{}",
                        serde_json::to_string(&p.feedback).expect("serializes")
                    )?;
                }
            }
            Outcome::Blocked { .. } => writeln!(out, "blocked")?,
        },
    }
    Ok(match outcome {
        Outcome::Clear(_) => ExitCode::SUCCESS,
        Outcome::Blocked { .. } => ExitCode::from(EXIT_BLOCKED),
    })
}

fn manifest_and_root(
    labels: &Path,
    images: Option<&Path>,
    annotator: Option<&str>,
) -> Result<(Vec<ManifestEntry>, PathBuf), CliError> {
    let mut manifest = read_manifest(labels)?;
    if let Some(who) = annotator {
        manifest.retain(|e| e.annotator == who);
    }
    let root = match images {
        Some(p) => p.to_path_buf(),
        None => labels
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    Ok((manifest, root))
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<ExitCode, CliError> {
    let config = a.run.pipeline()?;
    let (manifest, root) =
        manifest_and_root(&a.labels, a.images.as_deref(), a.annotator.as_deref())?;
    let options = EvalOptions {
        load: a.run.load(),
        parallel: a.parallel,
    };
    let report = evaluate(&PathfinderPredictor { config }, &manifest, &root, options)?;
    match a.format {
        TextOrJson::Json => writeln!(out, "{}", to_json(&report))?,
        TextOrJson::Text => {
            let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.2}"));
            writeln!(
                out,
                "n={} scored={} failed={} mae_deg={} accuracy_pct={} avg_time_s={:.4}",
                report.n,
                report.n_scored,
                report.n_failed,
                opt(report.mae_deg),
                opt(report.accuracy_pct),
                report.avg_response_time_s
            )?
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<ExitCode, CliError> {
    if a.sizes.is_empty() {
        return Err(CliError::Usage(
            "--sizes needs at least one patch size".into(),
        ));
    }
    let base = a.run.pipeline()?;
    let (manifest, root) =
        manifest_and_root(&a.labels, a.images.as_deref(), a.annotator.as_deref())?;
    let options = EvalOptions {
        load: a.run.load(),
        parallel: a.parallel,
    };
    let rows = patch_sweep(&manifest, &root, &a.sizes, base, options)?;
    match a.format {
        SweepFormat::Json => writeln!(out, "{}", to_json(&rows))?,
        SweepFormat::Csv => write!(out, "{}", sweep_csv(&rows))?,
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_kappa(a: &KappaArgs, out: &mut dyn Write) -> Result<ExitCode, CliError> {
    let records = read_labels(&a.labels)?;
    let report = agreement(&records, &a.annotator_a, &a.annotator_b)?;
    match a.format {
        TextOrJson::Json => writeln!(out, "{}", to_json(&report))?,
        TextOrJson::Text => writeln!(
            out,
            "kappa={:.4} p_o={:.4} p_e={:.4} n={}",
            report.kappa, report.p_observed, report.p_expected, report.n_items
        )?,
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_serve(a: &ServeArgs) -> Result<ExitCode, CliError> {
    let config = ServiceConfig {
        image_root: a.images.clone(),
        labels_path: a.labels.clone(),
        pipeline: a.run.pipeline()?,
        load: a.run.load(),
        ui_dir: a.ui.clone(),
    };
    let addr = SocketAddr::new(a.host, a.port);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    rt.block_on(serve(config, addr))?;
    Ok(ExitCode::SUCCESS)
}
