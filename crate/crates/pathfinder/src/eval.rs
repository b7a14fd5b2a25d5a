//! Batch evaluation of direction predictors against labeled manifests.
//!
//! A manifest is JSON Lines, one label per line:
//!
//! ```text
//! {"image_id": "kitchen_01", "path": "kitchen_01.png", "clock": "11:30", "annotator": "a"}
//! ```
//!
//! `path` is resolved against the image root unless absolute. Each line is
//! scored independently, so a manifest holding two annotators' labels for
//! the same image scores the predictor against both.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use pathfinder_core::{
    accuracy_pct, clock_error_deg, mean_absolute_error, ClockDirection, DepthImage,
    GroundTruthLabel, StopReason,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depth_io::{load_depth_image, LoadOptions};
use crate::pipeline::{run_pipeline, Outcome, PipelineConfig, PipelineError};

/// Sizes evaluated by default: 240 down to 5 px on a 480 px frame.
pub const DEFAULT_SWEEP_SIZES: [usize; 6] = [240, 120, 60, 30, 15, 5];

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("blocked scene ({0})")]
    Blocked(StopReason),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("no prediction for {0:?}")]
    Unknown(String),
}

/// Anything that maps a depth image to a clock direction.
pub trait Predictor: Sync {
    fn predict(&self, img: &DepthImage) -> Result<ClockDirection, PredictError>;
}

/// The depth-patch pathfinding pipeline.
#[derive(Debug, Clone, Copy, Default)]
pub struct PathfinderPredictor {
    pub config: PipelineConfig,
}

impl Predictor for PathfinderPredictor {
    fn predict(&self, img: &DepthImage) -> Result<ClockDirection, PredictError> {
        match run_pipeline(img, &self.config)? {
            Outcome::Clear(p) => Ok(p.direction.clock),
            Outcome::Blocked { stop_reason } => Err(PredictError::Blocked(stop_reason)),
        }
    }
}

/// Always answers the same direction (e.g. "straight ahead").
#[derive(Debug, Clone, Copy)]
pub struct ConstantPredictor(pub ClockDirection);

impl Predictor for ConstantPredictor {
    fn predict(&self, _: &DepthImage) -> Result<ClockDirection, PredictError> {
        Ok(self.0)
    }
}

/// Looks predictions up by image id (the image's `source_id` during evaluation).
#[derive(Debug, Clone, Default)]
pub struct LookupPredictor(pub HashMap<String, ClockDirection>);

impl LookupPredictor {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a ManifestEntry>) -> Self {
        Self(
            labels
                .into_iter()
                .map(|e| (e.image_id.clone(), e.clock))
                .collect(),
        )
    }
}

impl Predictor for LookupPredictor {
    fn predict(&self, img: &DepthImage) -> Result<ClockDirection, PredictError> {
        self.0
            .get(img.source_id())
            .copied()
            .ok_or_else(|| PredictError::Unknown(img.source_id().to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub path: String,
    pub clock: ClockDirection,
    pub annotator: String,
}

impl ManifestEntry {
    pub fn label(&self) -> GroundTruthLabel {
        GroundTruthLabel::new(self.image_id.clone(), self.clock, self.annotator.clone())
    }

    pub fn resolve(&self, image_root: &Path) -> PathBuf {
        let p = Path::new(&self.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            image_root.join(p)
        }
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: empty image_id")]
    EmptyId { path: PathBuf, line: usize },
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let io = |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::open(path).map_err(io)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(&line).map_err(|source| ManifestError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })?;
        if entry.image_id.is_empty() {
            return Err(ManifestError::EmptyId {
                path: path.to_path_buf(),
                line: i + 1,
            });
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn manifest_to_jsonl(entries: &[ManifestEntry]) -> String {
    entries
        .iter()
        .map(|e| serde_json::to_string(e).expect("manifest entries serialize") + "\n")
        .collect()
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("image {image_id:?} could not be loaded: {reason}")]
    MissingImage { image_id: String, reason: String },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    pub load: LoadOptions,
    /// Run predictions on the rayon pool. Aggregates are unaffected; timings
    /// may be inflated by contention.
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub image_id: String,
    pub annotator: String,
    pub predicted: Option<ClockDirection>,
    pub gt: ClockDirection,
    pub error_deg: Option<f64>,
    pub time_s: f64,
    pub failure: Option<String>,
}

/// Aggregates over one manifest. `mae_deg` and `accuracy_pct` cover the
/// `n_scored` items that produced a direction; failed predictions are
/// counted in `n_failed` but still timed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub n_scored: usize,
    pub n_failed: usize,
    pub mae_deg: Option<f64>,
    pub accuracy_pct: Option<f64>,
    pub avg_response_time_s: f64,
    pub per_image: Vec<ImageResult>,
}

pub struct LoadedItem {
    pub entry: ManifestEntry,
    pub image: DepthImage,
}

/// Loads every manifest image; the image's `source_id` becomes its `image_id`.
pub fn load_items(
    manifest: &[ManifestEntry],
    image_root: &Path,
    options: LoadOptions,
) -> Result<Vec<LoadedItem>, EvalError> {
    if manifest.is_empty() {
        return Err(EvalError::EmptyManifest);
    }
    let mut cache: HashMap<PathBuf, DepthImage> = HashMap::new();
    let mut items = Vec::with_capacity(manifest.len());
    for entry in manifest {
        let path = entry.resolve(image_root);
        let image = match cache.get(&path) {
            Some(img) => img.clone(),
            None => {
                let img =
                    load_depth_image(&path, options).map_err(|e| EvalError::MissingImage {
                        image_id: entry.image_id.clone(),
                        reason: e.to_string(),
                    })?;
                cache.insert(path, img.clone());
                img
            }
        };
        items.push(LoadedItem {
            entry: entry.clone(),
            image: image.with_source_id(entry.image_id.clone()),
        });
    }
    Ok(items)
}

pub fn evaluate(
    predictor: &dyn Predictor,
    manifest: &[ManifestEntry],
    image_root: &Path,
    options: EvalOptions,
) -> Result<EvalReport, EvalError> {
    let items = load_items(manifest, image_root, options.load)?;
    Ok(evaluate_loaded(predictor, &items, options.parallel))
}

fn score(predictor: &dyn Predictor, item: &LoadedItem) -> ImageResult {
    let t0 = Instant::now();
    let result = predictor.predict(&item.image);
    let time_s = t0.elapsed().as_secs_f64();
    let gt = item.entry.clock;
    let (predicted, error_deg, failure) = match result {
        Ok(c) => (Some(c), Some(clock_error_deg(c, gt)), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    ImageResult {
        image_id: item.entry.image_id.clone(),
        annotator: item.entry.annotator.clone(),
        predicted,
        gt,
        error_deg,
        time_s,
        failure,
    }
}

/// Scores pre-loaded items. `per_image` keeps input order and aggregates are
/// summed in that order, so results do not depend on `parallel`.
pub fn evaluate_loaded(
    predictor: &dyn Predictor,
    items: &[LoadedItem],
    parallel: bool,
) -> EvalReport {
    let per_image: Vec<ImageResult> = if parallel {
        items.par_iter().map(|it| score(predictor, it)).collect()
    } else {
        items.iter().map(|it| score(predictor, it)).collect()
    };
    let pairs: Vec<(ClockDirection, ClockDirection)> = per_image
        .iter()
        .filter_map(|r| r.predicted.map(|p| (p, r.gt)))
        .collect();
    let n = per_image.len();
    let failed = per_image.iter().filter(|r| r.failure.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {n} predictions failed and are excluded from MAE/accuracy");
    }
    let total_time: f64 = per_image.iter().map(|r| r.time_s).sum();
    EvalReport {
        n,
        n_scored: pairs.len(),
        n_failed: failed,
        mae_deg: mean_absolute_error(&pairs),
        accuracy_pct: accuracy_pct(&pairs),
        avg_response_time_s: if n == 0 { 0.0 } else { total_time / n as f64 },
        per_image,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub patch_px: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs the full pipeline once per patch size, in the given order. A size
/// that cannot produce a 2x2 grid yields an `error` row; the others still run.
pub fn patch_sweep(
    manifest: &[ManifestEntry],
    image_root: &Path,
    patch_sizes_px: &[usize],
    base: PipelineConfig,
    options: EvalOptions,
) -> Result<Vec<SweepRow>, EvalError> {
    let items = load_items(manifest, image_root, options.load)?;
    Ok(sweep_loaded(&items, patch_sizes_px, base, options.parallel))
}

pub fn sweep_loaded(
    items: &[LoadedItem],
    patch_sizes_px: &[usize],
    base: PipelineConfig,
    parallel: bool,
) -> Vec<SweepRow> {
    patch_sizes_px
        .iter()
        .map(|&patch_px| {
            let cells = if patch_px == 0 {
                0
            } else {
                base.frame_side.div_ceil(patch_px)
            };
            if patch_px == 0 || patch_px > base.frame_side || cells < 2 {
                return SweepRow {
                    patch_px,
                    report: None,
                    error: Some(format!(
                        "patch size {patch_px} px leaves a {cells}x{cells} grid on a {0}x{0} frame; at least 2x2 is required",
                        base.frame_side
                    )),
                };
            }
            let predictor = PathfinderPredictor {
                config: PipelineConfig { patch_px, ..base },
            };
            SweepRow {
                patch_px,
                report: Some(evaluate_loaded(&predictor, items, parallel)),
                error: None,
            }
        })
        .collect()
}

/// `patch_px,mae_deg,accuracy_pct,avg_time_s`; empty cells where undefined.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["patch_px", "mae_deg", "accuracy_pct", "avg_time_s"])
        .expect("in-memory write");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        let r = row.report.as_ref();
        w.write_record([
            row.patch_px.to_string(),
            opt(r.and_then(|r| r.mae_deg)),
            opt(r.and_then(|r| r.accuracy_pct)),
            opt(r.map(|r| r.avg_response_time_s)),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
