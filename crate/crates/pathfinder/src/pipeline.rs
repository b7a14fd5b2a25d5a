//! End-to-end prediction: resample, pool, search, quantize, encode feedback.

use pathfinder_core::{
    bundle, dp_search, Cell, DepthError, DepthImage, DirectionEstimate, FeedbackBundle, NavPath,
    SchemeError, SearchError, SearchParams, StopReason, DEFAULT_FRAME_SIDE,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub frame_side: usize,
    pub patch_px: usize,
    pub search: SearchParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            frame_side: DEFAULT_FRAME_SIDE,
            patch_px: 15,
            search: SearchParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Depth(#[from] DepthError),
    #[error(transparent)]
    Search(SearchError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

/// A clear direction found for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub patch_px: usize,
    pub start: Cell,
    pub path: NavPath,
    pub direction: DirectionEstimate,
    pub feedback: FeedbackBundle,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Clear(Box<Prediction>),
    /// Nothing to walk toward from the start cell.
    Blocked {
        stop_reason: StopReason,
    },
}

impl Outcome {
    pub fn prediction(&self) -> Option<&Prediction> {
        match self {
            Outcome::Clear(p) => Some(p),
            Outcome::Blocked { .. } => None,
        }
    }

    /// Wire form shared by the CLI and the HTTP service.
    pub fn to_json(&self, image_id: &str) -> PredictionJson {
        match self {
            Outcome::Clear(p) => PredictionJson {
                image_id: image_id.to_owned(),
                blocked: false,
                clock: Some(p.direction.clock.label().to_owned()),
                dof3: Some(p.direction.dof3.label().to_owned()),
                deviation_deg: Some(p.direction.deviation_deg),
                raw_deg: Some(p.direction.raw_deg),
                stop_reason: p.path.stop_reason,
                length_steps: p.path.length_steps(),
                path: p.path.cells.iter().map(|c| [c.row, c.col]).collect(),
                grid: [p.grid_rows, p.grid_cols],
                patch_px: p.patch_px,
                feedback: Some(p.feedback.clone()),
            },
            Outcome::Blocked { stop_reason } => PredictionJson {
                image_id: image_id.to_owned(),
                blocked: true,
                clock: None,
                dof3: None,
                deviation_deg: None,
                raw_deg: None,
                stop_reason: *stop_reason,
                length_steps: 0,
                path: Vec::new(),
                grid: [0, 0],
                patch_px: 0,
                feedback: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionJson {
    pub image_id: String,
    pub blocked: bool,
    pub clock: Option<String>,
    pub dof3: Option<String>,
    pub deviation_deg: Option<f64>,
    pub raw_deg: Option<i32>,
    pub stop_reason: StopReason,
    pub length_steps: usize,
    pub path: Vec<[usize; 2]>,
    pub grid: [usize; 2],
    pub patch_px: usize,
    pub feedback: Option<FeedbackBundle>,
}

pub fn run_pipeline(img: &DepthImage, config: &PipelineConfig) -> Result<Outcome, PipelineError> {
    let framed = img.resized_square(config.frame_side)?;
    let grid = framed.patchify(config.patch_px)?;
    let start = config
        .search
        .validate(&grid)
        .map_err(PipelineError::Search)?;
    let path = match dp_search(&grid, &config.search) {
        Ok(path) => path,
        Err(SearchError::NoFreePath { stop_reason }) => {
            return Ok(Outcome::Blocked { stop_reason })
        }
        Err(e) => return Err(PipelineError::Search(e)),
    };
    let direction = DirectionEstimate::from_path(&path)?;
    Ok(Outcome::Clear(Box::new(Prediction {
        grid_rows: grid.rows(),
        grid_cols: grid.cols(),
        patch_px: grid.patch_px(),
        start,
        feedback: bundle(&direction),
        direction,
        path,
    })))
}
