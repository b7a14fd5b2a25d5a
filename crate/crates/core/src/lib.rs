//! Mapless free-space direction finding over monocular depth maps.
//!
//! The pipeline is: a [`DepthImage`] (brighter = nearer) is resampled to a
//! square frame, pooled into a [`PatchGrid`] of mean intensities, searched
//! upward from the bottom-middle cell for the longest monotone
//! (non-increasing intensity) path, and the resulting bearing is quantized
//! into left/forward/right, one of 13 clock positions, or whole degrees.
//!
//! ```
//! use pathfinder_core::{dp_search, DepthImage, DirectionEstimate, SearchParams};
//!
//! let img = DepthImage::new(64, 64, vec![0.5; 64 * 64], "flat").unwrap();
//! let grid = img.patchify(8).unwrap();
//! let path = dp_search(&grid, &SearchParams::default()).unwrap();
//! let dir = DirectionEstimate::from_path(&path).unwrap();
//! assert_eq!(dir.clock.label(), "12:00");
//! ```
//!
//! The crate is `no_std` and only needs `alloc`; file formats, timing and
//! the service layer live in the `pathfinder` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agreement;
pub mod depth;
pub mod feedback;
pub mod metrics;
pub mod schemes;
pub mod search;

pub use agreement::{cohens_kappa, AgreementError, AgreementReport, GroundTruthLabel};
pub use depth::{patch_px_for_grid, DepthError, DepthImage, PatchGrid, DEFAULT_FRAME_SIDE};
pub use feedback::{bundle, haptic_for, voice_for, FeedbackBundle, HapticPattern, Visual, Voice};
pub use metrics::{accuracy_pct, clock_error_deg, mean_absolute_error};
pub use schemes::{
    angular_distance, quantize_clock, quantize_dof3, ClockDirection, DirectionEstimate, Dof3,
    ParseClockError, Scheme, SchemeError,
};
pub use search::{
    dp_search, enumerate_paths, enumerate_paths_bounded, select_best, stop_check, Cell, Move,
    NavPath, SearchError, SearchParams, StopCheck, StopReason, ORACLE_MAX_CELLS,
};
