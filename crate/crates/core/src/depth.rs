//! Normalized depth images and patch grids.
//!
//! Intensities follow the "nearest = brightest" convention: 1.0 is the
//! closest surface, 0.0 the farthest. Sources that encode near as dark are
//! flipped with [`DepthImage::inverted`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Side length of the square frame images are resampled to before pooling.
pub const DEFAULT_FRAME_SIDE: usize = 480;

// Stored intensities are snapped to multiples of 2^-40. Every such value and
// its complement are exactly representable, so `inverted` is an exact
// involution.
const LATTICE: f64 = (1u64 << 40) as f64;

#[inline]
fn snap(v: f64) -> f64 {
    (v * LATTICE + 0.5) as u64 as f64 / LATTICE
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DepthError {
    #[error("image dimensions must be positive (got {width}x{height})")]
    ZeroDimension { width: usize, height: usize },
    #[error("expected {expected} intensity values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("intensity {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("target side must be positive")]
    ZeroSide,
    #[error("patch size must be at least one pixel")]
    ZeroPatch,
    #[error("patch size {patch_px} px on a {width}x{height} image gives a {rows}x{cols} grid; at least 2x2 is required")]
    PatchTooLarge {
        patch_px: usize,
        width: usize,
        height: usize,
        rows: usize,
        cols: usize,
    },
}

/// A single-channel depth map with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    intensities: Vec<f64>,
    source_id: String,
}

impl DepthImage {
    /// Wraps already-normalized intensities.
    pub fn new(
        width: usize,
        height: usize,
        mut intensities: Vec<f64>,
        source_id: impl Into<String>,
    ) -> Result<Self, DepthError> {
        check_shape(width, height, intensities.len())?;
        for (index, v) in intensities.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(DepthError::NonFinite { index });
            }
            if !(0.0..=1.0).contains(v) {
                return Err(DepthError::OutOfRange { index, value: *v });
            }
            *v = snap(*v);
        }
        Ok(Self {
            width,
            height,
            intensities,
            source_id: source_id.into(),
        })
    }

    /// Min-max normalizes raw samples (any unit) into `[0, 1]`.
    ///
    /// A constant image maps to 0.5 everywhere.
    pub fn from_raw(
        width: usize,
        height: usize,
        raw: &[f64],
        source_id: impl Into<String>,
    ) -> Result<Self, DepthError> {
        check_shape(width, height, raw.len())?;
        if let Some(index) = raw.iter().position(|v| !v.is_finite()) {
            return Err(DepthError::NonFinite { index });
        }
        let (lo, hi) = raw
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let intensities = if hi > lo {
            let span = hi - lo;
            raw.iter()
                .map(|&v| ((v - lo) / span).clamp(0.0, 1.0))
                .collect()
        } else {
            vec![0.5; raw.len()]
        };
        Self::new(width, height, intensities, source_id)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.intensities[row * self.width + col]
    }

    /// Flips the near/far convention (`1 - v`). Exact: `img.inverted().inverted() == img`.
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            intensities: self.intensities.iter().map(|v| 1.0 - v).collect(),
            source_id: self.source_id.clone(),
        }
    }

    /// Bilinear resample to `side x side` using pixel-center alignment.
    pub fn resized_square(&self, side: usize) -> Result<Self, DepthError> {
        if side == 0 {
            return Err(DepthError::ZeroSide);
        }
        if side == self.width && side == self.height {
            return Ok(self.clone());
        }
        let xs = axis_taps(side, self.width);
        let ys = axis_taps(side, self.height);
        let mut out = Vec::with_capacity(side * side);
        for &(y0, y1, ty) in &ys {
            let r0 = &self.intensities[y0 * self.width..(y0 + 1) * self.width];
            let r1 = &self.intensities[y1 * self.width..(y1 + 1) * self.width];
            for &(x0, x1, tx) in &xs {
                let top = r0[x0] + (r0[x1] - r0[x0]) * tx;
                let bottom = r1[x0] + (r1[x1] - r1[x0]) * tx;
                out.push((top + (bottom - top) * ty).clamp(0.0, 1.0));
            }
        }
        Self::new(side, side, out, self.source_id.clone())
    }

    /// Mean-pools square `patch_px` blocks into a [`PatchGrid`].
    ///
    /// When a side is not divisible by `patch_px` the last row/column of
    /// patches averages only the pixels that exist.
    pub fn patchify(&self, patch_px: usize) -> Result<PatchGrid, DepthError> {
        if patch_px == 0 {
            return Err(DepthError::ZeroPatch);
        }
        let rows = self.height.div_ceil(patch_px);
        let cols = self.width.div_ceil(patch_px);
        if patch_px > self.width.min(self.height) || rows < 2 || cols < 2 {
            return Err(DepthError::PatchTooLarge {
                patch_px,
                width: self.width,
                height: self.height,
                rows,
                cols,
            });
        }

        let mut sums = vec![0.0f64; rows * cols];
        let mut counts = vec![0u32; rows * cols];
        for (y, line) in self.intensities.chunks_exact(self.width).enumerate() {
            let base = (y / patch_px) * cols;
            for (gc, chunk) in line.chunks(patch_px).enumerate() {
                sums[base + gc] += chunk.iter().sum::<f64>();
                counts[base + gc] += chunk.len() as u32;
            }
        }
        let values = sums
            .iter()
            .zip(&counts)
            .map(|(s, &n)| (s / f64::from(n)).clamp(0.0, 1.0))
            .collect();

        Ok(PatchGrid {
            rows,
            cols,
            patch_px,
            values,
            source_id: self.source_id.clone(),
        })
    }
}

fn check_shape(width: usize, height: usize, len: usize) -> Result<(), DepthError> {
    if width == 0 || height == 0 {
        return Err(DepthError::ZeroDimension { width, height });
    }
    let expected = width * height;
    if len != expected {
        return Err(DepthError::DimensionMismatch {
            expected,
            actual: len,
        });
    }
    Ok(())
}

/// For each destination index: the two source taps and the weight of the second.
fn axis_taps(dst: usize, src: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = s as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Coarse matrix of patch-mean intensities. Row 0 is the top of the scene,
/// the last row is nearest the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    rows: usize,
    cols: usize,
    patch_px: usize,
    values: Vec<f64>,
    source_id: String,
}

impl PatchGrid {
    /// Builds a grid directly from values (`patch_px` is recorded as 1).
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, DepthError> {
        check_shape(cols, rows, values.len())?;
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(DepthError::NonFinite { index });
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(DepthError::OutOfRange { index, value: v });
            }
        }
        Ok(Self {
            rows,
            cols,
            patch_px: 1,
            values,
            source_id: String::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn patch_px(&self) -> usize {
        self.patch_px
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Mirror about the vertical axis.
    pub fn mirrored(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.values.chunks_exact(self.cols) {
            values.extend(row.iter().rev());
        }
        Self {
            values,
            source_id: self.source_id.clone(),
            ..*self
        }
    }
}

/// Patch side that gives a `cells x cells` grid over a `frame_side` square
/// frame, or the nearest coarser grid when no exact divisor exists.
pub fn patch_px_for_grid(frame_side: usize, cells: usize) -> Option<usize> {
    if cells == 0 || frame_side == 0 || cells > frame_side {
        return None;
    }
    Some(frame_side.div_ceil(cells))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(w: usize, h: usize, v: Vec<f64>) -> DepthImage {
        DepthImage::new(w, h, v, "t").unwrap()
    }

    #[test]
    fn raw_pgm_levels_normalize_linearly() {
        let d = DepthImage::from_raw(2, 2, &[0.0, 85.0, 170.0, 255.0], "p").unwrap();
        let want = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (got, want) in d.intensities().iter().zip(want) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn constant_image_maps_to_half() {
        let d = DepthImage::from_raw(2, 2, &[7.0; 4], "c").unwrap();
        assert_eq!(d.intensities(), &[0.5; 4]);
    }

    #[test]
    fn new_rejects_bad_input() {
        assert_eq!(
            DepthImage::new(3, 2, vec![0.0; 5], "x").unwrap_err(),
            DepthError::DimensionMismatch {
                expected: 6,
                actual: 5
            }
        );
        assert!(matches!(
            DepthImage::new(1, 1, vec![1.5], "x"),
            Err(DepthError::OutOfRange { index: 0, .. })
        ));
        assert!(matches!(
            DepthImage::from_raw(1, 2, &[0.0, f64::NAN], "x"),
            Err(DepthError::NonFinite { index: 1 })
        ));
        assert!(matches!(
            DepthImage::new(0, 2, vec![], "x"),
            Err(DepthError::ZeroDimension { .. })
        ));
    }

    #[test]
    fn resize_identity_and_constant() {
        let v: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
        let a = img(4, 4, v);
        assert_eq!(a.resized_square(4).unwrap(), a);

        let c = img(2, 2, vec![0.5; 4]).resized_square(4).unwrap();
        assert_eq!((c.width(), c.height()), (4, 4));
        assert!(c.intensities().iter().all(|&x| x == 0.5));
        assert_eq!(
            img(2, 2, vec![0.5; 4]).resized_square(0),
            Err(DepthError::ZeroSide)
        );
    }

    /// Tent-kernel formulation of bilinear sampling: sum over every source
    /// pixel weighted by max(0, 1 - |dx|) * max(0, 1 - |dy|).
    fn tent_oracle(src: &DepthImage, side: usize) -> Vec<f64> {
        let (w, h) = (src.width() as f64, src.height() as f64);
        let mut out = Vec::new();
        for oy in 0..side {
            for ox in 0..side {
                let sx = ((ox as f64 + 0.5) * w / side as f64 - 0.5).clamp(0.0, w - 1.0);
                let sy = ((oy as f64 + 0.5) * h / side as f64 - 0.5).clamp(0.0, h - 1.0);
                let mut acc = 0.0;
                for y in 0..src.height() {
                    for x in 0..src.width() {
                        let wx = (1.0 - (sx - x as f64).abs()).max(0.0);
                        let wy = (1.0 - (sy - y as f64).abs()).max(0.0);
                        acc += wx * wy * src.get(y, x);
                    }
                }
                out.push(acc);
            }
        }
        out
    }

    #[test]
    fn resize_gradient_matches_frozen_oracle_values() {
        let row = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        let g = img(4, 2, row.iter().chain(row.iter()).copied().collect());
        let got = g.resized_square(2).unwrap();
        // tent_oracle(g, 2), frozen
        let want = [1.0 / 6.0, 5.0 / 6.0, 1.0 / 6.0, 5.0 / 6.0];
        for (a, b) in got.intensities().iter().zip(want) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in got.intensities().iter().zip(tent_oracle(&g, 2)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn patchify_examples() {
        let g = img(4, 4, vec![0.5; 16]).patchify(2).unwrap();
        assert_eq!((g.rows(), g.cols()), (2, 2));
        assert!(g.values().iter().all(|&v| v == 0.5));

        let mut v = vec![1.0; 8];
        v.extend([0.0; 8]);
        let g = img(4, 4, v).patchify(2).unwrap();
        assert_eq!(g.values(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn patchify_uneven_edges_match_brute_force() {
        let v: Vec<f64> = (0..25).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let im = img(5, 5, v);
        let g = im.patchify(2).unwrap();
        assert_eq!((g.rows(), g.cols()), (3, 3));
        for gr in 0..3 {
            for gc in 0..3 {
                let mut px = Vec::new();
                for y in 0..5 {
                    for x in 0..5 {
                        if y / 2 == gr && x / 2 == gc {
                            px.push(im.get(y, x));
                        }
                    }
                }
                let mean = px.iter().sum::<f64>() / px.len() as f64;
                assert!((g.get(gr, gc) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn patchify_rejects_degenerate_sizes() {
        let im = img(480, 480, vec![0.5; 480 * 480]);
        assert!(matches!(
            im.patchify(480),
            Err(DepthError::PatchTooLarge {
                rows: 1,
                cols: 1,
                ..
            })
        ));
        assert!(matches!(
            im.patchify(481),
            Err(DepthError::PatchTooLarge { .. })
        ));
        assert_eq!(im.patchify(0), Err(DepthError::ZeroPatch));
    }

    #[test]
    fn frame_480_grid_sizes() {
        let im = img(480, 480, vec![0.25; 480 * 480]);
        for (p, n) in [(240, 2), (120, 4), (60, 8), (30, 16), (15, 32), (5, 96)] {
            let g = im.patchify(p).unwrap();
            assert_eq!((g.rows(), g.cols()), (n, n), "patch {p}");
        }
    }

    #[test]
    fn grid_override_patch_size() {
        assert_eq!(patch_px_for_grid(480, 15), Some(32));
        assert_eq!(patch_px_for_grid(480, 32), Some(15));
        assert_eq!(patch_px_for_grid(480, 0), None);
        assert_eq!(patch_px_for_grid(4, 5), None);
    }

    #[test]
    fn mirrored_flips_columns() {
        let g = PatchGrid::new(2, 3, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        assert_eq!(g.mirrored().values(), &[0.3, 0.2, 0.1, 0.6, 0.5, 0.4]);
        assert_eq!(g.mirrored().mirrored(), g);
    }

    fn image_strategy() -> impl Strategy<Value = DepthImage> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0.0f64..=1.0, w * h)
                .prop_map(move |v| DepthImage::new(w, h, v, "p").unwrap())
        })
    }

    proptest! {
        #[test]
        fn invert_is_exact_involution(im in image_strategy()) {
            prop_assert_eq!(im.inverted().inverted(), im);
        }

        #[test]
        fn raw_normalization_spans_unit_interval(
            raw in proptest::collection::vec(-1e3f64..1e3, 2..40)
        ) {
            let d = DepthImage::from_raw(raw.len(), 1, &raw, "r").unwrap();
            let lo = d.intensities().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = d.intensities().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if raw.iter().all(|&v| v == raw[0]) {
                prop_assert!(d.intensities().iter().all(|&v| v == 0.5));
            } else {
                prop_assert_eq!((lo, hi), (0.0, 1.0));
            }
        }

        #[test]
        fn patch_means_bounded_by_members(im in image_strategy(), p in 1usize..6) {
            if let Ok(g) = im.patchify(p) {
                for gr in 0..g.rows() {
                    for gc in 0..g.cols() {
                        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                        for y in gr * p..((gr + 1) * p).min(im.height()) {
                            for x in gc * p..((gc + 1) * p).min(im.width()) {
                                lo = lo.min(im.get(y, x));
                                hi = hi.max(im.get(y, x));
                            }
                        }
                        let v = g.get(gr, gc);
                        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn patchify_preserves_mean_when_divisible(
            p in 1usize..4, gr in 2usize..5, gc in 2usize..5, seed in proptest::collection::vec(0.0f64..=1.0, 256)
        ) {
            let (w, h) = (gc * p, gr * p);
            let im = DepthImage::new(w, h, seed[..w * h].to_vec(), "m").unwrap();
            let g = im.patchify(p).unwrap();
            let m_img = im.intensities().iter().sum::<f64>() / (w * h) as f64;
            let m_grid = g.values().iter().sum::<f64>() / g.values().len() as f64;
            prop_assert!((m_img - m_grid).abs() < 1e-9);
        }

        #[test]
        fn resize_matches_tent_oracle(im in image_strategy(), side in 1usize..9) {
            let got = im.resized_square(side).unwrap();
            for (a, b) in got.intensities().iter().zip(tent_oracle(&im, side)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
