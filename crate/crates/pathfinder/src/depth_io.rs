//! Depth map readers and an 8-bit PNG writer.
//!
//! Supported inputs, chosen by extension:
//!
//! | extension           | payload                                            |
//! |---------------------|----------------------------------------------------|
//! | `png`               | 8- or 16-bit single-channel                        |
//! | `pgm`, `pnm`        | 8- or 16-bit P2/P5                                 |
//! | `f32`, `raw`, `bin` | little-endian f32 with a `<stem>.json` sidecar     |
//! | `csv`               | reals, one image row per line, uniform row length  |
//!
//! Every loader min-max normalizes into `[0, 1]`.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat, ImageReader};
use pathfinder_core::{DepthError, DepthImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    DimensionMismatch { path: PathBuf, reason: String },
}

impl LoadError {
    fn unsupported(path: &Path, reason: impl Into<String>) -> Self {
        LoadError::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    fn mismatch(path: &Path, reason: impl Into<String>) -> Self {
        LoadError::DimensionMismatch {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Source encodes near as dark; flip after normalizing.
    pub invert: bool,
}

/// JSON sidecar describing a raw float payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub width: usize,
    pub height: usize,
    #[serde(default = "RawSidecar::default_dtype")]
    pub dtype: RawDtype,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RawDtype {
    #[serde(rename = "f32le")]
    F32Le,
}

impl RawSidecar {
    fn default_dtype() -> RawDtype {
        RawDtype::F32Le
    }

    pub fn path_for(payload: &Path) -> PathBuf {
        payload.with_extension("json")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Png,
    Pgm,
    Raw,
    Csv,
}

fn format_of(path: &Path) -> Option<Format> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "png" => Some(Format::Png),
        "pgm" | "pnm" => Some(Format::Pgm),
        "f32" | "raw" | "bin" => Some(Format::Raw),
        "csv" => Some(Format::Csv),
        _ => None,
    }
}

/// Whether `path` has an extension [`load_depth_image`] understands.
pub fn is_depth_file(path: &Path) -> bool {
    format_of(path).is_some()
}

pub fn load_depth_image(path: &Path, options: LoadOptions) -> Result<DepthImage, LoadError> {
    let format = format_of(path).ok_or_else(|| {
        LoadError::unsupported(
            path,
            "unknown extension (png, pgm, pnm, f32, raw, bin, csv)",
        )
    })?;
    let bytes = read(path)?;
    let (width, height, raw) = match format {
        Format::Png => decode_gray(path, &bytes, ImageFormat::Png)?,
        Format::Pgm => decode_gray(path, &bytes, ImageFormat::Pnm)?,
        Format::Raw => decode_raw(path, &bytes)?,
        Format::Csv => decode_csv(path, &bytes)?,
    };
    let img = DepthImage::from_raw(width, height, &raw, path.display().to_string())
        .map_err(|e| depth_to_load(path, e))?;
    Ok(if options.invert { img.inverted() } else { img })
}

fn read(path: &Path) -> Result<Vec<u8>, LoadError> {
    fs::read(path).map_err(|source| LoadError::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })
}

fn depth_to_load(path: &Path, e: DepthError) -> LoadError {
    match e {
        DepthError::DimensionMismatch { .. } | DepthError::ZeroDimension { .. } => {
            LoadError::mismatch(path, e.to_string())
        }
        other => LoadError::unsupported(path, other.to_string()),
    }
}

fn decode_gray(
    path: &Path,
    bytes: &[u8],
    format: ImageFormat,
) -> Result<(usize, usize, Vec<f64>), LoadError> {
    let img = ImageReader::with_format(Cursor::new(bytes), format)
        .decode()
        .map_err(|e| LoadError::unsupported(path, e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        other => {
            return Err(LoadError::unsupported(
                path,
                format!("expected a single-channel image, got {:?}", other.color()),
            ))
        }
    };
    Ok((w, h, raw))
}

fn decode_raw(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), LoadError> {
    let sidecar_path = RawSidecar::path_for(path);
    let sidecar_bytes = read(&sidecar_path)?;
    let sidecar: RawSidecar = serde_json::from_slice(&sidecar_bytes)
        .map_err(|e| LoadError::unsupported(&sidecar_path, format!("bad sidecar: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(LoadError::mismatch(
            path,
            format!(
                "payload of {} bytes is not a whole number of f32 values",
                bytes.len()
            ),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let expected = sidecar.width * sidecar.height;
    if values.len() != expected {
        return Err(LoadError::mismatch(
            path,
            format!(
                "sidecar declares {}x{} = {expected} values, payload has {}",
                sidecar.width,
                sidecar.height,
                values.len()
            ),
        ));
    }
    Ok((sidecar.width, sidecar.height, values))
}

fn decode_csv(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), LoadError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut width = None;
    let mut height = 0;
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| LoadError::unsupported(path, e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(LoadError::mismatch(
                    path,
                    format!("row {} has {} values, expected {w}", line + 1, record.len()),
                ))
            }
            Some(_) => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                LoadError::unsupported(path, format!("row {}: {field:?} is not a number", line + 1))
            })?;
            values.push(v);
        }
        height += 1;
    }
    let width = width.ok_or_else(|| LoadError::mismatch(path, "no rows"))?;
    Ok((width, height, values))
}

/// Renders intensities as an 8-bit grayscale PNG.
pub fn encode_png(img: &DepthImage) -> Vec<u8> {
    let pixels: Vec<u8> = img
        .intensities()
        .iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, pixels)
        .expect("buffer length matches dimensions");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .expect("encoding to memory cannot fail");
    out.into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, bytes).unwrap();
        p
    }

    fn pgm(w: usize, h: usize, px: &[u8]) -> Vec<u8> {
        let mut v = format!("P5\n{w} {h}\n255\n").into_bytes();
        v.extend_from_slice(px);
        v
    }

    #[test]
    fn pgm_levels() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.pgm", &pgm(2, 2, &[0, 85, 170, 255]));
        let img = load_depth_image(&p, LoadOptions::default()).unwrap();
        let want = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in img.intensities().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        let inv = load_depth_image(&p, LoadOptions { invert: true }).unwrap();
        assert_eq!(inv.inverted(), img);
    }

    #[test]
    fn constant_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.pgm", &pgm(2, 2, &[7; 4]));
        let img = load_depth_image(&p, LoadOptions::default()).unwrap();
        assert_eq!(img.intensities(), &[0.5; 4]);
    }

    #[test]
    fn ascii_pgm_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "b.pgm", b"P2\n2 1\n65535\n0 65535\n");
        let img = load_depth_image(&p, LoadOptions::default()).unwrap();
        assert_eq!(img.intensities(), &[0.0, 1.0]);
    }

    #[test]
    fn png_8_and_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let p8 = dir.path().join("a.png");
        image::GrayImage::from_raw(3, 1, vec![10, 20, 30])
            .unwrap()
            .save(&p8)
            .unwrap();
        let img = load_depth_image(&p8, LoadOptions::default()).unwrap();
        assert_eq!(img.intensities(), &[0.0, 0.5, 1.0]);

        let p16 = dir.path().join("b.png");
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(2, 1, vec![1000u16, 3000])
            .unwrap()
            .save(&p16)
            .unwrap();
        let img = load_depth_image(&p16, LoadOptions::default()).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
        assert_eq!(img.intensities(), &[0.0, 1.0]);

        let rgb = dir.path().join("c.png");
        image::RgbImage::new(2, 2).save(&rgb).unwrap();
        assert!(matches!(
            load_depth_image(&rgb, LoadOptions::default()),
            Err(LoadError::UnsupportedFormat { .. })
        ));
    }

    #[test]
    fn raw_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let payload: Vec<u8> = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let p = write(dir.path(), "d.f32", &payload);
        write(
            dir.path(),
            "d.json",
            br#"{"width":3,"height":2,"dtype":"f32le"}"#,
        );
        let img = load_depth_image(&p, LoadOptions::default()).unwrap();
        assert_eq!((img.width(), img.height()), (3, 2));
        assert_eq!(img.intensities()[5], 1.0);

        let short = write(dir.path(), "e.f32", &payload[..20]);
        write(
            dir.path(),
            "e.json",
            br#"{"width":3,"height":2,"dtype":"f32le"}"#,
        );
        assert!(matches!(
            load_depth_image(&short, LoadOptions::default()),
            Err(LoadError::DimensionMismatch { .. })
        ));

        let orphan = write(dir.path(), "f.f32", &payload);
        assert!(matches!(
            load_depth_image(&orphan, LoadOptions::default()),
            Err(LoadError::UnreadableFile { .. })
        ));
    }

    #[test]
    fn csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "g.csv", b"0, 1, 2\n3, 4, 5\n");
        let img = load_depth_image(&p, LoadOptions::default()).unwrap();
        assert_eq!((img.width(), img.height()), (3, 2));
        assert_eq!(img.intensities()[0], 0.0);

        let ragged = write(dir.path(), "h.csv", b"0,1,2\n3,4\n");
        assert!(matches!(
            load_depth_image(&ragged, LoadOptions::default()),
            Err(LoadError::DimensionMismatch { .. })
        ));
        let junk = write(dir.path(), "i.csv", b"0,x\n");
        assert!(matches!(
            load_depth_image(&junk, LoadOptions::default()),
            Err(LoadError::UnsupportedFormat { .. })
        ));
    }

    #[test]
    fn unknown_extension_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.tiff", b"");
        assert!(matches!(
            load_depth_image(&p, LoadOptions::default()),
            Err(LoadError::UnsupportedFormat { .. })
        ));
        assert!(matches!(
            load_depth_image(&dir.path().join("none.png"), LoadOptions::default()),
            Err(LoadError::UnreadableFile { .. })
        ));
    }

    #[test]
    fn png_round_trip_is_8_bit() {
        let img = DepthImage::new(2, 2, vec![0.0, 0.25, 0.75, 1.0], "x").unwrap();
        let bytes = encode_png(&img);
        let back = image::load_from_memory(&bytes).unwrap().into_luma8();
        assert_eq!(back.into_raw(), vec![0, 64, 191, 255]);
    }
}
