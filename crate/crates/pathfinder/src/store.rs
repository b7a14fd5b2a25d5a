//! Append-only JSON Lines label log with a last-write-wins index.
//!
//! The log file is the source of truth; the in-memory index is rebuilt by
//! replaying it on open. A torn final line (crash mid-append) is truncated
//! away on open.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use pathfinder_core::{
    cohens_kappa, AgreementError, AgreementReport, ClockDirection, GroundTruthLabel,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub image_id: String,
    pub annotator: String,
    pub clock: ClockDirection,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("label log {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("label log {path}:{line}: {source}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

type Index = BTreeMap<(String, String), ClockDirection>;

struct Inner {
    file: File,
    index: Index,
}

pub struct LabelStore {
    path: PathBuf,
    inner: RwLock<Inner>,
}

impl LabelStore {
    /// Opens (creating if needed) the log at `path` and replays it.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io_err)?;

        let (index, valid_len) = replay(&path, &text)?;
        if valid_len < text.len() {
            log::warn!(
                "{}: dropping {} bytes of incomplete trailing record",
                path.display(),
                text.len() - valid_len
            );
            file.set_len(valid_len as u64).map_err(io_err)?;
            file.seek(SeekFrom::End(0)).map_err(io_err)?;
        }
        if !text[..valid_len].is_empty() && !text[..valid_len].ends_with('\n') {
            file.write_all(b"\n").map_err(io_err)?;
        }
        Ok(Self {
            path,
            inner: RwLock::new(Inner { file, index }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends and syncs the record, then updates the index. Writers are
    /// serialized; readers never observe a label that is not on disk.
    pub fn append(&self, record: &LabelRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        let mut inner = self.inner.write().unwrap_or_else(|e| e.into_inner());
        inner
            .file
            .write_all(line.as_bytes())
            .and_then(|()| inner.file.sync_data())
            .map_err(|source| StoreError::Io {
                path: self.path.clone(),
                source,
            })?;
        inner.index.insert(
            (record.image_id.clone(), record.annotator.clone()),
            record.clock,
        );
        Ok(())
    }

    pub fn get(&self, image_id: &str, annotator: &str) -> Option<ClockDirection> {
        let inner = self.inner.read().unwrap_or_else(|e| e.into_inner());
        inner
            .index
            .get(&(image_id.to_owned(), annotator.to_owned()))
            .copied()
    }

    /// Effective labels ordered by (image_id, annotator).
    pub fn records(&self) -> Vec<LabelRecord> {
        let inner = self.inner.read().unwrap_or_else(|e| e.into_inner());
        inner
            .index
            .iter()
            .map(|((image_id, annotator), &clock)| LabelRecord {
                image_id: image_id.clone(),
                annotator: annotator.clone(),
                clock,
            })
            .collect()
    }

    pub fn annotators_for(&self, image_id: &str) -> Vec<String> {
        let inner = self.inner.read().unwrap_or_else(|e| e.into_inner());
        inner
            .index
            .range((image_id.to_owned(), String::new())..)
            .take_while(|((id, _), _)| id == image_id)
            .map(|((_, who), _)| who.clone())
            .collect()
    }

    pub fn labels_by(&self, annotator: &str) -> Vec<GroundTruthLabel> {
        labels_by(&self.records(), annotator)
    }

    pub fn agreement(&self, a: &str, b: &str) -> Result<AgreementReport, AgreementError> {
        agreement(&self.records(), a, b)
    }
}

fn labels_by(records: &[LabelRecord], annotator: &str) -> Vec<GroundTruthLabel> {
    records
        .iter()
        .filter(|r| r.annotator == annotator)
        .map(|r| GroundTruthLabel::new(r.image_id.clone(), r.clock, r.annotator.clone()))
        .collect()
}

/// Cohen's kappa between two annotators over the images both have labeled.
/// `records` must already be deduplicated per (image_id, annotator).
/// No shared image gives [`AgreementError::Empty`].
pub fn agreement(
    records: &[LabelRecord],
    a: &str,
    b: &str,
) -> Result<AgreementReport, AgreementError> {
    let (la, lb) = (labels_by(records, a), labels_by(records, b));
    let ids_a: std::collections::BTreeSet<&str> = la.iter().map(|l| l.image_id.as_str()).collect();
    let ids_b: std::collections::BTreeSet<&str> = lb.iter().map(|l| l.image_id.as_str()).collect();
    let keep = |v: &[GroundTruthLabel]| -> Vec<GroundTruthLabel> {
        v.iter()
            .filter(|l| ids_a.contains(l.image_id.as_str()) && ids_b.contains(l.image_id.as_str()))
            .cloned()
            .collect()
    };
    cohens_kappa(&keep(&la), &keep(&lb))
}

/// Replays a log's text into an index; returns the byte length of the valid prefix.
fn replay(path: &Path, text: &str) -> Result<(Index, usize), StoreError> {
    let mut index = Index::new();
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let complete = line.ends_with('\n');
        let body = line.trim();
        if !body.is_empty() {
            match serde_json::from_str::<LabelRecord>(body) {
                Ok(r) => {
                    index.insert((r.image_id, r.annotator), r.clock);
                }
                Err(_) if !complete => break,
                Err(source) => {
                    return Err(StoreError::Corrupt {
                        path: path.to_path_buf(),
                        line: i + 1,
                        source,
                    })
                }
            }
        }
        offset += line.len();
    }
    Ok((index, offset))
}

/// Reads a label log (or manifest) without opening it for writing, applying
/// last-write-wins per (image_id, annotator).
pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>, StoreError> {
    let text = std::fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (index, _) = replay(path, &text)?;
    Ok(index
        .into_iter()
        .map(|((image_id, annotator), clock)| LabelRecord {
            image_id,
            annotator,
            clock,
        })
        .collect())
}
