//! Dataset model, mask codecs and physical calibration.
//!
//! A [`Dataset`] is an ordered list of [`Frame`]s, each holding the
//! [`Detection`]s produced by a segmentation model (or a ground-truth
//! annotation) for that frame. Masks are kept run-length encoded and decoded
//! on demand; the dataset is immutable once loaded.

mod calibration;
pub mod coco;
mod dataset;
mod mask;
mod polygon;
mod rle;

pub use calibration::{calibrate, Calibration};
pub use dataset::{
    load_dataset, ClassMode, Dataset, DatasetDocument, Detection, DetectionDocument, Frame,
    FrameDocument, InfoDocument,
};
pub use mask::{BBox, BitMask};
pub use polygon::rasterize_polygon;
pub use rle::{decode_mask, encode_mask, MaskPayload, Rle};

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Bubble class vocabulary. Two-class datasets use `Attached`/`Detached`,
/// one-class datasets use only `Bubble`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Attached,
    Detached,
    Bubble,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Attached, Category::Detached, Category::Bubble];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Attached => "attached",
            Category::Detached => "detached",
            Category::Bubble => "bubble",
        }
    }

    /// Parses a class name; unknown names are rejected.
    pub fn parse(name: &str) -> Option<Category> {
        match name {
            "attached" => Some(Category::Attached),
            "detached" => Some(Category::Detached),
            "bubble" => Some(Category::Bubble),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// The document does not match the ingestion schema.
    #[error("{file}: schema error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        file: String,
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    /// The document parsed but violates a dataset invariant.
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("mask decode error: {0}")]
    Decode(String),
    #[error("domain error: {0}")]
    Domain(String),
}

impl CorpusError {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        CorpusError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
