use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{decode_mask, encode_mask, BBox, BitMask, Calibration, Category, CorpusError, MaskPayload, Rle};

/// Tolerance when comparing a declared bbox with the mask's tight bounds.
const BBOX_TOLERANCE: f64 = 1e-6;

/// Top-level ingestion document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDocument {
    pub info: InfoDocument,
    pub frames: Vec<FrameDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoDocument {
    pub frame_rate_fps: f64,
    pub pixels_per_cm: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDocument {
    pub index: u64,
    pub detections: Vec<DetectionDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionDocument {
    pub bbox: [f64; 4],
    pub category: Category,
    pub score: f64,
    pub mask: MaskPayload,
}

/// One instance mask with its box, class and confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    bbox: BBox,
    category: Category,
    score: f64,
    rle: Rle,
    area: u64,
}

impl Detection {
    /// Builds a detection whose bbox is the tight bounds of `mask`.
    /// Returns `None` for an empty mask or a score outside `[0, 1]`.
    pub fn from_mask(mask: &BitMask, category: Category, score: f64) -> Option<Self> {
        if !(0.0..=1.0).contains(&score) {
            return None;
        }
        let bbox = mask.bounds()?;
        Some(Detection {
            bbox,
            category,
            score,
            rle: encode_mask(mask),
            area: mask.area(),
        })
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn rle(&self) -> &Rle {
        &self.rle
    }

    /// Mask pixel count (N).
    pub fn area(&self) -> u64 {
        self.area
    }

    /// Decodes the frame-sized mask.
    pub fn mask(&self) -> BitMask {
        self.rle.to_mask()
    }

    pub fn to_document(&self) -> DetectionDocument {
        DetectionDocument {
            bbox: self.bbox.to_array(),
            category: self.category,
            score: self.score,
            mask: MaskPayload::Rle {
                counts: self.rle.counts().to_vec(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub detections: Vec<Detection>,
}

impl Frame {
    pub fn timestamp_s(&self, calibration: &Calibration) -> f64 {
        calibration.frames_to_seconds(self.index as f64)
    }
}

/// Whether a dataset carries the two-class (attached/detached) labelling or
/// the one-class (`bubble`) labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassMode {
    TwoClass,
    OneClass,
}

impl ClassMode {
    pub fn categories(self) -> &'static [Category] {
        match self {
            ClassMode::TwoClass => &[Category::Attached, Category::Detached],
            ClassMode::OneClass => &[Category::Bubble],
        }
    }
}

/// Calibrated, immutable sequence of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    calibration: Calibration,
    width: u32,
    height: u32,
    frames: Vec<Frame>,
    class_mode: ClassMode,
}

impl Dataset {
    /// Validates frames and assembles a dataset. Frames are sorted by index.
    pub fn new(
        calibration: Calibration,
        width: u32,
        height: u32,
        mut frames: Vec<Frame>,
    ) -> Result<Self, CorpusError> {
        if width == 0 || height == 0 {
            return Err(CorpusError::validation("info", "frame width and height must be positive"));
        }
        if frames.is_empty() {
            return Err(CorpusError::validation("frames", "dataset has no frames"));
        }
        frames.sort_by_key(|f| f.index);
        for pair in frames.windows(2) {
            if pair[0].index == pair[1].index {
                return Err(CorpusError::validation(
                    "frames",
                    format!("duplicate frame index {}", pair[0].index),
                ));
            }
        }
        let mut two_class = false;
        let mut one_class = false;
        for frame in &frames {
            for (d, det) in frame.detections.iter().enumerate() {
                if (det.rle.width(), det.rle.height()) != (width, height) {
                    return Err(CorpusError::validation(
                        format!("frames[index={}].detections[{d}].mask", frame.index),
                        format!(
                            "mask is {}x{}, frame is {width}x{height}",
                            det.rle.width(),
                            det.rle.height()
                        ),
                    ));
                }
                match det.category {
                    Category::Bubble => one_class = true,
                    _ => two_class = true,
                }
            }
        }
        if one_class && two_class {
            return Err(CorpusError::validation(
                "frames",
                "dataset mixes \"bubble\" with \"attached\"/\"detached\" categories",
            ));
        }
        let class_mode = if one_class {
            ClassMode::OneClass
        } else {
            ClassMode::TwoClass
        };
        Ok(Dataset {
            calibration,
            width,
            height,
            frames,
            class_mode,
        })
    }

    /// Validates an ingestion document.
    pub fn from_document(doc: DatasetDocument) -> Result<Self, CorpusError> {
        let info = &doc.info;
        let calibration = Calibration::new(info.pixels_per_cm, info.frame_rate_fps)
            .map_err(|e| CorpusError::validation("info", e.to_string()))?;
        let (width, height) = (info.width, info.height);
        if width == 0 || height == 0 {
            return Err(CorpusError::validation("info", "frame width and height must be positive"));
        }
        let mut frames = Vec::with_capacity(doc.frames.len());
        for (fi, fdoc) in doc.frames.into_iter().enumerate() {
            let mut detections = Vec::with_capacity(fdoc.detections.len());
            for (di, ddoc) in fdoc.detections.into_iter().enumerate() {
                let path = format!("frames[{fi}].detections[{di}]");
                detections.push(validate_detection(ddoc, width, height, &path)?);
            }
            frames.push(Frame {
                index: fdoc.index,
                detections,
            });
        }
        Dataset::new(calibration, width, height, frames)
    }

    /// Parses and validates a JSON document. `source` names the input in errors.
    pub fn from_json_str(json: &str, source: &str) -> Result<Self, CorpusError> {
        let de = &mut serde_json::Deserializer::from_str(json);
        let doc: DatasetDocument = serde_path_to_error::deserialize(de).map_err(|err| {
            let path = err.path().to_string();
            let inner = err.into_inner();
            CorpusError::Parse {
                file: source.to_string(),
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })?;
        Dataset::from_document(doc)
    }

    pub fn to_document(&self) -> DatasetDocument {
        DatasetDocument {
            info: InfoDocument {
                frame_rate_fps: self.calibration.frame_rate(),
                pixels_per_cm: self.calibration.pixels_per_cm(),
                width: self.width,
                height: self.height,
            },
            frames: self
                .frames
                .iter()
                .map(|f| FrameDocument {
                    index: f.index,
                    detections: f.detections.iter().map(Detection::to_document).collect(),
                })
                .collect(),
        }
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calibration
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Total pixel count of one frame.
    pub fn frame_pixels(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn class_mode(&self) -> ClassMode {
        self.class_mode
    }

    pub fn frame(&self, index: u64) -> Option<&Frame> {
        self.frames
            .binary_search_by_key(&index, |f| f.index)
            .ok()
            .map(|i| &self.frames[i])
    }

    pub fn detection(&self, frame: u64, detection_index: usize) -> Option<&Detection> {
        self.frame(frame)?.detections.get(detection_index)
    }

    pub fn detection_count(&self) -> usize {
        self.frames.iter().map(|f| f.detections.len()).sum()
    }

    /// Clip duration in seconds: the span of frame indices, inclusive, over the frame rate.
    pub fn duration_s(&self) -> f64 {
        let first = self.frames.first().map_or(0, |f| f.index);
        let last = self.frames.last().map_or(0, |f| f.index);
        self.calibration.frames_to_seconds((last - first + 1) as f64)
    }
}

fn validate_detection(
    doc: DetectionDocument,
    width: u32,
    height: u32,
    path: &str,
) -> Result<Detection, CorpusError> {
    if !(0.0..=1.0).contains(&doc.score) {
        return Err(CorpusError::validation(
            format!("{path}.score"),
            format!("score {} outside [0, 1]", doc.score),
        ));
    }
    let mask = decode_mask(&doc.mask, width, height).map_err(|e| {
        CorpusError::validation(format!("{path}.mask"), e.to_string())
    })?;
    let Some(bounds) = mask.bounds() else {
        return Err(CorpusError::validation(format!("{path}.mask"), "mask is empty"));
    };
    let declared = BBox::from(doc.bbox);
    let matches = [
        (declared.x, bounds.x),
        (declared.y, bounds.y),
        (declared.w, bounds.w),
        (declared.h, bounds.h),
    ]
    .iter()
    .all(|(a, b)| (a - b).abs() <= BBOX_TOLERANCE);
    if !matches {
        return Err(CorpusError::validation(
            format!("{path}.bbox"),
            format!(
                "bbox {:?} disagrees with mask bounds {:?}",
                doc.bbox,
                bounds.to_array()
            ),
        ));
    }
    let rle = match doc.mask {
        MaskPayload::Rle { counts } => Rle::new(width, height, counts)?,
        MaskPayload::Polygon { .. } => encode_mask(&mask),
    };
    Ok(Detection {
        bbox: bounds,
        category: doc.category,
        score: doc.score,
        area: mask.area(),
        rle,
    })
}

/// Reads and validates an ingestion JSON file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Dataset::from_json_str(&text, &path.display().to_string())
}
