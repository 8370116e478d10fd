//! Conversion from COCO-style instance annotations/results.
//!
//! COCO files carry neither calibration nor explicit frame ordering, so the
//! caller supplies the calibration and frames are ordered by image id. Boxes
//! are recomputed from the decoded masks; category names must belong to the
//! fixed vocabulary.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{
    rasterize_polygon, BitMask, Calibration, Category, CorpusError, Dataset, Detection, Frame, Rle,
};

#[derive(Debug, Deserialize)]
struct CocoDocument {
    images: Vec<CocoImage>,
    #[serde(default)]
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Deserialize)]
struct CocoImage {
    id: u64,
    width: u32,
    height: u32,
}

#[derive(Debug, Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

#[derive(Debug, Deserialize)]
struct CocoAnnotation {
    image_id: u64,
    category_id: u64,
    segmentation: Segmentation,
    #[serde(default)]
    score: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Segmentation {
    Polygons(Vec<Vec<f64>>),
    Rle { size: [u32; 2], counts: RleCounts },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RleCounts {
    Raw(Vec<u64>),
    Compressed(String),
}

/// Converts a COCO JSON document (ground truth or results with `score`).
pub fn from_coco_str(json: &str, calibration: Calibration) -> Result<Dataset, CorpusError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let doc: CocoDocument = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        CorpusError::Parse {
            file: "coco".into(),
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;

    let mut categories = BTreeMap::new();
    for c in &doc.categories {
        let cat = Category::parse(&c.name.to_ascii_lowercase()).ok_or_else(|| {
            CorpusError::validation(
                format!("categories[id={}]", c.id),
                format!("category name {:?} is not one of attached/detached/bubble", c.name),
            )
        })?;
        categories.insert(c.id, cat);
    }

    let mut images: Vec<&CocoImage> = doc.images.iter().collect();
    images.sort_by_key(|im| im.id);
    let Some(first) = images.first() else {
        return Err(CorpusError::validation("images", "no images"));
    };
    let (width, height) = (first.width, first.height);
    if let Some(im) = images.iter().find(|im| (im.width, im.height) != (width, height)) {
        return Err(CorpusError::validation(
            format!("images[id={}]", im.id),
            "image size differs from the first image",
        ));
    }
    let frame_of: BTreeMap<u64, usize> = images.iter().enumerate().map(|(i, im)| (im.id, i)).collect();
    let mut frames: Vec<Frame> = (0..images.len())
        .map(|i| Frame {
            index: i as u64,
            detections: Vec::new(),
        })
        .collect();

    for (ai, ann) in doc.annotations.iter().enumerate() {
        let path = format!("annotations[{ai}]");
        let &frame = frame_of.get(&ann.image_id).ok_or_else(|| {
            CorpusError::validation(&path, format!("unknown image_id {}", ann.image_id))
        })?;
        let &category = categories.get(&ann.category_id).ok_or_else(|| {
            CorpusError::validation(&path, format!("unknown category_id {}", ann.category_id))
        })?;
        let mask = decode_segmentation(&ann.segmentation, width, height)
            .map_err(|e| CorpusError::validation(format!("{path}.segmentation"), e.to_string()))?;
        let score = ann.score.unwrap_or(1.0);
        let det = Detection::from_mask(&mask, category, score).ok_or_else(|| {
            CorpusError::validation(&path, "empty mask or score outside [0, 1]")
        })?;
        frames[frame].detections.push(det);
    }
    Dataset::new(calibration, width, height, frames)
}

fn decode_segmentation(seg: &Segmentation, width: u32, height: u32) -> Result<BitMask, CorpusError> {
    match seg {
        Segmentation::Polygons(polys) => {
            let mut mask = BitMask::new(width, height);
            for flat in polys {
                if flat.len() % 2 != 0 {
                    return Err(CorpusError::Decode("odd polygon coordinate count".into()));
                }
                let points: Vec<[f64; 2]> = flat.chunks(2).map(|p| [p[0], p[1]]).collect();
                mask.union_with(&rasterize_polygon(&points, width, height)?);
            }
            Ok(mask)
        }
        Segmentation::Rle { size, counts } => {
            if size[0] != height || size[1] != width {
                return Err(CorpusError::Decode(format!(
                    "RLE size {size:?} does not match image {height}x{width}"
                )));
            }
            let counts = match counts {
                RleCounts::Raw(c) => c.clone(),
                RleCounts::Compressed(s) => decompress_counts(s)?,
            };
            Ok(Rle::new(width, height, counts)?.to_mask())
        }
    }
}

/// Decodes the COCO compressed counts string (6-bit groups, delta-coded
/// from the third run on).
fn decompress_counts(s: &str) -> Result<Vec<u64>, CorpusError> {
    let bytes = s.as_bytes();
    let mut counts: Vec<i64> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0;
        loop {
            if p >= bytes.len() || k > 12 {
                return Err(CorpusError::Decode("truncated compressed RLE".into()));
            }
            let c = i64::from(bytes[p]) - 48;
            x |= (c & 0x1f) << (5 * k);
            let more = c & 0x20 != 0;
            p += 1;
            k += 1;
            if !more {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2];
        }
        counts.push(x);
    }
    counts
        .into_iter()
        .map(|c| u64::try_from(c).map_err(|_| CorpusError::Decode("negative RLE count".into())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compress_counts(counts: &[u64]) -> String {
        // Port of the reference encoder, used only to exercise the decoder.
        let mut out = String::new();
        for i in 0..counts.len() {
            let mut x = counts[i] as i64;
            if i > 2 {
                x -= counts[i - 2] as i64;
            }
            let mut more = true;
            while more {
                let mut c = x & 0x1f;
                x >>= 5;
                more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
                if more {
                    c |= 0x20;
                }
                out.push((c + 48) as u8 as char);
            }
        }
        out
    }

    #[test]
    fn compressed_counts_round_trip() {
        let counts = vec![3, 10, 250, 4, 1, 1, 70000, 2, 0, 5];
        assert_eq!(decompress_counts(&compress_counts(&counts)).unwrap(), counts);
    }

    #[test]
    fn converts_polygon_and_rle_annotations() {
        let compressed = compress_counts(&[52, 3, 45]);
        let json = format!(
            r#"{{
            "images": [{{"id": 7, "width": 10, "height": 10}}, {{"id": 3, "width": 10, "height": 10}}],
            "categories": [{{"id": 1, "name": "Attached"}}, {{"id": 2, "name": "detached"}}],
            "annotations": [
                {{"image_id": 3, "category_id": 1, "segmentation": [[1,1,4,1,4,4,1,4]], "bbox": [0,0,0,0]}},
                {{"image_id": 7, "category_id": 2, "score": 0.4,
                  "segmentation": {{"size": [10, 10], "counts": "{compressed}"}}}}
            ]}}"#
        );
        let cal = Calibration::new(100.0, 3000.0).unwrap();
        let ds = from_coco_str(&json, cal).unwrap();
        assert_eq!(ds.frames().len(), 2);
        let a = &ds.frames()[0].detections[0];
        assert_eq!(a.category(), Category::Attached);
        assert_eq!(a.area(), 9);
        assert_eq!(a.bbox().to_array(), [1.0, 1.0, 3.0, 3.0]);
        let d = &ds.frames()[1].detections[0];
        assert_eq!(d.category(), Category::Detached);
        assert_eq!(d.score(), 0.4);
        assert_eq!(d.area(), 3);
        assert_eq!(d.bbox().to_array(), [5.0, 2.0, 1.0, 3.0]);
    }

    #[test]
    fn unknown_category_name_rejected() {
        let json = r#"{"images": [{"id": 1, "width": 4, "height": 4}],
                       "categories": [{"id": 1, "name": "droplet"}], "annotations": []}"#;
        let cal = Calibration::new(1.0, 1.0).unwrap();
        assert!(matches!(
            from_coco_str(json, cal),
            Err(CorpusError::Validation { .. })
        ));
    }
}
