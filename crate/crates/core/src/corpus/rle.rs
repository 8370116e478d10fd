use serde::{Deserialize, Serialize};

use super::{polygon::rasterize_polygon, BitMask, CorpusError};

/// Uncompressed run-length encoding of a binary mask.
///
/// Runs are taken in column-major order (down each column, columns left to
/// right) and alternate zeros/ones starting with a run of zeros, which may be
/// empty. This matches the COCO `counts` layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rle {
    width: u32,
    height: u32,
    counts: Vec<u64>,
}

impl Rle {
    /// Validates `counts` against the frame size.
    pub fn new(width: u32, height: u32, counts: Vec<u64>) -> Result<Self, CorpusError> {
        let total = u64::from(width) * u64::from(height);
        let mut sum: u64 = 0;
        for &c in &counts {
            sum = sum
                .checked_add(c)
                .ok_or_else(|| CorpusError::Decode("RLE counts overflow".into()))?;
        }
        if sum != total {
            return Err(CorpusError::Decode(format!(
                "RLE counts sum to {sum}, expected width*height = {total}"
            )));
        }
        Ok(Rle {
            width,
            height,
            counts,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of set pixels (sum of the odd-indexed runs).
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }

    pub fn to_mask(&self) -> BitMask {
        let h = self.height as usize;
        let mut mask = BitMask::new(self.width, self.height);
        let mut idx = 0usize;
        for (run, &c) in self.counts.iter().enumerate() {
            let c = c as usize;
            if run % 2 == 1 {
                for k in idx..idx + c {
                    mask.set((k / h) as u32, (k % h) as u32, true);
                }
            }
            idx += c;
        }
        mask
    }
}

/// Mask payload as it appears in the ingestion document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase", deny_unknown_fields)]
pub enum MaskPayload {
    Rle { counts: Vec<u64> },
    Polygon { points: Vec<[f64; 2]> },
}

/// Encodes a mask as column-major RLE. Never fails.
pub fn encode_mask(mask: &BitMask) -> Rle {
    let (w, h) = (mask.width(), mask.height());
    let mut counts = Vec::new();
    let mut current = false;
    let mut run: u64 = 0;
    for x in 0..w {
        for y in 0..h {
            let v = mask.get(x, y);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    Rle {
        width: w,
        height: h,
        counts,
    }
}

/// Decodes an RLE or polygon payload into a frame-sized mask.
pub fn decode_mask(payload: &MaskPayload, width: u32, height: u32) -> Result<BitMask, CorpusError> {
    match payload {
        MaskPayload::Rle { counts } => Ok(Rle::new(width, height, counts.clone())?.to_mask()),
        MaskPayload::Polygon { points } => rasterize_polygon(points, width, height),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_and_empty() {
        let ones = decode_mask(&MaskPayload::Rle { counts: vec![0, 16] }, 4, 4).unwrap();
        assert_eq!(ones.area(), 16);
        let zeros = decode_mask(&MaskPayload::Rle { counts: vec![16] }, 4, 4).unwrap();
        assert_eq!(zeros.area(), 0);
        assert_eq!(encode_mask(&BitMask::new(4, 4)).counts(), &[16]);
        assert_eq!(
            encode_mask(&BitMask::from_fn(4, 4, |_, _| true)).counts(),
            &[0, 16]
        );
    }

    #[test]
    fn column_major_layout() {
        // 3x2 mask with only pixel (x=1, y=0) set: column-major index 2.
        let m = BitMask::from_fn(3, 2, |x, y| x == 1 && y == 0);
        assert_eq!(encode_mask(&m).counts(), &[2, 1, 3]);
    }

    #[test]
    fn count_sum_mismatch_is_error() {
        let err = decode_mask(&MaskPayload::Rle { counts: vec![3, 4] }, 4, 4).unwrap_err();
        assert!(matches!(err, CorpusError::Decode(_)));
        assert!(decode_mask(&MaskPayload::Rle { counts: vec![] }, 2, 2).is_err());
    }

    #[test]
    fn area_from_runs() {
        let rle = Rle::new(4, 4, vec![1, 3, 2, 5, 5]).unwrap();
        assert_eq!(rle.area(), 8);
        assert_eq!(rle.to_mask().area(), 8);
    }

    proptest! {
        #[test]
        fn round_trip_preserves_mask_and_area(
            w in 1u32..24, h in 1u32..24, seed in any::<u64>(), density in 0.0f64..1.0
        ) {
            let mut state = seed | 1;
            let mask = BitMask::from_fn(w, h, |_, _| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                (state % 1000) as f64 / 1000.0 < density
            });
            let rle = encode_mask(&mask);
            prop_assert_eq!(rle.area(), mask.area());
            let back = decode_mask(&MaskPayload::Rle { counts: rle.counts().to_vec() }, w, h).unwrap();
            prop_assert_eq!(back, mask);
        }
    }
}
