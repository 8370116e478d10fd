//! Synthetic scenes with known geometry, for tests and benchmarks.

use crate::corpus::{BitMask, Calibration, Category, Dataset, Detection, Frame};

/// Pixels whose centers lie within `r` of `(cx, cy)`.
pub fn disk(width: u32, height: u32, cx: f64, cy: f64, r: f64) -> BitMask {
    BitMask::from_fn(width, height, |x, y| {
        let (dx, dy) = (f64::from(x) + 0.5 - cx, f64::from(y) + 0.5 - cy);
        dx * dx + dy * dy <= r * r
    })
}

/// Pixels whose centers lie inside the axis-aligned ellipse.
pub fn ellipse(width: u32, height: u32, cx: f64, cy: f64, a: f64, b: f64) -> BitMask {
    BitMask::from_fn(width, height, |x, y| {
        let (dx, dy) = ((f64::from(x) + 0.5 - cx) / a, (f64::from(y) + 0.5 - cy) / b);
        dx * dx + dy * dy <= 1.0
    })
}

/// Solid rectangle of pixels `[x, x + w) x [y, y + h)`, clipped to the frame.
pub fn rectangle(width: u32, height: u32, x: u32, y: u32, w: u32, h: u32) -> BitMask {
    BitMask::from_fn(width, height, |px, py| px >= x && px < x + w && py >= y && py < y + h)
}

/// One synthetic object in one frame.
#[derive(Debug, Clone)]
pub struct Instance {
    pub mask: BitMask,
    pub category: Category,
    pub score: f64,
}

impl Instance {
    pub fn new(mask: BitMask, category: Category) -> Self {
        Instance {
            mask,
            category,
            score: 1.0,
        }
    }
}

/// Builds a dataset with frames `0..frames.len()`. Empty masks are skipped.
pub fn dataset(calibration: Calibration, width: u32, height: u32, frames: Vec<Vec<Instance>>) -> Dataset {
    let frames = frames
        .into_iter()
        .enumerate()
        .map(|(i, instances)| Frame {
            index: i as u64,
            detections: instances
                .iter()
                .filter_map(|inst| Detection::from_mask(&inst.mask, inst.category, inst.score))
                .collect(),
        })
        .collect();
    Dataset::new(calibration, width, height, frames).expect("synthetic dataset is valid")
}

/// A disk moving at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingDisk {
    pub start: (f64, f64),
    pub velocity: (f64, f64),
    pub radius: f64,
}

impl MovingDisk {
    pub fn center(&self, frame: u64) -> (f64, f64) {
        let t = frame as f64;
        (self.start.0 + self.velocity.0 * t, self.start.1 + self.velocity.1 * t)
    }

    pub fn mask(&self, width: u32, height: u32, frame: u64) -> BitMask {
        let (cx, cy) = self.center(frame);
        disk(width, height, cx, cy, self.radius)
    }
}

/// Disks moving over `n_frames` frames. `hidden(object, frame)` removes
/// that object's detection. Returns the dataset and, per frame, the object
/// index of each detection in order.
pub fn moving_disks(
    calibration: Calibration,
    width: u32,
    height: u32,
    disks: &[MovingDisk],
    n_frames: u64,
    hidden: impl Fn(usize, u64) -> bool,
) -> (Dataset, Vec<Vec<usize>>) {
    let mut frames = Vec::new();
    let mut owners = Vec::new();
    for f in 0..n_frames {
        let mut instances = Vec::new();
        let mut who = Vec::new();
        for (k, d) in disks.iter().enumerate() {
            if hidden(k, f) {
                continue;
            }
            let m = d.mask(width, height, f);
            if m.is_empty() {
                continue;
            }
            instances.push(Instance::new(m, Category::Bubble));
            who.push(k);
        }
        frames.push(instances);
        owners.push(who);
    }
    (dataset(calibration, width, height, frames), owners)
}
