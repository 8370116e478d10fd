//! Mask geometry: boundary contours, relative-perimeter parameterization and
//! size measures.
//!
//! Image coordinates are y-down. Orientation words ("counter-clockwise",
//! "bottom", "right") refer to the image as displayed, so a counter-clockwise
//! walk starting at the bottom of a bubble visits its right side, then its
//! top, then its left side.

mod contour;
mod param;
pub mod spatial;

pub use contour::{extract_contour, Contour};
pub use param::{parameterize, ParamContour, ParamSample};

use serde::{Deserialize, Serialize};

use crate::corpus::{BitMask, Calibration};

/// A point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point2) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        dx * dx + dy * dy
    }

    pub fn midpoint(&self, other: &Point2) -> Point2 {
        Point2::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeometryError {
    #[error("mask has no set pixels")]
    EmptyMask,
}

/// Diameter in cm of the circle whose area equals `n_pixels` pixels at
/// `pixels_per_cm` scale: `sqrt(4 N / (pi alpha^2))`.
pub fn equivalent_diameter(n_pixels: u64, calibration: &Calibration) -> f64 {
    let alpha = calibration.pixels_per_cm();
    (n_pixels as f64 * 4.0 / (std::f64::consts::PI * alpha * alpha)).sqrt()
}

/// True iff the pixel containing `point` is set. Points outside the frame
/// are never contained.
pub fn contains(mask: &BitMask, point: Point2) -> bool {
    if !point.x.is_finite() || !point.y.is_finite() {
        return false;
    }
    mask.get_signed(point.x.floor() as i64, point.y.floor() as i64)
}
