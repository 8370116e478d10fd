//! Bubble tracking and interface-dynamics analysis for instance-segmented
//! boiling videos.
//!
//! The crate consumes per-frame segmentation output (masks, boxes, classes,
//! scores) and produces:
//!
//! - persistent bubble identities ([`tracker`]), using a Kalman/IoU tracker
//!   with observation-centric momentum and re-update,
//! - mask geometry ([`geometry`]): crack-edge contours, relative-perimeter
//!   parameterization, equivalent diameters,
//! - signed interface velocities and their spectrograms ([`kinematics`]),
//! - per-frame and per-track statistics ([`analytics`]): counts, vapor
//!   fractions, departure events and rates, diameter histograms,
//! - segmentation quality metrics ([`evaluation`]): AP, AP50, AP75, per class.
//!
//! Everything is built on the dataset model in [`corpus`].

pub mod analytics;
pub mod corpus;
pub mod evaluation;
pub mod fixtures;
pub mod geometry;
pub mod kinematics;
pub mod tracker;

pub use corpus::{BBox, BitMask, Calibration, Category, ClassMode, Dataset, Detection, Frame, Rle};
pub use tracker::{Track, TrackId, TrackSet, Tracker, TrackerConfig};
pub use geometry::{Contour, ParamContour, Point2};


pub const VERSION: &str = env!("CARGO_PKG_VERSION");
