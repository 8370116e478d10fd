//! Per-frame and per-track bubble statistics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{BitMask, Calibration, Category, ClassMode, Dataset, Frame};
use crate::geometry::equivalent_diameter;
use crate::tracker::{Track, TrackId, TrackSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    /// Consecutive observations needed to accept a class change.
    pub debounce: usize,
    pub histogram_bin_mm: f64,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            debounce: 3,
            histogram_bin_mm: 0.5,
        }
    }
}

impl AnalyticsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.debounce < 1 {
            return Err("debounce must be >= 1".into());
        }
        if !(self.histogram_bin_mm > 0.0 && self.histogram_bin_mm.is_finite()) {
            return Err(format!("histogram_bin_mm must be > 0, got {}", self.histogram_bin_mm));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalyticsError {
    #[error("clip duration must be positive, got {0} s")]
    NonPositiveDuration(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub frame: u64,
    pub bubble_count: usize,
    /// Pixels covered by any mask over all pixels.
    pub vapor_fraction_total: f64,
    /// Pixels covered by any attached mask over all pixels; absent for
    /// one-class data.
    pub vapor_fraction_attached: Option<f64>,
    pub diameters_cm: Vec<f64>,
}

/// Counts, union vapor fractions and equivalent diameters of one frame.
pub fn frame_features(
    frame: &Frame,
    width: u32,
    height: u32,
    calibration: &Calibration,
    mode: ClassMode,
) -> FrameFeatures {
    let mut all = BitMask::new(width, height);
    let mut attached = BitMask::new(width, height);
    for d in &frame.detections {
        let m = d.mask();
        all.union_with(&m);
        if d.category() == Category::Attached {
            attached.union_with(&m);
        }
    }
    let pixels = f64::from(width) * f64::from(height);
    FrameFeatures {
        frame: frame.index,
        bubble_count: frame.detections.len(),
        vapor_fraction_total: all.area() as f64 / pixels,
        vapor_fraction_attached: (mode == ClassMode::TwoClass).then(|| attached.area() as f64 / pixels),
        diameters_cm: frame
            .detections
            .iter()
            .map(|d| equivalent_diameter(d.area(), calibration))
            .collect(),
    }
}

pub fn dataset_features(dataset: &Dataset) -> Vec<FrameFeatures> {
    dataset
        .frames()
        .iter()
        .map(|f| frame_features(f, dataset.width(), dataset.height(), dataset.calibration(), dataset.class_mode()))
        .collect()
}

/// Area of the track's mask at `frame` over the frame area, or `None` when
/// the track is not observed there.
pub fn bubble_vapor_fraction(track: &Track, frame: u64, dataset: &Dataset) -> Option<f64> {
    let obs = track.observations().get(&frame)?;
    Some(obs.area as f64 / dataset.frame_pixels() as f64)
}

/// One row of per-track features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFrameFeatures {
    pub track_id: TrackId,
    pub frame: u64,
    pub diameter_cm: f64,
    pub category: Category,
    pub bubble_vapor_fraction: f64,
}

pub fn track_features(tracks: &TrackSet, dataset: &Dataset) -> Vec<TrackFrameFeatures> {
    let pixels = dataset.frame_pixels() as f64;
    tracks
        .tracks()
        .iter()
        .flat_map(|t| {
            t.observations().iter().map(move |(&frame, o)| TrackFrameFeatures {
                track_id: t.id(),
                frame,
                diameter_cm: equivalent_diameter(o.area, dataset.calibration()),
                category: o.category,
                bubble_vapor_fraction: o.area as f64 / pixels,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepartureEvent {
    pub track_id: TrackId,
    /// First frame of the detached run that confirmed the departure.
    pub frame: u64,
    pub debounce: usize,
}

/// Attached-to-detached transitions in a class history.
///
/// A class becomes the confirmed class once it is seen on `debounce`
/// consecutive observations. A departure is recorded when the confirmed
/// class goes from attached to detached, at the first frame of the detached
/// run. Shorter runs (flicker) never change the confirmed class. With
/// `debounce = 1` every adjacent attached-to-detached pair is an event.
pub fn departure_events(
    track_id: TrackId,
    history: impl IntoIterator<Item = (u64, Category)>,
    debounce: usize,
) -> Vec<DepartureEvent> {
    assert!(debounce >= 1, "debounce must be >= 1");
    let mut events = Vec::new();
    let mut confirmed: Option<Category> = None;
    let mut run: Option<(Category, u64, usize)> = None; // class, first frame, length
    for (frame, class) in history {
        run = match run {
            Some((c, start, len)) if c == class => Some((c, start, len + 1)),
            _ => Some((class, frame, 1)),
        };
        let (c, start, len) = run.expect("just set");
        if len == debounce && confirmed != Some(c) {
            if confirmed == Some(Category::Attached) && c == Category::Detached {
                events.push(DepartureEvent {
                    track_id,
                    frame: start,
                    debounce,
                });
            }
            confirmed = Some(c);
        }
    }
    events
}

/// Departure events of every track, ordered by track then frame. One-class
/// data has no attached/detached labels and yields no events.
pub fn all_departures(tracks: &TrackSet, debounce: usize) -> Vec<DepartureEvent> {
    tracks
        .tracks()
        .iter()
        .flat_map(|t| departure_events(t.id(), t.class_history(), debounce))
        .collect()
}

pub fn departure_rate(events: usize, clip_duration_s: f64) -> Result<f64, AnalyticsError> {
    if clip_duration_s.is_nan() || clip_duration_s <= 0.0 {
        return Err(AnalyticsError::NonPositiveDuration(clip_duration_s));
    }
    Ok(events as f64 / clip_duration_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepartureSummary {
    pub events: usize,
    /// Tracks with at least one event.
    pub unique_tracks: usize,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub unique_rate_hz: f64,
}

pub fn departure_summary(events: &[DepartureEvent], clip_duration_s: f64) -> Result<DepartureSummary, AnalyticsError> {
    let unique: BTreeSet<TrackId> = events.iter().map(|e| e.track_id).collect();
    Ok(DepartureSummary {
        events: events.len(),
        unique_tracks: unique.len(),
        duration_s: clip_duration_s,
        rate_hz: departure_rate(events.len(), clip_duration_s)?,
        unique_rate_hz: departure_rate(unique.len(), clip_duration_s)?,
    })
}

/// Equivalent-diameter counts in bins `[k w, (k + 1) w)` mm from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiameterHistogram {
    pub bin_width_mm: f64,
    /// One count per bin, up to the last non-empty bin.
    pub counts: Vec<u64>,
}

impl DiameterHistogram {
    pub fn from_diameters_cm(diameters_cm: impl IntoIterator<Item = f64>, bin_width_mm: f64) -> Self {
        assert!(bin_width_mm > 0.0, "bin width must be positive");
        let mut counts: Vec<u64> = Vec::new();
        for d in diameters_cm {
            let bin = (d * 10.0 / bin_width_mm).floor() as usize;
            if counts.len() <= bin {
                counts.resize(bin + 1, 0);
            }
            counts[bin] += 1;
        }
        DiameterHistogram { bin_width_mm, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `(lower edge mm, upper edge mm, count)` per bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        let w = self.bin_width_mm;
        self.counts.iter().enumerate().map(move |(k, &c)| (k as f64 * w, (k + 1) as f64 * w, c))
    }
}

pub fn diameter_histogram<'a>(
    frames: impl IntoIterator<Item = &'a Frame>,
    calibration: &Calibration,
    bin_width_mm: f64,
) -> DiameterHistogram {
    DiameterHistogram::from_diameters_cm(
        frames
            .into_iter()
            .flat_map(|f| f.detections.iter().map(|d| equivalent_diameter(d.area(), calibration))),
        bin_width_mm,
    )
}
