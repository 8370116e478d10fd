//! Persistent bubble identities across frames.
//!
//! Each track carries a constant-velocity Kalman filter over its box. Every
//! frame, live tracks are predicted forward, then matched to the frame's
//! detections by minimum-cost assignment on
//!
//! ```text
//! cost(i, j) = -IoU(predicted_i, det_j) + ocm_weight * angle(i, j) / pi
//! ```
//!
//! where `angle` compares the track's recent motion direction (taken from its
//! observed box centers) with the direction from its last observation to the
//! detection. Matches below `iou_threshold` are discarded after assignment.
//!
//! A track re-matched after missing frames is re-updated: its filter is
//! rolled back to the last observation and run through boxes interpolated
//! between that observation and the new one before the real update.

mod assignment;
mod kalman;

pub use assignment::{solve as solve_assignment, CostMatrix};
pub use kalman::{
    bbox_from_measurement, measurement_from_bbox, KalmanState, Measurement, NoiseModel, StateMatrix, StateVector,
    MIN_AREA, REGULARIZATION,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{BBox, Category, Dataset, Frame};

pub type TrackId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Minimum IoU for a match to stand.
    pub iou_threshold: f64,
    /// Frames a track may go unobserved before it dies.
    pub max_age: u64,
    /// Consecutive observations before a track is confirmed.
    pub min_hits: u32,
    /// Weight of the direction-consistency term.
    pub ocm_weight: f64,
    /// Look-back, in frames, for a track's motion direction.
    pub ocm_delta_t: u64,
    /// Detections scoring below this are ignored.
    pub score_threshold: f64,
    /// Re-update through interpolated boxes after missed frames.
    pub re_update: bool,
    pub noise: NoiseModel,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            iou_threshold: 0.3,
            max_age: 30,
            min_hits: 3,
            ocm_weight: 0.2,
            ocm_delta_t: 3,
            score_threshold: 0.5,
            re_update: true,
            noise: NoiseModel::default(),
        }
    }
}

impl TrackerConfig {
    /// Plain IoU/Kalman tracking: no direction term, no re-update.
    pub fn sort_mode() -> Self {
        TrackerConfig {
            ocm_weight: 0.0,
            re_update: false,
            ..TrackerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(format!("iou_threshold must be in [0, 1], got {}", self.iou_threshold));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(format!("score_threshold must be in [0, 1], got {}", self.score_threshold));
        }
        if !(self.ocm_weight >= 0.0 && self.ocm_weight.is_finite()) {
            return Err(format!("ocm_weight must be >= 0, got {}", self.ocm_weight));
        }
        if self.ocm_delta_t < 1 {
            return Err("ocm_delta_t must be >= 1".into());
        }
        if self.min_hits < 1 {
            return Err("min_hits must be >= 1".into());
        }
        self.noise.validate()
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrackerError {
    #[error("frame {got} presented after frame {previous}; frames must be strictly increasing")]
    OutOfOrder { previous: u64, got: u64 },
    #[error("invalid tracker config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Lost,
    Dead,
}

/// A detection claimed by a track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Position of the detection within its frame.
    pub detection_index: usize,
    pub bbox: BBox,
    pub category: Category,
    pub score: f64,
    pub area: u64,
}

impl Observation {
    fn center(&self) -> (f64, f64) {
        self.bbox.center()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    id: TrackId,
    state: KalmanState,
    /// Filter state right after the last real update.
    observed_state: KalmanState,
    observations: BTreeMap<u64, Observation>,
    status: TrackStatus,
    ever_confirmed: bool,
    hit_streak: u32,
    age: u64,
    time_since_update: u64,
    degenerate_predictions: u32,
    regularized_updates: u32,
}

impl Track {
    fn new(id: TrackId, frame: u64, obs: Observation, config: &TrackerConfig) -> Self {
        let state = KalmanState::from_bbox(&obs.bbox, &config.noise);
        let confirmed = config.min_hits <= 1;
        Track {
            id,
            observed_state: state.clone(),
            state,
            observations: BTreeMap::from([(frame, obs)]),
            status: if confirmed { TrackStatus::Confirmed } else { TrackStatus::Tentative },
            ever_confirmed: confirmed,
            hit_streak: 1,
            age: 1,
            time_since_update: 0,
            degenerate_predictions: 0,
            regularized_updates: 0,
        }
    }

    pub fn id(&self) -> TrackId {
        self.id
    }

    pub fn state(&self) -> &KalmanState {
        &self.state
    }

    pub fn observations(&self) -> &BTreeMap<u64, Observation> {
        &self.observations
    }

    /// Category of the claimed detection at each observed frame.
    pub fn class_history(&self) -> impl Iterator<Item = (u64, Category)> + '_ {
        self.observations.iter().map(|(&f, o)| (f, o.category))
    }

    pub fn first_frame(&self) -> u64 {
        *self.observations.keys().next().expect("tracks start with an observation")
    }

    pub fn last_observed_frame(&self) -> u64 {
        *self.observations.keys().next_back().expect("tracks start with an observation")
    }

    pub fn status(&self) -> TrackStatus {
        self.status
    }

    pub fn hit_streak(&self) -> u32 {
        self.hit_streak
    }

    /// Frames since birth, counting the birth frame.
    pub fn age(&self) -> u64 {
        self.age
    }

    pub fn time_since_update(&self) -> u64 {
        self.time_since_update
    }

    /// Predictions whose area had to be clamped.
    pub fn degenerate_predictions(&self) -> u32 {
        self.degenerate_predictions
    }

    /// Updates whose innovation covariance had to be regularized.
    pub fn regularized_updates(&self) -> u32 {
        self.regularized_updates
    }

    fn predict(&mut self, noise: &NoiseModel) {
        let (next, degenerate) = self.state.predict(noise);
        self.state = next;
        self.degenerate_predictions += u32::from(degenerate);
        if self.time_since_update > 0 {
            self.hit_streak = 0;
        }
        self.time_since_update += 1;
        self.age += 1;
    }

    fn correct(&mut self, state: &KalmanState, bbox: &BBox, noise: &NoiseModel) -> KalmanState {
        let (next, regularized) = state.update(&measurement_from_bbox(bbox), noise);
        self.regularized_updates += u32::from(regularized);
        next
    }

    fn observe(&mut self, frame: u64, obs: Observation, config: &TrackerConfig) {
        let last_frame = self.last_observed_frame();
        let last = self.observations[&last_frame];
        let gap = frame - last_frame - 1;
        let noise = &config.noise;
        let updated = if config.re_update && gap > 0 {
            let mut s = self.observed_state.clone();
            for k in 1..=gap {
                let t = k as f64 / (gap + 1) as f64;
                let virtual_box = interpolate(&last.bbox, &obs.bbox, t);
                let (pred, degenerate) = s.predict(noise);
                self.degenerate_predictions += u32::from(degenerate);
                s = self.correct(&pred, &virtual_box, noise);
            }
            let (pred, degenerate) = s.predict(noise);
            self.degenerate_predictions += u32::from(degenerate);
            self.correct(&pred, &obs.bbox, noise)
        } else {
            let current = self.state.clone();
            self.correct(&current, &obs.bbox, noise)
        };
        self.state = updated;
        self.observed_state = self.state.clone();
        self.observations.insert(frame, obs);
        self.time_since_update = 0;
        self.hit_streak += 1;
        if self.ever_confirmed || self.hit_streak >= config.min_hits {
            self.ever_confirmed = true;
            self.status = TrackStatus::Confirmed;
        } else {
            self.status = TrackStatus::Tentative;
        }
    }

    /// Unit direction of recent motion: from the observation `dt` frames
    /// before the last one (largest `dt <= delta` available) to the last.
    fn direction(&self, delta: u64) -> Option<(f64, f64)> {
        let (&last_frame, last) = self.observations.iter().next_back()?;
        let previous = (1..=delta)
            .rev()
            .filter_map(|dt| last_frame.checked_sub(dt))
            .find_map(|f| self.observations.get(&f))?;
        unit(previous.center(), last.center())
    }
}

fn unit(from: (f64, f64), to: (f64, f64)) -> Option<(f64, f64)> {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let norm = dx.hypot(dy);
    (norm > 0.0).then(|| (dx / norm, dy / norm))
}

/// Linear interpolation of center and size.
fn interpolate(a: &BBox, b: &BBox, t: f64) -> BBox {
    let lerp = |x: f64, y: f64| x + (y - x) * t;
    let (ca, cb) = (a.center(), b.center());
    BBox::from_center(lerp(ca.0, cb.0), lerp(ca.1, cb.1), lerp(a.w, b.w), lerp(a.h, b.h))
}

/// Angle in `[0, pi]` between two unit vectors.
fn angle_between(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 * b.0 + a.1 * b.1).clamp(-1.0, 1.0).acos()
}

/// Result of matching one frame's detections against the predicted tracks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// `(track position, detection position)` pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Motion cue of one track for association.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackCue {
    pub predicted: BBox,
    /// Center of the last observation.
    pub last_center: (f64, f64),
    /// Unit direction of recent motion, if known.
    pub direction: Option<(f64, f64)>,
}

/// Assignment cost of `cue` against a detection box.
pub fn association_cost(cue: &TrackCue, det: &BBox, ocm_weight: f64) -> f64 {
    let iou = cue.predicted.iou(det);
    let angle = match (cue.direction, unit(cue.last_center, det.center())) {
        (Some(a), Some(b)) => angle_between(a, b),
        _ => 0.0,
    };
    -iou + ocm_weight * angle / std::f64::consts::PI
}

/// Optimal assignment of detections to tracks; pairs under the IoU
/// threshold are dropped afterwards.
pub fn associate(cues: &[TrackCue], detections: &[BBox], config: &TrackerConfig) -> Association {
    let costs = CostMatrix::from_fn(cues.len(), detections.len(), |i, j| {
        association_cost(&cues[i], &detections[j], config.ocm_weight)
    });
    let mut matched_t = vec![false; cues.len()];
    let mut matched_d = vec![false; detections.len()];
    let mut matches = Vec::new();
    for (i, j) in solve_assignment(&costs) {
        if cues[i].predicted.iou(&detections[j]) >= config.iou_threshold {
            matched_t[i] = true;
            matched_d[j] = true;
            matches.push((i, j));
        }
    }
    Association {
        matches,
        unmatched_tracks: (0..cues.len()).filter(|&i| !matched_t[i]).collect(),
        unmatched_detections: (0..detections.len()).filter(|&j| !matched_d[j]).collect(),
    }
}

/// Frame-by-frame tracker state.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    live: Vec<Track>,
    dead: Vec<Track>,
    next_id: TrackId,
    last_frame: Option<u64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackerError> {
        config.validate().map_err(TrackerError::InvalidConfig)?;
        Ok(Tracker {
            config,
            live: Vec::new(),
            dead: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn live_tracks(&self) -> &[Track] {
        &self.live
    }

    /// Advances to `frame`, returning the `(track id, detection index)`
    /// pairs claimed in it, sorted by detection index.
    pub fn step(&mut self, frame: &Frame) -> Result<Vec<(TrackId, usize)>, TrackerError> {
        let steps = match self.last_frame {
            Some(previous) if frame.index <= previous => {
                return Err(TrackerError::OutOfOrder {
                    previous,
                    got: frame.index,
                })
            }
            Some(previous) => frame.index - previous,
            None => 1,
        };
        self.last_frame = Some(frame.index);
        let config = self.config;

        for track in &mut self.live {
            for _ in 0..steps {
                track.predict(&config.noise);
            }
        }

        let candidates: Vec<usize> = (0..frame.detections.len())
            .filter(|&j| frame.detections[j].score() >= config.score_threshold)
            .collect();
        let boxes: Vec<BBox> = candidates.iter().map(|&j| frame.detections[j].bbox()).collect();
        let cues: Vec<TrackCue> = self
            .live
            .iter()
            .map(|t| TrackCue {
                predicted: t.state.bbox(),
                last_center: t.observations.values().next_back().map(Observation::center).unwrap_or_default(),
                direction: t.direction(config.ocm_delta_t),
            })
            .collect();
        let assoc = associate(&cues, &boxes, &config);

        let observation = |j: usize| {
            let d = &frame.detections[j];
            Observation {
                detection_index: j,
                bbox: d.bbox(),
                category: d.category(),
                score: d.score(),
                area: d.area(),
            }
        };
        let mut claimed = Vec::new();
        for &(ti, dj) in &assoc.matches {
            let j = candidates[dj];
            self.live[ti].observe(frame.index, observation(j), &config);
            claimed.push((self.live[ti].id, j));
        }
        for &ti in &assoc.unmatched_tracks {
            self.live[ti].status = TrackStatus::Lost;
        }
        for &dj in &assoc.unmatched_detections {
            let j = candidates[dj];
            let track = Track::new(self.next_id, frame.index, observation(j), &config);
            self.next_id += 1;
            claimed.push((track.id, j));
            self.live.push(track);
        }

        let (dead, live): (Vec<Track>, Vec<Track>) =
            std::mem::take(&mut self.live).into_iter().partition(|t| t.time_since_update > config.max_age);
        self.live = live;
        for mut t in dead {
            t.status = TrackStatus::Dead;
            self.dead.push(t);
        }
        claimed.sort_by_key(|&(_, j)| j);
        Ok(claimed)
    }

    /// All tracks seen so far, live and dead, ordered by id.
    pub fn finish(self) -> TrackSet {
        let mut tracks: Vec<Track> = self.dead.into_iter().chain(self.live).collect();
        tracks.sort_by_key(|t| t.id);
        TrackSet { tracks }
    }
}

/// Tracks every frame of `dataset`.
pub fn run(dataset: &Dataset, config: &TrackerConfig) -> Result<TrackSet, TrackerError> {
    let mut tracker = Tracker::new(*config)?;
    for frame in dataset.frames() {
        tracker.step(frame)?;
    }
    Ok(tracker.finish())
}

/// The tracks of one run, ordered by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackSet {
    tracks: Vec<Track>,
}

impl TrackSet {
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn get(&self, id: TrackId) -> Option<&Track> {
        self.tracks.binary_search_by_key(&id, |t| t.id).ok().map(|i| &self.tracks[i])
    }

    pub fn ids(&self) -> Vec<TrackId> {
        self.tracks.iter().map(|t| t.id).collect()
    }

    /// Track claiming each `(frame, detection index)`.
    pub fn assignments(&self) -> BTreeMap<(u64, usize), TrackId> {
        self.tracks
            .iter()
            .flat_map(|t| t.observations.iter().map(move |(&f, o)| ((f, o.detection_index), t.id)))
            .collect()
    }
}

/// Counts identity switches: for every ground-truth object (outer key), the
/// number of times the track id assigned to it changes between consecutive
/// frames where it was tracked (inner map: frame to track id).
pub fn count_identity_switches(truth: &BTreeMap<u64, BTreeMap<u64, TrackId>>) -> usize {
    truth
        .values()
        .map(|frames| frames.values().zip(frames.values().skip(1)).filter(|(a, b)| a != b).count())
        .sum()
}
