//! Signed interface velocity of tracked bubbles.
//!
//! For a bubble seen at frames `t` and `t + delta`, each boundary point of
//! the earlier contour is matched to its nearest boundary point on the later
//! contour. The displacement, scaled to cm/s, is positive when the matched
//! point lies outside the bubble's frame-`t` mask (the interface moved
//! outward) and negative when it lies inside.
//!
//! Boundary points are the midpoints of the crack-edge contour's unit edges,
//! one per boundary edge, positioned by relative perimeter from the bottom
//! middle of the frame-`t` contour.

use serde::{Deserialize, Serialize};

use crate::corpus::{BitMask, Calibration, Dataset};
use crate::geometry::spatial::KdTree;
use crate::geometry::{contains, extract_contour, parameterize, Contour, GeometryError, Point2};
use crate::tracker::Track;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinematicsConfig {
    /// Frame gap between matched contours.
    pub delta_frames: u64,
    /// Relative-perimeter bins of the spectrogram.
    pub bins: usize,
    /// Evaluate every `stride`-th eligible frame.
    pub stride: usize,
    /// Gaussian sigma along the perimeter axis, in bins.
    pub sigma_position: f64,
    /// Gaussian sigma along the time axis, in frames (columns).
    pub sigma_time: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        KinematicsConfig {
            delta_frames: 5,
            bins: 200,
            stride: 1,
            sigma_position: 2.0,
            sigma_time: 2.0,
        }
    }
}

impl KinematicsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.delta_frames < 1 {
            return Err("delta_frames must be >= 1".into());
        }
        if self.bins < 8 {
            return Err("bins must be >= 8".into());
        }
        if self.stride < 1 {
            return Err("stride must be >= 1".into());
        }
        if !(self.sigma_position >= 0.0 && self.sigma_time >= 0.0) {
            return Err("smoothing sigmas must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySample {
    /// Relative perimeter position on the frame-`t` contour.
    pub position: f64,
    /// Signed speed in cm/s, outward positive.
    pub speed: f64,
    /// `target_point - source_point`, in pixels.
    pub displacement: Point2,
    pub source_point: Point2,
    pub target_point: Point2,
}

/// Index of the nearest target for every source point (ties: lowest index).
pub fn nearest_targets(sources: &[Point2], targets: &[Point2]) -> Vec<usize> {
    let tree = KdTree::new(targets);
    sources
        .iter()
        .map(|&s| tree.nearest(s).expect("non-empty target set").0)
        .collect()
}

/// Matches every boundary point of `c0` to the nearest boundary point of
/// `c1`. Many-to-one matches are allowed; the direction is `c0 -> c1` only.
pub fn match_interfaces(c0: &Contour, c1: &Contour) -> Vec<(Point2, Point2)> {
    let sources = c0.edge_midpoints();
    let targets = c1.edge_midpoints();
    nearest_targets(&sources, &targets)
        .into_iter()
        .zip(sources)
        .map(|(j, s)| (s, targets[j]))
        .collect()
}

/// Signed interface speed in cm/s for one matched pair.
///
/// Magnitude is the displacement converted to cm over the elapsed time of
/// `delta_frames`; the sign is `+` when `target` falls outside `mask_t`,
/// `-` when inside, and the speed is 0 for a zero displacement.
pub fn signed_speed(
    source: Point2,
    target: Point2,
    mask_t: &BitMask,
    calibration: &Calibration,
    delta_frames: u64,
) -> f64 {
    let distance = source.distance(&target);
    if distance == 0.0 {
        return 0.0;
    }
    let magnitude = distance / calibration.pixels_per_cm()
        / calibration.frames_to_seconds(delta_frames as f64);
    if contains(mask_t, target) {
        -magnitude
    } else {
        magnitude
    }
}

/// Velocity samples of one bubble between two masks `delta_frames` apart.
pub fn velocity_profile(
    mask_t: &BitMask,
    mask_later: &BitMask,
    calibration: &Calibration,
    delta_frames: u64,
) -> Result<Vec<VelocitySample>, GeometryError> {
    let c0 = extract_contour(mask_t)?;
    let c1 = extract_contour(mask_later)?;
    let sources = parameterize(&c0).edge_midpoints();
    let targets = c1.edge_midpoints();
    let source_points: Vec<Point2> = sources.iter().map(|s| s.point).collect();
    let nearest = nearest_targets(&source_points, &targets);
    Ok(sources
        .iter()
        .zip(nearest)
        .map(|(s, j)| {
            let target = targets[j];
            VelocitySample {
                position: s.position,
                speed: signed_speed(s.point, target, mask_t, calibration, delta_frames),
                displacement: Point2::new(target.x - s.point.x, target.y - s.point.y),
                source_point: s.point,
                target_point: target,
            }
        })
        .collect())
}

/// Velocity samples of one evaluated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameProfile {
    pub frame: u64,
    pub samples: Vec<VelocitySample>,
}

/// Profile of `track` between `frame` and `frame + delta`, or `None` when the
/// track is not observed at both frames.
pub fn track_profile(track: &Track, dataset: &Dataset, frame: u64, delta_frames: u64) -> Option<FrameProfile> {
    let obs = track.observations();
    let a = obs.get(&frame)?;
    let b = obs.get(&(frame + delta_frames))?;
    let mask_t = dataset.detection(frame, a.detection_index)?.mask();
    let mask_later = dataset.detection(frame + delta_frames, b.detection_index)?.mask();
    let samples = velocity_profile(&mask_t, &mask_later, dataset.calibration(), delta_frames).ok()?;
    Some(FrameProfile { frame, samples })
}

/// Frames at which a profile can be evaluated: observed frames whose
/// `+delta` frame is also observed, thinned to every `stride`-th.
pub fn evaluation_frames(track: &Track, delta_frames: u64, stride: usize) -> Vec<u64> {
    let obs = track.observations();
    obs.keys()
        .copied()
        .filter(|f| obs.contains_key(&(f + delta_frames)))
        .step_by(stride.max(1))
        .collect()
}

/// Profiles for every evaluation frame of a track, in frame order.
pub fn track_profiles(track: &Track, dataset: &Dataset, config: &KinematicsConfig) -> Vec<FrameProfile> {
    evaluation_frames(track, config.delta_frames, config.stride)
        .into_iter()
        .filter_map(|f| track_profile(track, dataset, f, config.delta_frames))
        .collect()
}

/// Signed speeds on a (perimeter bin x frame) grid. Cells without samples are
/// `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityMap {
    bins: usize,
    frames: Vec<u64>,
    /// Bin-major: `values[bin * frames.len() + column]`.
    values: Vec<Option<f64>>,
    smoothed: bool,
}

impl VelocityMap {
    pub fn new(bins: usize, frames: Vec<u64>, values: Vec<Option<f64>>, smoothed: bool) -> Self {
        assert_eq!(values.len(), bins * frames.len(), "grid size mismatch");
        VelocityMap {
            bins,
            frames,
            values,
            smoothed,
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> &[u64] {
        &self.frames
    }

    pub fn is_smoothed(&self) -> bool {
        self.smoothed
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get(&self, bin: usize, column: usize) -> Option<f64> {
        self.values[bin * self.frames.len() + column]
    }

    /// Center of bin `k` in relative-perimeter units.
    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.bins as f64
    }

    /// `a * X`, cell by cell.
    pub fn scaled(&self, a: f64) -> VelocityMap {
        VelocityMap {
            values: self.values.iter().map(|v| v.map(|x| a * x)).collect(),
            ..self.clone()
        }
    }
}

/// Averages each profile's samples into `bins` relative-perimeter bins.
pub fn spectrogram(profiles: &[FrameProfile], bins: usize) -> VelocityMap {
    let cols = profiles.len();
    let mut sum = vec![0.0; bins * cols];
    let mut count = vec![0u32; bins * cols];
    for (c, p) in profiles.iter().enumerate() {
        for s in &p.samples {
            let b = ((s.position * bins as f64).floor() as usize).min(bins - 1);
            sum[b * cols + c] += s.speed;
            count[b * cols + c] += 1;
        }
    }
    let values = sum
        .iter()
        .zip(&count)
        .map(|(&s, &n)| (n > 0).then(|| s / f64::from(n)))
        .collect();
    VelocityMap::new(bins, profiles.iter().map(|p| p.frame).collect(), values, false)
}

/// Spectrogram of a track using the configured delta, bins and stride.
pub fn track_spectrogram(track: &Track, dataset: &Dataset, config: &KinematicsConfig) -> VelocityMap {
    spectrogram(&track_profiles(track, dataset, config), config.bins)
}

/// Per-frame maximum of `|speed|`.
pub fn max_velocity_series(profiles: &[FrameProfile]) -> Vec<(u64, f64)> {
    profiles
        .iter()
        .map(|p| {
            let max = p.samples.iter().map(|s| s.speed.abs()).fold(0.0, f64::max);
            (p.frame, max)
        })
        .collect()
}

/// Normalized, truncated Gaussian weights for offsets `-radius..=radius`.
/// The radius is `round(4 sigma)`; `sigma = 0` gives the identity kernel.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (4.0 * sigma + 0.5) as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Maps an out-of-range index by half-sample symmetric reflection
/// (`d c b a | a b c d | d c b a`).
pub fn reflect_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Separable Gaussian smoothing with absent cells excluded.
///
/// The perimeter axis wraps around; the time axis reflects at its ends.
/// Each present cell becomes the kernel-weighted mean of the present cells
/// around it; absent cells stay absent.
pub fn smooth(map: &VelocityMap, sigma_position: f64, sigma_time: f64) -> VelocityMap {
    let (rows, cols) = (map.bins, map.frames.len());
    if cols == 0 {
        return VelocityMap {
            smoothed: true,
            ..map.clone()
        };
    }
    let mut num: Vec<f64> = map.values.iter().map(|v| v.unwrap_or(0.0)).collect();
    let mut den: Vec<f64> = map.values.iter().map(|v| if v.is_some() { 1.0 } else { 0.0 }).collect();

    let kp = gaussian_kernel(sigma_position);
    let rp = (kp.len() / 2) as i64;
    let kt = gaussian_kernel(sigma_time);
    let rt = (kt.len() / 2) as i64;

    for grid in [&mut num, &mut den] {
        let mut tmp = vec![0.0; rows * cols];
        for b in 0..rows {
            for c in 0..cols {
                tmp[b * cols + c] = kp
                    .iter()
                    .enumerate()
                    .map(|(k, w)| {
                        let src = (b as i64 + k as i64 - rp).rem_euclid(rows as i64) as usize;
                        w * grid[src * cols + c]
                    })
                    .sum();
            }
        }
        for b in 0..rows {
            for c in 0..cols {
                grid[b * cols + c] = kt
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * tmp[b * cols + reflect_index(c as i64 + k as i64 - rt, cols)])
                    .sum();
            }
        }
    }

    let values = map
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v.map(|_| num[i] / den[i]))
        .collect();
    VelocityMap::new(rows, map.frames.clone(), values, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cal() -> Calibration {
        Calibration::new(100.0, 3000.0).unwrap()
    }

    fn disk(r: f64, cx: f64, cy: f64, size: u32) -> BitMask {
        BitMask::from_fn(size, size, |x, y| {
            let (dx, dy) = (f64::from(x) + 0.5 - cx, f64::from(y) + 0.5 - cy);
            dx * dx + dy * dy <= r * r
        })
    }

    #[test]
    fn identical_contours_match_themselves() {
        let c = extract_contour(&disk(20.0, 32.0, 32.0, 64)).unwrap();
        for (s, t) in match_interfaces(&c, &c) {
            assert_eq!(s, t);
        }
    }

    #[test]
    fn translated_contour_matches_brute_force() {
        let c0 = extract_contour(&disk(20.0, 30.0, 32.0, 70)).unwrap();
        let c1 = extract_contour(&disk(20.0, 33.0, 32.0, 70)).unwrap();
        let pairs = match_interfaces(&c0, &c1);
        let targets = c1.edge_midpoints();
        for (s, t) in &pairs {
            assert!(s.distance(t) <= 3.0 + 1e-12);
            let mut best = (0usize, f64::INFINITY);
            for (j, p) in targets.iter().enumerate() {
                let d = s.distance_sq(p);
                if d < best.1 {
                    best = (j, d);
                }
            }
            assert_eq!(*t, targets[best.0]);
        }
    }

    #[test]
    fn concentric_circles_move_radially_outward() {
        let (cx, cy) = (80.0, 80.0);
        let c0 = extract_contour(&disk(50.0, cx, cy, 160)).unwrap();
        let c1 = extract_contour(&disk(55.0, cx, cy, 160)).unwrap();
        for (s, t) in match_interfaces(&c0, &c1) {
            let d = s.distance(&t);
            assert!((d - 5.0).abs() <= 1.0, "{d}");
            let radial = (s.x - cx) * (t.x - s.x) + (s.y - cy) * (t.y - s.y);
            assert!(radial > 0.0);
        }
    }

    #[test]
    fn speed_conversion_and_sign() {
        let mask = BitMask::from_fn(20, 20, |x, _| x < 10);
        let src = Point2::new(10.0, 5.5);
        // 5 px outward at 100 px/cm, 3000 fps, 5 frames -> 30 cm/s
        let out = signed_speed(src, Point2::new(15.0, 5.5), &mask, &cal(), 5);
        assert!((out - 30.0).abs() < 1e-12);
        let inward = signed_speed(src, Point2::new(5.0, 5.5), &mask, &cal(), 5);
        assert!((inward + 30.0).abs() < 1e-12);
        assert_eq!(signed_speed(src, src, &mask, &cal(), 5), 0.0);
    }

    #[test]
    fn static_bubble_has_zero_speed() {
        let m = disk(25.0, 40.0, 40.0, 80);
        let prof = velocity_profile(&m, &m, &cal(), 5).unwrap();
        assert!(prof.iter().all(|s| s.speed == 0.0));
        assert_eq!(max_velocity_series(&[FrameProfile { frame: 0, samples: prof }]), vec![(0, 0.0)]);
    }

    #[test]
    fn dilating_disk_speed() {
        let prof = velocity_profile(&disk(50.0, 80.0, 80.0, 160), &disk(55.0, 80.0, 80.0, 160), &cal(), 5).unwrap();
        let mean = prof.iter().map(|s| s.speed).sum::<f64>() / prof.len() as f64;
        assert!((mean - 30.0).abs() <= 1.5, "{mean}");
        assert!(prof.iter().all(|s| s.speed > 0.0));
        // every sample within one pixel of the true 5 px displacement
        assert!(prof.iter().all(|s| (s.speed - 30.0).abs() <= 6.0 + 1e-9));
    }

    #[test]
    fn upward_translation_sign_pattern() {
        // moving up = decreasing image y
        let prof = velocity_profile(&disk(30.0, 50.0, 60.0, 100), &disk(30.0, 50.0, 54.0, 100), &cal(), 5).unwrap();
        for s in &prof {
            let from_top = (s.position - 0.5).abs();
            if from_top < 0.1 {
                assert!(s.speed > 0.0, "top {s:?}");
            }
            if s.position < 0.1 || s.position > 0.9 {
                assert!(s.speed < 0.0, "bottom {s:?}");
            }
        }
    }

    #[test]
    fn speed_identity_holds() {
        let prof = velocity_profile(&disk(30.0, 50.0, 50.0, 100), &disk(33.0, 52.0, 49.0, 100), &cal(), 3).unwrap();
        for s in prof {
            let d = s.displacement.x.hypot(s.displacement.y);
            let back = s.speed.abs() * 100.0 * 3.0 / 3000.0;
            assert!((back - d).abs() <= 1e-12 * d.max(1.0));
        }
    }

    #[test]
    fn spectrogram_fills_all_bins_when_dense() {
        // A 300-edge contour: rectangle 70 x 80 px.
        let m = BitMask::from_fn(100, 100, |x, y| (10..80).contains(&x) && (10..90).contains(&y));
        let prof = velocity_profile(&m, &m, &cal(), 5).unwrap();
        assert_eq!(prof.len(), 300);
        let map = spectrogram(&[FrameProfile { frame: 3, samples: prof }], 200);
        assert!((0..200).all(|b| map.get(b, 0).is_some()));
        assert_eq!(map.frames(), &[3]);
        assert!((map.bin_center(0) - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn empty_spectrogram() {
        let map = spectrogram(&[], 16);
        assert!(map.is_empty());
        assert!(smooth(&map, 2.0, 2.0).is_empty());
    }

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-4..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        assert_eq!(reflect_index(-1, 1), 0);
    }

    fn grid(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Option<f64>) -> VelocityMap {
        let mut values = Vec::new();
        for b in 0..rows {
            for c in 0..cols {
                values.push(f(b, c));
            }
        }
        VelocityMap::new(rows, (0..cols as u64).collect(), values, false)
    }

    /// Direct masked 2-D convolution with the product kernel.
    fn dense_oracle(map: &VelocityMap, sp: f64, st: f64) -> Vec<Option<f64>> {
        let (rows, cols) = (map.bins(), map.frames().len());
        let kp = gaussian_kernel(sp);
        let kt = gaussian_kernel(st);
        let (rp, rt) = ((kp.len() / 2) as i64, (kt.len() / 2) as i64);
        let mut out = Vec::new();
        for b in 0..rows {
            for c in 0..cols {
                if map.get(b, c).is_none() {
                    out.push(None);
                    continue;
                }
                let (mut num, mut den) = (0.0, 0.0);
                for (i, wp) in kp.iter().enumerate() {
                    for (j, wt) in kt.iter().enumerate() {
                        let bb = (b as i64 + i as i64 - rp).rem_euclid(rows as i64) as usize;
                        let cc = reflect_index(c as i64 + j as i64 - rt, cols);
                        if let Some(v) = map.get(bb, cc) {
                            num += wp * wt * v;
                            den += wp * wt;
                        }
                    }
                }
                out.push(Some(num / den));
            }
        }
        out
    }

    #[test]
    fn zero_sigma_is_identity() {
        let m = grid(10, 6, |b, c| if (b + c) % 4 == 0 { None } else { Some((b * 7 + c) as f64) });
        let s = smooth(&m, 0.0, 0.0);
        assert_eq!(s.values(), m.values());
        assert!(s.is_smoothed());
    }

    #[test]
    fn constant_field_unchanged() {
        let m = grid(12, 9, |b, c| if b == 3 && c == 4 { None } else { Some(-7.25) });
        let s = smooth(&m, 2.0, 1.5);
        for (a, b) in s.values().iter().zip(m.values()) {
            match (a, b) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-12),
                (None, None) => {}
                _ => panic!("presence changed"),
            }
        }
    }

    #[test]
    fn impulse_matches_dense_convolution() {
        let m = grid(20, 15, |b, c| Some(if (b, c) == (1, 13) { 1.0 } else { 0.0 }));
        let s = smooth(&m, 2.0, 2.0);
        let oracle = dense_oracle(&m, 2.0, 2.0);
        for (a, b) in s.values().iter().zip(&oracle) {
            assert!((a.unwrap() - b.unwrap()).abs() < 1e-12);
        }
        // wraps across the perimeter seam
        assert!(s.get(19, 13).unwrap() > 0.0);
    }

    proptest! {
        #[test]
        fn smoothing_matches_oracle_and_is_linear(
            seed in any::<u64>(), rows in 8usize..24, cols in 1usize..12,
            sp in 0.0f64..5.0, st in 0.0f64..4.0, a in -10.0f64..10.0,
        ) {
            let mut s = seed | 1;
            let m = grid(rows, cols, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let u = (s >> 11) as f64 / (1u64 << 53) as f64;
                (u > 0.2).then_some(60.0 * u - 30.0)
            });
            let out = smooth(&m, sp, st);
            for (x, y) in out.values().iter().zip(dense_oracle(&m, sp, st)) {
                match (x, y) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                    (None, None) => {}
                    _ => prop_assert!(false, "presence mismatch"),
                }
            }
            let scaled = smooth(&m.scaled(a), sp, st);
            for (x, y) in scaled.values().iter().zip(out.scaled(a).values()) {
                if let (Some(x), Some(y)) = (x, y) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn dilation_positive_erosion_negative(
            a in 6.0f64..16.0, b in 6.0f64..16.0, theta in 0.0f64..3.0, k in 1.0f64..3.5,
        ) {
            let (cx, cy) = (30.3, 29.6);
            let (st, ct) = theta.sin_cos();
            let base = BitMask::from_fn(60, 60, |x, y| {
                let (dx, dy) = (f64::from(x) + 0.5 - cx, f64::from(y) + 0.5 - cy);
                let (u, v) = (ct * dx + st * dy, -st * dx + ct * dy);
                (u / a).powi(2) + (v / b).powi(2) <= 1.0
            });
            let pixels: Vec<(u32, u32)> = base.iter_set().collect();
            let near = |x: u32, y: u32| pixels.iter().any(|&(px, py)| {
                (f64::from(px) - f64::from(x)).hypot(f64::from(py) - f64::from(y)) <= k
            });
            let dilated = BitMask::from_fn(60, 60, near);
            let kr = k.ceil() as i64;
            let eroded = BitMask::from_fn(60, 60, |x, y| {
                for dy in -kr..=kr {
                    for dx in -kr..=kr {
                        if ((dx * dx + dy * dy) as f64).sqrt() <= k && !base.get_signed(i64::from(x) + dx, i64::from(y) + dy) {
                            return false;
                        }
                    }
                }
                true
            });
            prop_assume!(!eroded.is_empty());
            for s in velocity_profile(&base, &dilated, &cal(), 5).unwrap() {
                prop_assert!(s.speed > 0.0);
            }
            for s in velocity_profile(&base, &eroded, &cal(), 5).unwrap() {
                prop_assert!(s.speed < 0.0);
            }
        }
    }
}
