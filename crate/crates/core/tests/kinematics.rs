use bubbletrack::corpus::Category;
use bubbletrack::fixtures::{self, disk, Instance};
use bubbletrack::kinematics::{
    evaluation_frames, match_interfaces, max_velocity_series, smooth, track_profiles, track_spectrogram,
    KinematicsConfig,
};
use bubbletrack::geometry::extract_contour;
use bubbletrack::{tracker, Calibration, Dataset, TrackerConfig};

fn cal() -> Calibration {
    Calibration::new(100.0, 3000.0).unwrap()
}

/// Disk of radius `r0 + rate * f` at frame `f`.
fn growing(r0: f64, rate: f64, n: u64) -> Dataset {
    let frames = (0..n)
        .map(|f| vec![Instance::new(disk(160, 160, 80.0, 80.0, r0 + rate * f as f64), Category::Attached)])
        .collect();
    fixtures::dataset(cal(), 160, 160, frames)
}

#[test]
fn dilating_track_spectrogram_is_near_thirty() {
    let ds = growing(50.0, 1.0, 11);
    let set = tracker::run(&ds, &TrackerConfig::default()).unwrap();
    assert_eq!(set.len(), 1);
    let t = &set.tracks()[0];
    let config = KinematicsConfig::default();
    let map = track_spectrogram(t, &ds, &config);
    assert_eq!(map.frames(), &[0, 1, 2, 3, 4, 5]);
    let cells: Vec<f64> = map.values().iter().flatten().copied().collect();
    assert_eq!(cells.len(), 200 * 6);
    assert!(cells.iter().all(|&v| v > 0.0));
    let mean = cells.iter().sum::<f64>() / cells.len() as f64;
    assert!((mean - 30.0).abs() <= 1.5, "{mean}");
    for (_, m) in max_velocity_series(&track_profiles(t, &ds, &config)) {
        assert!((m - 30.0).abs() <= 6.0, "{m}");
    }
    let smoothed = smooth(&map, 2.0, 2.0);
    let s_mean = smoothed.values().iter().flatten().sum::<f64>() / cells.len() as f64;
    assert!((s_mean - 30.0).abs() <= 1.5, "{s_mean}");
}

#[test]
fn series_length_counts_pairs_and_stride() {
    let ds = growing(30.0, 0.5, 20);
    let set = tracker::run(&ds, &TrackerConfig::default()).unwrap();
    let t = &set.tracks()[0];
    for stride in 1..5 {
        let n = evaluation_frames(t, 5, stride).len();
        assert_eq!(n, (20 - 5usize).div_ceil(stride));
    }
}

#[test]
fn single_frame_track_gives_empty_map() {
    let ds = growing(20.0, 0.0, 1);
    let set = tracker::run(&ds, &TrackerConfig { min_hits: 1, ..TrackerConfig::default() }).unwrap();
    assert!(track_spectrogram(&set.tracks()[0], &ds, &KinematicsConfig::default()).is_empty());
}

#[test]
fn matching_equals_brute_force_on_large_contours() {
    let a = extract_contour(&disk(600, 600, 300.0, 300.0, 240.0)).unwrap();
    let b = extract_contour(&disk(600, 600, 303.0, 298.0, 245.0)).unwrap();
    assert!(a.len() > 1500);
    let targets = b.edge_midpoints();
    for (s, t) in match_interfaces(&a, &b) {
        let best = targets.iter().map(|p| p.distance_sq(&s)).fold(f64::INFINITY, f64::min);
        assert_eq!(t.distance_sq(&s), best);
    }
}
