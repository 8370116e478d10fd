mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;

use bubbletrack::corpus::Category;
use bubbletrack::fixtures::{self, disk, Instance, MovingDisk};
use bubbletrack::tracker::{self, measurement_from_bbox, solve_assignment, CostMatrix, KalmanState, NoiseModel};
use bubbletrack::{BBox, Calibration, TrackerConfig};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn random_state(rng: &mut ChaCha8Rng) -> KalmanState {
    let noise = NoiseModel::default();
    let b = BBox::new(rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0), rng.gen_range(2.0..80.0), rng.gen_range(2.0..80.0));
    let mut s = KalmanState::from_bbox(&b, &noise);
    for k in 4..7 {
        s.mean[k] = rng.gen_range(-5.0..5.0);
    }
    // random SPD covariance: A A' + diag
    let a = nalgebra::SMatrix::<f64, 7, 7>::from_fn(|_, _| rng.gen_range(-3.0..3.0));
    s.covariance = a * a.transpose() + tracker::StateMatrix::from_diagonal(&tracker::StateVector::from(noise.initial_covariance));
    s
}

fn to_rows(m: &tracker::StateMatrix) -> Mat {
    (0..7).map(|i| (0..7).map(|j| m[(i, j)]).collect()).collect()
}

#[test]
fn kalman_matches_scalar_reference() {
    let noise = NoiseModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let s = random_state(&mut rng);
        let x: Vec<f64> = s.mean.iter().copied().collect();
        let (pred, _) = s.predict(&noise);
        let (rx, rp) = reference_predict(&x, &to_rows(&s.covariance), &noise.process);
        assert!((0..7).all(|i| close(pred.mean[i], rx[i])));
        assert!((0..7).all(|i| (0..7).all(|j| close(pred.covariance[(i, j)], rp[i][j]))));

        let z = measurement_from_bbox(&BBox::new(rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0), rng.gen_range(2.0..80.0), rng.gen_range(2.0..80.0)));
        let (upd, flagged) = pred.update(&z, &noise);
        assert!(!flagged);
        let (ux, up) = reference_update(&rx, &rp, z.as_slice(), &noise.measurement);
        assert!((0..7).all(|i| close(upd.mean[i], ux[i])), "{:?} vs {:?}", upd.mean, ux);
        assert!((0..7).all(|i| (0..7).all(|j| close(upd.covariance[(i, j)], up[i][j]))));
        // symmetric and positive semidefinite
        assert_eq!(upd.covariance, upd.covariance.transpose());
        let eig = upd.covariance.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e >= -1e-9 * eig.max()), "{eig:?}");
        assert!(upd.mean[2] > 0.0);
    }
}

#[test]
fn hungarian_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..500 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=6);
        // alternate continuous costs with small integers (many ties)
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| if case % 2 == 0 { rng.gen_range(-1.0..1.0) } else { f64::from(rng.gen_range(0..4)) })
                    .collect()
            })
            .collect();
        let matrix = CostMatrix::from_fn(n, m, |r, c| rows[r][c]);
        let pairs = solve_assignment(&matrix);
        assert_eq!(pairs.len(), n.min(m));
        let rows_used: BTreeSet<usize> = pairs.iter().map(|p| p.0).collect();
        let cols_used: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
        assert_eq!((rows_used.len(), cols_used.len()), (pairs.len(), pairs.len()));
        let expected = brute_force_assignment(&rows);
        let total = if n <= m {
            matrix.total(&pairs)
        } else {
            let mut by_col = pairs.clone();
            by_col.sort_by_key(|p| p.1);
            matrix.total(&by_col)
        };
        assert_eq!(total, expected, "case {case}: {rows:?}");
    }
}

#[test]
fn two_parallel_targets_keep_their_ids() {
    let out = track_scene(&parallel_pair(), 100, |_, _| false, (200, 110), TrackerConfig::default(), 0, 0);
    assert_eq!((out.track_count, out.switches), (2, 0));
}

#[test]
fn occluded_target_resumes_and_re_update_helps() {
    let d = [MovingDisk { start: (20.0, 40.0), velocity: (2.0, 0.5), radius: 8.0 }];
    let hidden = |_: usize, f: u64| (5..10).contains(&f);
    let with = track_scene(&d, 40, hidden, (160, 80), TrackerConfig::default(), 10, 5);
    let without = track_scene(&d, 40, hidden, (160, 80), TrackerConfig { re_update: false, ..TrackerConfig::default() }, 10, 5);
    assert_eq!((with.track_count, with.switches), (1, 0));
    assert_eq!((without.track_count, without.switches), (1, 0));
    assert!(with.post_occlusion_error < without.post_occlusion_error, "{with:?} vs {without:?}");
}

#[test]
fn crossing_targets_with_mutual_occlusion() {
    let with = track_scene(&crossing_pair(), 44, crossing_hidden, (128, 80), TrackerConfig::default(), 23, 5);
    let without = track_scene(&crossing_pair(), 44, crossing_hidden, (128, 80), TrackerConfig { re_update: false, ..TrackerConfig::default() }, 23, 5);
    assert_eq!(with.track_count, 2);
    assert!(with.switches <= 1);
    assert!(with.post_occlusion_error < without.post_occlusion_error, "{with:?} vs {without:?}");
}

#[test]
fn single_persistent_bubble_is_one_track() {
    let cal = Calibration::new(100.0, 3000.0).unwrap();
    let frames = (0..30).map(|f| vec![Instance::new(disk(64, 64, 32.0, 40.0 - 0.3 * f as f64, 10.0), Category::Attached)]).collect();
    let ds = fixtures::dataset(cal, 64, 64, frames);
    let set = tracker::run(&ds, &TrackerConfig::default()).unwrap();
    assert_eq!(set.len(), 1);
    assert_eq!(set.tracks()[0].observations().len(), 30);
    assert_eq!(set.tracks()[0].status(), tracker::TrackStatus::Confirmed);
}

#[test]
fn empty_dataset_gives_no_tracks() {
    let cal = Calibration::new(100.0, 3000.0).unwrap();
    let ds = fixtures::dataset(cal, 16, 16, vec![vec![], vec![]]);
    assert!(tracker::run(&ds, &TrackerConfig::default()).unwrap().is_empty());
}

fn busy_dataset() -> bubbletrack::Dataset {
    let cal = Calibration::new(100.0, 3000.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let disks: Vec<MovingDisk> = (0..8)
        .map(|_| MovingDisk {
            start: (rng.gen_range(10.0..150.0), rng.gen_range(10.0..150.0)),
            velocity: (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
            radius: rng.gen_range(4.0..9.0),
        })
        .collect();
    fixtures::moving_disks(cal, 160, 160, &disks, 60, |k, f| (f + k as u64).is_multiple_of(17)).0
}

#[test]
fn runs_are_deterministic_and_claims_are_exclusive() {
    let ds = busy_dataset();
    let a = tracker::run(&ds, &TrackerConfig::default()).unwrap();
    let b = tracker::run(&ds, &TrackerConfig::default()).unwrap();
    assert_eq!(a, b);
    let claims: usize = a.tracks().iter().map(|t| t.observations().len()).sum();
    assert_eq!(claims, a.assignments().len());
    let mut ids = a.ids();
    ids.dedup();
    assert_eq!(ids.len(), a.len());
}

/// Tracks of the busy scene in plain IoU/Kalman mode. Set BUBBLETRACK_BLESS=1
/// to rewrite the stored file after an intended behaviour change.
#[test]
fn sort_mode_matches_golden_file() {
    let set = tracker::run(&busy_dataset(), &TrackerConfig::sort_mode()).unwrap();
    let tracks: Vec<_> = set
        .tracks()
        .iter()
        .map(|t| {
            let frames: Vec<_> = t.observations().iter().map(|(f, o)| json!([f, o.detection_index])).collect();
            let mean: Vec<String> = t.state().mean.iter().map(|v| format!("{v:.6}")).collect();
            json!({"id": t.id(), "frames": frames, "final_mean": mean})
        })
        .collect();
    let actual = serde_json::to_string_pretty(&json!({ "tracks": tracks })).unwrap() + "\n";
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/sort_mode_tracks.json");
    if std::env::var_os("BUBBLETRACK_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).expect("golden file missing; run with BUBBLETRACK_BLESS=1");
    assert_eq!(actual, expected);
}
