//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use bubbletrack::fixtures::{moving_disks, MovingDisk};
use bubbletrack::tracker::{count_identity_switches, Tracker, TrackerConfig};
use bubbletrack::Calibration;

pub type Mat = Vec<Vec<f64>>;

fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

fn mul(a: &Mat, b: &Mat) -> Mat {
    let mut out = zeros(a.len(), b[0].len());
    for i in 0..a.len() {
        for j in 0..b[0].len() {
            let mut acc = 0.0;
            for k in 0..b.len() {
                acc += a[i][k] * b[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

fn transpose(a: &Mat) -> Mat {
    let mut out = zeros(a[0].len(), a.len());
    for i in 0..a.len() {
        for j in 0..a[0].len() {
            out[j][i] = a[i][j];
        }
    }
    out
}

/// Gauss-Jordan inverse with partial pivoting.
fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a.to_vec();
    let mut inv = zeros(n, n);
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col];
        for j in 0..n {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                for j in 0..n {
                    m[r][j] -= f * m[col][j];
                    inv[r][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

fn diag(v: &[f64]) -> Mat {
    let mut out = zeros(v.len(), v.len());
    for (i, x) in v.iter().enumerate() {
        out[i][i] = *x;
    }
    out
}

/// Textbook constant-velocity predict on the 7-state box model.
pub fn reference_predict(x: &[f64], p: &Mat, q: &[f64]) -> (Vec<f64>, Mat) {
    let mut f = diag(&[1.0; 7]);
    f[0][4] = 1.0;
    f[1][5] = 1.0;
    f[2][6] = 1.0;
    let xs: Mat = x.iter().map(|v| vec![*v]).collect();
    let x1: Vec<f64> = mul(&f, &xs).into_iter().map(|r| r[0]).collect();
    let mut p1 = mul(&mul(&f, p), &transpose(&f));
    for i in 0..7 {
        p1[i][i] += q[i];
    }
    (x1, p1)
}

/// Textbook Kalman update `K = P H' S^-1`, `P' = (I - K H) P`, symmetrized.
pub fn reference_update(x: &[f64], p: &Mat, z: &[f64], r: &[f64]) -> (Vec<f64>, Mat) {
    let mut h = zeros(4, 7);
    for i in 0..4 {
        h[i][i] = 1.0;
    }
    let mut s = mul(&mul(&h, p), &transpose(&h));
    for i in 0..4 {
        s[i][i] += r[i];
    }
    let k = mul(&mul(p, &transpose(&h)), &inverse(&s));
    let y: Vec<f64> = (0..4).map(|i| z[i] - x[i]).collect();
    let x1: Vec<f64> = (0..7).map(|i| x[i] + (0..4).map(|j| k[i][j] * y[j]).sum::<f64>()).collect();
    let mut ikh = mul(&k, &h);
    for i in 0..7 {
        for j in 0..7 {
            ikh[i][j] = if i == j { 1.0 } else { 0.0 } - ikh[i][j];
        }
    }
    let p1 = mul(&ikh, p);
    let sym = (0..7).map(|i| (0..7).map(|j| 0.5 * (p1[i][j] + p1[j][i])).collect()).collect();
    (x1, sym)
}

/// Minimum total cost over every injective row-to-column map (rows <= cols),
/// summing in row order.
pub fn brute_force_assignment(costs: &[Vec<f64>]) -> f64 {
    fn go(costs: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == costs.len() {
            *best = best.min(acc);
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                go(costs, row + 1, used, acc + costs[row][c], best);
                used[c] = false;
            }
        }
    }
    let rows = costs.len();
    let cols = costs.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    if rows > cols {
        let t: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| costs[r][c]).collect()).collect();
        return brute_force_assignment(&t);
    }
    let mut best = f64::INFINITY;
    go(costs, 0, &mut vec![false; cols], 0.0, &mut best);
    best
}

/// Outcome of tracking a synthetic disk scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneOutcome {
    pub track_count: usize,
    pub switches: usize,
    /// Mean distance between each track's one-step-ahead predicted center
    /// and the true next center, over the `window` frames from `from`.
    pub post_occlusion_error: f64,
}

pub fn track_scene(
    disks: &[MovingDisk],
    n_frames: u64,
    hidden: impl Fn(usize, u64) -> bool,
    size: (u32, u32),
    config: TrackerConfig,
    from: u64,
    window: u64,
) -> SceneOutcome {
    let cal = Calibration::new(100.0, 3000.0).unwrap();
    let (ds, owners) = moving_disks(cal, size.0, size.1, disks, n_frames, hidden);
    let mut tracker = Tracker::new(config).unwrap();
    let mut truth: BTreeMap<u64, BTreeMap<u64, u64>> = BTreeMap::new();
    let (mut err, mut count) = (0.0, 0);
    for (fi, frame) in ds.frames().iter().enumerate() {
        for (id, j) in tracker.step(frame).unwrap() {
            truth.entry(owners[fi][j] as u64).or_default().insert(frame.index, id);
        }
        if (from..from + window).contains(&frame.index) {
            for track in tracker.live_tracks() {
                if let Some(o) = track.observations().get(&frame.index) {
                    let (next, _) = track.state().predict(&config.noise);
                    let (cx, cy) = disks[owners[fi][o.detection_index]].center(frame.index + 1);
                    err += (next.mean[0] - cx).hypot(next.mean[1] - cy);
                    count += 1;
                }
            }
        }
    }
    SceneOutcome {
        track_count: tracker.finish().len(),
        switches: count_identity_switches(&truth),
        post_occlusion_error: if count > 0 { err / count as f64 } else { f64::NAN },
    }
}

/// Two disks moving apart in parallel lanes, never overlapping.
pub fn parallel_pair() -> [MovingDisk; 2] {
    [
        MovingDisk { start: (12.0, 20.0), velocity: (1.5, 0.25), radius: 6.0 },
        MovingDisk { start: (12.0, 70.0), velocity: (1.5, 0.2), radius: 7.0 },
    ]
}

/// Two disks meeting head-on; they coincide between frames 21 and 22.
pub fn crossing_pair() -> [MovingDisk; 2] {
    [
        MovingDisk { start: (20.0, 30.0), velocity: (2.0, 0.5), radius: 7.0 },
        MovingDisk { start: (108.0, 30.0), velocity: (-2.0, 0.5), radius: 7.0 },
    ]
}

/// Frames in which the crossing pair is hidden.
pub fn crossing_hidden(_: usize, f: u64) -> bool {
    f == 21 || f == 22
}
