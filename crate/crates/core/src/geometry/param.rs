use super::{Contour, Point2};

/// Points closer than this to the lowest image row count as "bottom".
const BOTTOM_TOLERANCE_PX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSample {
    /// Relative perimeter position in `[0, 1)`.
    pub position: f64,
    pub point: Point2,
}

/// A contour re-indexed from its bottom-middle point, with each vertex
/// tagged by its relative arc-length position along the counter-clockwise
/// traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamContour {
    samples: Vec<ParamSample>,
    origin_index: usize,
    perimeter: f64,
}

impl ParamContour {
    pub fn samples(&self) -> &[ParamSample] {
        &self.samples
    }

    /// Index in the source contour of the vertex at position 0.
    pub fn origin_index(&self) -> usize {
        self.origin_index
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// Midpoint of every edge, tagged with the position of that midpoint.
    /// Edge `k` joins sample `k` and sample `k + 1`.
    pub fn edge_midpoints(&self) -> Vec<ParamSample> {
        let n = self.samples.len();
        (0..n)
            .map(|k| {
                let a = self.samples[k];
                let b = self.samples[(k + 1) % n];
                let len = a.point.distance(&b.point);
                ParamSample {
                    position: (a.position + 0.5 * len / self.perimeter).rem_euclid(1.0),
                    point: a.point.midpoint(&b.point),
                }
            })
            .collect()
    }
}

/// Parameterizes a contour by relative perimeter.
///
/// Position 0 is the middle (by arc length) of the bottommost run: the
/// longest contiguous stretch of vertices within 0.5 px of the maximal image
/// y, ties going to the run that starts first along the stored contour. When
/// the middle falls between two vertices the earlier one is used. Positions
/// then grow counter-clockwise as displayed: bottom, right, top, left.
pub fn parameterize(contour: &Contour) -> ParamContour {
    let pts = contour.points();
    let n = pts.len();
    assert!(n >= 3, "contour needs at least 3 points");
    let edge_len: Vec<f64> = contour.edges().map(|(a, b)| a.distance(&b)).collect();
    let perimeter: f64 = edge_len.iter().sum();

    let y_max = pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let is_bottom: Vec<bool> = pts.iter().map(|p| p.y >= y_max - BOTTOM_TOLERANCE_PX).collect();

    let origin_index = if is_bottom.iter().all(|&b| b) {
        0
    } else {
        // Start scanning right after a non-bottom vertex so no run wraps.
        let offset = (is_bottom.iter().position(|&b| !b).unwrap() + 1) % n;
        let mut best: Option<(f64, usize, usize)> = None; // (arc length, first vertex, vertex count)
        let mut j = 0;
        while j < n {
            let i = (offset + j) % n;
            if !is_bottom[i] {
                j += 1;
                continue;
            }
            let mut count = 1;
            let mut arc = 0.0;
            while j + count < n && is_bottom[(offset + j + count) % n] {
                arc += edge_len[(offset + j + count - 1) % n];
                count += 1;
            }
            let better = match best {
                None => true,
                Some((best_arc, best_start, _)) => {
                    arc > best_arc || (arc == best_arc && i < best_start)
                }
            };
            if better {
                best = Some((arc, i, count));
            }
            j += count;
        }
        let (arc, first, count) = best.expect("at least one bottom vertex");
        let half = arc / 2.0;
        let mut walked = 0.0;
        let mut chosen = first;
        for k in 0..count {
            let idx = (first + k) % n;
            let next_walked = walked + edge_len[idx];
            if k + 1 < count && (next_walked - half).abs() < (walked - half).abs() {
                walked = next_walked;
                chosen = (first + k + 1) % n;
            } else {
                break;
            }
        }
        chosen
    };

    let mut samples = Vec::with_capacity(n);
    let mut arc = 0.0;
    for k in 0..n {
        let idx = (origin_index + k) % n;
        samples.push(ParamSample {
            position: arc / perimeter,
            point: pts[idx],
        });
        arc += edge_len[idx];
    }
    ParamContour {
        samples,
        origin_index,
        perimeter,
    }
}
