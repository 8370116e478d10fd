use std::collections::VecDeque;

use super::{GeometryError, Point2};
use crate::corpus::BitMask;

/// Closed boundary polygon of a mask component, traced along pixel edges.
///
/// Vertices sit on the integer pixel-corner lattice, one per unit of
/// boundary length; the closing edge from the last vertex back to the first
/// is implicit. Orientation is counter-clockwise as displayed (positive
/// signed area with y pointing up).
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    points: Vec<Point2>,
}

impl Contour {
    /// Wraps a closed polygon, reversing it if needed so it runs
    /// counter-clockwise as displayed.
    pub fn new(mut points: Vec<Point2>) -> Self {
        if signed_area_y_up(&points) < 0.0 {
            points.reverse();
        }
        Contour { points }
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Edges as `(start, end)` pairs, including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        self.points
            .iter()
            .zip(self.points.iter().cycle().skip(1))
            .map(|(&a, &b)| (a, b))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(&b)).sum()
    }

    /// Shoelace area with y pointing up; positive for this type's orientation.
    pub fn signed_area(&self) -> f64 {
        signed_area_y_up(&self.points)
    }

    /// Midpoints of the boundary edges, in traversal order. Edge `i` runs
    /// from vertex `i` to vertex `i + 1`.
    pub fn edge_midpoints(&self) -> Vec<Point2> {
        self.edges().map(|(a, b)| a.midpoint(&b)).collect()
    }
}

fn signed_area_y_up(points: &[Point2]) -> f64 {
    // The y-down shoelace sum has the opposite sign of the displayed (y-up) one.
    let twice: f64 = points
        .iter()
        .zip(points.iter().cycle().skip(1))
        .map(|(a, b)| a.x * b.y - b.x * a.y)
        .sum();
    -twice / 2.0
}

/// Outer boundary of the largest 8-connected component of `mask`.
///
/// The boundary follows pixel edges (cracks), so the polygon encloses whole
/// pixels: for a component without holes its area equals the pixel count.
/// Holes are ignored. Among components of equal size the one whose bounding
/// box starts highest (then leftmost) wins.
pub fn extract_contour(mask: &BitMask) -> Result<Contour, GeometryError> {
    let component = largest_component(mask).ok_or(GeometryError::EmptyMask)?;
    Ok(Contour::new(trace_outer_boundary(&component)))
}

/// Returns a mask holding only the largest 8-connected component.
fn largest_component(mask: &BitMask) -> Option<BitMask> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut label = vec![0u32; w * h];
    let mut best: Option<(u64, (usize, usize), u32)> = None;
    let mut next = 0u32;
    let mut queue = VecDeque::new();

    for start in 0..w * h {
        if !mask.bits()[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        queue.push_back(start);
        let mut count = 0u64;
        let (mut top, mut left) = (usize::MAX, usize::MAX);
        while let Some(i) = queue.pop_front() {
            count += 1;
            let (x, y) = (i % w, i / w);
            top = top.min(y);
            left = left.min(x);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask.bits()[j] && label[j] == 0 {
                        label[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
        let better = match best {
            None => true,
            Some((n, corner, _)) => count > n || (count == n && (top, left) < corner),
        };
        if better {
            best = Some((count, (top, left), next));
        }
    }

    let (_, _, chosen) = best?;
    BitMask::from_bits(
        mask.width(),
        mask.height(),
        label.iter().map(|&l| l == chosen).collect(),
    )
}

/// Crack-following trace of the outer boundary of a single 8-connected
/// component. Walks with the component on the right-hand side (clockwise as
/// displayed); [`Contour::new`] flips the result.
fn trace_outer_boundary(component: &BitMask) -> Vec<Point2> {
    // First set pixel in raster order: its top edge is on the outer boundary
    // and its top-left corner touches no other component pixel.
    let first = component.bits().iter().position(|&b| b).expect("non-empty component");
    let w = component.width() as usize;
    let start = ((first % w) as i64, (first / w) as i64);

    // Pixel index of the cell at `v + (a + b) / 2` where `a`, `b` are unit
    // lattice directions with exactly one of them non-zero per axis.
    fn cell(v: i64, half: i64) -> i64 {
        if half > 0 {
            v
        } else {
            v - 1
        }
    }
    let set = |x: i64, y: i64| component.get_signed(x, y);

    let mut points = Vec::new();
    let (mut vx, mut vy) = start;
    let (mut dx, mut dy) = (1i64, 0i64);
    loop {
        points.push(Point2::new(vx as f64, vy as f64));
        vx += dx;
        vy += dy;
        if (vx, vy) == start {
            break;
        }
        // right-hand normal as displayed (y down)
        let (rx, ry) = (-dy, dx);
        let left_ahead = set(cell(vx, dx - rx), cell(vy, dy - ry));
        let right_ahead = set(cell(vx, dx + rx), cell(vy, dy + ry));
        if left_ahead {
            // blocked, or diagonal contact that keeps the 8-connected piece together
            (dx, dy) = (dy, -dx);
        } else if !right_ahead {
            (dx, dy) = (rx, ry);
        }
    }
    points
}
