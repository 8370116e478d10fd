//! Static 2-D kd-tree for nearest-point queries.

use super::Point2;

#[derive(Debug, Clone)]
struct Node {
    point: Point2,
    index: usize,
    axis: u8,
    left: Option<usize>,
    right: Option<usize>,
}

/// Nearest-neighbour index over a fixed point set. Queries return the index
/// of the closest point; among equidistant points the lowest index wins.
#[derive(Debug, Clone)]
pub struct KdTree {
    nodes: Vec<Node>,
    root: Option<usize>,
}

impl KdTree {
    pub fn new(points: &[Point2]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build(points, &mut order, 0, &mut nodes);
        KdTree { nodes, root }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index and squared distance of the nearest point, or `None` if empty.
    pub fn nearest(&self, query: Point2) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        if let Some(root) = self.root {
            self.search(root, query, &mut best);
        }
        best
    }

    fn search(&self, node: usize, q: Point2, best: &mut Option<(usize, f64)>) {
        let n = &self.nodes[node];
        let d = n.point.distance_sq(&q);
        let improves = match *best {
            None => true,
            Some((bi, bd)) => d < bd || (d == bd && n.index < bi),
        };
        if improves {
            *best = Some((n.index, d));
        }
        let diff = if n.axis == 0 {
            q.x - n.point.x
        } else {
            q.y - n.point.y
        };
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if let Some(c) = near {
            self.search(c, q, best);
        }
        if let Some(c) = far {
            // equal distance may still hold a lower index, so only prune strictly
            if best.is_none_or(|(_, bd)| diff * diff <= bd) {
                self.search(c, q, best);
            }
        }
    }
}

fn build(points: &[Point2], order: &mut [usize], depth: usize, nodes: &mut Vec<Node>) -> Option<usize> {
    if order.is_empty() {
        return None;
    }
    let axis = (depth % 2) as u8;
    let key = |i: &usize| if axis == 0 { points[*i].x } else { points[*i].y };
    order.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.cmp(b)));
    let mid = order.len() / 2;
    let index = order[mid];
    let id = nodes.len();
    nodes.push(Node {
        point: points[index],
        index,
        axis,
        left: None,
        right: None,
    });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build(points, lo, depth + 1, nodes);
    let right = build(points, &mut hi[1..], depth + 1, nodes);
    nodes[id].left = left;
    nodes[id].right = right;
    Some(id)
}
