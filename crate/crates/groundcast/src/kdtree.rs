//! Minimal 3-D kd-tree for nearest-neighbor queries.
//!
//! The query returns the same squared distance a brute-force scan computes
//! (identical expression, min over the same candidate values), so callers
//! may verify against brute force bitwise.

use nalgebra::Vector3;

const LEAF_SIZE: usize = 8;

enum Node {
    Leaf {
        start: usize,
        len: usize,
    },
    Inner {
        axis: usize,
        split: f64,
        left: usize,
        right: usize,
    },
}

pub struct KdTree {
    nodes: Vec<Node>,
    /// Points permuted so every leaf owns a contiguous slice.
    points: Vec<Vector3<f64>>,
}

impl KdTree {
    /// Builds from a non-empty point set.
    pub fn build(points: &[Vector3<f64>]) -> Self {
        assert!(!points.is_empty(), "kd-tree needs at least one point");
        let mut pts = points.to_vec();
        let mut nodes = Vec::new();
        let n = pts.len();
        build_range(&mut nodes, &mut pts, 0, n);
        Self { nodes, points: pts }
    }

    /// Squared Euclidean distance from `q` to its nearest stored point.
    pub fn nearest_squared(&self, q: &Vector3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        self.search(self.nodes.len() - 1, q, &mut best);
        best
    }

    fn search(&self, node: usize, q: &Vector3<f64>, best: &mut f64) {
        match self.nodes[node] {
            Node::Leaf { start, len } => {
                for p in &self.points[start..start + len] {
                    let d2 = (p - q).norm_squared();
                    if d2 < *best {
                        *best = d2;
                    }
                }
            }
            Node::Inner { axis, split, left, right } => {
                let delta = q[axis] - split;
                let (near, far) = if delta <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // The far side can only help if the splitting plane is
                // closer than the incumbent.
                if delta * delta < *best {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Builds the subtree over `pts[start..end]`, returning its node index.
fn build_range(nodes: &mut Vec<Node>, pts: &mut [Vector3<f64>], start: usize, end: usize) -> usize {
    let len = end - start;
    if len <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, len });
        return nodes.len() - 1;
    }
    // Split on the axis with the largest extent, at the median point.
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in &pts[start..end] {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let extent = hi - lo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = len / 2;
    pts[start..end].select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let split = pts[start + mid][axis];
    let left = build_range(nodes, pts, start, start + mid);
    let right = build_range(nodes, pts, start + mid, end);
    nodes.push(Node::Inner { axis, split, left, right });
    nodes.len() - 1
}
