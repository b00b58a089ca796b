//! Median-split bounding-volume hierarchy over triangle index ranges.
//!
//! Traversal visits every leaf whose box the ray crosses; callers fold over
//! candidate triangles themselves. No ordering guarantees: span queries take
//! min/max over all hits, so visit order never affects results.

use nalgebra::Vector3;

use super::{Ray, T_MIN};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle indices, permuted so each leaf owns a contiguous range.
    order: Vec<u32>,
}

#[derive(Debug, Clone)]
struct Node {
    lo: Vector3<f64>,
    hi: Vector3<f64>,
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: u32, len: u32 },
    Inner { left: u32, right: u32 },
}

impl Bvh {
    pub fn build(vertices: &[Vector3<f64>], faces: &[[u32; 3]]) -> Self {
        assert!(!faces.is_empty(), "BVH over an empty mesh");
        let tri_bounds: Vec<(Vector3<f64>, Vector3<f64>)> = faces
            .iter()
            .map(|f| {
                let [a, b, c] =
                    [vertices[f[0] as usize], vertices[f[1] as usize], vertices[f[2] as usize]];
                (a.inf(&b).inf(&c), a.sup(&b).sup(&c))
            })
            .collect();
        let centroids: Vec<Vector3<f64>> =
            tri_bounds.iter().map(|(lo, hi)| (lo + hi) * 0.5).collect();

        let mut bvh = Bvh { nodes: Vec::new(), order: (0..faces.len() as u32).collect() };
        bvh.build_range(0, faces.len(), &tri_bounds, &centroids);
        bvh
    }

    /// Builds the subtree over order[start..end]; returns its node index.
    fn build_range(
        &mut self,
        start: usize,
        end: usize,
        tri_bounds: &[(Vector3<f64>, Vector3<f64>)],
        centroids: &[Vector3<f64>],
    ) -> u32 {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for &t in &self.order[start..end] {
            lo = lo.inf(&tri_bounds[t as usize].0);
            hi = hi.sup(&tri_bounds[t as usize].1);
        }

        let index = self.nodes.len() as u32;
        self.nodes.push(Node {
            lo,
            hi,
            kind: NodeKind::Leaf { start: start as u32, len: (end - start) as u32 },
        });
        if end - start <= LEAF_SIZE {
            return index;
        }

        let extent = hi - lo;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
        });

        let left = self.build_range(start, mid, tri_bounds, centroids);
        let right = self.build_range(mid, end, tri_bounds, centroids);
        self.nodes[index as usize].kind = NodeKind::Inner { left, right };
        index
    }

    pub fn root_bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        (self.nodes[0].lo, self.nodes[0].hi)
    }

    /// Calls `visit` with each triangle index in leaves the ray crosses.
    pub fn for_each_candidate(&self, ray: &Ray, mut visit: impl FnMut(u32)) {
        self.for_each_candidate_until(ray, f64::INFINITY, |t| {
            visit(t);
            false
        });
    }

    /// Like [`for_each_candidate`](Self::for_each_candidate) but limited to
    /// boxes overlapping (T_MIN, max_t); stops early when `visit` returns
    /// true.
    pub fn for_each_candidate_until(
        &self,
        ray: &Ray,
        max_t: f64,
        mut visit: impl FnMut(u32) -> bool,
    ) {
        let inv = ray.dir.map(|d| 1.0 / d);
        let mut stack = vec![0u32];
        while let Some(node_index) = stack.pop() {
            let node = &self.nodes[node_index as usize];
            if !slab_hit(ray.origin, inv, node.lo, node.hi, max_t) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, len } => {
                    for &t in &self.order[start as usize..(start + len) as usize] {
                        if visit(t) {
                            return;
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
    }
}

/// Ray/AABB slab test against the parameter window (T_MIN, max_t).
/// An axis the ray is parallel to (infinite `inv_dir`) contributes no t
/// constraint, only a containment check; folding its 0·inf = NaN through
/// min/max instead would silently reject rays lying exactly on a slab
/// plane. Boundary contact counts as a hit — over-inclusion only costs a
/// leaf visit, under-inclusion would drop real intersections.
fn slab_hit(
    origin: Vector3<f64>,
    inv_dir: Vector3<f64>,
    lo: Vector3<f64>,
    hi: Vector3<f64>,
    max_t: f64,
) -> bool {
    let mut t0 = T_MIN;
    let mut t1 = max_t;
    for axis in 0..3 {
        if inv_dir[axis].is_infinite() {
            if origin[axis] < lo[axis] || origin[axis] > hi[axis] {
                return false;
            }
            continue;
        }
        let a = (lo[axis] - origin[axis]) * inv_dir[axis];
        let b = (hi[axis] - origin[axis]) * inv_dir[axis];
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    t0 <= t1
}
