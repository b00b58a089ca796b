//! Analytic primitives and triangle meshes with interval ray intersection.
//!
//! Every shape answers the same query: the smallest and largest positive ray
//! parameters at which the ray crosses its surface, plus the outward surface
//! normal at the first crossing. Convex shapes produce those from a single
//! entry/exit interval; meshes from a scan over triangle hits.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::bvh::Bvh;
use super::{Ray, T_MIN};

/// First/last surface crossing of one shape, with the normal at the first.
#[derive(Debug, Clone, Copy)]
pub struct ShapeSpan {
    pub t_first: f64,
    pub t_last: f64,
    pub normal_first: Vector3<f64>,
}

impl ShapeSpan {
    /// Collapses an entry/exit interval to its positive crossings. A ray
    /// starting inside the shape crosses the surface only once, at the exit.
    fn from_interval(
        t_enter: f64,
        t_exit: f64,
        normal_enter: Vector3<f64>,
        normal_exit: Vector3<f64>,
    ) -> Option<Self> {
        if t_exit <= T_MIN || t_enter > t_exit {
            return None;
        }
        if t_enter <= T_MIN {
            Some(Self { t_first: t_exit, t_last: t_exit, normal_first: normal_exit })
        } else {
            Some(Self { t_first: t_enter, t_last: t_exit, normal_first: normal_enter })
        }
    }
}

/// Scene shape in the scene's world frame (ground plane z = 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
    /// Axis-aligned box rotated by `yaw_deg` about the vertical through its
    /// center.
    #[serde(rename = "box")]
    Cuboid {
        center: Vector3<f64>,
        half_extents: Vector3<f64>,
        #[serde(default)]
        yaw_deg: f64,
    },
    /// Vertical cylinder from `base_center` up to `base_center.z + height`.
    Cylinder {
        base_center: Vector3<f64>,
        radius: f64,
        height: f64,
    },
    Mesh(TriMesh),
}

impl Shape {
    pub fn span(&self, ray: &Ray) -> Option<ShapeSpan> {
        match self {
            Shape::Sphere { center, radius } => sphere_span(ray, *center, *radius),
            Shape::Cuboid { center, half_extents, yaw_deg } => {
                cuboid_span(ray, *center, *half_extents, *yaw_deg)
            }
            Shape::Cylinder { base_center, radius, height } => {
                cylinder_span(ray, *base_center, *radius, *height)
            }
            Shape::Mesh(mesh) => mesh.span(ray),
        }
    }

    /// Whether the ray hits the shape at a parameter in (T_MIN, max_t).
    pub fn occludes(&self, ray: &Ray, max_t: f64) -> bool {
        match self {
            Shape::Mesh(mesh) => mesh.occludes(ray, max_t),
            _ => self.span(ray).is_some_and(|s| s.t_first < max_t),
        }
    }

    /// Axis-aligned bounds in the scene frame.
    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            Shape::Sphere { center, radius } => {
                let r = Vector3::repeat(*radius);
                (center - r, center + r)
            }
            Shape::Cuboid { center, half_extents, yaw_deg } => {
                // Rotating about z leaves z extent; xy extent is the rotated
                // rectangle's bounding square.
                let (s, c) = yaw_deg.to_radians().sin_cos();
                let ex = half_extents.x * c.abs() + half_extents.y * s.abs();
                let ey = half_extents.x * s.abs() + half_extents.y * c.abs();
                let e = Vector3::new(ex, ey, half_extents.z);
                (center - e, center + e)
            }
            Shape::Cylinder { base_center, radius, height } => (
                base_center - Vector3::new(*radius, *radius, 0.0),
                base_center + Vector3::new(*radius, *radius, *height),
            ),
            Shape::Mesh(mesh) => mesh.bounds(),
        }
    }
}

fn sphere_span(ray: &Ray, center: Vector3<f64>, radius: f64) -> Option<ShapeSpan> {
    let oc = ray.origin - center;
    // Unit direction ⇒ a = 1. Stable quadratic via the q-form.
    let b = 2.0 * ray.dir.dot(&oc);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (t0, t1) = {
        let (a, b) = (q, if q == 0.0 { 0.0 } else { c / q });
        (a.min(b), a.max(b))
    };
    let normal_at = |t: f64| (ray.at(t) - center) / radius;
    ShapeSpan::from_interval(t0, t1, normal_at(t0), normal_at(t1))
}

fn cuboid_span(
    ray: &Ray,
    center: Vector3<f64>,
    half: Vector3<f64>,
    yaw_deg: f64,
) -> Option<ShapeSpan> {
    // Work in the box frame: translate to the center, unrotate the yaw.
    let (s, c) = yaw_deg.to_radians().sin_cos();
    let unrot = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
    let o = unrot * (ray.origin - center);
    let d = unrot * ray.dir;

    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    let mut axis_enter = (0usize, 0.0f64);
    let mut axis_exit = (0usize, 0.0f64);
    for axis in 0..3 {
        if d[axis].abs() < 1e-15 {
            if o[axis].abs() > half[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[axis];
        let mut t0 = (-half[axis] - o[axis]) * inv;
        let mut t1 = (half[axis] - o[axis]) * inv;
        // The slab face crossed first carries the outward normal −sign(d).
        let mut sign = -d[axis].signum();
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
            sign = -sign;
        }
        if t0 > t_enter {
            t_enter = t0;
            axis_enter = (axis, sign);
        }
        if t1 < t_exit {
            t_exit = t1;
            axis_exit = (axis, -sign);
        }
    }

    let rot = unrot.transpose();
    let normal = |(axis, sign): (usize, f64)| {
        let mut n = Vector3::zeros();
        n[axis] = sign;
        rot * n
    };
    ShapeSpan::from_interval(t_enter, t_exit, normal(axis_enter), normal(axis_exit))
}

fn cylinder_span(
    ray: &Ray,
    base: Vector3<f64>,
    radius: f64,
    height: f64,
) -> Option<ShapeSpan> {
    // Infinite-tube interval from the xy quadratic, clipped by the z slab.
    let ox = ray.origin.x - base.x;
    let oy = ray.origin.y - base.y;
    let (dx, dy, dz) = (ray.dir.x, ray.dir.y, ray.dir.z);
    let a = dx * dx + dy * dy;

    let (mut t_enter, mut t_exit);
    if a < 1e-15 {
        // Vertical ray: inside the tube or a miss.
        if ox * ox + oy * oy > radius * radius {
            return None;
        }
        t_enter = f64::NEG_INFINITY;
        t_exit = f64::INFINITY;
    } else {
        let b = 2.0 * (ox * dx + oy * dy);
        let c = ox * ox + oy * oy - radius * radius;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        t_enter = (-b - sq) / (2.0 * a);
        t_exit = (-b + sq) / (2.0 * a);
    }
    let mut enter_from_side = true;
    let mut exit_from_side = true;

    // z slab [base.z, base.z + height].
    if dz.abs() < 1e-15 {
        if ray.origin.z < base.z || ray.origin.z > base.z + height {
            return None;
        }
    } else {
        let inv = 1.0 / dz;
        let mut s0 = (base.z - ray.origin.z) * inv;
        let mut s1 = (base.z + height - ray.origin.z) * inv;
        if s0 > s1 {
            std::mem::swap(&mut s0, &mut s1);
        }
        if s0 > t_enter {
            t_enter = s0;
            enter_from_side = false;
        }
        if s1 < t_exit {
            t_exit = s1;
            exit_from_side = false;
        }
    }

    let side_normal = |t: f64| {
        let p = ray.at(t);
        Vector3::new(p.x - base.x, p.y - base.y, 0.0) / radius
    };
    // Cap outward normal: entering downward hits the top cap (+z) and vice
    // versa; for the exit the signs flip.
    let cap = |downward: bool| Vector3::new(0.0, 0.0, if downward { 1.0 } else { -1.0 });
    let n_enter = if enter_from_side { side_normal(t_enter) } else { cap(dz < 0.0) };
    let n_exit = if exit_from_side { side_normal(t_exit) } else { cap(dz > 0.0) };
    ShapeSpan::from_interval(t_enter, t_exit, n_enter, n_exit)
}

/// Indexed triangle mesh with a bounding-volume hierarchy built on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MeshData", into = "MeshData")]
pub struct TriMesh {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[u32; 3]>,
    bvh: Bvh,
}

/// Serialized form: vertices and faces only (the BVH is derived).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MeshData {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[u32; 3]>,
}

impl TryFrom<MeshData> for TriMesh {
    type Error = String;

    fn try_from(data: MeshData) -> Result<Self, Self::Error> {
        TriMesh::new(data.vertices, data.faces).map_err(|e| e.to_string())
    }
}

impl From<TriMesh> for MeshData {
    fn from(mesh: TriMesh) -> Self {
        MeshData { vertices: mesh.vertices, faces: mesh.faces }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MeshError {
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: u32, count: usize },
    #[error("mesh has no faces")]
    Empty,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        if faces.is_empty() {
            return Err(MeshError::Empty);
        }
        for (fi, face) in faces.iter().enumerate() {
            for &idx in face {
                if idx as usize >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: idx,
                        count: vertices.len(),
                    });
                }
            }
        }
        let bvh = Bvh::build(&vertices, &faces);
        Ok(Self { vertices, faces, bvh })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        self.bvh.root_bounds()
    }

    fn triangle(&self, index: u32) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.faces[index as usize];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// First and last triangle crossings along the ray.
    pub fn span(&self, ray: &Ray) -> Option<ShapeSpan> {
        let mut first: Option<(f64, u32)> = None;
        let mut last: Option<(f64, u32)> = None;
        self.bvh.for_each_candidate(ray, |tri_index| {
            let [a, b, c] = self.triangle(tri_index);
            if let Some(t) = intersect_triangle(ray, a, b, c) {
                if first.is_none_or(|(bt, _)| t < bt) {
                    first = Some((t, tri_index));
                }
                if last.is_none_or(|(bt, _)| t > bt) {
                    last = Some((t, tri_index));
                }
            }
        });
        let (t_first, tri) = first?;
        let (t_last, _) = last.expect("set alongside first");
        let [a, b, c] = self.triangle(tri);
        let mut normal = (b - a).cross(&(c - a)).normalize();
        // Face winding is not trusted; orient the normal against the ray.
        if normal.dot(&ray.dir) > 0.0 {
            normal = -normal;
        }
        Some(ShapeSpan { t_first, t_last, normal_first: normal })
    }

    /// Any-hit query with early exit.
    pub fn occludes(&self, ray: &Ray, max_t: f64) -> bool {
        let mut hit = false;
        self.bvh.for_each_candidate_until(ray, max_t, |tri_index| {
            let [a, b, c] = self.triangle(tri_index);
            if intersect_triangle(ray, a, b, c).is_some_and(|t| t < max_t) {
                hit = true;
            }
            hit
        });
        hit
    }

    /// Regular icosahedron with the given circumradius, resting on z = 0.
    pub fn icosahedron(center_xy: (f64, f64), circumradius: f64) -> Self {
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        let scale = circumradius / (1.0 + phi * phi).sqrt();
        let mut vertices = Vec::with_capacity(12);
        for &(a, b) in &[(1.0, phi), (-1.0, phi), (1.0, -phi), (-1.0, -phi)] {
            vertices.push(Vector3::new(0.0, a * scale, b * scale));
            vertices.push(Vector3::new(a * scale, b * scale, 0.0));
            vertices.push(Vector3::new(b * scale, 0.0, a * scale));
        }
        let min_z = vertices.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
        for v in &mut vertices {
            v.x += center_xy.0;
            v.y += center_xy.1;
            v.z -= min_z;
        }
        // An icosahedron's faces are exactly its triangles: every mutually
        // adjacent vertex triple (edge length 2·scale) bounds a face.
        let edge = 2.0 * scale;
        let tol = 1e-9 * circumradius.max(1.0);
        let mut faces = Vec::with_capacity(20);
        for i in 0..12u32 {
            for j in (i + 1)..12 {
                for k in (j + 1)..12 {
                    let (a, b, c) =
                        (vertices[i as usize], vertices[j as usize], vertices[k as usize]);
                    if ((a - b).norm() - edge).abs() < tol
                        && ((b - c).norm() - edge).abs() < tol
                        && ((a - c).norm() - edge).abs() < tol
                    {
                        faces.push([i, j, k]);
                    }
                }
            }
        }
        assert_eq!(faces.len(), 20, "adjacency search recovers the 20 faces");
        Self::new(vertices, faces).expect("generated mesh is valid")
    }
}

/// Möller–Trumbore ray/triangle parameter, positive hits only.
fn intersect_triangle(
    ray: &Ray,
    a: Vector3<f64>,
    b: Vector3<f64>,
    c: Vector3<f64>,
) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = ray.dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = ray.origin - a;
    let u = tvec.dot(&pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = ray.dir.dot(&qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    (t > T_MIN).then_some(t)
}
