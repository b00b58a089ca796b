//! Ground-truth renderer for primitive scenes.
//!
//! Scenes live in a world frame with the ground plane at z = 0 and the
//! camera placed anywhere above it, aimed at a target point. Rendering
//! derives the ground-relative camera (fov, pitch, roll) from that rig,
//! casts one center ray per pixel, and records, per object pixel, the 3-D
//! first-entry and last-exit points, their vertical drops to the ground, and
//! the image-space distances between each surface point and its ground
//! projection — the pixel heights. RGB is direct Lambertian lighting with
//! hard shadows; it exists so datasets carry a plausible image, not for
//! photorealism.

pub mod bvh;
pub mod primitive;

use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{project_camera, CameraError, CameraIntrinsics, CameraPose};
use crate::cloud::PointCloud;
use crate::fields::{render_perspective_field, PerspectiveField, PixelHeightMap};
use crate::grid::ScalarGrid;
pub use primitive::{Shape, ShapeSpan, TriMesh};

/// Ray parameters at or below this are treated as the ray's own surface.
pub const T_MIN: f64 = 1e-6;

/// Constant ambient term of the Lambertian shader.
pub const AMBIENT: f64 = 0.1;

/// Background color for rays that escape the scene.
pub const BACKGROUND: [f32; 3] = [0.72, 0.80, 0.92];

const SHADOW_BIAS: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vector3<f64>,
    /// Unit length.
    pub dir: Vector3<f64>,
}

impl Ray {
    pub fn new(origin: Vector3<f64>, dir: Vector3<f64>) -> Self {
        Self { origin, dir }
    }

    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + self.dir * t
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("camera must sit strictly above the ground plane, got z = {0}")]
    CameraBelowGround(f64),
    #[error("camera position and target coincide")]
    TargetCoincident,
    #[error("camera looks straight along the vertical; pose underdetermined")]
    VerticalLook,
    #[error("object {index} extends below the ground plane (min z = {min_z})")]
    ObjectBelowGround { index: usize, min_z: f64 },
    #[error("point light {index} must sit strictly above the ground plane")]
    PointLightBelowGround { index: usize },
    #[error("directional light {index} must point downward (negative z)")]
    DirectionalLightUpward { index: usize },
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// Light in the scene frame. Directional `direction` points from the light
/// into the scene; intensities are unitless scales of a white emitter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Light {
    Directional { direction: Vector3<f64>, intensity: f64 },
    Point { position: Vector3<f64>, intensity: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneObject {
    pub shape: Shape,
    pub albedo: [f32; 3],
}

/// Camera rig in the scene frame: position, look-at target, roll about the
/// viewing axis, and the intrinsic parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneCamera {
    pub position: Vector3<f64>,
    pub target: Vector3<f64>,
    #[serde(default)]
    pub roll_deg: f64,
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scene {
    pub name: String,
    pub objects: Vec<SceneObject>,
    pub lights: Vec<Light>,
    pub ground_albedo: [f32; 3],
    pub camera: SceneCamera,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.camera.position.z <= 0.0 {
            return Err(SceneError::CameraBelowGround(self.camera.position.z));
        }
        for (index, object) in self.objects.iter().enumerate() {
            let (lo, _) = object.shape.bounds();
            if lo.z < -1e-9 {
                return Err(SceneError::ObjectBelowGround { index, min_z: lo.z });
            }
        }
        for (index, light) in self.lights.iter().enumerate() {
            match light {
                Light::Point { position, .. } if position.z <= 0.0 => {
                    return Err(SceneError::PointLightBelowGround { index });
                }
                Light::Directional { direction, .. } if direction.z >= 0.0 => {
                    return Err(SceneError::DirectionalLightUpward { index });
                }
                _ => {}
            }
        }
        self.camera_rig().map(|_| ())
    }

    /// Union bounds of the objects, or `None` for an empty scene.
    pub fn object_bounds(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        self.objects.iter().map(|o| o.shape.bounds()).reduce(|(alo, ahi), (blo, bhi)| {
            (alo.inf(&blo), ahi.sup(&bhi))
        })
    }

    pub fn camera_rig(&self) -> Result<CameraRig, SceneError> {
        CameraRig::new(&self.camera)
    }
}

/// Ground-relative pitch of the viewing direction; yaw is deliberately
/// dropped (the scene is re-azimuthed instead) and roll passes through.
pub fn derive_pose_from_lookat(
    position: Vector3<f64>,
    target: Vector3<f64>,
    roll_deg: f64,
) -> Result<CameraPose, SceneError> {
    let forward = target - position;
    let len = forward.norm();
    if len == 0.0 {
        return Err(SceneError::TargetCoincident);
    }
    let f = forward / len;
    if f.xy().norm() < 1e-9 {
        return Err(SceneError::VerticalLook);
    }
    let pitch_deg = f.z.clamp(-1.0, 1.0).asin().to_degrees();
    Ok(CameraPose::new(pitch_deg, roll_deg)?)
}

/// The rigid map between the scene frame and the canonical camera-centered
/// frame the fields are defined in (camera at the origin, forward azimuth
/// +y, z up). Rotating the scene about the vertical so the camera faces +y
/// is what removes yaw from every downstream quantity.
#[derive(Debug, Clone)]
pub struct CameraRig {
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
    position: Vector3<f64>,
    /// Scene-to-canonical azimuth rotation about z.
    yaw: Matrix3<f64>,
}

impl CameraRig {
    pub fn new(camera: &SceneCamera) -> Result<Self, SceneError> {
        if camera.position.z <= 0.0 {
            return Err(SceneError::CameraBelowGround(camera.position.z));
        }
        let pose = derive_pose_from_lookat(camera.position, camera.target, camera.roll_deg)?;
        let intrinsics = CameraIntrinsics::new(camera.fov_deg, camera.width, camera.height)?;
        let f = (camera.target - camera.position).normalize();
        let (s, c) = f.x.atan2(f.y).sin_cos();
        let yaw = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        Ok(Self { intrinsics, pose, position: camera.position, yaw })
    }

    pub fn camera_height(&self) -> f64 {
        self.position.z
    }

    pub fn canonical_from_scene(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.yaw * (p - self.position)
    }

    pub fn scene_from_canonical(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.yaw.transpose() * p + self.position
    }

    /// Scene-frame center ray of a pixel.
    pub fn primary_ray(&self, pixel: Vector2<f64>) -> Ray {
        let f = self.intrinsics.focal();
        let c = self.intrinsics.principal_point();
        let dir_cam = Vector3::new(pixel.x - c.x, pixel.y - c.y, f);
        let dir_scene = self.yaw.transpose() * (self.pose.rotation().transpose() * dir_cam);
        Ray::new(self.position, dir_scene.normalize())
    }

    /// Projects a scene point; `None` behind the camera.
    pub fn project_scene(&self, p: Vector3<f64>) -> Option<Vector2<f64>> {
        project_camera(&self.intrinsics, self.pose.rotation() * self.canonical_from_scene(p))
    }
}

/// First entry and last exit of a ray across the union of scene objects
/// (ground excluded), with the surface normal at the entry.
#[derive(Debug, Clone, Copy)]
pub struct HitPair {
    pub t_first: f64,
    pub t_last: f64,
    pub point_first: Vector3<f64>,
    pub point_last: Vector3<f64>,
    pub object_first: usize,
    pub object_last: usize,
    pub normal_first: Vector3<f64>,
}

/// Smallest and largest positive surface crossings over all objects.
pub fn intersect_first_last(ray: &Ray, scene: &Scene) -> Option<HitPair> {
    let mut first: Option<(f64, usize, Vector3<f64>)> = None;
    let mut last: Option<(f64, usize)> = None;
    for (index, object) in scene.objects.iter().enumerate() {
        if let Some(span) = object.shape.span(ray) {
            if first.is_none_or(|(t, _, _)| span.t_first < t) {
                first = Some((span.t_first, index, span.normal_first));
            }
            if last.is_none_or(|(t, _)| span.t_last > t) {
                last = Some((span.t_last, index));
            }
        }
    }
    let (t_first, object_first, normal_first) = first?;
    let (t_last, object_last) = last.expect("set alongside first");
    Some(HitPair {
        t_first,
        t_last,
        point_first: ray.at(t_first),
        point_last: ray.at(t_last),
        object_first,
        object_last,
        normal_first,
    })
}

fn any_object_occludes(scene: &Scene, ray: &Ray, max_t: f64) -> bool {
    scene.objects.iter().any(|o| o.shape.occludes(ray, max_t))
}

/// Direct Lambertian lighting at a surface point.
fn shade(scene: &Scene, point: Vector3<f64>, normal: Vector3<f64>, albedo: [f32; 3]) -> [f32; 3] {
    let origin = point + normal * SHADOW_BIAS;
    let mut irradiance = AMBIENT;
    for light in &scene.lights {
        let (to_light, max_t, strength) = match light {
            Light::Directional { direction, intensity } => {
                (-direction.normalize(), f64::INFINITY, *intensity)
            }
            Light::Point { position, intensity } => {
                let delta = position - origin;
                let dist = delta.norm();
                (delta / dist, dist, intensity / (dist * dist))
            }
        };
        let lambert = normal.dot(&to_light);
        if lambert <= 0.0 || strength <= 0.0 {
            continue;
        }
        if !any_object_occludes(scene, &Ray::new(origin, to_light), max_t) {
            irradiance += lambert * strength;
        }
    }
    let mut rgb = [0.0f32; 3];
    for (out, a) in rgb.iter_mut().zip(albedo) {
        *out = (f64::from(a) * irradiance).clamp(0.0, 1.0) as f32;
    }
    rgb
}

/// Everything the renderer knows about one scene sample: image, geometry
/// targets, the derived camera, and the scale (camera height) that links the
/// scene's units to normalized reconstructions.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub rgb: ScalarGrid,
    pub depth: ScalarGrid,
    pub mask: ScalarGrid,
    pub heights: PixelHeightMap,
    pub field: PerspectiveField,
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
    pub camera_height: f64,
    /// Object pixels whose surface or foot projection fell at/behind the
    /// camera plane; their heights are invalid.
    pub skipped_foot_pixels: usize,
}

impl GroundTruth {
    /// Visible-surface points in the canonical frame (scene units),
    /// recovered from the depth map; pixel indices attached.
    pub fn visible_surface_cloud(&self) -> PointCloud {
        let (w, h) = (self.intrinsics.width(), self.intrinsics.height());
        let kinv = self.intrinsics.inverse_intrinsic_matrix();
        let rt = self.pose.rotation().transpose();
        let mut cloud = PointCloud::new();
        let mut indices = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if !self.depth.is_valid(x, y) {
                    continue;
                }
                let d = f64::from(self.depth.get(0, x, y));
                let pc = CameraIntrinsics::pixel_center(x, y);
                let p_cam = kinv * Vector3::new(pc.x, pc.y, 1.0) * d;
                cloud.points.push(rt * p_cam);
                indices.push(y * w + x);
            }
        }
        cloud.pixel_indices = Some(indices);
        cloud
    }
}

struct RowOutput {
    rgb: [Vec<f32>; 3],
    depth: Vec<f32>,
    mask: Vec<f32>,
    front: Vec<f32>,
    back: Vec<f32>,
    height_valid: Vec<bool>,
    skipped: usize,
}

fn render_row(scene: &Scene, rig: &CameraRig, y: u32) -> RowOutput {
    let w = rig.intrinsics.width() as usize;
    let mut out = RowOutput {
        rgb: [vec![0.0; w], vec![0.0; w], vec![0.0; w]],
        depth: vec![f32::NAN; w],
        mask: vec![0.0; w],
        front: vec![f32::NAN; w],
        back: vec![f32::NAN; w],
        height_valid: vec![false; w],
        skipped: 0,
    };
    let rotation = rig.pose.rotation();

    for x in 0..w {
        let pixel = CameraIntrinsics::pixel_center(x as u32, y);
        let ray = rig.primary_ray(pixel);
        let hit = intersect_first_last(&ray, scene);
        // Upward rays never reach the ground plane at z=0.
        let t_ground = (ray.dir.z < 0.0).then(|| -ray.origin.z / ray.dir.z);

        // Image color: nearest of object and ground, else background.
        let object_nearest = match (&hit, t_ground) {
            (Some(h), Some(tg)) => h.t_first < tg,
            (Some(_), None) => true,
            _ => false,
        };
        let color = if object_nearest {
            let h = hit.as_ref().expect("object_nearest implies a hit");
            shade(scene, h.point_first, h.normal_first, scene.objects[h.object_first].albedo)
        } else if let Some(tg) = t_ground {
            shade(scene, ray.at(tg), Vector3::z(), scene.ground_albedo)
        } else {
            BACKGROUND
        };
        for ch in 0..3 {
            out.rgb[ch][x] = color[ch];
        }

        let Some(h) = hit else { continue };
        out.mask[x] = 1.0;
        out.depth[x] = (rotation * rig.canonical_from_scene(h.point_first)).z as f32;

        let foot = |p: Vector3<f64>| Vector3::new(p.x, p.y, 0.0);
        let projections = [
            rig.project_scene(h.point_first),
            rig.project_scene(foot(h.point_first)),
            rig.project_scene(h.point_last),
            rig.project_scene(foot(h.point_last)),
        ];
        match projections {
            [Some(pf), Some(ff), Some(pb), Some(fb)] => {
                out.front[x] = (pf - ff).norm() as f32;
                out.back[x] = (pb - fb).norm() as f32;
                out.height_valid[x] = true;
            }
            _ => out.skipped += 1,
        }
    }
    out
}

/// Renders the full ground-truth sample for a scene.
pub fn render_ground_truth(scene: &Scene) -> Result<GroundTruth, SceneError> {
    scene.validate()?;
    let rig = scene.camera_rig()?;
    let (w, h) = (rig.intrinsics.width(), rig.intrinsics.height());
    let n = w as usize * h as usize;

    let rows: Vec<RowOutput> =
        (0..h).into_par_iter().map(|y| render_row(scene, &rig, y)).collect();

    let mut rgb = vec![0f32; n * 3];
    let mut depth = vec![f32::NAN; n];
    let mut mask = vec![0f32; n];
    let mut front = vec![f32::NAN; n];
    let mut back = vec![f32::NAN; n];
    let mut height_mask = vec![false; n];
    let mut skipped = 0usize;
    for (y, row) in rows.into_iter().enumerate() {
        let offset = y * w as usize;
        let range = offset..offset + w as usize;
        for ch in 0..3 {
            rgb[ch * n + offset..ch * n + offset + w as usize].copy_from_slice(&row.rgb[ch]);
        }
        depth[range.clone()].copy_from_slice(&row.depth);
        mask[range.clone()].copy_from_slice(&row.mask);
        front[range.clone()].copy_from_slice(&row.front);
        back[range.clone()].copy_from_slice(&row.back);
        height_mask[range].copy_from_slice(&row.height_valid);
        skipped += row.skipped;
    }

    let rgb = ScalarGrid::from_data(w, h, 3, rgb).expect("sized above");
    let mask_grid = ScalarGrid::from_data(w, h, 1, mask).expect("sized above");
    let mut depth = ScalarGrid::from_data(w, h, 1, depth).expect("sized above");
    depth.set_mask(mask_grid.data().iter().map(|&m| m > 0.5).collect()).expect("sized above");
    let mut front = ScalarGrid::from_data(w, h, 1, front).expect("sized above");
    let mut back = ScalarGrid::from_data(w, h, 1, back).expect("sized above");
    front.set_mask(height_mask.clone()).expect("sized above");
    back.set_mask(height_mask).expect("sized above");
    let heights = PixelHeightMap::new(front, back).expect("dims match");
    let field = render_perspective_field(&rig.intrinsics, &rig.pose);

    Ok(GroundTruth {
        rgb,
        depth,
        mask: mask_grid,
        heights,
        field,
        intrinsics: rig.intrinsics.clone(),
        pose: rig.pose,
        camera_height: rig.camera_height(),
        skipped_foot_pixels: skipped,
    })
}

/// The renderer's own ground shadow map for one light: over pixels whose
/// nearest surface is the ground plane, 1.0 where the path to the light is
/// blocked by an object and 0.0 where it is lit. Non-ground pixels are
/// invalid. This is the oracle the splat-based shadow caster is checked
/// against.
pub fn ground_occlusion(scene: &Scene, light: &Light) -> Result<ScalarGrid, SceneError> {
    scene.validate()?;
    let rig = scene.camera_rig()?;
    let (w, h) = (rig.intrinsics.width(), rig.intrinsics.height());

    let rows: Vec<(Vec<f32>, Vec<bool>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut values = vec![f32::NAN; w as usize];
            let mut valid = vec![false; w as usize];
            for x in 0..w as usize {
                let ray = rig.primary_ray(CameraIntrinsics::pixel_center(x as u32, y));
                let Some(tg) = (ray.dir.z < 0.0).then(|| -ray.origin.z / ray.dir.z) else {
                    continue;
                };
                if intersect_first_last(&ray, scene).is_some_and(|hit| hit.t_first < tg) {
                    continue;
                }
                let ground_point = ray.at(tg);
                let origin = ground_point + Vector3::z() * SHADOW_BIAS;
                let (dir, max_t) = match light {
                    Light::Directional { direction, .. } => {
                        (-direction.normalize(), f64::INFINITY)
                    }
                    Light::Point { position, .. } => {
                        let delta = position - origin;
                        let dist = delta.norm();
                        (delta / dist, dist)
                    }
                };
                let blocked = any_object_occludes(scene, &Ray::new(origin, dir), max_t);
                values[x] = if blocked { 1.0 } else { 0.0 };
                valid[x] = true;
            }
            (values, valid)
        })
        .collect();

    let mut values = Vec::with_capacity(w as usize * h as usize);
    let mut valid = Vec::with_capacity(w as usize * h as usize);
    for (row_values, row_valid) in rows {
        values.extend(row_values);
        valid.extend(row_valid);
    }
    let mut grid = ScalarGrid::from_data(w, h, 1, values).expect("sized above");
    grid.set_mask(valid).expect("sized above");
    Ok(grid)
}
