//! Camera recovery from a perspective field by coarse-to-fine grid search.
//!
//! The field alone determines the camera: latitude fixes pitch and focal
//! length jointly, the up-vector swirl fixes roll. No gradients — the cost
//! landscape has cliffs near the horizon — so we sweep an (fov, pitch, roll)
//! lattice and refine around the incumbent.

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{focal_from_fov, world_up_in_camera, CameraIntrinsics, CameraPose};
use crate::fields::PerspectiveField;
use crate::grid::ScalarGrid;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("no valid masked pixels in the observed field")]
    DegenerateField,
    #[error("mask is {mask_w}x{mask_h} but field is {field_w}x{field_h}")]
    DimsMismatch { mask_w: u32, mask_h: u32, field_w: u32, field_h: u32 },
    #[error("invalid search grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Camera(#[from] crate::camera::CameraError),
}

/// One axis of the search lattice: inclusive range `[min, max]` stepped by
/// `step` degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, step: f64) -> Self {
        Self { min, max, step }
    }

    fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let v = self.min + f64::from(k) * self.step;
            if v > self.max + 1e-9 {
                break;
            }
            out.push(v.min(self.max));
            k += 1;
        }
        out
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

/// Search-lattice specification. Each refinement level multiplies the step
/// by `shrink` and sweeps offsets −4..=4 around the incumbent (clamped to
/// the original ranges, incumbent always included).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub fov: AxisSpec,
    pub pitch: AxisSpec,
    pub roll: AxisSpec,
    pub refinement_levels: u32,
    pub shrink: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            fov: AxisSpec::new(20.0, 110.0, 2.0),
            pitch: AxisSpec::new(-70.0, 70.0, 2.0),
            roll: AxisSpec::new(-45.0, 45.0, 2.0),
            refinement_levels: 3,
            shrink: 0.25,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), EstimateError> {
        for (name, axis) in [("fov", self.fov), ("pitch", self.pitch), ("roll", self.roll)] {
            if !(axis.min.is_finite() && axis.max.is_finite() && axis.step.is_finite()) {
                return Err(EstimateError::InvalidGrid(format!("{name} axis is not finite")));
            }
            if axis.min > axis.max {
                return Err(EstimateError::InvalidGrid(format!("{name}: min > max")));
            }
            if axis.step <= 0.0 {
                return Err(EstimateError::InvalidGrid(format!("{name}: step must be > 0")));
            }
        }
        if self.fov.min <= 0.0 || self.fov.max >= 180.0 {
            return Err(EstimateError::InvalidGrid("fov range must stay in (0, 180)".into()));
        }
        if self.pitch.min < -90.0 || self.pitch.max > 90.0 {
            return Err(EstimateError::InvalidGrid("pitch range must stay in [-90, 90]".into()));
        }
        if self.roll.min <= -180.0 || self.roll.max > 180.0 {
            return Err(EstimateError::InvalidGrid("roll range must stay in (-180, 180]".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(EstimateError::InvalidGrid("shrink must lie in (0, 1)".into()));
        }
        let count = self.fov.values().len() * self.pitch.values().len() * self.roll.values().len();
        if count == 0 {
            return Err(EstimateError::InvalidGrid("empty candidate lattice".into()));
        }
        if count > 1_000_000 {
            return Err(EstimateError::InvalidGrid(format!(
                "coarse lattice has {count} candidates (limit 1e6)"
            )));
        }
        Ok(())
    }
}

/// Grid-search winner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraEstimate {
    pub fov_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    /// Mean residual of the winner on the final (full-resolution) lattice.
    pub cost: f64,
}

/// One observed pixel reduced to the quantities the cost needs.
struct Sample {
    /// Pixel offsets from the principal point.
    dx: f64,
    dy: f64,
    /// dx² + dy², so per-fov ray norms cost one sqrt.
    h2: f64,
    lat: f64,
    up: Vector2<f64>,
}

fn collect_samples(
    observed: &PerspectiveField,
    mask: Option<&ScalarGrid>,
    intr_like: (f64, f64),
    max_side: Option<u32>,
) -> Vec<Sample> {
    let (cx, cy) = intr_like;
    let (w, h) = (observed.width(), observed.height());
    let stride = |n: u32| match max_side {
        Some(cap) if n > cap => n.div_ceil(cap),
        _ => 1,
    };
    let (sx, sy) = (stride(w), stride(h));
    let mut samples = Vec::new();
    let mut y = 0;
    while y < h {
        let mut x = 0;
        while x < w {
            let ok = mask.is_none_or(|m| m.get(0, x, y) > 0.5) && observed.valid_at(x, y);
            if ok {
                if let Ok(up) = observed.up_vector(x, y) {
                    let lat = observed.latitude_radians(x, y);
                    if lat.is_finite() {
                        let p = CameraIntrinsics::pixel_center(x, y);
                        let (dx, dy) = (p.x - cx, p.y - cy);
                        samples.push(Sample { dx, dy, h2: dx * dx + dy * dy, lat, up });
                    }
                }
            }
            x += sx;
        }
        y += sy;
    }
    samples
}

/// Mean per-pixel residual of a camera hypothesis against observed samples:
/// |Δlatitude| plus the unsigned angle between predicted and observed up
/// vectors, both in radians. `f` is the hypothesis focal length in pixels
/// and `g` the world up axis in its camera frame.
fn cost_on_samples(samples: &[Sample], f: f64, g: Vector3<f64>) -> f64 {
    let mut total = 0.0;
    for s in samples {
        // Camera-frame ray a = (dx, dy, f); latitude = asin(a·g / |a|).
        let dot = s.dx * g.x + s.dy * g.y + f * g.z;
        let inv_norm = 1.0 / (s.h2 + f * f).sqrt();
        let lat = (dot * inv_norm).clamp(-1.0, 1.0).asin();
        // Predicted up direction (unnormalized; the angle is scale-free).
        let ux = g.x * f - s.dx * g.z;
        let uy = g.y * f - s.dy * g.z;
        let cross = ux * s.up.y - uy * s.up.x;
        let udot = ux * s.up.x + uy * s.up.y;
        total += (lat - s.lat).abs() + cross.abs().atan2(udot);
    }
    total / samples.len() as f64
}

/// Residual of an explicit camera against a full-resolution field.
pub fn perspective_field_cost(
    observed: &PerspectiveField,
    mask: Option<&ScalarGrid>,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) -> Result<f64, EstimateError> {
    check_mask_dims(observed, mask)?;
    let pp = intr.principal_point();
    let samples = collect_samples(observed, mask, (pp.x, pp.y), None);
    if samples.is_empty() {
        return Err(EstimateError::DegenerateField);
    }
    Ok(cost_on_samples(&samples, intr.focal(), pose.world_up_in_camera()))
}

fn check_mask_dims(
    observed: &PerspectiveField,
    mask: Option<&ScalarGrid>,
) -> Result<(), EstimateError> {
    if let Some(mask) = mask {
        if mask.width() != observed.width() || mask.height() != observed.height() {
            return Err(EstimateError::DimsMismatch {
                mask_w: mask.width(),
                mask_h: mask.height(),
                field_w: observed.width(),
                field_h: observed.height(),
            });
        }
    }
    Ok(())
}

/// Candidate ordering: lowest cost wins; exact ties prefer the smallest
/// fov, then the smallest |pitch|, then the smallest |roll|. The trailing
/// signed components make the order total, so the winner is independent of
/// evaluation order.
fn key(cost: f64, fov: f64, pitch: f64, roll: f64) -> [f64; 6] {
    [cost, fov, pitch.abs(), roll.abs(), pitch, roll]
}

fn key_less(a: &[f64; 6], b: &[f64; 6]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

fn best_candidate(
    samples: &[Sample],
    image_height: u32,
    candidates: &[(f64, f64, f64)],
) -> ((f64, f64, f64), f64) {
    let (best, (fov, pitch, roll)) = candidates
        .par_iter()
        .map(|&(fov, pitch, roll)| {
            let f = focal_from_fov(fov, image_height).expect("grid-validated fov");
            let c = cost_on_samples(samples, f, world_up_in_camera(pitch, roll));
            (key(c, fov, pitch, roll), (fov, pitch, roll))
        })
        .reduce(
            || ([f64::INFINITY; 6], (f64::NAN, f64::NAN, f64::NAN)),
            |a, b| if key_less(&a.0, &b.0) { a } else { b },
        );
    ((fov, pitch, roll), best[0])
}

/// Recovers (fov, pitch, roll) from an observed perspective field.
///
/// Coarse sweep over the full lattice on a subsampled pixel lattice
/// (≤ 32×32), then `refinement_levels` rounds shrinking the step by
/// `shrink` around the incumbent (≤ 64×64 pixels for intermediate rounds,
/// full resolution for the last). The incumbent is re-evaluated inside
/// every round, so its cost never increases across levels.
pub fn estimate_camera(
    observed: &PerspectiveField,
    mask: Option<&ScalarGrid>,
    grid: &GridSpec,
) -> Result<CameraEstimate, EstimateError> {
    grid.validate()?;
    check_mask_dims(observed, mask)?;
    let (w, h) = (observed.width(), observed.height());
    let cx = f64::from(w) / 2.0;
    let cy = f64::from(h) / 2.0;

    let coarse_samples = collect_samples(observed, mask, (cx, cy), Some(32));
    if coarse_samples.is_empty() {
        return Err(EstimateError::DegenerateField);
    }

    let (fovs, pitches, rolls) = (grid.fov.values(), grid.pitch.values(), grid.roll.values());
    let mut candidates = Vec::with_capacity(fovs.len() * pitches.len() * rolls.len());
    for &fov in &fovs {
        for &pitch in &pitches {
            for &roll in &rolls {
                candidates.push((fov, pitch, roll));
            }
        }
    }
    let (mut incumbent, mut cost) = best_candidate(&coarse_samples, h, &candidates);

    let mut step = (grid.fov.step, grid.pitch.step, grid.roll.step);
    for level in 1..=grid.refinement_levels {
        let final_level = level == grid.refinement_levels;
        let samples = if final_level {
            collect_samples(observed, mask, (cx, cy), None)
        } else {
            collect_samples(observed, mask, (cx, cy), Some(64))
        };
        if samples.is_empty() {
            return Err(EstimateError::DegenerateField);
        }
        step = (step.0 * grid.shrink, step.1 * grid.shrink, step.2 * grid.shrink);
        let mut local = Vec::with_capacity(9 * 9 * 9);
        for i in -4i32..=4 {
            for j in -4i32..=4 {
                for k in -4i32..=4 {
                    local.push((
                        grid.fov.clamp(incumbent.0 + f64::from(i) * step.0),
                        grid.pitch.clamp(incumbent.1 + f64::from(j) * step.1),
                        grid.roll.clamp(incumbent.2 + f64::from(k) * step.2),
                    ));
                }
            }
        }
        (incumbent, cost) = best_candidate(&samples, h, &local);
    }

    Ok(CameraEstimate {
        fov_deg: incumbent.0,
        pitch_deg: incumbent.1,
        roll_deg: incumbent.2,
        cost,
    })
}
