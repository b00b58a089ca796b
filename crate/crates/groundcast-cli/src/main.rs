//! `groundcast` — command-line frontend for the library of the same name.
//!
//! Exit codes: 0 success, 1 any pipeline error (reported on stderr as
//! `code=<kind> msg=<message>`), 2 usage errors (from the argument parser).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use groundcast::camera_est::{estimate_camera, AxisSpec, GridSpec};
use groundcast::cloud::CloudError;
use groundcast::fields::render_perspective_field;
use groundcast::io::{
    default_scene_templates, generate_dataset, read_bundle, read_field, read_grid, read_scene,
    write_camera, write_field, write_ply, write_ppm, Bundle, DatasetSpec, IoError,
};
use groundcast::metrics::{
    aligned_depth_accuracy, chamfer_distance_scaled, field_errors, lsiv, EvalReport, MetricsError,
};
use groundcast::relight::{
    cast_shadow, composite_reflection, composite_shadow, render_reflection, LightSpec,
    RelightError,
};
use groundcast::raytrace::{render_ground_truth, SceneError};
use groundcast::reproject::{
    reconstruct_cloud, reconstruct_cloud_estimating_camera, Reconstruction, ReprojectError,
};
use groundcast::{CameraIntrinsics, CameraPose, GroundPlane, PointCloud};

struct CliError {
    code: &'static str,
    message: String,
}

macro_rules! error_code {
    ($ty:ty, $code:literal) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                Self { code: $code, message: e.to_string() }
            }
        }
    };
}
error_code!(IoError, "io");
error_code!(std::io::Error, "io");
error_code!(SceneError, "scene");
error_code!(groundcast::camera::CameraError, "camera");
error_code!(groundcast::camera_est::EstimateError, "estimate");
error_code!(ReprojectError, "reproject");
error_code!(RelightError, "relight");
error_code!(MetricsError, "metrics");
error_code!(CloudError, "cloud");
error_code!(serde_json::Error, "json");

#[derive(Parser)]
#[command(
    name = "groundcast",
    version,
    about = "Ground-aware monocular 3D geometry: render, estimate, reconstruct, relight"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ray-trace a scene file into a ground-truth bundle directory.
    Render(RenderArgs),
    /// Write the analytic perspective field for a given camera.
    Fields(FieldsArgs),
    /// Recover fov/pitch/roll from a stored perspective field.
    EstimateCamera(EstimateArgs),
    /// Lift a bundle's height and field grids into a 3D point cloud (PLY).
    Reconstruct(ReconstructArgs),
    /// Cast a ground shadow from a bundle's reconstruction onto its image.
    Shadow(ShadowArgs),
    /// Composite a planar ground reflection onto a bundle's image.
    Reflect(ReflectArgs),
    /// Compare a predicted bundle against a ground-truth bundle.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic dataset of rendered bundles.
    Dataset(DatasetArgs),
}

#[derive(Args)]
struct RenderArgs {
    /// Scene description (JSON).
    #[arg(long)]
    scene: PathBuf,
    /// Output bundle directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FieldsArgs {
    #[arg(long)]
    fov: f64,
    #[arg(long, allow_negative_numbers = true)]
    pitch: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    roll: f64,
    #[arg(long)]
    width: u32,
    #[arg(long)]
    height: u32,
    /// Output directory for latitude.orgf, up_sin.orgf, up_cos.orgf,
    /// and camera.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Directory holding latitude.orgf / up_sin.orgf / up_cos.orgf
    /// (a bundle directory or `fields` output).
    #[arg(long)]
    fields: PathBuf,
    /// Optional 0/1-valued grid file restricting which pixels participate.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Search range for the field of view, `min:max[:step]` degrees.
    #[arg(long, value_parser = parse_axis, allow_hyphen_values = true)]
    fov_range: Option<AxisSpec>,
    /// Search range for pitch, `min:max[:step]` degrees.
    #[arg(long, value_parser = parse_axis, allow_hyphen_values = true)]
    pitch_range: Option<AxisSpec>,
    /// Search range for roll, `min:max[:step]` degrees.
    #[arg(long, value_parser = parse_axis, allow_hyphen_values = true)]
    roll_range: Option<AxisSpec>,
    /// Number of coarse-to-fine refinement levels.
    #[arg(long)]
    levels: Option<u32>,
    /// Write the recovered camera to this file (camera JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Bundle directory to reconstruct from.
    #[arg(long)]
    bundle: PathBuf,
    /// Output point cloud (ASCII PLY). Holds front surface, back surface,
    /// and ground-foot points, colorized from the bundle image.
    #[arg(long)]
    out: PathBuf,
    /// Ignore the bundled camera; recover it from the field instead.
    #[arg(long)]
    estimate: bool,
}

#[derive(Args)]
struct ShadowArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Light description (JSON: {"type": "directional", "direction": [x,y,z]}
    /// or {"type": "point", "position": [x,y,z]}, optional "softness_px").
    /// Coordinates are in the reconstruction frame (ground plane z = -1).
    #[arg(long)]
    light: PathBuf,
    /// Output image (binary PPM).
    #[arg(long)]
    out: PathBuf,
    /// Shadow darkening strength in [0, 1].
    #[arg(long, default_value_t = 0.6)]
    strength: f64,
}

#[derive(Args)]
struct ReflectArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Output image (binary PPM).
    #[arg(long)]
    out: PathBuf,
    /// Reflection opacity at ground level.
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    /// Height scale of the opacity falloff (reconstruction units).
    #[arg(long, default_value_t = 0.5)]
    falloff: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted bundle directory.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth bundle directory.
    #[arg(long)]
    gt: PathBuf,
    /// Skip the least-squares scale correction before the chamfer distance.
    #[arg(long)]
    raw_chamfer: bool,
}

#[derive(Args)]
struct DatasetArgs {
    /// Dataset root directory.
    #[arg(long, required_unless_present = "list_scenes")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subset of built-in scene templates to use (default: all).
    #[arg(long, value_delimiter = ',')]
    scenes: Vec<String>,
    #[arg(long)]
    samples_per_scene: Option<u32>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    /// Print the built-in scene template names and exit.
    #[arg(long)]
    list_scenes: bool,
}

/// Prefixes the error message with the path being read or written; the
/// underlying error kind (and thus the reported `code=`) is preserved.
fn at<E: Into<CliError>>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| {
        let mut err: CliError = e.into();
        err.message = format!("{}: {}", path.display(), err.message);
        err
    }
}

fn parse_axis(s: &str) -> Result<AxisSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if !(parts.len() == 2 || parts.len() == 3) {
        return Err("expected min:max or min:max:step".into());
    }
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
    Ok(AxisSpec::new(
        num(parts[0])?,
        num(parts[1])?,
        if parts.len() == 3 { num(parts[2])? } else { 2.0 },
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("code={} msg={}", e.code, e.message);
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Render(args) => render(args),
        Command::Fields(args) => fields(args),
        Command::EstimateCamera(args) => estimate(args),
        Command::Reconstruct(args) => reconstruct(args),
        Command::Shadow(args) => shadow(args),
        Command::Reflect(args) => reflect(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Dataset(args) => dataset(args),
    }
}

fn render(args: RenderArgs) -> Result<(), CliError> {
    let scene = read_scene(&args.scene).map_err(at(&args.scene))?;
    let gt = render_ground_truth(&scene)?;
    groundcast::io::write_bundle(&args.out, &gt).map_err(at(&args.out))?;
    let coverage = gt.mask.data().iter().map(|&v| f64::from(v)).sum::<f64>()
        / gt.mask.data().len() as f64;
    println!(
        "rendered {} at {}x{}: fov {:.2}, pitch {:.2}, roll {:.2}, mask coverage {:.4}",
        scene.name,
        gt.intrinsics.width(),
        gt.intrinsics.height(),
        gt.intrinsics.fov_deg(),
        gt.pose.pitch_deg(),
        gt.pose.roll_deg(),
        coverage
    );
    Ok(())
}

fn fields(args: FieldsArgs) -> Result<(), CliError> {
    let intr = CameraIntrinsics::new(args.fov, args.width, args.height)?;
    let pose = CameraPose::new(args.pitch, args.roll)?;
    let field = render_perspective_field(&intr, &pose);
    write_field(&args.out, &field).map_err(at(&args.out))?;
    write_camera(&args.out.join("camera.json"), &intr, &pose).map_err(at(&args.out))?;
    println!("wrote perspective field to {}", args.out.display());
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<(), CliError> {
    let field = read_field(&args.fields).map_err(at(&args.fields))?;
    let mask = match &args.mask {
        Some(path) => Some(read_grid(path).map_err(at(path))?.0),
        None => None,
    };
    let mut grid = GridSpec::default();
    if let Some(a) = args.fov_range {
        grid.fov = a;
    }
    if let Some(a) = args.pitch_range {
        grid.pitch = a;
    }
    if let Some(a) = args.roll_range {
        grid.roll = a;
    }
    if let Some(levels) = args.levels {
        grid.refinement_levels = levels;
    }
    let est = estimate_camera(&field, mask.as_ref(), &grid)?;
    if let Some(out) = args.out {
        let intr = CameraIntrinsics::new(est.fov_deg, field.width(), field.height())?;
        let pose = CameraPose::new(est.pitch_deg, est.roll_deg)?;
        write_camera(&out, &intr, &pose).map_err(at(&out))?;
    }
    println!(
        "{}",
        serde_json::json!({
            "fov_deg": est.fov_deg,
            "pitch_deg": est.pitch_deg,
            "roll_deg": est.roll_deg,
            "cost": est.cost,
        })
    );
    Ok(())
}

/// Reconstructs a bundle with its stored camera, or an estimated one.
fn reconstruct_bundle(bundle: &Bundle, estimate: bool) -> Result<Reconstruction, CliError> {
    let rec = if estimate {
        reconstruct_cloud_estimating_camera(
            &bundle.heights,
            &bundle.field,
            Some(&bundle.mask),
            &GridSpec::default(),
        )?
    } else {
        reconstruct_cloud(
            &bundle.heights,
            &bundle.field,
            Some(&bundle.mask),
            &bundle.intrinsics,
            &bundle.pose,
        )?
    };
    Ok(rec)
}

/// Front and back surfaces merged into one cloud (positions only).
fn surface_cloud(rec: &Reconstruction) -> PointCloud {
    let mut points = rec.front.points.clone();
    points.extend_from_slice(&rec.back.points);
    PointCloud::from_points(points)
}

fn reconstruct(args: ReconstructArgs) -> Result<(), CliError> {
    let bundle = read_bundle(&args.bundle).map_err(at(&args.bundle))?;
    let rec = reconstruct_bundle(&bundle, args.estimate)?;

    let mut front = rec.front.clone();
    front.attach_colors_from_image(&bundle.rgb)?;
    let front_colors = front.colors.expect("just attached");
    let n = rec.front.len();
    let mut points = front.points;
    points.extend_from_slice(&rec.back.points);
    points.extend_from_slice(&rec.feet.points);
    let mut colors = front_colors.clone();
    colors.extend(front_colors.iter().map(|c| c.map(|v| v * 0.55)));
    colors.extend(std::iter::repeat_n([0.4f32, 0.4, 0.4], n));
    let cloud = PointCloud { points, colors: Some(colors), pixel_indices: None };
    write_ply(&args.out, &cloud).map_err(at(&args.out))?;
    println!(
        "reconstructed {} surface points (+{} feet), {} invalid pixels -> {}",
        2 * n,
        n,
        rec.invalid_pixels,
        args.out.display()
    );
    Ok(())
}

fn shadow(args: ShadowArgs) -> Result<(), CliError> {
    let bundle = read_bundle(&args.bundle).map_err(at(&args.bundle))?;
    let light_text = std::fs::read_to_string(&args.light).map_err(at(&args.light))?;
    let light: LightSpec = serde_json::from_str(&light_text).map_err(at(&args.light))?;
    let rec = reconstruct_bundle(&bundle, false)?;
    let cloud = surface_cloud(&rec);
    let layer = cast_shadow(
        &cloud,
        GroundPlane::RECONSTRUCTION,
        &light,
        &bundle.intrinsics,
        &bundle.pose,
    )?;
    let shaded = composite_shadow(&bundle.rgb, &layer.intensity, args.strength)?;
    write_ppm(&args.out, &shaded).map_err(at(&args.out))?;
    println!(
        "cast shadow from {} points ({} at/above the light) -> {}",
        cloud.len(),
        layer.skipped_above_light,
        args.out.display()
    );
    Ok(())
}

fn reflect(args: ReflectArgs) -> Result<(), CliError> {
    let bundle = read_bundle(&args.bundle).map_err(at(&args.bundle))?;
    let rec = reconstruct_bundle(&bundle, false)?;
    let mut front = rec.front;
    front.attach_colors_from_image(&bundle.rgb)?;
    let layer = render_reflection(
        &front,
        GroundPlane::RECONSTRUCTION,
        &bundle.intrinsics,
        &bundle.pose,
        args.alpha,
        args.falloff,
    )?;
    let composed = composite_reflection(&bundle.rgb, &layer)?;
    write_ppm(&args.out, &composed).map_err(at(&args.out))?;
    println!("composited reflection of {} points -> {}", front.len(), args.out.display());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let pred = read_bundle(&args.pred).map_err(at(&args.pred))?;
    let gt = read_bundle(&args.gt).map_err(at(&args.gt))?;

    let (acc, _) = aligned_depth_accuracy(&pred.depth, &gt.depth, Some(&gt.mask))?;
    let rec_pred = reconstruct_bundle(&pred, false)?;
    let rec_gt = reconstruct_bundle(&gt, false)?;
    let chamfer = chamfer_distance_scaled(
        &surface_cloud(&rec_pred),
        &surface_cloud(&rec_gt),
        !args.raw_chamfer,
    )?;
    let scale_fit = lsiv(&rec_pred.front, &rec_gt.front)?;
    let fields = field_errors(&pred.heights, &pred.field, &gt.heights, &gt.field, Some(&gt.mask))?;

    let report = EvalReport {
        absrel: acc.absrel,
        delta1: acc.delta1,
        chamfer,
        lsiv_rmse: scale_fit.rmse,
        height_l1_px: fields.height_l1_px,
        latitude_l1_deg: fields.latitude_l1_deg,
        up_l1_deg: fields.up_l1_deg,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn dataset(args: DatasetArgs) -> Result<(), CliError> {
    let templates = default_scene_templates();
    if args.list_scenes {
        for t in &templates {
            println!("{}", t.name);
        }
        return Ok(());
    }
    let templates = if args.scenes.is_empty() {
        templates
    } else {
        let picked: Vec<_> =
            templates.into_iter().filter(|t| args.scenes.contains(&t.name)).collect();
        if picked.len() != args.scenes.len() {
            let known: Vec<String> =
                picked.iter().map(|t| t.name.clone()).collect();
            return Err(CliError {
                code: "usage",
                message: format!(
                    "unknown scene template(s): requested {:?}, matched {known:?}",
                    args.scenes
                ),
            });
        }
        picked
    };
    let mut spec = DatasetSpec::default();
    if let Some(n) = args.samples_per_scene {
        spec.samples_per_scene = n;
    }
    if let Some(w) = args.width {
        spec.image_width = w;
    }
    if let Some(h) = args.height {
        spec.image_height = h;
    }
    let out = args.out.expect("enforced by the parser");
    let manifest = generate_dataset(&out, &templates, &spec, args.seed).map_err(at(&out))?;
    println!(
        "generated {} bundles ({} rejected) under {}",
        manifest.entries.len(),
        manifest.rejected.len(),
        out.display()
    );
    Ok(())
}
