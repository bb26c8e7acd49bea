//! File formats: motion clips, skeletons, cameras, constraints, label
//! images, tool configuration (TOML/JSON), and the run manifest. All
//! structured data is JSON; floats use the shortest round-trip
//! representation, so write-then-read is value-identical.

use crate::arap::{ArapConfig, LabelImage};
use crate::camera::{Camera, CameraIntrinsics};
use crate::error::{Error, Result};
use crate::recon::ReconConfig;
use crate::retarget::{Constraint, ConstraintKind, ConstraintSet, RetargetConfig};
use crate::skeleton::{
    Motion, Pose, ShapeParams, Skeleton, ANGLE_DOF, JOINT_COUNT, SHAPE_COUNT,
};
use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn parse_json<'a, T: Deserialize<'a>>(path: &Path, text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("serializable");
    out.push('\n');
    out
}

// ---------------------------------------------------------------- skeleton

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonFile {
    pub parents: Vec<i32>,
    pub rest_offsets: Vec<[f64; 3]>,
    pub shape_basis: Vec<Vec<[f64; 3]>>,
    pub end_effectors: Vec<usize>,
    pub joint_names: Vec<String>,
}

impl SkeletonFile {
    pub fn from_skeleton(skel: &Skeleton) -> Self {
        SkeletonFile {
            parents: skel.parents().to_vec(),
            rest_offsets: skel.rest_offsets().iter().map(|v| [v.x, v.y, v.z]).collect(),
            shape_basis: skel
                .shape_basis()
                .iter()
                .map(|dir| dir.iter().map(|v| [v.x, v.y, v.z]).collect())
                .collect(),
            end_effectors: skel.end_effectors().to_vec(),
            joint_names: skel.joint_names().to_vec(),
        }
    }

    pub fn into_skeleton(self) -> Result<Skeleton> {
        if self.parents.len() != JOINT_COUNT {
            return Err(Error::invalid(
                "parents",
                format!("expected {JOINT_COUNT} entries, got {}", self.parents.len()),
            ));
        }
        if self.rest_offsets.len() != JOINT_COUNT {
            return Err(Error::invalid(
                "rest_offsets",
                format!("expected {JOINT_COUNT} entries, got {}", self.rest_offsets.len()),
            ));
        }
        if self.shape_basis.len() != SHAPE_COUNT
            || self.shape_basis.iter().any(|d| d.len() != JOINT_COUNT)
        {
            return Err(Error::invalid("shape_basis", "expected 10×24×3 array"));
        }
        let mut parents = [0i32; JOINT_COUNT];
        parents.copy_from_slice(&self.parents);
        let mut rest = [Vector3::zeros(); JOINT_COUNT];
        for (o, a) in rest.iter_mut().zip(self.rest_offsets.iter()) {
            *o = Vector3::new(a[0], a[1], a[2]);
        }
        let basis: Vec<[Vector3<f64>; JOINT_COUNT]> = self
            .shape_basis
            .iter()
            .map(|dir| {
                let mut out = [Vector3::zeros(); JOINT_COUNT];
                for (o, a) in out.iter_mut().zip(dir.iter()) {
                    *o = Vector3::new(a[0], a[1], a[2]);
                }
                out
            })
            .collect();
        Skeleton::new(parents, rest, basis, self.end_effectors, self.joint_names)
    }
}

pub fn read_skeleton(path: &Path) -> Result<Skeleton> {
    let text = read_text(path)?;
    let file: SkeletonFile = parse_json(path, &text)?;
    file.into_skeleton()
}

pub fn write_skeleton(skel: &Skeleton, path: &Path) -> Result<()> {
    write_text(path, &to_pretty_json(&SkeletonFile::from_skeleton(skel)))
}

// ------------------------------------------------------------------ motion

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotionHeader {
    pub fps: f64,
    pub frame_count: usize,
    pub skeleton_ref: String,
    pub beta: [f64; SHAPE_COUNT],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotionFrame {
    pub theta: Vec<f64>,
    pub root_t: [f64; 3],
    /// Optional per-frame shape estimate, averaged by `reconstruct`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<[f64; SHAPE_COUNT]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotionFile {
    pub header: MotionHeader,
    pub frames: Vec<MotionFrame>,
}

impl MotionFile {
    pub fn from_motion(motion: &Motion, beta: &ShapeParams, skeleton_ref: &str) -> Self {
        MotionFile {
            header: MotionHeader {
                fps: motion.fps,
                frame_count: motion.len(),
                skeleton_ref: skeleton_ref.to_string(),
                beta: beta.beta,
            },
            frames: motion
                .frames
                .iter()
                .map(|p| MotionFrame {
                    theta: p.theta_flat().to_vec(),
                    root_t: [p.root_t.x, p.root_t.y, p.root_t.z],
                    beta: None,
                })
                .collect(),
        }
    }

    pub fn into_motion(self) -> Result<LoadedMotion> {
        if self.header.frame_count != self.frames.len() {
            return Err(Error::invalid(
                "header.frame_count",
                format!("{} but {} frames present", self.header.frame_count, self.frames.len()),
            ));
        }
        let mut poses = Vec::with_capacity(self.frames.len());
        let mut frame_betas = Vec::new();
        for (i, f) in self.frames.iter().enumerate() {
            if f.theta.len() != ANGLE_DOF {
                return Err(Error::invalid(
                    format!("frames[{i}].theta"),
                    format!("expected {ANGLE_DOF} values, got {}", f.theta.len()),
                ));
            }
            let root = Vector3::new(f.root_t[0], f.root_t[1], f.root_t[2]);
            poses.push(Pose::from_theta_flat(&f.theta, root)?);
            if let Some(b) = f.beta {
                frame_betas.push(ShapeParams::new(b)?);
            }
        }
        if !frame_betas.is_empty() && frame_betas.len() != poses.len() {
            return Err(Error::invalid(
                "frames.beta",
                "per-frame betas must be present on every frame or none",
            ));
        }
        Ok(LoadedMotion {
            motion: Motion::new(self.header.fps, poses)?,
            beta: ShapeParams::new(self.header.beta)?,
            frame_betas: (!frame_betas.is_empty()).then_some(frame_betas),
            skeleton_ref: self.header.skeleton_ref,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LoadedMotion {
    pub motion: Motion,
    pub beta: ShapeParams,
    pub frame_betas: Option<Vec<ShapeParams>>,
    pub skeleton_ref: String,
}

pub fn read_motion(path: &Path) -> Result<LoadedMotion> {
    let text = read_text(path)?;
    let file: MotionFile = parse_json(path, &text)?;
    file.into_motion()
}

pub fn write_motion(motion: &Motion, beta: &ShapeParams, skeleton_ref: &str, path: &Path) -> Result<()> {
    write_text(path, &to_pretty_json(&MotionFile::from_motion(motion, beta, skeleton_ref)))
}

// ------------------------------------------------------------------ camera

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraPoseFile {
    pub r: [[f64; 3]; 3],
    pub t: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Optional world-to-camera rigid transform (p_cam = R p_world + t).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose: Option<CameraPoseFile>,
}

impl CameraFile {
    pub fn from_camera(cam: &Camera) -> Self {
        let k = cam.intrinsics;
        CameraFile {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
            pose: cam.world_to_camera.as_ref().map(|p| CameraPoseFile {
                r: [
                    [p.rot[(0, 0)], p.rot[(0, 1)], p.rot[(0, 2)]],
                    [p.rot[(1, 0)], p.rot[(1, 1)], p.rot[(1, 2)]],
                    [p.rot[(2, 0)], p.rot[(2, 1)], p.rot[(2, 2)]],
                ],
                t: [p.t.x, p.t.y, p.t.z],
            }),
        }
    }

    pub fn into_camera(self) -> Result<Camera> {
        let intrinsics =
            CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)?;
        let world_to_camera = match self.pose {
            None => None,
            Some(p) => {
                let rot = Matrix3::new(
                    p.r[0][0], p.r[0][1], p.r[0][2],
                    p.r[1][0], p.r[1][1], p.r[1][2],
                    p.r[2][0], p.r[2][1], p.r[2][2],
                );
                Some(crate::camera::pose_from_parts(rot, Vector3::new(p.t[0], p.t[1], p.t[2]))?)
            }
        };
        Ok(Camera { intrinsics, world_to_camera })
    }
}

pub fn read_camera(path: &Path) -> Result<Camera> {
    let text = read_text(path)?;
    let file: CameraFile = parse_json(path, &text)?;
    file.into_camera()
}

pub fn write_camera(cam: &Camera, path: &Path) -> Result<()> {
    write_text(path, &to_pretty_json(&CameraFile::from_camera(cam)))
}

// ------------------------------------------------------------- constraints

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintEntry {
    pub frame: usize,
    pub joint: usize,
    pub kind: String,
    pub target: Vec<f64>,
    #[serde(default)]
    pub label: String,
}

pub fn read_constraints(path: &Path, camera: Option<Camera>) -> Result<ConstraintSet> {
    let text = read_text(path)?;
    let entries: Vec<ConstraintEntry> = parse_json(path, &text)?;
    let mut constraints = Vec::with_capacity(entries.len());
    for (i, e) in entries.into_iter().enumerate() {
        let kind = match (e.kind.as_str(), e.target.len()) {
            ("p3d", 3) => ConstraintKind::Position3D(Vector3::new(e.target[0], e.target[1], e.target[2])),
            ("p2d", 2) => ConstraintKind::Pixel2D(Vector2::new(e.target[0], e.target[1])),
            ("p3d", n) => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    message: format!("constraint {i}: p3d target needs 3 values, got {n}"),
                })
            }
            ("p2d", n) => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    message: format!("constraint {i}: p2d target needs 2 values, got {n}"),
                })
            }
            (k, _) => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    message: format!("constraint {i}: unknown kind '{k}'"),
                })
            }
        };
        constraints.push(Constraint { frame: e.frame, joint: e.joint, kind, label: e.label });
    }
    Ok(ConstraintSet { constraints, camera })
}

pub fn write_constraints(set: &ConstraintSet, path: &Path) -> Result<()> {
    let entries: Vec<ConstraintEntry> = set
        .constraints
        .iter()
        .map(|c| {
            let (kind, target) = match &c.kind {
                ConstraintKind::Position3D(p) => ("p3d".to_string(), vec![p.x, p.y, p.z]),
                ConstraintKind::Pixel2D(p) => ("p2d".to_string(), vec![p.x, p.y]),
            };
            ConstraintEntry { frame: c.frame, joint: c.joint, kind, target, label: c.label.clone() }
        })
        .collect();
    write_text(path, &to_pretty_json(&entries))
}

// ------------------------------------------------------------- label image

/// Loads a per-pixel part-id grid: `.json` holds a 2D integer matrix, image
/// files (PNG/PGM) map gray values to part ids directly.
pub fn read_label_image(path: &Path) -> Result<LabelImage> {
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let text = read_text(path)?;
        let rows: Vec<Vec<u8>> = parse_json(path, &text)?;
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Parse {
                path: path.display().to_string(),
                message: "ragged label matrix".into(),
            });
        }
        let data: Vec<u8> = rows.into_iter().flatten().collect();
        LabelImage::new(width, height, data)
    } else {
        let img = image::open(path).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let gray = img.to_luma8();
        LabelImage::new(gray.width() as usize, gray.height() as usize, gray.into_raw())
    }
}

// ------------------------------------------------------------------ config

/// Optional overrides loaded from a TOML or JSON config file. Precedence is
/// defaults < file < CLI flags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolConfigFile {
    #[serde(default)]
    pub retarget: RetargetOverrides,
    #[serde(default)]
    pub recon: ReconOverrides,
    #[serde(default)]
    pub arap: ArapOverrides,
    #[serde(default)]
    pub eval: EvalOverrides,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetargetOverrides {
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub window_seconds: Option<f64>,
    pub iterations: Option<usize>,
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub optimize_root_translation: Option<bool>,
}

impl RetargetOverrides {
    pub fn apply(&self, base: &mut RetargetConfig) {
        if let Some(v) = self.lambda1 {
            base.lambda1 = v;
        }
        if let Some(v) = self.lambda2 {
            base.lambda2 = v;
        }
        if let Some(v) = self.lambda3 {
            base.lambda3 = v;
        }
        if let Some(v) = self.window_seconds {
            base.window_seconds = v;
        }
        if let Some(v) = self.iterations {
            base.iterations = v;
        }
        if let Some(v) = self.learning_rate {
            base.learning_rate = v;
        }
        if let Some(v) = self.beta1 {
            base.beta1 = v;
        }
        if let Some(v) = self.beta2 {
            base.beta2 = v;
        }
        if let Some(v) = self.optimize_root_translation {
            base.optimize_root_translation = v;
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconOverrides {
    pub cutoff_hz: Option<f64>,
    pub outlier_k: Option<f64>,
    pub outlier_floor_m: Option<f64>,
    pub gamma: Option<f64>,
    pub iterations: Option<usize>,
    pub learning_rate: Option<f64>,
}

impl ReconOverrides {
    pub fn apply(&self, base: &mut ReconConfig) {
        if let Some(v) = self.cutoff_hz {
            base.cutoff_hz = v;
        }
        if let Some(v) = self.outlier_k {
            base.outlier_k = v;
        }
        if let Some(v) = self.outlier_floor_m {
            base.outlier_floor_m = v;
        }
        if let Some(v) = self.gamma {
            base.gamma = v;
        }
        if let Some(v) = self.iterations {
            base.iterations = v;
        }
        if let Some(v) = self.learning_rate {
            base.learning_rate = v;
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArapOverrides {
    pub iterations: Option<usize>,
    pub tolerance: Option<f64>,
    pub penalty: Option<f64>,
    pub uniform_weights: Option<bool>,
    pub contour_stride: Option<usize>,
}

impl ArapOverrides {
    pub fn apply(&self, base: &mut ArapConfig) {
        if let Some(v) = self.iterations {
            base.iterations = v;
        }
        if let Some(v) = self.tolerance {
            base.tolerance = v;
        }
        if let Some(v) = self.penalty {
            base.penalty = v;
        }
        if let Some(v) = self.uniform_weights {
            base.uniform_weights = v;
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOverrides {
    /// Fixed acceptance window; computed from sequence lengths when absent.
    pub window: Option<usize>,
    pub ssim_per_channel: Option<bool>,
}

pub fn read_config(path: &Path) -> Result<ToolConfigFile> {
    let text = read_text(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
        _ => parse_json(path, &text),
    }
}

// ---------------------------------------------------------------- manifest

/// Everything needed to reproduce a run bitwise: the subcommand, its full
/// argument list, resolved input paths, the effective config, and the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    /// Original argv (excluding the program name).
    pub argv: Vec<String>,
    /// Resolved absolute input paths, keyed by role.
    pub inputs: BTreeMap<String, String>,
    /// Effective configuration after defaults, file, and flag merging.
    pub config: serde_json::Value,
    pub seed: u64,
    pub out_dir: String,
    /// Wall-clock seconds since the epoch; informational only.
    pub unix_time_s: u64,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &to_pretty_json(self))
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = read_text(path)?;
    parse_json(path, &text)
}
