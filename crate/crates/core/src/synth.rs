//! Synthetic paired-motion generator: procedurally keyframed scenarios with
//! a source motion, an analytically constructed ground-truth target motion
//! for a different body shape, and end-effector constraints the ground truth
//! satisfies exactly. Stands in for recorded paired videos at desk scale.

use crate::camera::{Camera, CameraIntrinsics};
use crate::data::{
    LEFT_ANKLE, LEFT_ELBOW, LEFT_FOOT, LEFT_HAND, LEFT_HIP, LEFT_KNEE, LEFT_SHOULDER, LEFT_WRIST,
    RIGHT_ANKLE, RIGHT_ELBOW, RIGHT_FOOT, RIGHT_HAND, RIGHT_HIP, RIGHT_KNEE, RIGHT_SHOULDER,
    RIGHT_WRIST,
};
use crate::error::{Error, Result};
use crate::retarget::{Constraint, ConstraintKind, ConstraintSet};
use crate::skeleton::{
    bone_offsets, fk_with_offsets, joint_positions, Motion, Pose, ShapeParams, Skeleton,
    JOINT_COUNT,
};
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Scene depth the actor stands at, in front of the camera (meters).
pub const SCENE_DEPTH: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    Walk,
    Jump,
    PickupBox,
    TouchCone,
}

impl Template {
    pub const ALL: [Template; 4] =
        [Template::Walk, Template::Jump, Template::PickupBox, Template::TouchCone];

    pub fn name(&self) -> &'static str {
        match self {
            Template::Walk => "walk",
            Template::Jump => "jump",
            Template::PickupBox => "pickup-box",
            Template::TouchCone => "touch-cone",
        }
    }
}

impl std::str::FromStr for Template {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "walk" => Ok(Template::Walk),
            "jump" => Ok(Template::Jump),
            "pickup-box" => Ok(Template::PickupBox),
            "touch-cone" => Ok(Template::TouchCone),
            other => Err(Error::invalid("template", format!("unknown template id '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Std-dev of zero-mean Gaussian noise on every joint-angle coordinate.
    pub angle_sigma: f64,
    /// Number of spike outliers injected on single-child joints.
    pub spikes: usize,
    /// Spike rotation magnitude (radians).
    pub spike_magnitude: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { angle_sigma: 0.0, spikes: 0, spike_magnitude: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub template: Template,
    pub duration_s: f64,
    pub fps: f64,
    pub beta_source: ShapeParams,
    pub beta_target: ShapeParams,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(template: Template) -> Self {
        ScenarioSpec {
            template,
            duration_s: 4.0,
            fps: 30.0,
            beta_source: ShapeParams::zeros(),
            beta_target: ShapeParams::zeros(),
            noise: NoiseSpec::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.duration_s > 0.0) {
            return Err(Error::invalid("scenario", "duration and fps must be positive"));
        }
        if (self.duration_s * self.fps).round() < 4.0 {
            return Err(Error::invalid("scenario", "duration·fps must be at least 4 frames"));
        }
        if self.noise.angle_sigma < 0.0 || self.noise.spike_magnitude < 0.0 {
            return Err(Error::invalid("noise", "magnitudes must be nonnegative"));
        }
        self.beta_source.validate(crate::skeleton::DEFAULT_BETA_LIMIT)?;
        self.beta_target.validate(crate::skeleton::DEFAULT_BETA_LIMIT)?;
        Ok(())
    }
}

/// A spike outlier injected into the source motion: the rotated joint and the
/// descendant whose position observably jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpikeEvent {
    pub frame: usize,
    pub joint: usize,
    pub observed_joint: usize,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub source: Motion,
    pub target_gt: Motion,
    pub constraints: ConstraintSet,
    pub camera: Camera,
    pub spikes: Vec<SpikeEvent>,
    /// Frame ranges [start, end) carrying hand/object touch constraints.
    pub touch_spans: Vec<(usize, usize)>,
    /// Sub-span where the touched object is still at rest (before lifting).
    pub static_hold_span: Option<(usize, usize)>,
    /// World position of the touched object (box or cone tip), if any.
    pub object_point: Option<Vector3<f64>>,
    /// Whether retargeting this scenario needs the root-translation offset
    /// (shapes of different leg length cannot plant feet by bending alone).
    pub needs_root_offsets: bool,
}

/// The camera all synthetic scenarios share.
pub fn default_camera() -> Camera {
    Camera::identity_pose(
        CameraIntrinsics::new(1000.0, 1000.0, 960.0, 540.0, 1920, 1080).expect("valid intrinsics"),
    )
}

/// Uniform size scaling through the bundled basis (direction 0 is 0.1 × rest
/// offsets): ratio 0.8 → β_0 = −2, ratio 1.25 → β_0 = 2.5.
pub fn uniform_scale_beta(ratio: f64) -> ShapeParams {
    let mut beta = ShapeParams::zeros();
    beta.beta[0] = (ratio - 1.0) / 0.1;
    beta
}

/// Pelvis height that puts the feet exactly on the floor at the rest pose.
pub fn standing_root_height(skel: &Skeleton, beta: &ShapeParams) -> Result<f64> {
    let offsets = bone_offsets(skel, beta)?;
    let pose = Pose::rest();
    let pos = joint_positions(&fk_with_offsets(skel, &offsets, &pose));
    Ok(-pos[LEFT_FOOT].y)
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Piecewise smoothstep through (τ, value) keyframes.
fn keyframed(keys: &[(f64, f64)], tau: f64) -> f64 {
    if tau <= keys[0].0 {
        return keys[0].1;
    }
    for w in keys.windows(2) {
        let (t0, v0) = w[0];
        let (t1, v1) = w[1];
        if tau <= t1 {
            return v0 + (v1 - v0) * smoothstep((tau - t0) / (t1 - t0));
        }
    }
    keys.last().unwrap().1
}

/// Shape-derived lengths used by the templates.
struct BodyDims {
    root_height: f64,
    /// Thigh + shank length (crouch drop lever).
    leg: f64,
    /// Upper-arm length.
    upper_arm: f64,
    /// Elbow-to-hand length (forearm + hand, collinear at rest).
    forearm_hand: f64,
}

fn body_dims(skel: &Skeleton, beta: &ShapeParams) -> Result<BodyDims> {
    let offsets = bone_offsets(skel, beta)?;
    Ok(BodyDims {
        root_height: standing_root_height(skel, beta)?,
        leg: offsets[LEFT_KNEE].norm() + offsets[LEFT_ANKLE].norm(),
        upper_arm: offsets[LEFT_ELBOW].norm(),
        forearm_hand: offsets[LEFT_WRIST].norm() + offsets[LEFT_HAND].norm(),
    })
}

/// Crouch consistent with planted feet: hips +α, knees −2α, ankles +α about
/// x keeps the feet level while the root drops by leg·(1 − cos α).
fn apply_crouch(pose: &mut Pose, alpha: f64) {
    pose.theta[LEFT_HIP].x += alpha;
    pose.theta[RIGHT_HIP].x += alpha;
    pose.theta[LEFT_KNEE].x += -2.0 * alpha;
    pose.theta[RIGHT_KNEE].x += -2.0 * alpha;
    pose.theta[LEFT_ANKLE].x += alpha;
    pose.theta[RIGHT_ANKLE].x += alpha;
}

/// Planar two-link IK about z: returns (shoulder, elbow) rotations moving a
/// rest direction `rest_dir` (+1 left arm, −1 right arm) so the hand reaches
/// `target` from `shoulder`, both in the frontal x-y plane.
fn arm_ik(
    shoulder: Vector2<f64>,
    target: Vector2<f64>,
    upper: f64,
    fore: f64,
    rest_dir: f64,
) -> Result<(f64, f64)> {
    let rel = target - shoulder;
    let d = rel.norm();
    if d >= upper + fore || d <= (upper - fore).abs() + 1e-9 {
        return Err(Error::invalid(
            "scenario",
            format!("object at distance {d:.3} m unreachable by arm ({upper:.3} + {fore:.3})"),
        ));
    }
    let a1 = rel.y.atan2(rel.x);
    let a2 = ((upper * upper + d * d - fore * fore) / (2.0 * upper * d)).clamp(-1.0, 1.0).acos();
    // Elbow-out branch.
    let phi1 = a1 + a2;
    let elbow = shoulder + upper * Vector2::new(phi1.cos(), phi1.sin());
    let phi2 = (target.y - elbow.y).atan2(target.x - elbow.x);
    let rest_angle = if rest_dir > 0.0 { 0.0 } else { std::f64::consts::PI };
    let wrap = |a: f64| {
        let mut a = a;
        while a > std::f64::consts::PI {
            a -= 2.0 * std::f64::consts::PI;
        }
        while a < -std::f64::consts::PI {
            a += 2.0 * std::f64::consts::PI;
        }
        a
    };
    Ok((wrap(phi1 - rest_angle), wrap(phi2 - phi1)))
}

/// Constraint schedule entry produced by a template: target filled from the
/// ground-truth motion afterwards.
struct ScheduleEntry {
    frame: usize,
    joint: usize,
    two_d: bool,
    label: &'static str,
}

struct TemplateBuild {
    frames: Vec<Pose>,
    schedule: Vec<ScheduleEntry>,
    touch_spans: Vec<(usize, usize)>,
    static_hold_span: Option<(usize, usize)>,
    object_point: Option<Vector3<f64>>,
    needs_root_offsets: bool,
}

fn build_template(skel: &Skeleton, beta: &ShapeParams, spec: &ScenarioSpec) -> Result<TemplateBuild> {
    let n = (spec.duration_s * spec.fps).round() as usize;
    let dims = body_dims(skel, beta)?;
    // Object placement always derives from the SOURCE's geometry: the scene
    // object is shared between the paired actors.
    let src_dims = body_dims(skel, &spec.beta_source)?;
    match spec.template {
        Template::Walk => build_walk(n, spec.fps, &dims),
        Template::Jump => build_jump(n, spec.fps, &dims),
        Template::PickupBox => build_pickup(skel, beta, n, spec.fps, &dims, &src_dims, spec),
        Template::TouchCone => build_cone(skel, beta, n, spec.fps, &dims, &src_dims, spec),
    }
}

fn build_walk(n: usize, fps: f64, dims: &BodyDims) -> Result<TemplateBuild> {
    const GAIT_HZ: f64 = 0.75;
    let speed = 0.6 * dims.leg;
    let mut frames = Vec::with_capacity(n);
    for f in 0..n {
        let t = f as f64 / fps;
        let phi = 2.0 * std::f64::consts::PI * GAIT_HZ * t;
        let mut pose = Pose::rest();
        pose.theta[LEFT_HIP].x = 0.4 * phi.sin();
        pose.theta[RIGHT_HIP].x = -0.4 * phi.sin();
        pose.theta[LEFT_KNEE].x = -0.15 * (1.0 - phi.cos());
        pose.theta[RIGHT_KNEE].x = -0.15 * (1.0 + phi.cos());
        pose.theta[LEFT_ANKLE].x = -(pose.theta[LEFT_HIP].x + pose.theta[LEFT_KNEE].x);
        pose.theta[RIGHT_ANKLE].x = -(pose.theta[RIGHT_HIP].x + pose.theta[RIGHT_KNEE].x);
        pose.theta[LEFT_SHOULDER].x = -0.25 * phi.sin();
        pose.theta[RIGHT_SHOULDER].x = 0.25 * phi.sin();
        pose.root_t = Vector3::new(
            0.0,
            dims.root_height + 0.015 * dims.leg * (2.0 * phi).sin(),
            SCENE_DEPTH + speed * t,
        );
        frames.push(pose);
    }
    // Continuous floor interaction: both feet annotated on every frame, the
    // way stance contact is annotated in paired recordings.
    let _ = fps;
    let mut schedule = Vec::new();
    for f in 0..n {
        for joint in [LEFT_FOOT, RIGHT_FOOT] {
            schedule.push(ScheduleEntry { frame: f, joint, two_d: false, label: "foot-floor" });
        }
    }
    Ok(TemplateBuild {
        frames,
        schedule,
        touch_spans: Vec::new(),
        static_hold_span: None,
        object_point: None,
        needs_root_offsets: true,
    })
}

fn build_jump(n: usize, _fps: f64, dims: &BodyDims) -> Result<TemplateBuild> {
    let alpha_keys = [
        (0.0, 0.0),
        (0.2, 0.0),
        (0.35, 0.6),
        (0.4, 0.6),
        (0.5, 0.15),
        (0.6, 0.5),
        (0.8, 0.0),
        (1.0, 0.0),
    ];
    let raise_keys = [(0.0, 0.0), (0.35, 0.0), (0.5, 0.8), (0.65, 0.0), (1.0, 0.0)];
    let jump_h = 0.3 * dims.leg / 0.78;
    let crouch_y = |alpha: f64| dims.root_height - dims.leg * (1.0 - alpha.cos());
    let mut frames = Vec::with_capacity(n);
    for f in 0..n {
        let tau = f as f64 / (n - 1).max(1) as f64;
        let alpha = keyframed(&alpha_keys, tau);
        let mut pose = Pose::rest();
        apply_crouch(&mut pose, alpha);
        let raise = keyframed(&raise_keys, tau);
        pose.theta[LEFT_SHOULDER].z = raise;
        pose.theta[RIGHT_SHOULDER].z = -raise;
        let y = if (0.4..0.6).contains(&tau) {
            let tp = (tau - 0.4) / 0.2;
            let y_takeoff = crouch_y(keyframed(&alpha_keys, 0.4));
            let y_land = crouch_y(keyframed(&alpha_keys, 0.6));
            y_takeoff + (y_land - y_takeoff) * tp + jump_h * 4.0 * tp * (1.0 - tp)
        } else {
            crouch_y(alpha)
        };
        pose.root_t = Vector3::new(0.0, y, SCENE_DEPTH);
        frames.push(pose);
    }
    let mut schedule = Vec::new();
    for f in 0..n {
        let tau = f as f64 / (n - 1).max(1) as f64;
        if !(0.38..0.62).contains(&tau) {
            for joint in [LEFT_FOOT, RIGHT_FOOT] {
                schedule.push(ScheduleEntry { frame: f, joint, two_d: false, label: "foot-ground" });
            }
        }
    }
    Ok(TemplateBuild {
        frames,
        schedule,
        touch_spans: Vec::new(),
        static_hold_span: None,
        object_point: None,
        needs_root_offsets: true,
    })
}

/// Shoulder position (x, y) at the crouched touch posture, frontal plane.
fn shoulder_at_crouch(
    skel: &Skeleton,
    beta: &ShapeParams,
    dims: &BodyDims,
    alpha: f64,
    shoulder: usize,
) -> Result<Vector2<f64>> {
    let offsets = bone_offsets(skel, beta)?;
    let mut pose = Pose::rest();
    apply_crouch(&mut pose, alpha);
    pose.root_t = Vector3::new(0.0, dims.root_height - dims.leg * (1.0 - alpha.cos()), SCENE_DEPTH);
    let pos = joint_positions(&fk_with_offsets(skel, &offsets, &pose));
    Ok(Vector2::new(pos[shoulder].x, pos[shoulder].y))
}

struct ReachPhases {
    reach: (f64, f64),
    hold: (f64, f64),
    release: (f64, f64),
}

const PICKUP_PHASES: ReachPhases =
    ReachPhases { reach: (0.25, 0.45), hold: (0.45, 0.6), release: (0.6, 0.8) };

#[allow(clippy::too_many_arguments)]
fn build_reach_template(
    skel: &Skeleton,
    beta: &ShapeParams,
    n: usize,
    dims: &BodyDims,
    object: Vector2<f64>,
    lifted: Option<Vector2<f64>>,
    left_arm: bool,
    alpha_touch: f64,
    two_d: bool,
    label: &'static str,
    feet_constraints: bool,
    constrain_through_release: bool,
    needs_root_offsets: bool,
) -> Result<TemplateBuild> {
    let (shoulder_j, elbow_j) = if left_arm {
        (LEFT_SHOULDER, LEFT_ELBOW)
    } else {
        (RIGHT_SHOULDER, RIGHT_ELBOW)
    };
    let hand_j = if left_arm { LEFT_HAND } else { RIGHT_HAND };
    let rest_dir = if left_arm { 1.0 } else { -1.0 };
    let s_touch = shoulder_at_crouch(skel, beta, dims, alpha_touch, shoulder_j)?;
    let (chi_s, chi_e) = arm_ik(s_touch, object, dims.upper_arm, dims.forearm_hand, rest_dir)?;
    let (chi_s2, chi_e2) = match lifted {
        Some(up) => {
            let s_up = shoulder_at_crouch(skel, beta, dims, 0.0, shoulder_j)?;
            arm_ik(s_up, up, dims.upper_arm, dims.forearm_hand, rest_dir)?
        }
        None => (0.0, 0.0),
    };
    let ph = PICKUP_PHASES;
    let alpha_keys = [
        (0.0, 0.0),
        (ph.reach.0, 0.0),
        (ph.reach.1, alpha_touch),
        (ph.hold.1, alpha_touch),
        (ph.release.1, 0.0),
        (1.0, 0.0),
    ];
    let arm_blend = |tau: f64| -> (f64, f64) {
        if tau < ph.reach.0 {
            (0.0, 0.0)
        } else if tau < ph.reach.1 {
            let s = smoothstep((tau - ph.reach.0) / (ph.reach.1 - ph.reach.0));
            (chi_s * s, chi_e * s)
        } else if tau < ph.hold.1 {
            (chi_s, chi_e)
        } else if tau < ph.release.1 {
            let s = smoothstep((tau - ph.release.0) / (ph.release.1 - ph.release.0));
            (chi_s + (chi_s2 - chi_s) * s, chi_e + (chi_e2 - chi_e) * s)
        } else {
            (chi_s2, chi_e2)
        }
    };
    let mut frames = Vec::with_capacity(n);
    for f in 0..n {
        let tau = f as f64 / (n - 1).max(1) as f64;
        let alpha = keyframed(&alpha_keys, tau);
        let mut pose = Pose::rest();
        apply_crouch(&mut pose, alpha);
        let (cs, ce) = arm_blend(tau);
        pose.theta[shoulder_j].z = cs;
        pose.theta[elbow_j].z = ce;
        pose.root_t = Vector3::new(
            0.0,
            dims.root_height - dims.leg * (1.0 - alpha.cos()),
            SCENE_DEPTH,
        );
        frames.push(pose);
    }
    let hold_frames = |tau0: f64, tau1: f64| -> (usize, usize) {
        let a = (tau0 * (n - 1) as f64).ceil() as usize;
        let b = ((tau1 * (n - 1) as f64).floor() as usize).min(n - 1);
        (a, b + 1)
    };
    let (h0, h1) = hold_frames(ph.hold.0 + 0.01, ph.hold.1 - 0.01);
    // Constraints may follow the object through the lift (hand and object
    // move together until release) or stop at the static hold.
    let (c0, c1) = if constrain_through_release {
        (h0, hold_frames(ph.hold.0, ph.release.1 - 0.01).1)
    } else {
        (h0, h1)
    };
    let mut schedule = Vec::new();
    for f in c0..c1 {
        schedule.push(ScheduleEntry { frame: f, joint: hand_j, two_d, label });
    }
    if feet_constraints {
        for f in 0..n {
            for joint in [LEFT_FOOT, RIGHT_FOOT] {
                schedule.push(ScheduleEntry { frame: f, joint, two_d: false, label: "foot-plant" });
            }
        }
    }
    Ok(TemplateBuild {
        frames,
        schedule,
        touch_spans: vec![(c0, c1)],
        static_hold_span: Some((h0, h1)),
        object_point: Some(Vector3::new(object.x, object.y, SCENE_DEPTH)),
        needs_root_offsets,
    })
}

fn build_pickup(
    skel: &Skeleton,
    beta: &ShapeParams,
    n: usize,
    _fps: f64,
    dims: &BodyDims,
    src_dims: &BodyDims,
    spec: &ScenarioSpec,
) -> Result<TemplateBuild> {
    const ALPHA_TOUCH: f64 = 0.35;
    let s_src = shoulder_at_crouch(skel, &spec.beta_source, src_dims, ALPHA_TOUCH, LEFT_SHOULDER)?;
    let reach_src = src_dims.upper_arm + src_dims.forearm_hand;
    let psi = 45f64.to_radians();
    let object = s_src + 0.7 * reach_src * Vector2::new(psi.cos(), -psi.sin());
    let lifted = object + Vector2::new(0.0, 0.30);
    build_reach_template(
        skel,
        beta,
        n,
        dims,
        object,
        Some(lifted),
        true,
        ALPHA_TOUCH,
        false,
        "hand-on-box",
        true,
        true,
        true,
    )
}

fn build_cone(
    skel: &Skeleton,
    beta: &ShapeParams,
    n: usize,
    _fps: f64,
    dims: &BodyDims,
    src_dims: &BodyDims,
    spec: &ScenarioSpec,
) -> Result<TemplateBuild> {
    const ALPHA_TOUCH: f64 = 0.15;
    let s_src = shoulder_at_crouch(skel, &spec.beta_source, src_dims, ALPHA_TOUCH, RIGHT_SHOULDER)?;
    let reach_src = src_dims.upper_arm + src_dims.forearm_hand;
    let psi = 35f64.to_radians();
    let object = s_src + 0.8 * reach_src * Vector2::new(-psi.cos(), -psi.sin());
    build_reach_template(
        skel,
        beta,
        n,
        dims,
        object,
        None,
        false,
        ALPHA_TOUCH,
        true,
        "hand-on-cone",
        true,
        false,
        true,
    )
}

/// Generates the paired scenario: noisy source motion for the source shape,
/// clean ground-truth motion for the target shape, and constraints extracted
/// from the ground truth (exactly satisfiable by construction). Deterministic
/// per seed.
pub fn generate(skel: &Skeleton, spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let camera = default_camera();

    let source_build = build_template(skel, &spec.beta_source, spec)?;
    let target_build = build_template(skel, &spec.beta_target, spec)?;

    let target_gt = Motion::new(spec.fps, target_build.frames)?;
    let offsets_t = bone_offsets(skel, &spec.beta_target)?;
    let mut constraints = Vec::with_capacity(target_build.schedule.len());
    for entry in &target_build.schedule {
        let pos = joint_positions(&fk_with_offsets(skel, &offsets_t, &target_gt.frames[entry.frame]));
        let p = pos[entry.joint];
        let kind = if entry.two_d {
            ConstraintKind::Pixel2D(camera.project_world(&p)?)
        } else {
            ConstraintKind::Position3D(p)
        };
        constraints.push(Constraint {
            frame: entry.frame,
            joint: entry.joint,
            kind,
            label: entry.label.to_string(),
        });
    }
    let has_2d = constraints.iter().any(|c| matches!(c.kind, ConstraintKind::Pixel2D(_)));
    let constraint_set = ConstraintSet {
        constraints,
        camera: has_2d.then(|| camera.clone()),
    };

    // Noise goes on the source only; the ground truth stays clean.
    let mut source = Motion::new(spec.fps, source_build.frames)?;
    let mut spikes = Vec::new();
    if spec.noise.angle_sigma > 0.0 || spec.noise.spikes > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        if spec.noise.angle_sigma > 0.0 {
            let dist = Normal::new(0.0, spec.noise.angle_sigma)
                .map_err(|_| Error::invalid("noise", "bad sigma"))?;
            for frame in source.frames.iter_mut() {
                for j in 0..JOINT_COUNT {
                    frame.theta[j] += Vector3::new(
                        dist.sample(&mut rng),
                        dist.sample(&mut rng),
                        dist.sample(&mut rng),
                    );
                }
            }
        }
        if spec.noise.spikes > 0 {
            // Single-child joints give crisp one-joint position spikes.
            let spikable = [
                (LEFT_ANKLE, LEFT_FOOT),
                (RIGHT_ANKLE, RIGHT_FOOT),
                (LEFT_WRIST, LEFT_HAND),
                (RIGHT_WRIST, RIGHT_HAND),
            ];
            let n = source.len();
            let mut used = std::collections::BTreeSet::new();
            for k in 0..spec.noise.spikes {
                let mut frame;
                loop {
                    frame = rng.random_range(2..n.saturating_sub(2).max(3));
                    if used.insert(frame) {
                        break;
                    }
                }
                let (joint, observed) = spikable[k % spikable.len()];
                let axis = Vector3::new(
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                )
                .normalize();
                source.frames[frame].theta[joint] += axis * spec.noise.spike_magnitude;
                spikes.push(SpikeEvent { frame, joint, observed_joint: observed });
            }
            spikes.sort_by_key(|s| s.frame);
        }
    }

    Ok(Scenario {
        source,
        target_gt,
        constraints: constraint_set,
        camera,
        spikes,
        touch_spans: target_build.touch_spans,
        static_hold_span: target_build.static_hold_span,
        object_point: target_build.object_point,
        needs_root_offsets: target_build.needs_root_offsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::default_skeleton;

    fn residual(skel: &Skeleton, scenario: &Scenario, beta: &ShapeParams) -> f64 {
        let offsets = bone_offsets(skel, beta).unwrap();
        let mut worst: f64 = 0.0;
        for c in &scenario.constraints.constraints {
            let pos = joint_positions(&fk_with_offsets(
                skel,
                &offsets,
                &scenario.target_gt.frames[c.frame],
            ));
            let r = match &c.kind {
                ConstraintKind::Position3D(t) => (pos[c.joint] - t).norm(),
                ConstraintKind::Pixel2D(px) => {
                    (scenario.camera.project_world(&pos[c.joint]).unwrap() - px).norm()
                }
            };
            worst = worst.max(r);
        }
        worst
    }

    #[test]
    fn equal_shapes_zero_noise_source_equals_gt() {
        let skel = default_skeleton();
        for template in Template::ALL {
            let spec = ScenarioSpec::new(template);
            let s = generate(&skel, &spec).unwrap();
            assert_eq!(s.source.len(), s.target_gt.len());
            for (a, b) in s.source.frames.iter().zip(s.target_gt.frames.iter()) {
                assert_eq!(a, b, "{template:?}");
            }
        }
    }

    #[test]
    fn ground_truth_satisfies_constraints_exactly() {
        let skel = default_skeleton();
        for template in Template::ALL {
            for ratio in [0.8, 1.25] {
                let mut spec = ScenarioSpec::new(template);
                spec.beta_target = uniform_scale_beta(ratio);
                let s = generate(&skel, &spec).unwrap();
                assert!(!s.constraints.constraints.is_empty(), "{template:?}");
                let worst = residual(&skel, &s, &spec.beta_target);
                assert!(worst < 1e-9, "{template:?} ratio {ratio}: residual {worst}");
                s.constraints.validate(&skel, s.target_gt.len()).unwrap();
            }
        }
    }

    #[test]
    fn pickup_holds_hand_on_box_through_touch_span() {
        let skel = default_skeleton();
        let mut spec = ScenarioSpec::new(Template::PickupBox);
        spec.beta_target = uniform_scale_beta(0.8);
        let s = generate(&skel, &spec).unwrap();
        let box_pos = s.object_point.unwrap();
        let offsets = bone_offsets(&skel, &spec.beta_target).unwrap();
        let (h0, h1) = s.static_hold_span.unwrap();
        assert!(h1 > h0);
        for f in h0..h1 {
            let pos = joint_positions(&fk_with_offsets(&skel, &offsets, &s.target_gt.frames[f]));
            assert!((pos[LEFT_HAND] - box_pos).norm() < 1e-9, "frame {f}");
        }
        let (c0, c1) = s.touch_spans[0];
        assert!(c0 == h0 && c1 > h1, "carry span {c0}..{c1} extends past hold {h0}..{h1}");
    }

    #[test]
    fn cone_uses_2d_constraints_with_camera() {
        let skel = default_skeleton();
        let s = generate(&skel, &ScenarioSpec::new(Template::TouchCone)).unwrap();
        assert!(s.constraints.camera.is_some());
        let two_d = s
            .constraints
            .constraints
            .iter()
            .filter(|c| matches!(c.kind, ConstraintKind::Pixel2D(_)))
            .count();
        let three_d = s.constraints.constraints.len() - two_d;
        assert!(two_d > 0 && three_d > 0);
        assert!(s.needs_root_offsets);
    }

    #[test]
    fn fixed_seed_is_bitwise_deterministic() {
        let skel = default_skeleton();
        let mut spec = ScenarioSpec::new(Template::Walk);
        spec.noise = NoiseSpec { angle_sigma: 0.03, spikes: 3, spike_magnitude: 1.5 };
        spec.seed = 77;
        let a = generate(&skel, &spec).unwrap();
        let b = generate(&skel, &spec).unwrap();
        for (x, y) in a.source.frames.iter().zip(b.source.frames.iter()) {
            assert_eq!(x, y);
        }
        assert_eq!(a.spikes, b.spikes);
    }

    #[test]
    fn spikes_land_on_distinct_interior_frames() {
        let skel = default_skeleton();
        let mut spec = ScenarioSpec::new(Template::Walk);
        spec.noise.spikes = 4;
        spec.seed = 5;
        let s = generate(&skel, &spec).unwrap();
        assert_eq!(s.spikes.len(), 4);
        let frames: std::collections::BTreeSet<usize> = s.spikes.iter().map(|e| e.frame).collect();
        assert_eq!(frames.len(), 4);
        for e in &s.spikes {
            assert!(e.frame >= 2 && e.frame + 2 < s.source.len());
            // The spiked joint's own position stays put; its child moves.
            assert_eq!(skel.children(e.joint), &[e.observed_joint]);
        }
    }

    #[test]
    fn unknown_template_is_rejected() {
        assert!("cartwheel".parse::<Template>().is_err());
        assert_eq!("pickup-box".parse::<Template>().unwrap(), Template::PickupBox);
    }

    #[test]
    fn too_short_scenario_is_rejected() {
        let mut spec = ScenarioSpec::new(Template::Walk);
        spec.duration_s = 0.05;
        assert!(generate(&default_skeleton(), &spec).is_err());
    }
}
