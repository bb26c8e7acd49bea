use crate::{Cli, Command};
use retarget_core::arap::{arap_solve, extract_contours, match_control_points, ArapConfig};
use retarget_core::camera::Camera;
use retarget_core::data::default_skeleton;
use retarget_core::error::{Error, Result};
use retarget_core::eval::{
    acceptance_window, end_effector_error, EvalReport, Frame, Metric,
};
use retarget_core::io::{self, RunManifest, ToolConfigFile};
use retarget_core::mesh::{read_obj_with_labels, write_obj_with_labels};
use retarget_core::recon::{average_shape, reconstruct, ReconConfig};
use retarget_core::retarget::{
    retarget_motion, ConstraintKind, ConstraintSet, JointWeights, RetargetConfig,
};
use retarget_core::skeleton::{
    bone_offsets, fk_with_offsets, joint_positions, Motion, ShapeParams, Skeleton, SHAPE_COUNT,
};
use retarget_core::synth::{self, NoiseSpec, ScenarioSpec, Template};
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub fn run(cli: &Cli, argv: Vec<String>) -> Result<()> {
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| Error::Io {
        path: cli.out_dir.display().to_string(),
        source: e,
    })?;
    let file_config = match &cli.config {
        Some(path) => io::read_config(path)?,
        None => ToolConfigFile::default(),
    };
    let ctx = Ctx { out_dir: cli.out_dir.clone(), seed: cli.seed, argv, file_config };
    match &cli.command {
        Command::Reconstruct { .. } => cmd_reconstruct(cli, &ctx),
        Command::Retarget { .. } => cmd_retarget(cli, &ctx),
        Command::Deform { .. } => cmd_deform(cli, &ctx),
        Command::Eval { .. } => cmd_eval(cli, &ctx),
        Command::Plot { .. } => cmd_plot(cli, &ctx),
        Command::Synth { .. } => cmd_synth(cli, &ctx),
    }
}

struct Ctx {
    out_dir: PathBuf,
    seed: u64,
    argv: Vec<String>,
    file_config: ToolConfigFile,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write_manifest(
        &self,
        subcommand: &str,
        inputs: BTreeMap<String, String>,
        config: serde_json::Value,
    ) -> Result<()> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            argv: self.argv.clone(),
            inputs,
            config,
            seed: self.seed,
            out_dir: self.out_dir.display().to_string(),
            unix_time_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        manifest.write(&self.path("manifest.json"))
    }

    fn write_text(&self, name: &str, text: &str) -> Result<()> {
        std::fs::write(self.path(name), text).map_err(|e| Error::Io {
            path: self.path(name).display().to_string(),
            source: e,
        })
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write_text(name, &text)
    }
}

fn abs_path(path: &Path) -> String {
    std::fs::canonicalize(path)
        .map(|p| p.display().to_string())
        .unwrap_or_else(|_| path.display().to_string())
}

fn load_skeleton(path: &Option<PathBuf>) -> Result<Skeleton> {
    match path {
        Some(p) => io::read_skeleton(p),
        None => Ok(default_skeleton()),
    }
}

/// Reads a target shape from `{"beta": [...]}` or from a motion file header.
fn read_beta(path: &Path) -> Result<ShapeParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let beta_value = value
        .get("beta")
        .or_else(|| value.get("header").and_then(|h| h.get("beta")))
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            message: "no 'beta' field (expected {\"beta\": [...]} or a motion file)".into(),
        })?;
    let vec: Vec<f64> = serde_json::from_value(beta_value.clone()).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    if vec.len() != SHAPE_COUNT {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: format!("beta needs {SHAPE_COUNT} coefficients, got {}", vec.len()),
        });
    }
    let mut beta = [0.0; SHAPE_COUNT];
    beta.copy_from_slice(&vec);
    ShapeParams::new(beta)
}

fn frames_from_dir(dir: &Path) -> Result<Vec<Frame>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io { path: dir.display().to_string(), source: e })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png") | Some("pgm") | Some("ppm")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid("frames", format!("no images in {}", dir.display())));
    }
    paths.iter().map(|p| Frame::load(p)).collect()
}

// ------------------------------------------------------------- reconstruct

fn cmd_reconstruct(cli: &Cli, ctx: &Ctx) -> Result<()> {
    let Command::Reconstruct {
        motion,
        skeleton,
        gamma,
        cutoff_hz,
        outlier_k,
        iterations,
        learning_rate,
    } = &cli.command
    else {
        unreachable!()
    };
    let skel = load_skeleton(skeleton)?;
    let loaded = io::read_motion(motion)?;
    let beta = match &loaded.frame_betas {
        Some(betas) => average_shape(betas)?,
        None => loaded.beta,
    };
    let mut config = ReconConfig::default();
    ctx.file_config.recon.apply(&mut config);
    if let Some(v) = gamma {
        config.gamma = *v;
    }
    if let Some(v) = cutoff_hz {
        config.cutoff_hz = *v;
    }
    if let Some(v) = outlier_k {
        config.outlier_k = *v;
    }
    if let Some(v) = iterations {
        config.iterations = *v;
    }
    if let Some(v) = learning_rate {
        config.learning_rate = *v;
    }

    let (outcome, mask) = reconstruct(&skel, &beta, &loaded.motion, &config)?;
    io::write_motion(&outcome.motion, &beta, &loaded.skeleton_ref, &ctx.path("motion_smoothed.json"))?;

    let cost_before: f64 = outcome.cost_before.iter().sum();
    let cost_after: f64 = outcome.cost_after.iter().sum();
    let outliers: Vec<serde_json::Value> =
        mask.outliers().iter().map(|(f, j)| json!({"frame": f, "joint": j})).collect();
    ctx.write_json(
        "recon_report.json",
        &json!({
            "beta": beta.beta.to_vec(),
            "frames": loaded.motion.len(),
            "outlier_count": mask.outlier_count(),
            "outliers": outliers,
            "cost_before": cost_before,
            "cost_after": cost_after,
            "cost_change_percent": if cost_before > 0.0 {
                100.0 * (cost_after - cost_before) / cost_before
            } else {
                0.0
            },
        }),
    )?;

    let mut inputs = BTreeMap::new();
    inputs.insert("motion".into(), abs_path(motion));
    if let Some(s) = skeleton {
        inputs.insert("skeleton".into(), abs_path(s));
    }
    ctx.write_manifest("reconstruct", inputs, serde_json::to_value(ConfigSnapshot::recon(&config)).unwrap())
}

#[derive(Serialize)]
struct ReconSnapshot {
    cutoff_hz: f64,
    outlier_k: f64,
    outlier_floor_m: f64,
    gamma: f64,
    iterations: usize,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
}

#[derive(Serialize)]
struct RetargetSnapshot {
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    window_seconds: f64,
    iterations: usize,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    optimize_root_translation: bool,
}

struct ConfigSnapshot;

impl ConfigSnapshot {
    fn recon(c: &ReconConfig) -> ReconSnapshot {
        ReconSnapshot {
            cutoff_hz: c.cutoff_hz,
            outlier_k: c.outlier_k,
            outlier_floor_m: c.outlier_floor_m,
            gamma: c.gamma,
            iterations: c.iterations,
            learning_rate: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
        }
    }

    fn retarget(c: &RetargetConfig) -> RetargetSnapshot {
        RetargetSnapshot {
            lambda1: c.lambda1,
            lambda2: c.lambda2,
            lambda3: c.lambda3,
            window_seconds: c.window_seconds,
            iterations: c.iterations,
            learning_rate: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            optimize_root_translation: c.optimize_root_translation,
        }
    }
}

// ---------------------------------------------------------------- retarget

#[derive(Serialize, Default)]
struct ResidualStats {
    count: usize,
    mean: f64,
    max: f64,
}

fn residual_stats(values: &[f64]) -> ResidualStats {
    if values.is_empty() {
        return ResidualStats::default();
    }
    ResidualStats {
        count: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        max: values.iter().cloned().fold(0.0, f64::max),
    }
}

/// Per-kind constraint residuals of a motion (3D in meters, 2D in pixels).
fn constraint_residuals(
    skel: &Skeleton,
    beta: &ShapeParams,
    motion: &Motion,
    constraints: &ConstraintSet,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let offsets = bone_offsets(skel, beta)?;
    let mut res3 = Vec::new();
    let mut res2 = Vec::new();
    for c in &constraints.constraints {
        let pos = joint_positions(&fk_with_offsets(skel, &offsets, &motion.frames[c.frame]));
        match &c.kind {
            ConstraintKind::Position3D(t) => res3.push((pos[c.joint] - t).norm()),
            ConstraintKind::Pixel2D(px) => {
                let cam = constraints.camera.as_ref().ok_or_else(|| Error::BadConstraint {
                    index: c.frame,
                    what: "2D constraint requires a camera".into(),
                })?;
                res2.push((cam.project_world(&pos[c.joint])? - px).norm());
            }
        }
    }
    Ok((res3, res2))
}

fn cmd_retarget(cli: &Cli, ctx: &Ctx) -> Result<()> {
    let Command::Retarget {
        motion,
        skeleton,
        target_beta,
        constraints,
        camera,
        lambda1,
        lambda2,
        lambda3,
        window_seconds,
        iterations,
        learning_rate,
        optimize_root_translation,
    } = &cli.command
    else {
        unreachable!()
    };
    let skel = load_skeleton(skeleton)?;
    let loaded = io::read_motion(motion)?;
    let beta_t = read_beta(target_beta)?;
    let cam: Option<Camera> = camera.as_ref().map(|p| io::read_camera(p)).transpose()?;
    let constraint_set = match constraints {
        Some(path) => io::read_constraints(path, cam.clone())?,
        None => ConstraintSet { constraints: Vec::new(), camera: cam.clone() },
    };

    let mut config = RetargetConfig::default();
    ctx.file_config.retarget.apply(&mut config);
    if let Some(v) = lambda1 {
        config.lambda1 = *v;
    }
    if let Some(v) = lambda2 {
        config.lambda2 = *v;
    }
    if let Some(v) = lambda3 {
        config.lambda3 = *v;
    }
    if let Some(v) = window_seconds {
        config.window_seconds = *v;
    }
    if let Some(v) = iterations {
        config.iterations = *v;
    }
    if let Some(v) = learning_rate {
        config.learning_rate = *v;
    }
    if *optimize_root_translation {
        config.optimize_root_translation = true;
    }

    let weights = JointWeights::from_depth(&skel);
    let outcome = retarget_motion(
        &skel,
        &loaded.motion,
        &loaded.beta,
        &beta_t,
        &constraint_set,
        &weights,
        &config,
    )?;
    io::write_motion(&outcome.motion, &beta_t, &loaded.skeleton_ref, &ctx.path("motion_retargeted.json"))?;

    let mut trace_csv = String::from("window,iteration,loss\n");
    for (w, trace) in outcome.window_traces.iter().enumerate() {
        for (i, loss) in trace.iter().enumerate() {
            trace_csv.push_str(&format!("{w},{i},{loss}\n"));
        }
    }
    ctx.write_text("loss_trace.csv", &trace_csv)?;

    let (ret3, ret2) = constraint_residuals(&skel, &beta_t, &outcome.motion, &constraint_set)?;
    let (dir3, dir2) = constraint_residuals(&skel, &beta_t, &loaded.motion, &constraint_set)?;
    let ee = match (&cam, constraint_set.is_empty()) {
        (Some(camera), false) => Some((
            end_effector_error(&skel, &beta_t, &outcome.motion, &constraint_set, camera)?,
            end_effector_error(&skel, &beta_t, &loaded.motion, &constraint_set, camera)?,
        )),
        _ => None,
    };
    ctx.write_json(
        "residuals.json",
        &json!({
            "retargeted": {
                "residual_3d_m": residual_stats(&ret3),
                "residual_2d_px": residual_stats(&ret2),
                "end_effector_px": ee.as_ref().map(|(r, _)| r),
            },
            "direct_transfer": {
                "residual_3d_m": residual_stats(&dir3),
                "residual_2d_px": residual_stats(&dir2),
                "end_effector_px": ee.as_ref().map(|(_, d)| d),
            },
        }),
    )?;

    let mut inputs = BTreeMap::new();
    inputs.insert("motion".into(), abs_path(motion));
    inputs.insert("target_beta".into(), abs_path(target_beta));
    if let Some(s) = skeleton {
        inputs.insert("skeleton".into(), abs_path(s));
    }
    if let Some(c) = constraints {
        inputs.insert("constraints".into(), abs_path(c));
    }
    if let Some(c) = camera {
        inputs.insert("camera".into(), abs_path(c));
    }
    ctx.write_manifest("retarget", inputs, serde_json::to_value(ConfigSnapshot::retarget(&config)).unwrap())
}

// ------------------------------------------------------------------ deform

fn cmd_deform(cli: &Cli, ctx: &Ctx) -> Result<()> {
    let Command::Deform {
        mesh,
        labels,
        label_image,
        camera,
        stride,
        iterations,
        tolerance,
        penalty,
        uniform_weights,
    } = &cli.command
    else {
        unreachable!()
    };
    let mesh_data = read_obj_with_labels(mesh, labels)?;
    let image = io::read_label_image(label_image)?;
    let cam = io::read_camera(camera)?;
    let mut config = ArapConfig::default();
    ctx.file_config.arap.apply(&mut config);
    if let Some(v) = iterations {
        config.iterations = *v;
    }
    if let Some(v) = tolerance {
        config.tolerance = *v;
    }
    if let Some(v) = penalty {
        config.penalty = *v;
    }
    if *uniform_weights {
        config.uniform_weights = true;
    }
    let stride = stride.or(ctx.file_config.arap.contour_stride).unwrap_or(5);

    let contours = extract_contours(&image, stride);
    let matched = match_control_points(&mesh_data, &cam, &contours)?;
    let outcome = arap_solve(&mesh_data, &matched.controls, &config)?;
    write_obj_with_labels(
        &outcome.mesh,
        &ctx.path("mesh_deformed.obj"),
        &ctx.path("mesh_deformed.labels"),
    )?;

    let mut energy_csv = String::from("iteration,energy\n");
    for (i, e) in outcome.energy_trace.iter().enumerate() {
        energy_csv.push_str(&format!("{i},{e}\n"));
    }
    ctx.write_text("energy_trace.csv", &energy_csv)?;
    ctx.write_json(
        "deform_report.json",
        &json!({
            "vertices": mesh_data.vertices.len(),
            "contour_points": contours.len(),
            "control_points": matched.controls.len(),
            "skipped_contours": matched.skipped,
            "iterations_run": outcome.energy_trace.len() - 1,
            "final_energy": outcome.energy_trace.last(),
        }),
    )?;

    let mut inputs = BTreeMap::new();
    inputs.insert("mesh".into(), abs_path(mesh));
    inputs.insert("labels".into(), abs_path(labels));
    inputs.insert("label_image".into(), abs_path(label_image));
    inputs.insert("camera".into(), abs_path(camera));
    ctx.write_manifest(
        "deform",
        inputs,
        json!({
            "iterations": config.iterations,
            "tolerance": config.tolerance,
            "penalty": config.penalty,
            "uniform_weights": config.uniform_weights,
            "contour_stride": stride,
        }),
    )
}

// -------------------------------------------------------------------- eval

fn cmd_eval(cli: &Cli, ctx: &Ctx) -> Result<()> {
    let Command::Eval {
        pred_frames,
        ref_frames,
        pred_motion,
        skeleton,
        constraints,
        camera,
        window,
        ssim_per_channel,
    } = &cli.command
    else {
        unreachable!()
    };
    if pred_frames.is_some() != ref_frames.is_some() {
        return Err(Error::invalid(
            "eval",
            "--pred-frames and --ref-frames must be given together",
        ));
    }
    if pred_frames.is_none() && pred_motion.is_none() {
        return Err(Error::invalid(
            "eval",
            "nothing to evaluate: give frame directories and/or a motion",
        ));
    }
    let ssim_per_channel = *ssim_per_channel
        || ctx.file_config.eval.ssim_per_channel.unwrap_or(false);

    let mut report;
    let mut used_window = 0usize;
    if let (Some(pred_dir), Some(ref_dir)) = (pred_frames, ref_frames) {
        let pred = frames_from_dir(pred_dir)?;
        let reference = frames_from_dir(ref_dir)?;
        used_window = match window.or(ctx.file_config.eval.window) {
            Some(w) => w,
            None => acceptance_window(pred.len(), reference.len())?,
        };
        let metric = if ssim_per_channel { Metric::SsimPerChannel } else { Metric::Ssim };
        report = EvalReport::from_sequences_with(&pred, &reference, used_window, metric)?;
    } else {
        report = EvalReport::empty(0);
    }

    if let Some(motion_path) = pred_motion {
        let skel = load_skeleton(skeleton)?;
        let loaded = io::read_motion(motion_path)?;
        let cam_path = camera.as_ref().ok_or_else(|| {
            Error::invalid("eval", "--camera is required for end-effector error")
        })?;
        let cs_path = constraints.as_ref().ok_or_else(|| {
            Error::invalid("eval", "--constraints is required for end-effector error")
        })?;
        let cam = io::read_camera(cam_path)?;
        let cs = io::read_constraints(cs_path, Some(cam.clone()))?;
        report.end_effector =
            Some(end_effector_error(&skel, &loaded.beta, &loaded.motion, &cs, &cam)?);
    }

    ctx.write_json("eval_report.json", &report)?;
    ctx.write_text("eval_report.csv", &report.to_csv())?;

    let mut inputs = BTreeMap::new();
    for (k, v) in [
        ("pred_frames", pred_frames),
        ("ref_frames", ref_frames),
        ("pred_motion", pred_motion),
        ("skeleton", skeleton),
        ("constraints", constraints),
        ("camera", camera),
    ] {
        if let Some(p) = v {
            inputs.insert(k.into(), abs_path(p));
        }
    }
    ctx.write_manifest(
        "eval",
        inputs,
        json!({"window": used_window, "ssim_per_channel": ssim_per_channel}),
    )
}

// -------------------------------------------------------------------- plot

fn cmd_plot(cli: &Cli, ctx: &Ctx) -> Result<()> {
    let Command::Plot { motion, labels, joint, axis, skeleton, constraints } = &cli.command else {
        unreachable!()
    };
    let skel = load_skeleton(skeleton)?;
    let joint_id = match skel.joint_by_name(joint) {
        Some(j) => j,
        None => joint
            .parse::<usize>()
            .ok()
            .filter(|&j| j < retarget_core::skeleton::JOINT_COUNT)
            .ok_or_else(|| Error::invalid("joint", format!("unknown joint '{joint}'")))?,
    };
    let axis_id = match axis.as_str() {
        "x" => 0,
        "y" => 1,
        "z" => 2,
        other => return Err(Error::invalid("axis", format!("'{other}' is not x, y, or z"))),
    };

    let curve_labels: Vec<String> = match labels {
        Some(s) => s.split(',').map(|l| l.trim().to_string()).collect(),
        None => motion
            .iter()
            .map(|p| {
                p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "motion".into())
            })
            .collect(),
    };
    if curve_labels.len() != motion.len() {
        return Err(Error::invalid(
            "labels",
            format!("{} labels for {} motions", curve_labels.len(), motion.len()),
        ));
    }

    let mut curves: Vec<Vec<f64>> = Vec::with_capacity(motion.len());
    let mut fps = 30.0;
    for path in motion {
        let loaded = io::read_motion(path)?;
        fps = loaded.motion.fps;
        let offsets = bone_offsets(&skel, &loaded.beta)?;
        let values: Vec<f64> = loaded
            .motion
            .frames
            .iter()
            .map(|p| joint_positions(&fk_with_offsets(&skel, &offsets, p))[joint_id][axis_id])
            .collect();
        curves.push(values);
    }

    let constrained: Vec<usize> = match constraints {
        Some(path) => {
            let cs = io::read_constraints(path, None)?;
            let mut frames: Vec<usize> = cs
                .constraints
                .iter()
                .filter(|c| c.joint == joint_id)
                .map(|c| c.frame)
                .collect();
            frames.sort_unstable();
            frames.dedup();
            frames
        }
        None => Vec::new(),
    };

    let max_len = curves.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut csv = String::from("frame,time_s");
    for label in &curve_labels {
        csv.push(',');
        csv.push_str(label);
    }
    csv.push_str(",constrained\n");
    for f in 0..max_len {
        csv.push_str(&format!("{f},{}", f as f64 / fps));
        for c in &curves {
            match c.get(f) {
                Some(v) => csv.push_str(&format!(",{v}")),
                None => csv.push(','),
            }
        }
        csv.push_str(&format!(",{}\n", usize::from(constrained.binary_search(&f).is_ok())));
    }
    ctx.write_text("trajectory.csv", &csv)?;

    let svg = crate::plot::trajectory_svg(
        &curves,
        &curve_labels,
        &constrained,
        fps,
        &format!("{} ({} axis)", skel.joint_names()[joint_id], axis),
    );
    ctx.write_text("trajectory.svg", &svg)?;

    let mut inputs = BTreeMap::new();
    for (i, p) in motion.iter().enumerate() {
        inputs.insert(format!("motion{i}"), abs_path(p));
    }
    if let Some(s) = skeleton {
        inputs.insert("skeleton".into(), abs_path(s));
    }
    if let Some(c) = constraints {
        inputs.insert("constraints".into(), abs_path(c));
    }
    ctx.write_manifest(
        "plot",
        inputs,
        json!({"joint": joint_id, "axis": axis, "labels": curve_labels}),
    )
}

// ------------------------------------------------------------------- synth

fn cmd_synth(cli: &Cli, ctx: &Ctx) -> Result<()> {
    let Command::Synth { template, duration, fps, shape_ratio, noise_sigma, spikes, spike_magnitude } =
        &cli.command
    else {
        unreachable!()
    };
    let template: Template = template.parse()?;
    let spec = ScenarioSpec {
        template,
        duration_s: *duration,
        fps: *fps,
        beta_source: ShapeParams::zeros(),
        beta_target: synth::uniform_scale_beta(*shape_ratio),
        noise: NoiseSpec {
            angle_sigma: *noise_sigma,
            spikes: *spikes,
            spike_magnitude: *spike_magnitude,
        },
        seed: ctx.seed,
    };
    let skel = default_skeleton();
    let scenario = synth::generate(&skel, &spec)?;

    io::write_skeleton(&skel, &ctx.path("skeleton.json"))?;
    io::write_camera(&scenario.camera, &ctx.path("camera.json"))?;
    io::write_motion(&scenario.source, &spec.beta_source, "skeleton.json", &ctx.path("source_motion.json"))?;
    io::write_motion(&scenario.target_gt, &spec.beta_target, "skeleton.json", &ctx.path("target_gt_motion.json"))?;
    // Direct transfer: source angles paired with the target shape.
    io::write_motion(&scenario.source, &spec.beta_target, "skeleton.json", &ctx.path("target_direct_motion.json"))?;
    io::write_constraints(&scenario.constraints, &ctx.path("constraints.json"))?;
    ctx.write_json("beta_target.json", &json!({"beta": spec.beta_target.beta.to_vec()}))?;
    ctx.write_json(
        "scenario.json",
        &json!({
            "template": template.name(),
            "duration_s": spec.duration_s,
            "fps": spec.fps,
            "shape_ratio": shape_ratio,
            "beta_source": spec.beta_source.beta.to_vec(),
            "beta_target": spec.beta_target.beta.to_vec(),
            "noise": {
                "angle_sigma": spec.noise.angle_sigma,
                "spikes": spec.noise.spikes,
                "spike_magnitude": spec.noise.spike_magnitude,
            },
            "seed": spec.seed,
            "touch_spans": scenario.touch_spans,
            "static_hold_span": scenario.static_hold_span,
            "object_point": scenario.object_point.map(|p| vec![p.x, p.y, p.z]),
            "needs_root_offsets": scenario.needs_root_offsets,
            "spikes": scenario.spikes.iter().map(|s| json!({
                "frame": s.frame, "joint": s.joint, "observed_joint": s.observed_joint
            })).collect::<Vec<_>>(),
        }),
    )?;

    ctx.write_manifest(
        "synth",
        BTreeMap::new(),
        json!({
            "template": template.name(),
            "duration_s": spec.duration_s,
            "fps": spec.fps,
            "shape_ratio": shape_ratio,
            "noise_sigma": spec.noise.angle_sigma,
            "spikes": spec.noise.spikes,
            "spike_magnitude": spec.noise.spike_magnitude,
        }),
    )
}
