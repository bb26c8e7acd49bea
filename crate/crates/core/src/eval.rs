//! Quantitative evaluation protocol: MSE, SSIM, the acceptance-window match
//! for unsynchronized paired sequences, and end-effector pixel error against
//! annotated constraints.

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::retarget::{ConstraintKind, ConstraintSet};
use crate::skeleton::{bone_offsets, fk_with_offsets, joint_positions, Motion, ShapeParams, Skeleton};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// 8-bit image frame, grayscale or RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame", "dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid("frame", format!("{channels} channels unsupported")));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(
                "frame",
                format!("expected {} bytes, got {}", width * height * channels, data.len()),
            ));
        }
        Ok(Frame { width, height, channels, data })
    }

    /// Loads a PNG or PGM/PPM image, keeping grayscale single-channel and
    /// everything else RGB.
    pub fn load(path: &Path) -> Result<Frame> {
        let img = image::open(path).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(match img {
            image::DynamicImage::ImageLuma8(g) => Frame {
                width: g.width() as usize,
                height: g.height() as usize,
                channels: 1,
                data: g.into_raw(),
            },
            other => {
                let rgb = other.to_rgb8();
                Frame {
                    width: rgb.width() as usize,
                    height: rgb.height() as usize,
                    channels: 3,
                    data: rgb.into_raw(),
                }
            }
        })
    }

    fn dims_match(&self, other: &Frame) -> Result<()> {
        if self.width != other.width || self.height != other.height || self.channels != other.channels
        {
            return Err(Error::invalid(
                "frames",
                format!(
                    "dimension mismatch: {}×{}×{} vs {}×{}×{}",
                    self.width, self.height, self.channels, other.width, other.height, other.channels
                ),
            ));
        }
        Ok(())
    }

    /// ITU-R 601 luma plane as f64 (identity for grayscale frames).
    fn luma(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.iter().map(|&v| v as f64).collect(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
                .collect(),
        }
    }

    fn channel_plane(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .map(|&v| v as f64)
            .collect()
    }
}

/// Mean squared intensity difference over all pixels and channels.
pub fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    a.dims_match(b)?;
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data.len() as f64)
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Separable valid-region Gaussian filter: output is (h−10)×(w−10).
fn gauss_valid(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = gaussian_kernel();
    let wv = w - (SSIM_WINDOW - 1);
    let hv = h - (SSIM_WINDOW - 1);
    let mut horiz = vec![0.0; wv * h];
    for y in 0..h {
        for x in 0..wv {
            let mut s = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                s += kv * plane[y * w + x + i];
            }
            horiz[y * wv + x] = s;
        }
    }
    let mut out = vec![0.0; wv * hv];
    for y in 0..hv {
        for x in 0..wv {
            let mut s = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                s += kv * horiz[(y + i) * wv + x];
            }
            out[y * wv + x] = s;
        }
    }
    out
}

fn ssim_plane(pa: &[f64], pb: &[f64], w: usize, h: usize) -> f64 {
    let mu_a = gauss_valid(pa, w, h);
    let mu_b = gauss_valid(pb, w, h);
    let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x * y).collect();
    let m_aa = gauss_valid(&aa, w, h);
    let m_bb = gauss_valid(&bb, w, h);
    let m_ab = gauss_valid(&ab, w, h);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let va = m_aa[i] - mu_a[i] * mu_a[i];
        let vb = m_bb[i] - mu_b[i] * mu_b[i];
        let cov = m_ab[i] - mu_a[i] * mu_b[i];
        let s = ((2.0 * mu_a[i] * mu_b[i] + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + SSIM_C1) * (va + vb + SSIM_C2));
        total += s;
    }
    total / mu_a.len() as f64
}

fn check_ssim_size(a: &Frame) -> Result<()> {
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::invalid(
            "frame",
            format!("SSIM needs at least {SSIM_WINDOW}×{SSIM_WINDOW} pixels"),
        ));
    }
    Ok(())
}

/// Structural similarity (Wang et al.): 11×11 Gaussian windows, σ = 1.5,
/// C1 = (0.01·255)², C2 = (0.03·255)², mean over the valid map. Computed on
/// the luma plane.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    a.dims_match(b)?;
    check_ssim_size(a)?;
    Ok(ssim_plane(&a.luma(), &b.luma(), a.width, a.height))
}

/// SSIM averaged over color channels instead of luma.
pub fn ssim_per_channel(a: &Frame, b: &Frame) -> Result<f64> {
    a.dims_match(b)?;
    check_ssim_size(a)?;
    let mut total = 0.0;
    for c in 0..a.channels {
        total += ssim_plane(&a.channel_plane(c), &b.channel_plane(c), a.width, a.height);
    }
    Ok(total / a.channels as f64)
}

/// Frame-count tolerance for unsynchronized paired videos:
/// w = max(15, 2·|len(V1) − len(V2)|).
pub fn acceptance_window(len1: usize, len2: usize) -> Result<usize> {
    if len1 == 0 || len2 == 0 {
        return Err(Error::invalid("acceptance_window", "sequence lengths must be positive"));
    }
    Ok(15usize.max(2 * len1.abs_diff(len2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mse,
    Ssim,
    /// SSIM averaged over color channels instead of luma.
    SsimPerChannel,
}

impl Metric {
    fn eval(&self, a: &Frame, b: &Frame) -> Result<f64> {
        match self {
            Metric::Mse => mse(a, b),
            Metric::Ssim => ssim(a, b),
            Metric::SsimPerChannel => ssim_per_channel(a, b),
        }
    }

    /// True when `candidate` beats `best` (min for MSE, max for SSIM).
    fn better(&self, candidate: f64, best: f64) -> bool {
        match self {
            Metric::Mse => candidate < best,
            Metric::Ssim | Metric::SsimPerChannel => candidate > best,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowedScore {
    /// Best metric value within the window.
    pub score: f64,
    /// Index in the reference sequence that achieved it.
    pub matched: usize,
}

/// Per-frame best score over the acceptance window: for each frame k of
/// `seq_a`, the best metric value against `seq_b[j]`, j ∈ [k−w, k+w] clamped
/// to valid indices.
pub fn windowed_score(
    seq_a: &[Frame],
    seq_b: &[Frame],
    metric: Metric,
    w: usize,
) -> Result<Vec<WindowedScore>> {
    if seq_a.is_empty() || seq_b.is_empty() {
        return Err(Error::invalid("sequences", "must be non-empty"));
    }
    let mut out = Vec::with_capacity(seq_a.len());
    for (k, frame) in seq_a.iter().enumerate() {
        let lo = k.saturating_sub(w);
        let hi = (k + w).min(seq_b.len() - 1);
        if lo > hi {
            return Err(Error::invalid(
                "window",
                format!("frame {k}: window [{lo}, {hi}] has no valid reference frames"),
            ));
        }
        let mut best: Option<WindowedScore> = None;
        for j in lo..=hi {
            let s = metric.eval(frame, &seq_b[j])?;
            if best.is_none() || metric.better(s, best.unwrap().score) {
                best = Some(WindowedScore { score: s, matched: j });
            }
        }
        out.push(best.unwrap());
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndEffectorReport {
    /// Pixel distance per constraint instance, in input order.
    pub per_constraint: Vec<f64>,
    /// Mean over constraint instances.
    pub mean_px: f64,
}

/// Mean pixel distance between each constrained end-effector and its
/// annotated target: 3D targets are projected through the camera, 2D targets
/// compared directly.
pub fn end_effector_error(
    skel: &Skeleton,
    beta: &ShapeParams,
    motion: &Motion,
    constraints: &ConstraintSet,
    camera: &Camera,
) -> Result<EndEffectorReport> {
    constraints.validate(skel, motion.len())?;
    if constraints.is_empty() {
        return Err(Error::invalid("constraints", "no constraint instances to score"));
    }
    let offsets = bone_offsets(skel, beta)?;
    let mut per_constraint = Vec::with_capacity(constraints.constraints.len());
    for c in &constraints.constraints {
        let pos = joint_positions(&fk_with_offsets(skel, &offsets, &motion.frames[c.frame]));
        let joint_px = camera.project_world(&pos[c.joint]).map_err(|e| match e {
            Error::BehindCamera { z, .. } => Error::BehindCamera { frame: c.frame, joint: c.joint, z },
            other => other,
        })?;
        let target_px = match &c.kind {
            ConstraintKind::Pixel2D(px) => *px,
            ConstraintKind::Position3D(p) => camera.project_world(p).map_err(|e| match e {
                Error::BehindCamera { z, .. } => Error::BehindCamera { frame: c.frame, joint: c.joint, z },
                other => other,
            })?,
        };
        per_constraint.push((joint_px - target_px).norm());
    }
    let mean_px = per_constraint.iter().sum::<f64>() / per_constraint.len() as f64;
    Ok(EndEffectorReport { per_constraint, mean_px })
}

/// Evaluation report: per-frame windowed scores plus aggregates; slots for
/// externally computed perceptual metrics stay empty here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub window: usize,
    pub per_frame: Vec<FrameScores>,
    pub mean_mse: Option<f64>,
    pub mean_ssim: Option<f64>,
    pub end_effector: Option<EndEffectorReport>,
    /// Reserved for metrics requiring pretrained networks, merged externally.
    pub lpips: Option<f64>,
    pub fvd: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrameScores {
    pub frame: usize,
    pub mse: f64,
    pub mse_matched: usize,
    pub ssim: f64,
    pub ssim_matched: usize,
}

impl EvalReport {
    /// Windowed MSE + SSIM comparison of two frame sequences.
    pub fn from_sequences(pred: &[Frame], reference: &[Frame], w: usize) -> Result<EvalReport> {
        Self::from_sequences_with(pred, reference, w, Metric::Ssim)
    }

    /// As [`EvalReport::from_sequences`] with a selectable SSIM variant.
    pub fn from_sequences_with(
        pred: &[Frame],
        reference: &[Frame],
        w: usize,
        ssim_metric: Metric,
    ) -> Result<EvalReport> {
        let mse_scores = windowed_score(pred, reference, Metric::Mse, w)?;
        let ssim_scores = windowed_score(pred, reference, ssim_metric, w)?;
        let per_frame: Vec<FrameScores> = mse_scores
            .iter()
            .zip(&ssim_scores)
            .enumerate()
            .map(|(frame, (m, s))| FrameScores {
                frame,
                mse: m.score,
                mse_matched: m.matched,
                ssim: s.score,
                ssim_matched: s.matched,
            })
            .collect();
        let n = per_frame.len() as f64;
        Ok(EvalReport {
            window: w,
            mean_mse: Some(per_frame.iter().map(|f| f.mse).sum::<f64>() / n),
            mean_ssim: Some(per_frame.iter().map(|f| f.ssim).sum::<f64>() / n),
            per_frame,
            end_effector: None,
            lpips: None,
            fvd: None,
        })
    }

    pub fn empty(window: usize) -> EvalReport {
        EvalReport {
            window,
            per_frame: Vec::new(),
            mean_mse: None,
            mean_ssim: None,
            end_effector: None,
            lpips: None,
            fvd: None,
        }
    }

    /// Per-frame scores as CSV (header + one row per frame).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,mse,mse_matched,ssim,ssim_matched\n");
        for f in &self.per_frame {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                f.frame, f.mse, f.mse_matched, f.ssim, f.ssim_matched
            ));
        }
        out
    }
}
