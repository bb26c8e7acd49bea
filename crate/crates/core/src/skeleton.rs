//! Parametric 24-joint skeleton: shape-dependent bone offsets, poses, and
//! forward kinematics.

use crate::error::{Error, Result};
use crate::math::{rodrigues, rodrigues_jacobian, RigidTransform};
use nalgebra::{Matrix3, Vector3};

/// Number of joints in the skeleton hierarchy.
pub const JOINT_COUNT: usize = 24;
/// Number of shape blend directions.
pub const SHAPE_COUNT: usize = 10;
/// Degrees of freedom of a pose's joint angles (24 axis-angles).
pub const ANGLE_DOF: usize = JOINT_COUNT * 3;

/// Default bound on |β_i|; keeps every blended bone length positive for the
/// bundled shape basis.
pub const DEFAULT_BETA_LIMIT: f64 = 5.0;

/// Joint hierarchy with a linear shape basis over rest bone offsets.
#[derive(Debug, Clone)]
pub struct Skeleton {
    parents: [i32; JOINT_COUNT],
    rest_offsets: [Vector3<f64>; JOINT_COUNT],
    shape_basis: Vec<[Vector3<f64>; JOINT_COUNT]>,
    end_effectors: Vec<usize>,
    joint_names: Vec<String>,
    /// Children lists derived from `parents`, in ascending joint order.
    children: Vec<Vec<usize>>,
    depths: [usize; JOINT_COUNT],
}

impl Skeleton {
    pub fn new(
        parents: [i32; JOINT_COUNT],
        rest_offsets: [Vector3<f64>; JOINT_COUNT],
        shape_basis: Vec<[Vector3<f64>; JOINT_COUNT]>,
        end_effectors: Vec<usize>,
        joint_names: Vec<String>,
    ) -> Result<Self> {
        if shape_basis.len() != SHAPE_COUNT {
            return Err(Error::invalid(
                "shape_basis",
                format!("expected {SHAPE_COUNT} blend directions, got {}", shape_basis.len()),
            ));
        }
        let mut root_count = 0;
        for (j, &p) in parents.iter().enumerate() {
            if p < 0 {
                root_count += 1;
            } else if p as usize >= JOINT_COUNT {
                return Err(Error::invalid(
                    "parents",
                    format!("joint {j} has out-of-range parent {p}"),
                ));
            }
        }
        if root_count != 1 {
            return Err(Error::invalid(
                "parents",
                format!("expected exactly one root sentinel, found {root_count}"),
            ));
        }
        // Reachability from the root doubles as the cycle check: in a graph
        // where every non-root node has exactly one parent, all 24 joints are
        // reachable from the root iff there is no cycle.
        let mut children = vec![Vec::new(); JOINT_COUNT];
        let mut root = 0;
        for (j, &p) in parents.iter().enumerate() {
            if p >= 0 {
                children[p as usize].push(j);
            } else {
                root = j;
            }
        }
        let mut depths = [0usize; JOINT_COUNT];
        let mut seen = [false; JOINT_COUNT];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(j) = stack.pop() {
            for &c in &children[j] {
                depths[c] = depths[j] + 1;
                seen[c] = true;
                stack.push(c);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid(
                "parents",
                "joint hierarchy contains a cycle or unreachable joint",
            ));
        }
        for &e in &end_effectors {
            if e >= JOINT_COUNT {
                return Err(Error::invalid("end_effectors", format!("joint id {e} out of range")));
            }
        }
        if joint_names.len() != JOINT_COUNT {
            return Err(Error::invalid(
                "joint_names",
                format!("expected {JOINT_COUNT} names, got {}", joint_names.len()),
            ));
        }
        let mut end_effectors = end_effectors;
        end_effectors.sort_unstable();
        end_effectors.dedup();
        Ok(Skeleton {
            parents,
            rest_offsets,
            shape_basis,
            end_effectors,
            joint_names,
            children,
            depths,
        })
    }

    pub fn root(&self) -> usize {
        self.parents.iter().position(|&p| p < 0).unwrap()
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        let p = self.parents[joint];
        (p >= 0).then_some(p as usize)
    }

    pub fn parents(&self) -> &[i32; JOINT_COUNT] {
        &self.parents
    }

    pub fn children(&self, joint: usize) -> &[usize] {
        &self.children[joint]
    }

    pub fn depth(&self, joint: usize) -> usize {
        self.depths[joint]
    }

    pub fn max_depth(&self) -> usize {
        *self.depths.iter().max().unwrap()
    }

    pub fn rest_offsets(&self) -> &[Vector3<f64>; JOINT_COUNT] {
        &self.rest_offsets
    }

    pub fn shape_basis(&self) -> &[[Vector3<f64>; JOINT_COUNT]] {
        &self.shape_basis
    }

    pub fn end_effectors(&self) -> &[usize] {
        &self.end_effectors
    }

    pub fn is_end_effector(&self, joint: usize) -> bool {
        self.end_effectors.binary_search(&joint).is_ok()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_by_name(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    /// Joints in parent-before-child order, starting at the root.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(JOINT_COUNT);
        let mut stack = vec![self.root()];
        while let Some(j) = stack.pop() {
            order.push(j);
            // Reverse keeps ascending joint order on the stack pop.
            for &c in self.children[j].iter().rev() {
                stack.push(c);
            }
        }
        order
    }
}

/// Shape coefficients β ∈ R^10.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeParams {
    pub beta: [f64; SHAPE_COUNT],
}

impl ShapeParams {
    pub fn zeros() -> Self {
        ShapeParams { beta: [0.0; SHAPE_COUNT] }
    }

    pub fn new(beta: [f64; SHAPE_COUNT]) -> Result<Self> {
        let s = ShapeParams { beta };
        s.validate(DEFAULT_BETA_LIMIT)?;
        Ok(s)
    }

    pub fn validate(&self, limit: f64) -> Result<()> {
        for (i, b) in self.beta.iter().enumerate() {
            if !b.is_finite() {
                return Err(Error::NonFinite { context: format!("beta[{i}]") });
            }
            if b.abs() > limit {
                return Err(Error::invalid(
                    format!("beta[{i}]"),
                    format!("|{b}| exceeds limit {limit}"),
                ));
            }
        }
        Ok(())
    }
}

/// A single frame: 24 joint axis-angles plus the root translation.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub theta: [Vector3<f64>; JOINT_COUNT],
    pub root_t: Vector3<f64>,
}

impl Pose {
    pub fn rest() -> Self {
        Pose {
            theta: [Vector3::zeros(); JOINT_COUNT],
            root_t: Vector3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (j, th) in self.theta.iter().enumerate() {
            if !(th.x.is_finite() && th.y.is_finite() && th.z.is_finite()) {
                return Err(Error::NonFinite { context: format!("theta[{j}]") });
            }
        }
        if !(self.root_t.x.is_finite() && self.root_t.y.is_finite() && self.root_t.z.is_finite()) {
            return Err(Error::NonFinite { context: "root_t".into() });
        }
        Ok(())
    }

    /// Wraps every axis-angle magnitude into [0, 2π).
    pub fn canonicalized(&self) -> Pose {
        let mut out = self.clone();
        for th in out.theta.iter_mut() {
            let angle = th.norm();
            if angle >= 2.0 * std::f64::consts::PI {
                let wrapped = angle % (2.0 * std::f64::consts::PI);
                *th *= wrapped / angle;
            }
        }
        out
    }

    /// Flat 72-vector view of the joint angles, joint-major.
    pub fn theta_flat(&self) -> [f64; ANGLE_DOF] {
        let mut out = [0.0; ANGLE_DOF];
        for (j, th) in self.theta.iter().enumerate() {
            out[3 * j] = th.x;
            out[3 * j + 1] = th.y;
            out[3 * j + 2] = th.z;
        }
        out
    }

    pub fn from_theta_flat(theta: &[f64], root_t: Vector3<f64>) -> Result<Pose> {
        if theta.len() != ANGLE_DOF {
            return Err(Error::invalid(
                "theta",
                format!("expected {ANGLE_DOF} values, got {}", theta.len()),
            ));
        }
        let mut out = Pose::rest();
        for j in 0..JOINT_COUNT {
            out.theta[j] = Vector3::new(theta[3 * j], theta[3 * j + 1], theta[3 * j + 2]);
        }
        out.root_t = root_t;
        Ok(out)
    }
}

/// World-frame rigid transforms of all 24 joints.
#[derive(Debug, Clone)]
pub struct JointPoses {
    pub transforms: [RigidTransform; JOINT_COUNT],
}

impl JointPoses {
    /// Checks every rotation is orthonormal with determinant +1 (tol 1e-9).
    pub fn validate(&self) -> Result<()> {
        for (j, t) in self.transforms.iter().enumerate() {
            if t.rotation_defect() > 1e-9 {
                return Err(Error::invalid(
                    format!("joint_pose[{j}]"),
                    "rotation is not orthonormal with det +1",
                ));
            }
        }
        Ok(())
    }
}

/// A motion clip: fixed frame rate plus per-frame poses.
#[derive(Debug, Clone)]
pub struct Motion {
    pub fps: f64,
    pub frames: Vec<Pose>,
}

impl Motion {
    pub fn new(fps: f64, frames: Vec<Pose>) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::invalid("fps", format!("{fps} is not positive")));
        }
        if frames.is_empty() {
            return Err(Error::invalid("frames", "motion must contain at least one frame"));
        }
        for f in &frames {
            f.validate()?;
        }
        Ok(Motion { fps, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Blended bone offsets: rest offsets plus the β-weighted shape basis.
///
/// Fails if any non-root offset collapses to zero length.
pub fn bone_offsets(skel: &Skeleton, beta: &ShapeParams) -> Result<[Vector3<f64>; JOINT_COUNT]> {
    let mut out = *skel.rest_offsets();
    for (i, dir) in skel.shape_basis().iter().enumerate() {
        let b = beta.beta[i];
        if b != 0.0 {
            for (j, off) in out.iter_mut().enumerate() {
                *off += dir[j] * b;
            }
        }
    }
    let root = skel.root();
    for (j, off) in out.iter().enumerate() {
        if j != root && off.norm() == 0.0 {
            return Err(Error::DegenerateBone { joint: j });
        }
    }
    Ok(out)
}

/// Forward kinematics: world transform of every joint.
///
/// The root takes `(exp(θ_root), root_t)`; each child composes its parent's
/// world transform with `(exp(θ_child), offset_child)`.
pub fn forward_kinematics(skel: &Skeleton, beta: &ShapeParams, pose: &Pose) -> Result<JointPoses> {
    pose.validate()?;
    beta.validate(DEFAULT_BETA_LIMIT)?;
    let offsets = bone_offsets(skel, beta)?;
    Ok(fk_with_offsets(skel, &offsets, pose))
}

/// FK with precomputed bone offsets; skips validation. Used on hot paths
/// where the offsets are fixed across many evaluations.
pub fn fk_with_offsets(
    skel: &Skeleton,
    offsets: &[Vector3<f64>; JOINT_COUNT],
    pose: &Pose,
) -> JointPoses {
    let mut transforms = [RigidTransform::identity(); JOINT_COUNT];
    for &j in skel.topological_order().iter() {
        let local_rot = rodrigues(&pose.theta[j]);
        transforms[j] = match skel.parent(j) {
            None => RigidTransform::new(local_rot, pose.root_t),
            Some(p) => transforms[p].compose(&RigidTransform::new(local_rot, offsets[j])),
        };
    }
    JointPoses { transforms }
}

/// Extracts the world-space joint positions from joint transforms.
pub fn joint_positions(jp: &JointPoses) -> [Vector3<f64>; JOINT_COUNT] {
    let mut out = [Vector3::zeros(); JOINT_COUNT];
    for (o, t) in out.iter_mut().zip(jp.transforms.iter()) {
        *o = t.t;
    }
    out
}

/// Joint positions straight from a pose; FK plus extraction.
pub fn positions_with_offsets(
    skel: &Skeleton,
    offsets: &[Vector3<f64>; JOINT_COUNT],
    pose: &Pose,
) -> [Vector3<f64>; JOINT_COUNT] {
    joint_positions(&fk_with_offsets(skel, offsets, pose))
}

/// Accumulates `grad[m] += Jᵀ g` where J is the Jacobian of all joint
/// positions w.r.t. the 72 joint angles and `g` assigns a cotangent vector to
/// every joint position.
///
/// Uses the identity `∂p_j/∂θ_m = R_pre(m) ∂R_m/∂θ_m R_world(m)ᵀ (p_j − p_m)`
/// for every descendant j of m, folded over the tree with suffix sums, so the
/// whole pull-back costs O(joints).
pub fn accumulate_position_pullback(
    skel: &Skeleton,
    pose: &Pose,
    jp: &JointPoses,
    g: &[Vector3<f64>; JOINT_COUNT],
    grad: &mut [f64],
) {
    debug_assert_eq!(grad.len(), ANGLE_DOF);
    let order = skel.topological_order();
    // Suffix sums over each subtree: s_m = Σ_{j ∈ subtree(m)} g_j and
    // c_m = Σ p_j g_jᵀ, accumulated children-before-parent.
    let mut s = [Vector3::zeros(); JOINT_COUNT];
    let mut c = [Matrix3::zeros(); JOINT_COUNT];
    for &j in order.iter().rev() {
        let p = jp.transforms[j].t;
        s[j] = g[j];
        c[j] = p * g[j].transpose();
        for &ch in skel.children(j) {
            s[j] += s[ch];
            c[j] += c[ch];
        }
    }
    for &m in order.iter() {
        let dr = rodrigues_jacobian(&pose.theta[m]);
        let r_world = jp.transforms[m].rot;
        let r_pre = match skel.parent(m) {
            Some(p) => jp.transforms[p].rot,
            None => Matrix3::identity(),
        };
        let p_m = jp.transforms[m].t;
        for k in 0..3 {
            // D = R_pre ∂R/∂θ_k R_worldᵀ; contribution Σ_j g_jᵀ D (p_j − p_m).
            let d = r_pre * dr[k] * r_world.transpose();
            let val = (d.transpose().component_mul(&c[m])).sum() - s[m].dot(&(d * p_m));
            grad[3 * m + k] += val;
        }
    }
}
