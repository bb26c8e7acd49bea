//! Shared helpers for unit tests: randomized skeletons, shapes, and poses.

use crate::skeleton::{Pose, ShapeParams, Skeleton, JOINT_COUNT, SHAPE_COUNT};
use nalgebra::Vector3;
use rand::Rng;

pub(crate) fn test_skeleton() -> Skeleton {
    crate::data::default_skeleton()
}

pub(crate) fn random_vec3<R: Rng>(rng: &mut R, scale: f64) -> Vector3<f64> {
    Vector3::new(
        (rng.random::<f64>() * 2.0 - 1.0) * scale,
        (rng.random::<f64>() * 2.0 - 1.0) * scale,
        (rng.random::<f64>() * 2.0 - 1.0) * scale,
    )
}

pub(crate) fn random_beta<R: Rng>(rng: &mut R, scale: f64) -> ShapeParams {
    let mut beta = ShapeParams::zeros();
    for b in beta.beta.iter_mut() {
        *b = (rng.random::<f64>() * 2.0 - 1.0) * scale;
    }
    beta
}

pub(crate) fn random_pose<R: Rng>(rng: &mut R, angle_scale: f64) -> Pose {
    let mut pose = Pose::rest();
    for th in pose.theta.iter_mut() {
        *th = random_vec3(rng, angle_scale);
    }
    pose.root_t = random_vec3(rng, 1.0);
    pose
}

/// A random single-rooted 24-joint tree with random offsets and shape basis.
pub(crate) fn random_skeleton<R: Rng>(rng: &mut R) -> Skeleton {
    let mut parents = [0i32; JOINT_COUNT];
    parents[0] = -1;
    for (j, p) in parents.iter_mut().enumerate().skip(1) {
        *p = rng.random_range(0..j) as i32;
    }
    let mut offsets = [Vector3::zeros(); JOINT_COUNT];
    for off in offsets.iter_mut().skip(1) {
        loop {
            *off = random_vec3(rng, 0.4);
            if off.norm() > 0.05 {
                break;
            }
        }
    }
    let mut basis = vec![[Vector3::zeros(); JOINT_COUNT]; SHAPE_COUNT];
    for dir in basis.iter_mut() {
        for v in dir.iter_mut().skip(1) {
            *v = random_vec3(rng, 0.02);
        }
    }
    let leaves: Vec<usize> = (0..JOINT_COUNT)
        .filter(|&j| parents.iter().all(|&p| p != j as i32))
        .collect();
    let names = (0..JOINT_COUNT).map(|j| format!("joint{j}")).collect();
    Skeleton::new(parents, offsets, basis, leaves, names).unwrap()
}
