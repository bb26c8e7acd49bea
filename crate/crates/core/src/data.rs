//! Bundled default skeleton: a 24-joint human hierarchy with rest offsets in
//! meters and a linear shape basis that scales overall size and limb lengths.

use crate::skeleton::{Skeleton, JOINT_COUNT, SHAPE_COUNT};
use nalgebra::Vector3;

pub const PELVIS: usize = 0;
pub const LEFT_HIP: usize = 1;
pub const RIGHT_HIP: usize = 2;
pub const SPINE1: usize = 3;
pub const LEFT_KNEE: usize = 4;
pub const RIGHT_KNEE: usize = 5;
pub const SPINE2: usize = 6;
pub const LEFT_ANKLE: usize = 7;
pub const RIGHT_ANKLE: usize = 8;
pub const SPINE3: usize = 9;
pub const LEFT_FOOT: usize = 10;
pub const RIGHT_FOOT: usize = 11;
pub const NECK: usize = 12;
pub const LEFT_COLLAR: usize = 13;
pub const RIGHT_COLLAR: usize = 14;
pub const HEAD: usize = 15;
pub const LEFT_SHOULDER: usize = 16;
pub const RIGHT_SHOULDER: usize = 17;
pub const LEFT_ELBOW: usize = 18;
pub const RIGHT_ELBOW: usize = 19;
pub const LEFT_WRIST: usize = 20;
pub const RIGHT_WRIST: usize = 21;
pub const LEFT_HAND: usize = 22;
pub const RIGHT_HAND: usize = 23;

pub const JOINT_NAMES: [&str; JOINT_COUNT] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

pub const PARENTS: [i32; JOINT_COUNT] = [
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
];

/// T-pose rest offsets in meters, y up, +x to the character's left, facing +z.
fn rest_offsets() -> [Vector3<f64>; JOINT_COUNT] {
    let mut o = [Vector3::zeros(); JOINT_COUNT];
    o[LEFT_HIP] = Vector3::new(0.09, -0.09, 0.0);
    o[RIGHT_HIP] = Vector3::new(-0.09, -0.09, 0.0);
    o[SPINE1] = Vector3::new(0.0, 0.12, 0.0);
    o[LEFT_KNEE] = Vector3::new(0.0, -0.38, 0.0);
    o[RIGHT_KNEE] = Vector3::new(0.0, -0.38, 0.0);
    o[SPINE2] = Vector3::new(0.0, 0.12, 0.0);
    o[LEFT_ANKLE] = Vector3::new(0.0, -0.40, 0.0);
    o[RIGHT_ANKLE] = Vector3::new(0.0, -0.40, 0.0);
    o[SPINE3] = Vector3::new(0.0, 0.12, 0.0);
    o[LEFT_FOOT] = Vector3::new(0.0, -0.06, 0.12);
    o[RIGHT_FOOT] = Vector3::new(0.0, -0.06, 0.12);
    o[NECK] = Vector3::new(0.0, 0.10, 0.0);
    o[LEFT_COLLAR] = Vector3::new(0.08, 0.06, 0.0);
    o[RIGHT_COLLAR] = Vector3::new(-0.08, 0.06, 0.0);
    o[HEAD] = Vector3::new(0.0, 0.12, 0.0);
    o[LEFT_SHOULDER] = Vector3::new(0.10, 0.0, 0.0);
    o[RIGHT_SHOULDER] = Vector3::new(-0.10, 0.0, 0.0);
    o[LEFT_ELBOW] = Vector3::new(0.26, 0.0, 0.0);
    o[RIGHT_ELBOW] = Vector3::new(-0.26, 0.0, 0.0);
    o[LEFT_WRIST] = Vector3::new(0.25, 0.0, 0.0);
    o[RIGHT_WRIST] = Vector3::new(-0.25, 0.0, 0.0);
    o[LEFT_HAND] = Vector3::new(0.08, 0.0, 0.0);
    o[RIGHT_HAND] = Vector3::new(-0.08, 0.0, 0.0);
    o
}

/// Shape basis: direction 0 scales the whole body by 10% per unit β, the
/// remaining directions scale limb groups.
fn shape_basis() -> Vec<[Vector3<f64>; JOINT_COUNT]> {
    let rest = rest_offsets();
    let mut basis = vec![[Vector3::zeros(); JOINT_COUNT]; SHAPE_COUNT];
    let scale_group = |dir: &mut [Vector3<f64>; JOINT_COUNT], joints: &[usize], c: f64| {
        for &j in joints {
            dir[j] = rest[j] * c;
        }
    };
    for (j, v) in basis[0].iter_mut().enumerate() {
        *v = rest[j] * 0.1;
    }
    scale_group(&mut basis[1], &[LEFT_KNEE, RIGHT_KNEE, LEFT_ANKLE, RIGHT_ANKLE, LEFT_FOOT, RIGHT_FOOT], 0.08);
    scale_group(&mut basis[2], &[LEFT_ELBOW, RIGHT_ELBOW, LEFT_WRIST, RIGHT_WRIST, LEFT_HAND, RIGHT_HAND], 0.08);
    scale_group(&mut basis[3], &[SPINE1, SPINE2, SPINE3, NECK, HEAD], 0.06);
    scale_group(&mut basis[4], &[LEFT_HIP, RIGHT_HIP, LEFT_COLLAR, RIGHT_COLLAR, LEFT_SHOULDER, RIGHT_SHOULDER], 0.06);
    scale_group(&mut basis[5], &[HEAD], 0.1);
    scale_group(&mut basis[6], &[LEFT_FOOT, RIGHT_FOOT], 0.1);
    scale_group(&mut basis[7], &[LEFT_HAND, RIGHT_HAND], 0.1);
    scale_group(&mut basis[8], &[LEFT_HIP, RIGHT_HIP], 0.05);
    scale_group(&mut basis[9], &[NECK], 0.08);
    basis
}

/// The bundled default skeleton. End-effectors are the feet and hands.
pub fn default_skeleton() -> Skeleton {
    Skeleton::new(
        PARENTS,
        rest_offsets(),
        shape_basis(),
        vec![LEFT_FOOT, RIGHT_FOOT, LEFT_HAND, RIGHT_HAND],
        JOINT_NAMES.iter().map(|s| s.to_string()).collect(),
    )
    .expect("bundled skeleton is valid")
}
