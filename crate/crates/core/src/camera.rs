//! Pinhole camera: intrinsics, optional rigid pose, projection and its
//! Jacobian.

use crate::error::{Error, Result};
use crate::math::RigidTransform;
use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3};

/// Minimum camera-frame depth considered in front of the camera (meters).
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::invalid("focal length", format!("fx={fx}, fy={fy} must be positive")));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("image size", "width and height must be positive"));
        }
        Ok(CameraIntrinsics { fx, fy, cx, cy, width, height })
    }
}

/// Intrinsics plus an optional world-to-camera rigid transform. With no pose
/// the camera frame coincides with the world frame.
#[derive(Debug, Clone)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    pub world_to_camera: Option<RigidTransform>,
}

impl Camera {
    pub fn identity_pose(intrinsics: CameraIntrinsics) -> Self {
        Camera { intrinsics, world_to_camera: None }
    }

    pub fn to_camera_frame(&self, p_world: &Vector3<f64>) -> Vector3<f64> {
        match &self.world_to_camera {
            Some(t) => t.apply(p_world),
            None => *p_world,
        }
    }

    pub fn camera_to_world(&self, p_cam: &Vector3<f64>) -> Vector3<f64> {
        match &self.world_to_camera {
            Some(t) => t.inverse().apply(p_cam),
            None => *p_cam,
        }
    }

    /// Projects a world point to pixel coordinates.
    pub fn project_world(&self, p_world: &Vector3<f64>) -> Result<Vector2<f64>> {
        project(&self.to_camera_frame(p_world), &self.intrinsics)
    }

    /// Jacobian of [`Camera::project_world`] w.r.t. the world point.
    pub fn project_world_jacobian(&self, p_world: &Vector3<f64>) -> Result<Matrix2x3<f64>> {
        let p_cam = self.to_camera_frame(p_world);
        let j = project_jacobian(&p_cam, &self.intrinsics)?;
        Ok(match &self.world_to_camera {
            Some(t) => j * t.rot,
            None => j,
        })
    }

    /// Back-projects a pixel to the world point at the given camera depth.
    pub fn back_project(&self, pixel: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        let k = self.intrinsics;
        let p_cam = Vector3::new(
            (pixel.x - k.cx) / k.fx * depth,
            (pixel.y - k.cy) / k.fy * depth,
            depth,
        );
        self.camera_to_world(&p_cam)
    }
}

/// Pinhole projection of a camera-frame point: `(fx·x/z + cx, fy·y/z + cy)`.
pub fn project(p: &Vector3<f64>, k: &CameraIntrinsics) -> Result<Vector2<f64>> {
    if p.z <= MIN_DEPTH {
        return Err(Error::BehindCamera { frame: 0, joint: 0, z: p.z });
    }
    Ok(Vector2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

/// Analytic Jacobian of [`project`] w.r.t. the camera-frame point.
pub fn project_jacobian(p: &Vector3<f64>, k: &CameraIntrinsics) -> Result<Matrix2x3<f64>> {
    if p.z <= MIN_DEPTH {
        return Err(Error::BehindCamera { frame: 0, joint: 0, z: p.z });
    }
    let iz = 1.0 / p.z;
    Ok(Matrix2x3::new(
        k.fx * iz,
        0.0,
        -k.fx * p.x * iz * iz,
        0.0,
        k.fy * iz,
        -k.fy * p.y * iz * iz,
    ))
}

/// Builds a world-to-camera transform from a rotation and translation.
pub fn pose_from_parts(rot: Matrix3<f64>, t: Vector3<f64>) -> Result<RigidTransform> {
    let xf = RigidTransform::new(rot, t);
    if xf.rotation_defect() > 1e-6 {
        return Err(Error::invalid("camera pose", "R is not a rotation matrix"));
    }
    Ok(xf)
}
