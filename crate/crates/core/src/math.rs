//! Rotation helpers: axis-angle (Rodrigues) exponential map, its analytic
//! derivative, and the matrix logarithm.

use nalgebra::{Matrix3, Vector3};

/// Threshold below which Taylor expansions replace the closed-form Rodrigues
/// terms (sin θ / θ and (1 − cos θ)/θ² lose precision near zero).
const SMALL_ANGLE: f64 = 1e-4;

/// Skew-symmetric cross-product matrix: `skew(v) * w == v × w`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues exponential map: axis-angle vector to rotation matrix.
///
/// Near θ = 0 the sinc-like coefficients are evaluated with second-order
/// Taylor expansions so the map stays smooth through the origin.
pub fn rodrigues(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = v.norm_squared();
    let k = skew(v);
    let k2 = k * k;
    if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        // sin θ/θ ≈ 1 − θ²/6, (1 − cos θ)/θ² ≈ 1/2 − θ²/24
        let a = 1.0 - theta2 / 6.0;
        let b = 0.5 - theta2 / 24.0;
        Matrix3::identity() + k * a + k2 * b
    } else {
        let theta = theta2.sqrt();
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / theta2;
        Matrix3::identity() + k * a + k2 * b
    }
}

/// Partial derivatives of the Rodrigues map: `∂R/∂v_k` for k = x, y, z.
///
/// Uses the closed form of Gallego & Yezzi away from the origin,
///   ∂R/∂v_k = (v_k [v]× + [v × (I − R) e_k]×) / ‖v‖² · R,
/// and the first-order expansion ∂R/∂v_k ≈ [e_k]× + ([e_k]×[v]× + [v]×[e_k]×)/2
/// near it.
pub fn rodrigues_jacobian(v: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let theta2 = v.norm_squared();
    let mut out = [Matrix3::zeros(); 3];
    if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        let kv = skew(v);
        for (k, d) in out.iter_mut().enumerate() {
            let e = Vector3::ith(k, 1.0);
            let ke = skew(&e);
            *d = ke + (ke * kv + kv * ke) * 0.5;
        }
    } else {
        let r = rodrigues(v);
        let kv = skew(v);
        let i_minus_r = Matrix3::identity() - r;
        for (k, d) in out.iter_mut().enumerate() {
            let e = Vector3::ith(k, 1.0);
            let w = v.cross(&(i_minus_r * e));
            *d = (kv * v[k] + skew(&w)) * (1.0 / theta2) * r;
        }
    }
    out
}

/// Matrix logarithm of a rotation: inverse of [`rodrigues`].
///
/// Returns an axis-angle vector with magnitude in [0, π].
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let trace = r.trace();
    let cos_theta = ((trace - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let axial = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    if theta < SMALL_ANGLE {
        // log R ≈ axial/2 · (1 + θ²/6)
        return axial * 0.5 * (1.0 + theta * theta / 6.0);
    }
    if (std::f64::consts::PI - theta) < 1e-6 {
        // Near π the axial part vanishes; recover the axis from the diagonal.
        let b = (r + Matrix3::identity()) * 0.5;
        let mut axis = Vector3::new(b[(0, 0)].sqrt(), b[(1, 1)].sqrt(), b[(2, 2)].sqrt());
        // Fix signs using the largest component as reference.
        let imax = (0..3).max_by(|&a, &c| axis[a].total_cmp(&axis[c])).unwrap();
        for k in 0..3 {
            if k != imax {
                let off = (b[(imax, k)] + b[(k, imax)]) * 0.5;
                axis[k] = axis[k].copysign(off / axis[imax].max(1e-12));
            }
        }
        return axis.normalize() * theta;
    }
    axial * (theta / (2.0 * theta.sin()))
}

/// A rigid transform (rotation + translation) composed along kinematic chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rot: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rot: Matrix3::identity(),
            t: Vector3::zeros(),
        }
    }

    pub fn new(rot: Matrix3<f64>, t: Vector3<f64>) -> Self {
        RigidTransform { rot, t }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rot: self.rot * other.rot,
            t: self.rot * other.t + self.t,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rot * p + self.t
    }

    pub fn inverse(&self) -> RigidTransform {
        let rot_inv = self.rot.transpose();
        RigidTransform {
            rot: rot_inv,
            t: -(rot_inv * self.t),
        }
    }

    /// Max deviation of `rot` from a proper rotation (orthonormality and
    /// determinant). Zero for an exact element of SO(3).
    pub fn rotation_defect(&self) -> f64 {
        let ortho = (self.rot * self.rot.transpose() - Matrix3::identity()).abs().max();
        let det = (self.rot.determinant() - 1.0).abs();
        ortho.max(det)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn finite_diff_jacobian(v: &Vector3<f64>, k: usize, h: f64) -> Matrix3<f64> {
        let mut vp = *v;
        let mut vm = *v;
        vp[k] += h;
        vm[k] -= h;
        (rodrigues(&vp) - rodrigues(&vm)) * (0.5 / h)
    }

    #[test]
    fn zero_angle_is_identity() {
        assert_abs_diff_eq!(
            rodrigues(&Vector3::zeros()),
            Matrix3::identity(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = rodrigues(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let p = r * Vector3::new(1.0, 0.0, 0.0);
        assert_abs_diff_eq!(p, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn exp_is_orthonormal() {
        let v = Vector3::new(0.3, -1.2, 0.7);
        let r = rodrigues(&v);
        assert!((r * r.transpose() - Matrix3::identity()).abs().max() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for v in [
            Vector3::new(0.4, -0.2, 0.9),
            Vector3::new(1.9, 0.3, -0.5),
            Vector3::new(1e-5, -2e-5, 5e-6),
            Vector3::new(0.0, 0.0, 0.0),
        ] {
            let jac = rodrigues_jacobian(&v);
            for k in 0..3 {
                let fd = finite_diff_jacobian(&v, k, 1e-6);
                assert!(
                    (jac[k] - fd).abs().max() < 1e-7,
                    "v={v:?} k={k} delta={}",
                    (jac[k] - fd).abs().max()
                );
            }
        }
    }

    #[test]
    fn log_inverts_exp() {
        for v in [
            Vector3::new(0.4, -0.2, 0.9),
            Vector3::new(2.0, 1.0, -1.5),
            Vector3::new(1e-6, 2e-6, -1e-6),
            Vector3::new(PI - 1e-4, 0.0, 0.0),
        ] {
            let back = rotation_log(&rodrigues(&v));
            assert_abs_diff_eq!(back, v, epsilon = 1e-6);
        }
    }

    #[test]
    fn compose_matches_homogeneous_product() {
        let a = RigidTransform::new(rodrigues(&Vector3::new(0.1, 0.2, 0.3)), Vector3::new(1.0, 2.0, 3.0));
        let b = RigidTransform::new(rodrigues(&Vector3::new(-0.4, 0.0, 0.9)), Vector3::new(0.5, -1.0, 0.25));
        let c = a.compose(&b);
        let p = Vector3::new(0.3, -0.7, 1.1);
        assert_abs_diff_eq!(c.apply(&p), a.apply(&b.apply(&p)), epsilon = 1e-12);
        let inv = c.inverse();
        assert_abs_diff_eq!(inv.apply(&c.apply(&p)), p, epsilon = 1e-12);
    }
}
