//! Minimal 3D math: vectors, unit quaternions, rigid transforms.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// 3-vector in meters (or any consistent unit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn normalized(self) -> Self {
        self / self.norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn lerp(self, other: Self, t: T) -> Self {
        self + (other - self) * t
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    fn div(self, rhs: T) -> Self {
        Self::new(self.x / rhs, self.y / rhs, self.z / rhs)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion (w, x, y, z), normalized on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> UnitQuaternion<T> {
    pub fn identity() -> Self {
        Self {
            w: T::one(),
            x: T::zero(),
            y: T::zero(),
            z: T::zero(),
        }
    }

    /// Normalizing constructor; panics on a zero quaternion.
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        assert!(n > T::zero(), "zero quaternion");
        Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let half = angle / T::from_f64_lit(2.0);
        let s = half.sin();
        let a = axis.normalized();
        Self::new(half.cos(), a.x * s, a.y * s, a.z * s)
    }

    /// Rotation about +z.
    pub fn from_yaw(angle: T) -> Self {
        Self::from_axis_angle(Vec3::new(T::zero(), T::zero(), T::one()), angle)
    }

    pub fn norm(self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conjugate(self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Hamilton product `self * rhs` (apply `rhs` first, then `self`).
    pub fn compose(self, rhs: Self) -> Self {
        let (aw, ax, ay, az) = (self.w, self.x, self.y, self.z);
        let (bw, bx, by, bz) = (rhs.w, rhs.x, rhs.y, rhs.z);
        Self::new(
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        )
    }

    /// Rotate a vector: `q v q*`.
    pub fn rotate(self, v: Vec3<T>) -> Vec3<T> {
        let u = Vec3::new(self.x, self.y, self.z);
        let two = T::from_f64_lit(2.0);
        let t = u.cross(v) * two;
        v + t * self.w + u.cross(t)
    }

    pub fn dot(self, other: Self) -> T {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Shortest-arc spherical interpolation, `t ∈ [0,1]`.
    ///
    /// Falls back to normalized lerp when the arc is tiny.
    pub fn slerp(self, other: Self, t: T) -> Self {
        let mut cos_theta = self.dot(other);
        let mut end = other;
        if cos_theta < T::zero() {
            cos_theta = -cos_theta;
            end = Self {
                w: -other.w,
                x: -other.x,
                y: -other.y,
                z: -other.z,
            };
        }
        let one = T::one();
        if cos_theta > one - T::from_f64_lit(1e-10) {
            return Self::new(
                self.w + (end.w - self.w) * t,
                self.x + (end.x - self.x) * t,
                self.y + (end.y - self.y) * t,
                self.z + (end.z - self.z) * t,
            );
        }
        let theta = cos_theta.acos();
        let sin_theta = theta.sin();
        let a = ((one - t) * theta).sin() / sin_theta;
        let b = (t * theta).sin() / sin_theta;
        Self::new(
            self.w * a + end.w * b,
            self.x * a + end.x * b,
            self.y * a + end.y * b,
            self.z * a + end.z * b,
        )
    }

    /// Rotation angle to another quaternion, radians in `[0, pi]`.
    ///
    /// atan2 form: accurate for tiny angles where acos of the dot product
    /// loses all precision.
    pub fn angle_to(self, other: Self) -> T {
        let delta = self.conjugate().compose(other);
        let vec_norm = (delta.x * delta.x + delta.y * delta.y + delta.z * delta.z).sqrt();
        vec_norm.atan2(delta.w.abs()) * T::from_f64_lit(2.0)
    }

    pub fn to_wxyz(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_wxyz(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// Rigid transform: rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform<T> {
    pub rotation: UnitQuaternion<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> RigidTransform<T> {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zero(),
        }
    }

    pub fn new(rotation: UnitQuaternion<T>, translation: Vec3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3<T>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn apply(self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(p) + self.translation
    }

    /// `self ∘ rhs`: apply `rhs` first.
    pub fn compose(self, rhs: Self) -> Self {
        Self {
            rotation: self.rotation.compose(rhs.rotation),
            translation: self.rotation.rotate(rhs.translation) + self.translation,
        }
    }

    pub fn inverse(self) -> Self {
        let inv_rot = self.rotation.conjugate();
        Self {
            rotation: inv_rot,
            translation: -(inv_rot.rotate(self.translation)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_quat() -> impl Strategy<Value = UnitQuaternion<f64>> {
        (
            -1.0f64..1.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
        )
            .prop_filter("non-degenerate", |(w, x, y, z)| {
                (w * w + x * x + y * y + z * z).sqrt() > 1e-3
            })
            .prop_map(|(w, x, y, z)| UnitQuaternion::new(w, x, y, z))
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform<f64>> {
        (arb_quat(), -50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0)
            .prop_map(|(q, x, y, z)| RigidTransform::new(q, Vec3::new(x, y, z)))
    }

    #[test]
    fn rotate_quarter_turn() {
        let q = UnitQuaternion::from_yaw(std::f64::consts::FRAC_PI_2);
        let v = q.rotate(Vec3::new(1.0, 0.0, 0.0));
        assert!((v.x - 0.0).abs() < 1e-12);
        assert!((v.y - 1.0).abs() < 1e-12);
        assert!((v.z - 0.0).abs() < 1e-12);
    }

    #[test]
    fn slerp_midpoint_of_quarter_turn_is_eighth_turn() {
        let a = UnitQuaternion::identity();
        let b = UnitQuaternion::from_yaw(std::f64::consts::FRAC_PI_2);
        let mid = a.slerp(b, 0.5);
        // Independent check: half-angle construction of the 45 degree yaw.
        let expected_half = std::f64::consts::FRAC_PI_8;
        assert!((mid.w - expected_half.cos()).abs() < 1e-12);
        assert!((mid.z - expected_half.sin()).abs() < 1e-12);
    }

    #[test]
    fn slerp_takes_shortest_arc() {
        let a = UnitQuaternion::from_yaw(0.1);
        // Same rotation, opposite sign representation.
        let b_raw = UnitQuaternion::from_yaw(0.3);
        let b = UnitQuaternion {
            w: -b_raw.w,
            x: -b_raw.x,
            y: -b_raw.y,
            z: -b_raw.z,
        };
        let mid = a.slerp(b, 0.5);
        let expected = UnitQuaternion::from_yaw(0.2);
        assert!(mid.angle_to(expected) < 1e-9);
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(t in arb_transform()) {
            let id = t.compose(t.inverse());
            prop_assert!(id.translation.norm() < 1e-9);
            prop_assert!(id.rotation.angle_to(UnitQuaternion::identity()) < 1e-9);
        }

        #[test]
        fn quaternion_stays_unit(q in arb_quat(), r in arb_quat()) {
            prop_assert!((q.compose(r).norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn rotation_preserves_norm(q in arb_quat(), x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
            let v = Vec3::new(x, y, z);
            prop_assert!((q.rotate(v).norm() - v.norm()).abs() < 1e-9);
        }

        #[test]
        fn compose_is_associative(a in arb_transform(), b in arb_transform(), c in arb_transform()) {
            let left = a.compose(b).compose(c);
            let right = a.compose(b.compose(c));
            prop_assert!((left.translation - right.translation).norm() < 1e-8);
            prop_assert!(left.rotation.angle_to(right.rotation) < 1e-8);
        }
    }
}
