use std::f64::consts::PI;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use super::{GeomError, Mat3, Vec3};

/// Largest deviation of `|q|` from one accepted by [`geodesic_distance`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Unit quaternion `w + xi + yj + zk` representing a rotation.
///
/// Constructors normalize; the fields stay public so that external data can be
/// inspected and validated, which is what [`geodesic_distance`] does.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a quaternion from raw components and normalizes it.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }.normalized()
    }

    /// Raw components, no normalization.
    pub const fn new_unchecked(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let axis = axis.normalize();
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, axis.x * s, axis.y * s, axis.z * s)
    }

    /// Exponential map of an axis-scaled rotation vector (radians).
    pub fn from_rotation_vector(v: Vec3) -> Self {
        let theta = v.norm();
        if theta < 1e-12 {
            // second-order expansion keeps the map smooth at zero
            return Self::new(1.0 - theta * theta / 8.0, 0.5 * v.x, 0.5 * v.y, 0.5 * v.z);
        }
        let (s, c) = (0.5 * theta).sin_cos();
        let k = s / theta;
        Self::new(c, v.x * k, v.y * k, v.z * k)
    }

    /// Logarithm map; the returned vector has norm in `[0, pi]`.
    pub fn to_rotation_vector(self) -> Vec3 {
        let q = self.canonical();
        let v = Vec3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-15 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    /// Rotation taking unit vector `from` onto unit vector `to` about `from x to`.
    ///
    /// Antiparallel inputs rotate by pi about X (or Y when `from` is along X).
    pub fn from_arc(from: Vec3, to: Vec3) -> Self {
        let from = from.normalize();
        let to = to.normalize();
        let c = from.dot(to);
        let axis = from.cross(to);
        let s = axis.norm();
        if s < 1e-15 {
            if c > 0.0 {
                return Self::IDENTITY;
            }
            let pivot = if from.cross(Vec3::X).norm() > 1e-6 {
                Vec3::X
            } else {
                Vec3::Y
            };
            return Self::from_axis_angle(pivot, PI);
        }
        Self::from_axis_angle(axis, s.atan2(c))
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        assert!(
            n > 0.0 && n.is_finite(),
            "cannot normalize quaternion {self:?}"
        );
        Self {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn conjugate(self) -> Self {
        Self::new_unchecked(self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(self, o: UnitQuat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Hemisphere-canonical representative: `w > 0`, or the first non-zero
    /// component positive when `w == 0`. Negative zeros are cleared so the
    /// serialized form of `q` and `-q` is identical.
    pub fn canonical(self) -> Self {
        let comps = [self.w, self.x, self.y, self.z];
        let flip = comps.iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0);
        let s = if flip { -1.0 } else { 1.0 };
        // adding +0.0 maps -0.0 to +0.0
        Self::new_unchecked(
            s * self.w + 0.0,
            s * self.x + 0.0,
            s * self.y + 0.0,
            s * self.z + 0.0,
        )
    }

    #[inline]
    pub fn rotate(self, v: Vec3) -> Vec3 {
        // v' = v + 2w (u x v) + 2 u x (u x v)
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    pub fn inverse_rotate(self, v: Vec3) -> Vec3 {
        self.conjugate().rotate(v)
    }

    pub fn to_mat3(self) -> Mat3 {
        let UnitQuat { w, x, y, z } = self;
        Mat3::from_rows(
            Vec3::new(
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ),
            Vec3::new(
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ),
            Vec3::new(
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ),
        )
    }

    /// Rotation angle to `other` in `[0, pi]`, assuming both are unit.
    ///
    /// Equal to `2 acos(|<a, b>|)`, evaluated through `atan2` of the relative
    /// rotation for accuracy near zero.
    pub fn angle_to(self, other: UnitQuat) -> f64 {
        let rel = self.conjugate() * other;
        let v = Vec3::new(rel.x, rel.y, rel.z).norm();
        2.0 * v.atan2(rel.w.abs())
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

impl From<[f64; 4]> for UnitQuat {
    fn from(a: [f64; 4]) -> Self {
        UnitQuat::new_unchecked(a[0], a[1], a[2], a[3])
    }
}

impl From<UnitQuat> for [f64; 4] {
    fn from(q: UnitQuat) -> Self {
        q.to_array()
    }
}

impl Mul for UnitQuat {
    type Output = UnitQuat;
    /// Hamilton product; `(a * b).rotate(v) == a.rotate(b.rotate(v))`.
    #[inline]
    fn mul(self, o: UnitQuat) -> UnitQuat {
        UnitQuat::new_unchecked(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Geodesic distance on SO(3) between two unit quaternions, in `[0, pi]`.
///
/// Invariant under the sign of either argument. Inputs whose norm deviates
/// from one by more than [`UNIT_NORM_TOLERANCE`] are rejected.
pub fn geodesic_distance(a: UnitQuat, b: UnitQuat) -> Result<f64, GeomError> {
    for q in [a, b] {
        let n = q.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(GeomError::InvalidArgument(format!(
                "quaternion {:?} is not unit (norm {n})",
                q.to_array()
            )));
        }
    }
    Ok(a.angle_to(b).min(PI))
}
