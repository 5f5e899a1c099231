use serde::{Deserialize, Serialize};

use super::{UnitQuat, Vec3};

/// Rigid 6-DoF transform: `p_world = rotation * p_body + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: UnitQuat,
    pub translation: Vec3,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        rotation: UnitQuat::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: UnitQuat, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(UnitQuat::IDENTITY, t)
    }

    #[inline]
    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    #[inline]
    pub fn transform_vector(&self, v: Vec3) -> Vec3 {
        self.rotation.rotate(v)
    }

    pub fn inverse_transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation.inverse_rotate(p - self.translation)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            (self.rotation * other.rotation).normalized(),
            self.transform_point(other.translation),
        )
    }

    pub fn inverse(&self) -> Pose {
        let r = self.rotation.conjugate();
        Pose::new(r, -r.rotate(self.translation))
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.is_finite() && self.translation.is_finite()
    }

    /// Same transform with a hemisphere-canonical rotation.
    pub fn canonical(&self) -> Pose {
        Pose::new(self.rotation.canonical(), self.translation + Vec3::ZERO)
    }
}
