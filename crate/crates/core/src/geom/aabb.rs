use serde::{Deserialize, Serialize};

use super::{ConvexHull, Pose, Vec3};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z);
        Self { min, max }
    }

    /// Tight box around `points`; `None` when empty.
    pub fn from_points<I: IntoIterator<Item = Vec3>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p)));
        Some(Self { min, max })
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        Aabb {
            min: self.min - Vec3::splat(margin),
            max: self.max + Vec3::splat(margin),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x
            && o.min.x <= self.max.x
            && self.min.y <= o.max.y
            && o.min.y <= self.max.y
            && self.min.z <= o.max.z
            && o.min.z <= self.max.z
    }

    pub fn contains_point(&self, p: Vec3, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.y >= self.min.y - tol
            && p.z >= self.min.z - tol
            && p.x <= self.max.x + tol
            && p.y <= self.max.y + tol
            && p.z <= self.max.z + tol
    }

    pub fn intersection(&self, o: &Aabb) -> Option<Aabb> {
        let min = self.min.max(o.min);
        let max = self.max.min(o.max);
        (min.x <= max.x && min.y <= max.y && min.z <= max.z).then_some(Aabb { min, max })
    }

    /// Volumetric intersection-over-union in `[0, 1]`.
    pub fn iou(&self, o: &Aabb) -> f64 {
        let inter = self.intersection(o).map_or(0.0, |b| b.volume());
        let union = self.volume() + o.volume() - inter;
        if union <= 0.0 {
            // two degenerate boxes: identical ones count as a perfect match
            return if self == o { 1.0 } else { 0.0 };
        }
        inter / union
    }
}

/// Tight world-space bounds of `hull` placed at `pose`.
pub fn aabb_of(hull: &ConvexHull, pose: &Pose) -> Aabb {
    Aabb::from_points(hull.vertices().iter().map(|v| pose.transform_point(*v)))
        .expect("hull has vertices")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_of_offset_unit_cubes() {
        let a = Aabb::new(Vec3::splat(-0.5), Vec3::splat(0.5));
        let b = Aabb::new(Vec3::new(0.0, -0.5, -0.5), Vec3::new(1.0, 0.5, 0.5));
        assert_eq!(a.iou(&b), 0.5 / 1.5);
        assert_eq!(a.iou(&a), 1.0);
        let c = Aabb::new(Vec3::new(0.5, -0.5, -0.5), Vec3::new(1.5, 0.5, 0.5));
        assert_eq!(a.iou(&c), 0.0);
    }
}
