//! 3D math and convex collision queries.

mod aabb;
pub mod epa;
pub mod gjk;
mod hull;
mod mat3;
mod pose;
mod quat;
mod vec3;

use thiserror::Error;

pub use aabb::{aabb_of, Aabb};
pub use epa::Penetration;
pub use gjk::{PosedHull, SupportMap, WorldPoints};
pub use hull::{convex_hull, ConvexHull, Plane, COPLANAR_TOLERANCE};
pub use mat3::Mat3;
pub use pose::Pose;
pub use quat::{geodesic_distance, UnitQuat, UNIT_NORM_TOLERANCE};
pub use vec3::Vec3;

/// Penetration depth at or below which overlapping hulls are in resting
/// contact rather than intersecting (m).
pub const CONTACT_EPSILON: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Separation distance between two posed hulls; `0.0` when they touch or overlap.
pub fn gjk_distance(a: &ConvexHull, pose_a: &Pose, b: &ConvexHull, pose_b: &Pose) -> f64 {
    gjk::gjk(&PosedHull::new(a, pose_a), &PosedHull::new(b, pose_b)).distance
}

/// Penetration depth and direction of two overlapping posed hulls.
///
/// Translating `b` by `depth * normal` separates the pair. Exact ties (for
/// example coincident cubes) resolve to the axis with the lowest index.
/// Touching hulls report a depth of zero.
pub fn epa_penetration(
    a: &ConvexHull,
    pose_a: &Pose,
    b: &ConvexHull,
    pose_b: &Pose,
) -> Result<Penetration, GeomError> {
    let sa = PosedHull::new(a, pose_a);
    let sb = PosedHull::new(b, pose_b);
    let g = gjk::gjk(&sa, &sb);
    if !g.overlapping() {
        return Err(GeomError::Precondition(format!(
            "hulls are disjoint (distance {:.3e} m)",
            g.distance
        )));
    }
    epa::epa(&sa, &sb, &g.simplex).ok_or_else(|| {
        GeomError::DegenerateGeometry("EPA could not build an initial polytope".into())
    })
}

/// True when the hulls overlap by more than [`CONTACT_EPSILON`].
pub fn hulls_intersect(a: &ConvexHull, pose_a: &Pose, b: &ConvexHull, pose_b: &Pose) -> bool {
    if !aabb_of(a, pose_a).overlaps(&aabb_of(b, pose_b)) {
        return false;
    }
    let sa = PosedHull::new(a, pose_a);
    let sb = PosedHull::new(b, pose_b);
    let g = gjk::gjk(&sa, &sb);
    if !g.overlapping() {
        return false;
    }
    epa::epa(&sa, &sb, &g.simplex).is_some_and(|p| p.depth > CONTACT_EPSILON)
}
