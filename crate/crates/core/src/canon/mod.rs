//! Scene canonicalization: gravity alignment followed by vertical snapping of
//! every supported child onto its parent.

use serde::Serialize;
use thiserror::Error;

use crate::geom::{UnitQuat, Vec3};
use crate::scene::{Layout, Scene, SceneObject, Stage, SupportKind};

/// Clearances inside `[0, SNAP_GAP]` count as resting contact.
pub const SNAP_GAP: f64 = 1e-4;
/// Clearance left after moving a child.
pub const SNAP_TARGET: f64 = 1e-6;
/// Anchors within this angle of the consensus count towards confidence.
pub const CONFIDENCE_ANGLE_DEG: f64 = 15.0;
/// Estimated up directions closer than this to +Y leave the layout untouched.
const UPRIGHT_TOLERANCE: f64 = 1e-9;
const ANTIPARALLEL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CanonError {
    #[error("no ground-supported objects to estimate the up direction from")]
    NoAnchor,
    #[error("anchor up directions cancel out; up direction is undefined")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpEstimate {
    pub direction: Vec3,
    /// Fraction of anchors within 15° of `direction`.
    pub confidence: f64,
}

/// Volume-weighted mean of the body +Y axes of ground-supported objects.
pub fn estimate_up(scene: &Scene, raw: &Layout) -> Result<UpEstimate, CanonError> {
    let anchors: Vec<(Vec3, f64)> = scene
        .objects
        .iter()
        .filter(|o| {
            matches!(
                scene.tree.parent(&o.id).kind,
                SupportKind::Ground | SupportKind::GroundWall
            )
        })
        .map(|o| (raw.pose(&o.id).rotation.rotate(Vec3::Y), o.total_volume()))
        .collect();
    if anchors.is_empty() {
        return Err(CanonError::NoAnchor);
    }
    let sum = anchors
        .iter()
        .fold(Vec3::ZERO, |acc, (up, w)| acc + *up * *w);
    let direction = sum.try_normalize().ok_or(CanonError::Degenerate)?;
    let cos_limit = CONFIDENCE_ANGLE_DEG.to_radians().cos();
    let agreeing = anchors
        .iter()
        .filter(|(up, _)| up.dot(direction) >= cos_limit)
        .count();
    Ok(UpEstimate {
        direction,
        confidence: agreeing as f64 / anchors.len() as f64,
    })
}

/// Rotation taking the estimated up direction onto +Y.
pub fn alignment_rotation(up: &UpEstimate) -> UnitQuat {
    let d = up.direction.normalize();
    if (d + Vec3::Y).norm() < ANTIPARALLEL_TOLERANCE {
        UnitQuat::from_axis_angle(Vec3::X, std::f64::consts::PI)
    } else {
        UnitQuat::from_arc(d, Vec3::Y)
    }
}

/// Applies the alignment rotation to the whole scene about the world origin.
pub fn reorient_scene(raw: &Layout, up: &UpEstimate) -> Layout {
    let mut out = raw.clone().with_stage(Stage::Canonical);
    let d = up.direction.normalize();
    if d.y > 0.0 && d.cross(Vec3::Y).norm() < UPRIGHT_TOLERANCE {
        return out;
    }
    let q = alignment_rotation(up);
    for pose in out.poses.values_mut() {
        pose.rotation = (q * pose.rotation).normalized();
        pose.translation = q.rotate(pose.translation);
    }
    out
}

/// Lowest world Y over all hull vertices.
pub fn lowest_y(obj: &SceneObject, pose: &crate::geom::Pose) -> f64 {
    obj.world_vertices(pose)
        .map(|v| v.y)
        .fold(f64::INFINITY, f64::min)
}

/// Height of the parent's upper surface under the child: the highest point of
/// the parent's hulls inside the overlap of both XZ footprints, or the
/// parent's top when the footprints do not overlap.
pub fn support_height(
    parent: &SceneObject,
    parent_pose: &crate::geom::Pose,
    child: &SceneObject,
    child_pose: &crate::geom::Pose,
) -> f64 {
    let pa = parent.aabb(parent_pose);
    let ca = child.aabb(child_pose);
    let x0 = pa.min.x.max(ca.min.x);
    let x1 = pa.max.x.min(ca.max.x);
    let z0 = pa.min.z.max(ca.min.z);
    let z1 = pa.max.z.min(ca.max.z);
    if x0 > x1 || z0 > z1 {
        return pa.max.y;
    }
    let mut best = f64::NEG_INFINITY;
    for hull in &parent.hulls {
        let world: Vec<Vec3> = hull
            .vertices()
            .iter()
            .map(|v| parent_pose.transform_point(*v))
            .collect();
        for f in hull.faces() {
            let poly = clip_to_rect(vec![world[f[0]], world[f[1]], world[f[2]]], x0, x1, z0, z1);
            for p in poly {
                best = best.max(p.y);
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        pa.max.y
    }
}

/// Sutherland-Hodgman clip of a planar polygon to an XZ rectangle.
fn clip_to_rect(mut poly: Vec<Vec3>, x0: f64, x1: f64, z0: f64, z1: f64) -> Vec<Vec3> {
    // each half-space as (axis, bound, keep-if-greater)
    let planes = [(0, x0, true), (0, x1, false), (2, z0, true), (2, z1, false)];
    for (axis, bound, greater) in planes {
        if poly.is_empty() {
            break;
        }
        let inside = |p: &Vec3| {
            if greater {
                p[axis] >= bound
            } else {
                p[axis] <= bound
            }
        };
        let mut out = Vec::with_capacity(poly.len() + 2);
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            let (ia, ib) = (inside(&a), inside(&b));
            if ia {
                out.push(a);
            }
            if ia != ib {
                let t = (bound - a[axis]) / (b[axis] - a[axis]);
                let mut p = a.lerp(b, t);
                // pin the clipped coordinate exactly to the boundary
                match axis {
                    0 => p.x = bound,
                    _ => p.z = bound,
                }
                out.push(p);
            }
        }
        poly = out;
    }
    poly
}

/// Vertical snapping in pre-order: ground children rest on Y = 0, object
/// children on their parent's support height. Children already within
/// `[0, SNAP_GAP]` and wall/ceiling-mounted objects are left untouched.
pub fn snap_supports(scene: &Scene, layout: &Layout) -> Layout {
    let mut out = layout.clone().with_stage(Stage::Canonical);
    for id in scene.tree.preorder() {
        let node = scene.tree.parent(id);
        if !node.relation.is_supported() {
            continue;
        }
        let obj = scene.object(id);
        let pose = *out.pose(id);
        let base = match &node.kind {
            SupportKind::Ground | SupportKind::GroundWall => 0.0,
            SupportKind::Wall | SupportKind::Ceiling => continue,
            SupportKind::Object(p) => support_height(scene.object(p), out.pose(p), obj, &pose),
        };
        let gap = lowest_y(obj, &pose) - base;
        if (0.0..=SNAP_GAP).contains(&gap) {
            continue;
        }
        let mut moved = pose;
        moved.translation.y += SNAP_TARGET - gap;
        out.set(id, moved);
    }
    out
}

/// Full canonicalization: estimate up, reorient, snap.
pub fn canonicalize(scene: &Scene, raw: &Layout) -> Result<(Layout, UpEstimate), CanonError> {
    let up = estimate_up(scene, raw)?;
    let reoriented = reorient_scene(raw, &up);
    Ok((snap_supports(scene, &reoriented), up))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose;
    use crate::scene::{parse_scene, LoadedScene};
    use std::path::Path;

    fn table_plant(plant_y: f64) -> LoadedScene {
        let text = format!(
            r#"{{
            "objects": [
                {{"id": "table", "box": [1.2, 0.75, 0.8]}},
                {{"id": "plant", "box": [0.2, 0.4, 0.2]}}
            ],
            "tree": {{"table": {{"parent": "ground"}}, "plant": {{"parent": "table"}}}},
            "layout": {{
                "table": {{"quat": [1,0,0,0], "pos": [0, 0.875, 0]}},
                "plant": {{"quat": [1,0,0,0], "pos": [0.3, {plant_y}, 0.1]}}
            }}
        }}"#
        );
        parse_scene(&text, Path::new(".")).unwrap()
    }

    #[test]
    fn upright_scene_estimates_plus_y() {
        let s = table_plant(1.2);
        let up = estimate_up(&s.scene, &s.raw_layout).unwrap();
        assert_eq!(up.direction, Vec3::Y);
        assert_eq!(up.confidence, 1.0);
        assert_eq!(reorient_scene(&s.raw_layout, &up).poses, s.raw_layout.poses);
    }

    #[test]
    fn floating_table_and_sunk_plant_are_snapped() {
        let s = table_plant(0.75 + 0.2 - 0.1);
        let (c, _) = canonicalize(&s.scene, &s.raw_layout).unwrap();
        let table = c.pose("table").translation;
        assert!((table.y - (0.375 + SNAP_TARGET)).abs() < 1e-12);
        let plant = c.pose("plant").translation;
        let top = table.y + 0.375;
        assert!((plant.y - 0.2 - top - SNAP_TARGET).abs() < 1e-12);
        assert_eq!((plant.x, plant.z), (0.3, 0.1));
    }

    #[test]
    fn antiparallel_up_flips_about_x() {
        let up = UpEstimate {
            direction: -Vec3::Y,
            confidence: 1.0,
        };
        let q = alignment_rotation(&up);
        assert!((q.rotate(-Vec3::Y) - Vec3::Y).norm() < 1e-12);
        assert!((q.rotate(Vec3::X) - Vec3::X).norm() < 1e-12);
    }

    #[test]
    fn support_height_uses_footprint() {
        // a wedge whose top slopes from y=1 at x=-1 down to y=0.5 at x=1
        let wedge = crate::geom::convex_hull(&[
            Vec3::new(-1.0, 0.0, -1.0),
            Vec3::new(1.0, 0.0, -1.0),
            Vec3::new(-1.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, 1.0, 1.0),
            Vec3::new(1.0, 0.5, -1.0),
            Vec3::new(1.0, 0.5, 1.0),
        ])
        .unwrap();
        let parent = SceneObject {
            id: "p".into(),
            name: "p".into(),
            hulls: vec![wedge],
            scale: 1.0,
            mass: 1.0,
            movable: true,
        };
        let child = SceneObject {
            id: "c".into(),
            hulls: vec![crate::geom::ConvexHull::cuboid(Vec3::splat(0.2)).unwrap()],
            name: "c".into(),
            scale: 1.0,
            mass: 1.0,
            movable: true,
        };
        let h = support_height(
            &parent,
            &Pose::IDENTITY,
            &child,
            &Pose::from_translation(Vec3::new(0.9, 2.0, 0.0)),
        );
        // footprint x in [0.8, 1.0] -> highest surface at x = 0.8
        assert!((h - 0.55).abs() < 1e-12, "{h}");
        let far = support_height(
            &parent,
            &Pose::IDENTITY,
            &child,
            &Pose::from_translation(Vec3::new(5.0, 2.0, 0.0)),
        );
        assert_eq!(far, 1.0);
    }
}
