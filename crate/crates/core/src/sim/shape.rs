//! Per-object physical properties, computed once per scene.

use crate::geom::{ConvexHull, Mat3, Vec3};
use crate::scene::SceneObject;

const PLANE_MERGE_TOLERANCE: f64 = 1e-9;

/// A planar face of a hull: outward normal and vertex indices ordered
/// counter-clockwise seen from outside.
#[derive(Debug, Clone)]
pub(crate) struct Polygon {
    pub normal: Vec3,
    pub verts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct HullShape {
    pub polygons: Vec<Polygon>,
}

#[derive(Debug, Clone)]
pub(crate) struct BodyShape {
    pub mass: f64,
    /// Center of mass in the body frame.
    pub com: Vec3,
    /// Inverse inertia about the center of mass, body frame.
    pub inv_inertia: Mat3,
    pub hulls: Vec<HullShape>,
}

impl BodyShape {
    pub fn new(obj: &SceneObject) -> Self {
        let volume = obj.total_volume();
        let density = obj.mass / volume;
        let com = obj
            .hulls
            .iter()
            .fold(Vec3::ZERO, |acc, h| acc + h.centroid() * h.volume())
            / volume;
        let mut inertia = Mat3::ZERO;
        for h in &obj.hulls {
            let m = density * h.volume();
            let d = h.centroid() - com;
            let shift = Mat3::IDENTITY.scale(d.dot(d)) + Mat3::outer(d, d).scale(-1.0);
            inertia = inertia + h.unit_inertia().scale(density) + shift.scale(m);
        }
        let inv_inertia = inertia.inverse().unwrap_or(Mat3::ZERO);
        Self {
            mass: obj.mass,
            com,
            inv_inertia,
            hulls: obj.hulls.iter().map(polygons_of).collect(),
        }
    }
}

/// Merges coplanar triangles into polygons.
fn polygons_of(hull: &ConvexHull) -> HullShape {
    let mut polys: Vec<(Vec3, f64, Vec<usize>)> = Vec::new();
    for (f, plane) in hull.faces().iter().zip(hull.planes()) {
        let slot = polys.iter_mut().find(|(n, o, _)| {
            (*n - plane.normal).norm() < PLANE_MERGE_TOLERANCE
                && (o - plane.offset).abs() < PLANE_MERGE_TOLERANCE
        });
        match slot {
            Some((_, _, verts)) => {
                for &v in f {
                    if !verts.contains(&v) {
                        verts.push(v);
                    }
                }
            }
            None => polys.push((plane.normal, plane.offset, f.to_vec())),
        }
    }
    let polygons = polys
        .into_iter()
        .map(|(normal, _, mut verts)| {
            let pts = hull.vertices();
            let center = verts.iter().fold(Vec3::ZERO, |a, &i| a + pts[i]) / verts.len() as f64;
            let (u, w) = normal.orthonormal_basis();
            let angle = |i: usize| {
                let d = pts[i] - center;
                d.dot(w).atan2(d.dot(u))
            };
            verts.sort_by(|&a, &b| angle(a).total_cmp(&angle(b)));
            // make the ordering counter-clockwise about the outward normal
            if verts.len() >= 3 {
                let e = (pts[verts[1]] - pts[verts[0]]).cross(pts[verts[2]] - pts[verts[1]]);
                if e.dot(normal) < 0.0 {
                    verts.reverse();
                }
            }
            Polygon { normal, verts }
        })
        .collect();
    HullShape { polygons }
}
