//! Expanding polytope algorithm: penetration depth and direction of two
//! overlapping convex shapes.

use super::gjk::{minkowski_support, SupportMap, SupportPoint};
use super::Vec3;

const MAX_ITERATIONS: usize = 128;
const CONVERGENCE: f64 = 1e-10;
/// Faces whose distances differ by less than this are tied.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penetration {
    /// Penetration depth (m), `>= 0`.
    pub depth: f64,
    /// Unit direction from A towards B: translating B by `depth * normal`
    /// brings the shapes into touching contact.
    pub normal: Vec3,
    /// Deepest point of A inside B.
    pub point_a: Vec3,
    /// Deepest point of B inside A.
    pub point_b: Vec3,
}

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    normal: Vec3,
    dist: f64,
    alive: bool,
}

fn make_face(verts: &[SupportPoint], v: [usize; 3]) -> Face {
    let [a, b, c] = v.map(|i| verts[i].w);
    match (b - a).cross(c - a).try_normalize() {
        Some(n) => Face {
            v,
            normal: n,
            dist: n.dot(a),
            alive: true,
        },
        None => Face {
            v,
            normal: Vec3::ZERO,
            dist: f64::INFINITY,
            alive: true,
        },
    }
}

/// Deterministic preference among tied faces: the normal whose dominant axis
/// has the lowest index wins, positive direction before negative.
fn tie_key(n: Vec3) -> (usize, bool) {
    let a = n.abs();
    let axis = if a.x >= a.y - TIE_TOLERANCE && a.x >= a.z - TIE_TOLERANCE {
        0
    } else if a.y >= a.z - TIE_TOLERANCE {
        1
    } else {
        2
    };
    (axis, n[axis] < 0.0)
}

fn pick_face(faces: &[Face]) -> Option<usize> {
    let min = faces
        .iter()
        .filter(|f| f.alive)
        .map(|f| f.dist)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    faces
        .iter()
        .enumerate()
        .filter(|(_, f)| f.alive && f.dist <= min + TIE_TOLERANCE)
        .min_by_key(|(i, f)| (tie_key(f.normal), *i))
        .map(|(i, _)| i)
}

/// Builds a starting polytope around the origin from a GJK simplex.
fn initial_polytope<A: SupportMap + ?Sized, B: SupportMap + ?Sized>(
    a: &A,
    b: &B,
    simplex: &[SupportPoint],
) -> Option<(Vec<SupportPoint>, Vec<Face>)> {
    if simplex.len() == 4 {
        let verts = simplex.to_vec();
        let p = verts.iter().map(|s| s.w).collect::<Vec<_>>();
        let vol = (p[1] - p[0]).dot((p[2] - p[0]).cross(p[3] - p[0]));
        let scale = p.iter().map(|q| q.norm()).fold(0.0, f64::max).max(1e-12);
        if vol.abs() > 1e-12 * scale * scale * scale {
            let faces = if vol > 0.0 {
                [[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]]
            } else {
                [[0, 1, 2], [0, 3, 1], [1, 3, 2], [2, 3, 0]]
            };
            return Some((
                verts,
                faces.iter().map(|f| make_face(simplex, *f)).collect(),
            ));
        }
    }
    // lower-dimensional simplex (touching / shallow contact): seed with axis
    // supports and take their hull, which still encloses the origin
    let mut verts: Vec<SupportPoint> = simplex.to_vec();
    for d in [Vec3::X, -Vec3::X, Vec3::Y, -Vec3::Y, Vec3::Z, -Vec3::Z] {
        let s = minkowski_support(a, b, d);
        if !verts.iter().any(|v| (v.w - s.w).norm_squared() < 1e-24) {
            verts.push(s);
        }
    }
    let pts: Vec<Vec3> = verts.iter().map(|s| s.w).collect();
    let hull = super::convex_hull(&pts).ok()?;
    // map hull vertices back to support points
    let index_of = |p: Vec3| {
        pts.iter()
            .position(|q| *q == p)
            .expect("hull vertex from input")
    };
    let faces = hull
        .faces()
        .iter()
        .map(|f| make_face(&verts, f.map(|i| index_of(hull.vertices()[i]))))
        .collect();
    Some((verts, faces))
}

/// EPA seeded by the simplex of an overlapping GJK run.
///
/// Returns `None` if no valid polytope could be built (degenerate input).
pub fn epa<A: SupportMap + ?Sized, B: SupportMap + ?Sized>(
    a: &A,
    b: &B,
    simplex: &[SupportPoint],
) -> Option<Penetration> {
    let (mut verts, mut faces) = initial_polytope(a, b, simplex)?;

    for _ in 0..MAX_ITERATIONS {
        let best = pick_face(&faces)?;
        let f = faces[best].clone();
        let w = minkowski_support(a, b, f.normal);
        if w.w.dot(f.normal) - f.dist <= CONVERGENCE * (1.0 + f.dist.abs()) {
            break;
        }
        let wi = verts.len();
        verts.push(w);

        let mut edges: Vec<(usize, usize)> = Vec::new();
        for face in faces.iter_mut().filter(|f| f.alive) {
            let a0 = verts[face.v[0]].w;
            let visible = face.dist.is_infinite() || face.normal.dot(w.w - a0) > 1e-12;
            if visible {
                face.alive = false;
                let [x, y, z] = face.v;
                for e in [(x, y), (y, z), (z, x)] {
                    // an edge shared by two removed faces is interior
                    if let Some(pos) = edges.iter().position(|&(p, q)| p == e.1 && q == e.0) {
                        edges.swap_remove(pos);
                    } else {
                        edges.push(e);
                    }
                }
            }
        }
        if edges.is_empty() {
            break;
        }
        for (p, q) in edges {
            faces.push(make_face(&verts, [p, q, wi]));
        }
        faces.retain(|f| f.alive);
    }

    let f = &faces[pick_face(&faces)?];
    if !f.dist.is_finite() {
        return None;
    }
    let depth = f.dist.max(0.0);
    let proj = f.normal * f.dist;
    let [s0, s1, s2] = f.v.map(|i| verts[i]);
    let (u, v, w) = barycentric(proj, s0.w, s1.w, s2.w);
    Some(Penetration {
        depth,
        normal: f.normal,
        point_a: s0.a * u + s1.a * v + s2.a * w,
        point_b: s0.b * u + s1.b * v + s2.b * w,
    })
}

fn barycentric(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> (f64, f64, f64) {
    let v0 = b - a;
    let v1 = c - a;
    let v2 = p - a;
    let d00 = v0.dot(v0);
    let d01 = v0.dot(v1);
    let d11 = v1.dot(v1);
    let d20 = v2.dot(v0);
    let d21 = v2.dot(v1);
    let denom = d00 * d11 - d01 * d01;
    if denom.abs() < 1e-300 {
        return (1.0, 0.0, 0.0);
    }
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    (1.0 - v - w, v, w)
}
