//! GJK distance between convex support maps.

use super::hull::support_point;
use super::{ConvexHull, Pose, Vec3};

/// Distances below this are reported as exactly zero (touching).
pub const TOUCH_TOLERANCE: f64 = 1e-10;

const MAX_ITERATIONS: usize = 64;
const REL_TOLERANCE: f64 = 1e-12;

pub trait SupportMap {
    /// Point of the shape furthest along `dir` (world frame).
    fn support(&self, dir: Vec3) -> Vec3;
    /// Any point inside the shape; seeds the search direction.
    fn center(&self) -> Vec3;
}

/// A body-frame hull placed in the world.
#[derive(Debug, Clone, Copy)]
pub struct PosedHull<'a> {
    pub hull: &'a ConvexHull,
    pub pose: &'a Pose,
}

impl<'a> PosedHull<'a> {
    pub fn new(hull: &'a ConvexHull, pose: &'a Pose) -> Self {
        Self { hull, pose }
    }
}

impl SupportMap for PosedHull<'_> {
    #[inline]
    fn support(&self, dir: Vec3) -> Vec3 {
        let local = self.pose.rotation.inverse_rotate(dir);
        self.pose.transform_point(self.hull.support(local))
    }

    fn center(&self) -> Vec3 {
        self.pose.transform_point(self.hull.centroid())
    }
}

/// Convex hull of a world-space vertex list (already transformed).
#[derive(Debug, Clone, Copy)]
pub struct WorldPoints<'a>(pub &'a [Vec3]);

impl SupportMap for WorldPoints<'_> {
    #[inline]
    fn support(&self, dir: Vec3) -> Vec3 {
        support_point(self.0, dir)
    }

    fn center(&self) -> Vec3 {
        self.0.iter().fold(Vec3::ZERO, |acc, p| acc + *p) / self.0.len() as f64
    }
}

/// A vertex of the Minkowski difference `A - B` with its two source points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportPoint {
    pub w: Vec3,
    pub a: Vec3,
    pub b: Vec3,
}

#[inline]
pub fn minkowski_support<A: SupportMap + ?Sized, B: SupportMap + ?Sized>(
    a: &A,
    b: &B,
    dir: Vec3,
) -> SupportPoint {
    let pa = a.support(dir);
    let pb = b.support(-dir);
    SupportPoint {
        w: pa - pb,
        a: pa,
        b: pb,
    }
}

#[derive(Debug, Clone)]
pub struct GjkResult {
    /// Euclidean distance between the shapes; `0.0` when touching or overlapping.
    pub distance: f64,
    /// Closest point on A (meaningful when disjoint).
    pub point_a: Vec3,
    /// Closest point on B (meaningful when disjoint).
    pub point_b: Vec3,
    /// Final simplex; encloses the origin when the shapes overlap.
    pub simplex: Vec<SupportPoint>,
}

impl GjkResult {
    pub fn overlapping(&self) -> bool {
        self.distance == 0.0
    }
}

/// Runs GJK on the Minkowski difference `a - b`.
pub fn gjk<A: SupportMap + ?Sized, B: SupportMap + ?Sized>(a: &A, b: &B) -> GjkResult {
    let mut simplex: Vec<SupportPoint> = Vec::with_capacity(4);
    let mut dir = b.center() - a.center();
    if dir.norm_squared() < 1e-24 {
        dir = Vec3::X;
    }
    // v is the current closest point of the simplex hull to the origin
    let first = minkowski_support(a, b, dir);
    simplex.push(first);
    let mut v = first.w;
    let mut bary: Vec<f64> = vec![1.0];
    let mut prev_dist2 = f64::INFINITY;

    for _ in 0..MAX_ITERATIONS {
        let dist2 = v.norm_squared();
        if dist2 <= TOUCH_TOLERANCE * TOUCH_TOLERANCE {
            return overlap_result(simplex);
        }
        let w = minkowski_support(a, b, -v);
        // the duality gap ||v||^2 - v.w bounds the distance error
        let gap = dist2 - v.dot(w.w);
        if gap <= REL_TOLERANCE * dist2 || simplex.iter().any(|s| s.w == w.w) {
            break;
        }
        if dist2 >= prev_dist2 {
            break;
        }
        prev_dist2 = dist2;
        simplex.push(w);
        match closest_on_simplex(&simplex) {
            Closest::Inside => return overlap_result(simplex),
            Closest::Point {
                point,
                keep,
                weights,
            } => {
                simplex = keep.iter().map(|&i| simplex[i]).collect();
                bary = weights;
                v = point;
            }
        }
    }

    let dist = v.norm();
    if dist <= TOUCH_TOLERANCE {
        return overlap_result(simplex);
    }
    let mut pa = Vec3::ZERO;
    let mut pb = Vec3::ZERO;
    for (s, l) in simplex.iter().zip(&bary) {
        pa += s.a * *l;
        pb += s.b * *l;
    }
    GjkResult {
        distance: dist,
        point_a: pa,
        point_b: pb,
        simplex,
    }
}

fn overlap_result(simplex: Vec<SupportPoint>) -> GjkResult {
    let p = simplex[0].a;
    GjkResult {
        distance: 0.0,
        point_a: p,
        point_b: p,
        simplex,
    }
}

enum Closest {
    Inside,
    Point {
        point: Vec3,
        keep: Vec<usize>,
        weights: Vec<f64>,
    },
}

fn closest_on_simplex(s: &[SupportPoint]) -> Closest {
    match s.len() {
        1 => Closest::Point {
            point: s[0].w,
            keep: vec![0],
            weights: vec![1.0],
        },
        2 => closest_segment(s[0].w, s[1].w, [0, 1]),
        3 => closest_triangle(s[0].w, s[1].w, s[2].w, [0, 1, 2]),
        4 => closest_tetrahedron(s),
        _ => unreachable!("simplex larger than a tetrahedron"),
    }
}

fn closest_segment(a: Vec3, b: Vec3, idx: [usize; 2]) -> Closest {
    let ab = b - a;
    let denom = ab.norm_squared();
    let t = if denom > 0.0 { -a.dot(ab) / denom } else { 0.0 };
    if t <= 0.0 {
        Closest::Point {
            point: a,
            keep: vec![idx[0]],
            weights: vec![1.0],
        }
    } else if t >= 1.0 {
        Closest::Point {
            point: b,
            keep: vec![idx[1]],
            weights: vec![1.0],
        }
    } else {
        Closest::Point {
            point: a + ab * t,
            keep: idx.to_vec(),
            weights: vec![1.0 - t, t],
        }
    }
}

/// Closest point of triangle `abc` to the origin, by Voronoi region.
fn closest_triangle(a: Vec3, b: Vec3, c: Vec3, idx: [usize; 3]) -> Closest {
    let ab = b - a;
    let ac = c - a;
    let ap = -a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    let vertex = |p: Vec3, i: usize| Closest::Point {
        point: p,
        keep: vec![i],
        weights: vec![1.0],
    };
    if d1 <= 0.0 && d2 <= 0.0 {
        return vertex(a, idx[0]);
    }
    let bp = -b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return vertex(b, idx[1]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return Closest::Point {
            point: a + ab * t,
            keep: vec![idx[0], idx[1]],
            weights: vec![1.0 - t, t],
        };
    }
    let cp = -c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return vertex(c, idx[2]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return Closest::Point {
            point: a + ac * t,
            keep: vec![idx[0], idx[2]],
            weights: vec![1.0 - t, t],
        };
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return Closest::Point {
            point: b + (c - b) * t,
            keep: vec![idx[1], idx[2]],
            weights: vec![1.0 - t, t],
        };
    }
    let denom = va + vb + vc;
    if denom.abs() < 1e-300 {
        // degenerate triangle, fall back to its best edge
        return closest_segment(a, b, [idx[0], idx[1]]);
    }
    let v = vb / denom;
    let w = vc / denom;
    Closest::Point {
        point: a + ab * v + ac * w,
        keep: idx.to_vec(),
        weights: vec![1.0 - v - w, v, w],
    }
}

fn closest_tetrahedron(s: &[SupportPoint]) -> Closest {
    let p = [s[0].w, s[1].w, s[2].w, s[3].w];
    let faces = [
        ([0, 1, 2], 3),
        ([0, 1, 3], 2),
        ([0, 2, 3], 1),
        ([1, 2, 3], 0),
    ];
    let volume = (p[1] - p[0]).dot((p[2] - p[0]).cross(p[3] - p[0]));
    let flat =
        volume.abs() < 1e-18 * (1.0 + p.iter().map(|q| q.norm_squared()).fold(0.0, f64::max));
    let mut best: Option<(f64, Closest)> = None;
    let mut outside_any = false;
    for (f, opp) in faces {
        let [a, b, c] = f.map(|i| p[i]);
        let n = (b - a).cross(c - a);
        let side_origin = -n.dot(a);
        let side_opp = n.dot(p[opp] - a);
        let outside = flat || side_origin * side_opp < 0.0;
        if !outside {
            continue;
        }
        outside_any = true;
        let res = closest_triangle(a, b, c, f);
        if let Closest::Point { point, .. } = &res {
            let d = point.norm_squared();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, res));
            }
        }
    }
    if !outside_any {
        return Closest::Inside;
    }
    best.map(|(_, c)| c).unwrap_or(Closest::Inside)
}
