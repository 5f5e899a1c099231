//! Convex hulls: quickhull construction, mass properties and support queries.

use super::{GeomError, Mat3, Vec3};

/// Points closer than this to the plane of a hull face count as lying on it.
pub const COPLANAR_TOLERANCE: f64 = 1e-9;

/// Distance above a face plane beyond which quickhull treats a point as outside.
const OUTSIDE_EPS: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    #[inline]
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// A closed convex polyhedron in body frame.
///
/// Faces are triangles wound counter-clockwise seen from outside, so the
/// right-hand normal of each face points outward.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    planes: Vec<Plane>,
    centroid: Vec3,
    volume: f64,
    /// Inertia tensor of the solid at unit density, about the centroid.
    unit_inertia: Mat3,
}

impl ConvexHull {
    /// Builds the convex hull of `points`.
    ///
    /// Fails when fewer than four points are given, any point is not finite,
    /// or all points lie within [`COPLANAR_TOLERANCE`] of a common plane.
    pub fn from_points(points: &[Vec3]) -> Result<Self, GeomError> {
        convex_hull(points)
    }

    /// Axis-aligned box centered on the body origin with the given full extents.
    pub fn cuboid(size: Vec3) -> Result<Self, GeomError> {
        let h = size * 0.5;
        let mut pts = Vec::with_capacity(8);
        for i in 0..8 {
            pts.push(Vec3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            ));
        }
        convex_hull(&pts)
    }

    /// Same as [`cuboid`](Self::cuboid) but centered on `center`.
    pub fn cuboid_at(size: Vec3, center: Vec3) -> Result<Self, GeomError> {
        Ok(Self::cuboid(size)?.translated(center))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn centroid(&self) -> Vec3 {
        self.centroid
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn unit_inertia(&self) -> Mat3 {
        self.unit_inertia
    }

    /// Surface area of every face, in face order.
    pub fn face_areas(&self) -> Vec<f64> {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i]);
                0.5 * (b - a).cross(c - a).norm()
            })
            .collect()
    }

    /// Vertex furthest along `dir`.
    #[inline]
    pub fn support(&self, dir: Vec3) -> Vec3 {
        support_point(&self.vertices, dir)
    }

    /// Signed distance-like measure: positive outside, negative inside, exact
    /// on the faces. Inside, its magnitude is the distance to the nearest face.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.planes
            .iter()
            .map(|pl| pl.signed_distance(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        self.signed_distance(p) <= tol
    }

    /// Uniformly scaled copy (about the body origin).
    pub fn scaled(&self, s: f64) -> ConvexHull {
        assert!(s > 0.0);
        let verts: Vec<Vec3> = self.vertices.iter().map(|v| *v * s).collect();
        Self::from_parts(verts, self.faces.clone())
    }

    pub fn translated(&self, t: Vec3) -> ConvexHull {
        let verts: Vec<Vec3> = self.vertices.iter().map(|v| *v + t).collect();
        Self::from_parts(verts, self.faces.clone())
    }

    fn from_parts(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> ConvexHull {
        let planes = faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| vertices[i]);
                let n = (b - a).cross(c - a).normalize();
                Plane {
                    normal: n,
                    offset: n.dot(a),
                }
            })
            .collect();
        let (volume, centroid, unit_inertia) = mass_properties(&vertices, &faces);
        ConvexHull {
            vertices,
            faces,
            planes,
            centroid,
            volume,
            unit_inertia,
        }
    }
}

#[inline]
pub(crate) fn support_point(points: &[Vec3], dir: Vec3) -> Vec3 {
    let mut best = points[0];
    let mut best_d = best.dot(dir);
    for p in &points[1..] {
        let d = p.dot(dir);
        if d > best_d {
            best_d = d;
            best = *p;
        }
    }
    best
}

/// Volume, centroid and unit-density inertia about the centroid of a closed
/// outward-wound triangle mesh.
fn mass_properties(vertices: &[Vec3], faces: &[[usize; 3]]) -> (f64, Vec3, Mat3) {
    let origin = vertices.iter().fold(Vec3::ZERO, |acc, v| acc + *v) / vertices.len() as f64;
    let mut volume = 0.0;
    let mut first = Vec3::ZERO;
    // second moment about `origin`
    let mut cov = Mat3::ZERO;
    let canonical = Mat3::from_rows(
        Vec3::new(2.0, 1.0, 1.0),
        Vec3::new(1.0, 2.0, 1.0),
        Vec3::new(1.0, 1.0, 2.0),
    );
    for f in faces {
        let [a, b, c] = f.map(|i| vertices[i] - origin);
        let det = a.dot(b.cross(c));
        volume += det / 6.0;
        first += (a + b + c) * (det / 24.0);
        let m = Mat3::from_cols(a, b, c);
        cov = cov + (m * canonical * m.transpose()).scale(det / 120.0);
    }
    let c_local = first / volume;
    // shift covariance to the centroid
    let cov_c = cov + Mat3::outer(c_local, c_local).scale(-volume);
    let inertia = Mat3::IDENTITY.scale(cov_c.trace()) + cov_c.scale(-1.0);
    (volume, origin + c_local, inertia)
}

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vec3], v: [usize; 3]) -> Face {
        let [a, b, c] = v.map(|i| points[i]);
        let n = (b - a).cross(c - a);
        let normal = n.try_normalize().unwrap_or(Vec3::ZERO);
        Face {
            v,
            normal,
            offset: normal.dot(a),
            outside: Vec::new(),
            alive: true,
        }
    }

    #[inline]
    fn distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Quickhull over `points`. Interior and on-face points are discarded.
pub fn convex_hull(points: &[Vec3]) -> Result<ConvexHull, GeomError> {
    if points.len() < 4 {
        return Err(GeomError::DegenerateGeometry(format!(
            "convex hull needs at least 4 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !p.is_finite()) {
        return Err(GeomError::DegenerateGeometry(format!(
            "non-finite point {p:?}"
        )));
    }
    let [i0, i1, i2, i3] = initial_simplex(points)?;

    let mut faces: Vec<Face> = Vec::new();
    // orient the tetrahedron so that all faces point away from the fourth vertex
    let base = Face::new(points, [i0, i1, i2]);
    let tet = if base.distance(points[i3]) > 0.0 {
        [[i0, i2, i1], [i0, i1, i3], [i1, i2, i3], [i2, i0, i3]]
    } else {
        [[i0, i1, i2], [i0, i3, i1], [i1, i3, i2], [i2, i3, i0]]
    };
    for v in tet {
        faces.push(Face::new(points, v));
    }

    let used = [i0, i1, i2, i3];
    for (pi, p) in points.iter().enumerate() {
        if used.contains(&pi) {
            continue;
        }
        assign_outside(&mut faces, 0..4, pi, *p);
    }

    let mut stack: Vec<usize> = (0..faces.len()).collect();
    while let Some(fi) = stack.pop() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            continue;
        }
        // eye point: furthest outside point of this face, lowest index on ties
        let eye = {
            let f = &faces[fi];
            let mut best = f.outside[0];
            let mut best_d = f.distance(points[best]);
            for &pi in &f.outside[1..] {
                let d = f.distance(points[pi]);
                if d > best_d {
                    best_d = d;
                    best = pi;
                }
            }
            best
        };
        let eye_p = points[eye];

        let visible: Vec<usize> = (0..faces.len())
            .filter(|&i| faces[i].alive && faces[i].distance(eye_p) > OUTSIDE_EPS)
            .collect();
        debug_assert!(visible.contains(&fi));

        // horizon: directed edges of visible faces whose twin is not visible
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &i in &visible {
            let [a, b, c] = faces[i].v;
            edges.extend([(a, b), (b, c), (c, a)]);
        }
        let horizon: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| !edges.contains(&(b, a)))
            .collect();

        let mut orphans: Vec<usize> = Vec::new();
        for &i in &visible {
            faces[i].alive = false;
            orphans.append(&mut faces[i].outside);
        }
        let first_new = faces.len();
        for (a, b) in horizon {
            faces.push(Face::new(points, [a, b, eye]));
        }
        let new_range = first_new..faces.len();
        for pi in orphans {
            if pi == eye {
                continue;
            }
            assign_outside(&mut faces, new_range.clone(), pi, points[pi]);
        }
        stack.extend(new_range);
    }

    // compact: keep referenced vertices only, in input order
    let live: Vec<[usize; 3]> = faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    let mut remap = vec![usize::MAX; points.len()];
    let mut referenced: Vec<usize> = live.iter().flatten().copied().collect();
    referenced.sort_unstable();
    referenced.dedup();
    let mut vertices = Vec::with_capacity(referenced.len());
    for (new, &old) in referenced.iter().enumerate() {
        remap[old] = new;
        vertices.push(points[old]);
    }
    let tris: Vec<[usize; 3]> = live.iter().map(|f| f.map(|i| remap[i])).collect();
    let hull = ConvexHull::from_parts(vertices, tris);
    if hull.volume.is_nan() || hull.volume <= 0.0 {
        return Err(GeomError::DegenerateGeometry(
            "hull has non-positive volume".into(),
        ));
    }
    Ok(hull)
}

fn assign_outside(faces: &mut [Face], range: std::ops::Range<usize>, pi: usize, p: Vec3) {
    for fi in range {
        if faces[fi].alive && faces[fi].distance(p) > OUTSIDE_EPS {
            faces[fi].outside.push(pi);
            return;
        }
    }
}

fn initial_simplex(points: &[Vec3]) -> Result<[usize; 4], GeomError> {
    let degenerate = |what: &str| {
        GeomError::DegenerateGeometry(format!(
            "point set is {what} (tolerance {COPLANAR_TOLERANCE} m)"
        ))
    };
    // extreme points along the coordinate axes
    let mut i0 = 0;
    let mut i1 = 0;
    let mut best_spread = -1.0;
    for axis in 0..3 {
        let (mut lo, mut hi) = (0, 0);
        for (i, p) in points.iter().enumerate() {
            if p[axis] < points[lo][axis] {
                lo = i;
            }
            if p[axis] > points[hi][axis] {
                hi = i;
            }
        }
        let spread = points[hi][axis] - points[lo][axis];
        if spread > best_spread {
            best_spread = spread;
            i0 = lo;
            i1 = hi;
        }
    }
    if points[i0].distance(points[i1]) <= COPLANAR_TOLERANCE {
        return Err(degenerate("a single point"));
    }
    let dir = (points[i1] - points[i0]).normalize();
    let mut i2 = i0;
    let mut best = 0.0;
    for (i, p) in points.iter().enumerate() {
        let d = (*p - points[i0]).cross(dir).norm();
        if d > best {
            best = d;
            i2 = i;
        }
    }
    if best <= COPLANAR_TOLERANCE {
        return Err(degenerate("collinear"));
    }
    let n = (points[i1] - points[i0])
        .cross(points[i2] - points[i0])
        .normalize();
    let mut i3 = i0;
    let mut best = 0.0;
    for (i, p) in points.iter().enumerate() {
        let d = n.dot(*p - points[i0]).abs();
        if d > best {
            best = d;
            i3 = i;
        }
    }
    if best <= COPLANAR_TOLERANCE {
        return Err(degenerate("coplanar"));
    }
    Ok([i0, i1, i2, i3])
}
