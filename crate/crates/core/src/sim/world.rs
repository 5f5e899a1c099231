//! Rigid-body world: contact generation and the sequential-impulse solver.

use crate::geom::epa::epa;
use crate::geom::gjk::{gjk, TOUCH_TOLERANCE};
use crate::geom::{Aabb, Mat3, Pose, PosedHull, UnitQuat, Vec3};
use crate::scene::SceneObject;

use super::shape::{BodyShape, Polygon};
use super::SimConfig;

/// Reference faces less aligned than this with the contact normal give a
/// single-point contact instead of a clipped manifold.
const FACE_ALIGNMENT: f64 = 0.95;
/// Old contacts closer than this to a new one pass on their impulses.
const WARM_START_RADIUS: f64 = 0.005;
/// Approach speeds below this do not bounce.
const RESTITUTION_THRESHOLD: f64 = 1.0;
const MAX_MANIFOLD: usize = 4;

pub(crate) struct Body<'a> {
    pub obj: &'a SceneObject,
    pub shape: &'a BodyShape,
    pub dynamic: bool,
    /// Pose of the object origin.
    pub pose: Pose,
    /// Center of mass, world frame.
    pub x: Vec3,
    pub v: Vec3,
    pub w: Vec3,
    inv_mass: f64,
    inv_inertia: Mat3,
    hull_aabbs: Vec<Aabb>,
    aabb: Aabb,
}

impl<'a> Body<'a> {
    pub fn new(obj: &'a SceneObject, shape: &'a BodyShape, pose: Pose, dynamic: bool) -> Self {
        let mut b = Body {
            obj,
            shape,
            dynamic,
            pose,
            x: pose.transform_point(shape.com),
            v: Vec3::ZERO,
            w: Vec3::ZERO,
            inv_mass: if dynamic { 1.0 / shape.mass } else { 0.0 },
            inv_inertia: Mat3::ZERO,
            hull_aabbs: Vec::new(),
            aabb: Aabb::new(Vec3::ZERO, Vec3::ZERO),
        };
        b.refresh();
        b
    }

    /// Recomputes world inertia and bounds after the pose changed.
    fn refresh(&mut self) {
        if self.dynamic {
            let r = self.pose.rotation.to_mat3();
            self.inv_inertia = r * self.shape.inv_inertia * r.transpose();
        }
        self.hull_aabbs = self
            .obj
            .hulls
            .iter()
            .map(|h| crate::geom::aabb_of(h, &self.pose))
            .collect();
        self.aabb = self
            .hull_aabbs
            .iter()
            .skip(1)
            .fold(self.hull_aabbs[0], |a, b| a.union(b));
    }

    #[inline]
    fn velocity_at(&self, r: Vec3) -> Vec3 {
        self.v + self.w.cross(r)
    }

    #[inline]
    fn apply_impulse(&mut self, r: Vec3, p: Vec3) {
        self.v += p * self.inv_mass;
        self.w += self.inv_inertia * r.cross(p);
    }
}

/// Identifies the pair a contact belongs to. `a == usize::MAX` is the ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct PairKey {
    a: usize,
    b: usize,
    hull_a: usize,
    hull_b: usize,
}

const GROUND: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Contact {
    key: PairKey,
    /// Ground contacts: index of the touching vertex.
    feature: usize,
    /// Unit normal pointing from `a` to `b`.
    n: Vec3,
    p: Vec3,
    sep: f64,
    ra: Vec3,
    rb: Vec3,
    t1: Vec3,
    t2: Vec3,
    mass_n: f64,
    mass_t1: f64,
    mass_t2: f64,
    target_vn: f64,
    ln: f64,
    lt1: f64,
    lt2: f64,
}

pub(crate) struct World<'a> {
    pub bodies: Vec<Body<'a>>,
    cfg: SimConfig,
    contacts: Vec<Contact>,
}

impl<'a> World<'a> {
    pub fn new(bodies: Vec<Body<'a>>, cfg: &SimConfig) -> Self {
        Self {
            bodies,
            cfg: cfg.clone(),
            contacts: Vec::new(),
        }
    }

    /// One substep of length `h`. Returns the index of the first body whose
    /// state became non-finite.
    pub fn substep(&mut self, h: f64) -> Result<(), usize> {
        let lin_keep = (1.0 - self.cfg.lin_damping * h).max(0.0);
        let ang_keep = (1.0 - self.cfg.ang_damping * h).max(0.0);
        let g = self.cfg.gravity;
        for b in self.bodies.iter_mut().filter(|b| b.dynamic) {
            b.v += g * h;
            b.v *= lin_keep;
            b.w *= ang_keep;
        }

        let old = std::mem::take(&mut self.contacts);
        let mut contacts = self.collide();
        contacts.sort_by_key(|c| c.key);
        self.prepare(&mut contacts, &old, h);
        for c in &contacts {
            self.apply(c, c.n * c.ln + c.t1 * c.lt1 + c.t2 * c.lt2);
        }
        for _ in 0..self.cfg.solver_iterations {
            for c in contacts.iter_mut() {
                self.solve_normal(c);
            }
            for c in contacts.iter_mut() {
                self.solve_friction(c);
            }
        }
        self.contacts = contacts;

        for (i, b) in self.bodies.iter_mut().enumerate() {
            if !b.dynamic {
                continue;
            }
            b.x += b.v * h;
            let q = (UnitQuat::from_rotation_vector(b.w * h) * b.pose.rotation).normalized();
            b.pose = Pose::new(q, b.x - q.rotate(b.shape.com));
            if !(b.x.is_finite() && b.v.is_finite() && b.w.is_finite() && q.is_finite()) {
                return Err(i);
            }
            b.refresh();
        }
        Ok(())
    }

    fn collide(&self) -> Vec<Contact> {
        let offset = self.cfg.contact_offset;
        let mut out = Vec::new();
        for (bi, b) in self.bodies.iter().enumerate() {
            if !b.dynamic || b.aabb.min.y >= offset {
                continue;
            }
            for (hi, hull) in b.obj.hulls.iter().enumerate() {
                if b.hull_aabbs[hi].min.y >= offset {
                    continue;
                }
                for (vi, v) in hull.vertices().iter().enumerate() {
                    let p = b.pose.transform_point(*v);
                    if p.y < offset {
                        out.push(blank_contact(
                            PairKey {
                                a: GROUND,
                                b: bi,
                                hull_a: 0,
                                hull_b: hi,
                            },
                            vi,
                            Vec3::Y,
                            p,
                            p.y,
                        ));
                    }
                }
            }
        }

        // sweep and prune on X
        let mut order: Vec<usize> = (0..self.bodies.len()).collect();
        order.sort_by(|&i, &j| {
            self.bodies[i]
                .aabb
                .min
                .x
                .total_cmp(&self.bodies[j].aabb.min.x)
                .then(i.cmp(&j))
        });
        let mut pairs = Vec::new();
        for (k, &i) in order.iter().enumerate() {
            let ai = self.bodies[i].aabb.expanded(offset);
            for &j in &order[k + 1..] {
                if self.bodies[j].aabb.min.x > ai.max.x {
                    break;
                }
                if !(self.bodies[i].dynamic || self.bodies[j].dynamic) {
                    continue;
                }
                if ai.overlaps(&self.bodies[j].aabb) {
                    pairs.push((i.min(j), i.max(j)));
                }
            }
        }
        pairs.sort_unstable();
        for (i, j) in pairs {
            self.collide_bodies(i, j, &mut out);
        }
        out
    }

    fn collide_bodies(&self, i: usize, j: usize, out: &mut Vec<Contact>) {
        let offset = self.cfg.contact_offset;
        let (a, b) = (&self.bodies[i], &self.bodies[j]);
        for (ha, hull_a) in a.obj.hulls.iter().enumerate() {
            let box_a = a.hull_aabbs[ha].expanded(offset);
            for (hb, hull_b) in b.obj.hulls.iter().enumerate() {
                if !box_a.overlaps(&b.hull_aabbs[hb]) {
                    continue;
                }
                let sa = PosedHull::new(hull_a, &a.pose);
                let sb = PosedHull::new(hull_b, &b.pose);
                let g = gjk(&sa, &sb);
                if g.distance > offset {
                    continue;
                }
                let (n, sep, witness) = if g.distance > TOUCH_TOLERANCE {
                    (
                        (g.point_b - g.point_a) / g.distance,
                        g.distance,
                        (g.point_a + g.point_b) * 0.5,
                    )
                } else {
                    match epa(&sa, &sb, &g.simplex) {
                        Some(p) if p.normal.norm_squared() > 0.5 => {
                            (p.normal, -p.depth, (p.point_a + p.point_b) * 0.5)
                        }
                        _ => continue,
                    }
                };
                let key = PairKey {
                    a: i,
                    b: j,
                    hull_a: ha,
                    hull_b: hb,
                };
                let before = out.len();
                self.manifold(key, n, out);
                if out.len() == before {
                    out.push(blank_contact(key, 0, n, witness, sep));
                }
            }
        }
    }

    /// Clips the incident face against the reference face most aligned with
    /// `n` and emits one contact per clipped point within the contact offset.
    fn manifold(&self, key: PairKey, n: Vec3, out: &mut Vec<Contact>) {
        let a = &self.bodies[key.a];
        let b = &self.bodies[key.b];
        let best_face = |body: &Body, hull: usize, dir: Vec3| -> (usize, f64) {
            let local = body.pose.rotation.inverse_rotate(dir);
            body.shape.hulls[hull]
                .polygons
                .iter()
                .enumerate()
                .map(|(k, p)| (k, p.normal.dot(local)))
                .fold((0, f64::NEG_INFINITY), |best, cur| {
                    if cur.1 > best.1 {
                        cur
                    } else {
                        best
                    }
                })
        };
        let (fa, da) = best_face(a, key.hull_a, n);
        let (fb, db) = best_face(b, key.hull_b, -n);
        if da.max(db) < FACE_ALIGNMENT {
            return;
        }
        // reference side, incident side, sign that maps the reference normal to a->b
        let (rbody, rhull, rface, ibody, ihull, sign) = if da >= db - 1e-9 {
            (a, key.hull_a, fa, b, key.hull_b, 1.0)
        } else {
            (b, key.hull_b, fb, a, key.hull_a, -1.0)
        };
        let rpoly: &Polygon = &rbody.shape.hulls[rhull].polygons[rface];
        let rverts = rbody.obj.hulls[rhull].vertices();
        let rn = rbody.pose.rotation.rotate(rpoly.normal);
        let rpts: Vec<Vec3> = rpoly
            .verts
            .iter()
            .map(|&k| rbody.pose.transform_point(rverts[k]))
            .collect();

        let (iface, _) = best_face(ibody, ihull, -rn);
        let ipoly = &ibody.shape.hulls[ihull].polygons[iface];
        let iverts = ibody.obj.hulls[ihull].vertices();
        let mut poly: Vec<Vec3> = ipoly
            .verts
            .iter()
            .map(|&k| ibody.pose.transform_point(iverts[k]))
            .collect();

        for k in 0..rpts.len() {
            let p0 = rpts[k];
            let edge = rpts[(k + 1) % rpts.len()] - p0;
            let inward = match rn.cross(edge).try_normalize() {
                Some(d) => d,
                None => continue,
            };
            poly = clip(&poly, p0, inward);
            if poly.is_empty() {
                return;
            }
        }

        let mut points: Vec<(Vec3, f64)> = poly
            .into_iter()
            .filter_map(|p| {
                let s = (p - rpts[0]).dot(rn);
                (s <= self.cfg.contact_offset).then(|| (p - rn * (0.5 * s), s))
            })
            .collect();
        if points.len() > MAX_MANIFOLD {
            points = reduce_manifold(&points, rn);
        }
        let normal = rn * sign;
        for (k, (p, s)) in points.into_iter().enumerate() {
            out.push(blank_contact(key, k, normal, p, s));
        }
    }

    fn prepare(&self, contacts: &mut [Contact], old: &[Contact], h: f64) {
        let mu = self.cfg.friction;
        let mut used = vec![false; old.len()];
        for c in contacts.iter_mut() {
            let b = &self.bodies[c.key.b];
            c.rb = c.p - b.x;
            let (ra, va) = if c.key.a == GROUND {
                (Vec3::ZERO, Vec3::ZERO)
            } else {
                let a = &self.bodies[c.key.a];
                (c.p - a.x, a.velocity_at(c.p - a.x))
            };
            c.ra = ra;
            let (t1, t2) = c.n.orthonormal_basis();
            c.t1 = t1;
            c.t2 = t2;
            c.mass_n = self.effective_mass(c, c.n);
            c.mass_t1 = self.effective_mass(c, t1);
            c.mass_t2 = self.effective_mass(c, t2);

            let vn = (b.velocity_at(c.rb) - va).dot(c.n);
            c.target_vn = if c.sep > 0.0 {
                -c.sep / h
            } else {
                (self.cfg.baumgarte * -c.sep / h).min(self.cfg.max_depenetration_vel)
            };
            if self.cfg.restitution > 0.0 && vn < -RESTITUTION_THRESHOLD {
                c.target_vn = c.target_vn.max(-self.cfg.restitution * vn);
            }

            // warm start from the closest unused contact of the same pair
            let mut best: Option<(usize, f64)> = None;
            let lo = old.partition_point(|o| o.key < c.key);
            for (k, o) in old.iter().enumerate().skip(lo) {
                if o.key != c.key {
                    break;
                }
                if used[k] {
                    continue;
                }
                if c.key.a == GROUND {
                    if o.feature == c.feature {
                        best = Some((k, 0.0));
                        break;
                    }
                    continue;
                }
                let d = (o.p - c.p).norm();
                if d < WARM_START_RADIUS && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((k, d));
                }
            }
            if let Some((k, _)) = best {
                used[k] = true;
                let o = &old[k];
                c.ln = o.ln;
                // re-project friction onto the new tangent basis
                let pt = o.t1 * o.lt1 + o.t2 * o.lt2;
                let limit = mu * c.ln;
                c.lt1 = pt.dot(c.t1).clamp(-limit, limit);
                c.lt2 = pt.dot(c.t2).clamp(-limit, limit);
            }
        }
    }

    fn effective_mass(&self, c: &Contact, dir: Vec3) -> f64 {
        let b = &self.bodies[c.key.b];
        let rbn = c.rb.cross(dir);
        let mut k = b.inv_mass + (b.inv_inertia * rbn).dot(rbn);
        if c.key.a != GROUND {
            let a = &self.bodies[c.key.a];
            let ran = c.ra.cross(dir);
            k += a.inv_mass + (a.inv_inertia * ran).dot(ran);
        }
        if k > 0.0 {
            1.0 / k
        } else {
            0.0
        }
    }

    fn relative_velocity(&self, c: &Contact) -> Vec3 {
        let vb = self.bodies[c.key.b].velocity_at(c.rb);
        if c.key.a == GROUND {
            vb
        } else {
            vb - self.bodies[c.key.a].velocity_at(c.ra)
        }
    }

    /// Applies `p` to `b` and `-p` to `a`.
    fn apply(&mut self, c: &Contact, p: Vec3) {
        self.bodies[c.key.b].apply_impulse(c.rb, p);
        if c.key.a != GROUND {
            self.bodies[c.key.a].apply_impulse(c.ra, -p);
        }
    }

    fn solve_normal(&mut self, c: &mut Contact) {
        let vn = self.relative_velocity(c).dot(c.n);
        let new = (c.ln + (c.target_vn - vn) * c.mass_n).max(0.0);
        let d = new - c.ln;
        c.ln = new;
        self.apply(c, c.n * d);
    }

    fn solve_friction(&mut self, c: &mut Contact) {
        let limit = self.cfg.friction * c.ln;
        for (t, m, acc) in [(c.t1, c.mass_t1, &mut c.lt1), (c.t2, c.mass_t2, &mut c.lt2)] {
            let vt = self.relative_velocity_parts(c.key, c.ra, c.rb).dot(t);
            let new = (*acc - vt * m).clamp(-limit, limit);
            let d = new - *acc;
            *acc = new;
            self.apply_parts(c.key, c.ra, c.rb, t * d);
        }
    }

    fn relative_velocity_parts(&self, key: PairKey, ra: Vec3, rb: Vec3) -> Vec3 {
        let vb = self.bodies[key.b].velocity_at(rb);
        if key.a == GROUND {
            vb
        } else {
            vb - self.bodies[key.a].velocity_at(ra)
        }
    }

    fn apply_parts(&mut self, key: PairKey, ra: Vec3, rb: Vec3, p: Vec3) {
        self.bodies[key.b].apply_impulse(rb, p);
        if key.a != GROUND {
            self.bodies[key.a].apply_impulse(ra, -p);
        }
    }
}

fn blank_contact(key: PairKey, feature: usize, n: Vec3, p: Vec3, sep: f64) -> Contact {
    Contact {
        key,
        feature,
        n,
        p,
        sep,
        ra: Vec3::ZERO,
        rb: Vec3::ZERO,
        t1: Vec3::ZERO,
        t2: Vec3::ZERO,
        mass_n: 0.0,
        mass_t1: 0.0,
        mass_t2: 0.0,
        target_vn: 0.0,
        ln: 0.0,
        lt1: 0.0,
        lt2: 0.0,
    }
}

/// Keeps the part of a convex polygon on the side of `p0` that `inward` points to.
fn clip(poly: &[Vec3], p0: Vec3, inward: Vec3) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let da = (a - p0).dot(inward);
        let db = (b - p0).dot(inward);
        if da >= 0.0 {
            out.push(a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            out.push(a.lerp(b, da / (da - db)));
        }
    }
    out
}

/// Picks four well-spread points: the deepest, the one farthest from it, the
/// one spanning the largest triangle, and the largest on the opposite side.
fn reduce_manifold(points: &[(Vec3, f64)], n: Vec3) -> Vec<(Vec3, f64)> {
    let deepest = (0..points.len())
        .min_by(|&i, &j| points[i].1.total_cmp(&points[j].1))
        .expect("non-empty");
    let p0 = points[deepest].0;
    let far = (0..points.len())
        .max_by(|&i, &j| {
            (points[i].0 - p0)
                .norm_squared()
                .total_cmp(&(points[j].0 - p0).norm_squared())
        })
        .expect("non-empty");
    let p1 = points[far].0;
    let area = |i: usize| (p1 - p0).cross(points[i].0 - p0).dot(n);
    let third = (0..points.len())
        .max_by(|&i, &j| area(i).abs().total_cmp(&area(j).abs()))
        .expect("non-empty");
    let side = area(third).signum();
    let fourth = (0..points.len())
        .max_by(|&i, &j| (-side * area(i)).total_cmp(&(-side * area(j))))
        .expect("non-empty");
    let mut keep = vec![deepest, far, third, fourth];
    keep.sort_unstable();
    keep.dedup();
    keep.into_iter().map(|i| points[i]).collect()
}
