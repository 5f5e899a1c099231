use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use super::kdtree::KdTree;
use crate::geom::{Pose, UnitQuat, Vec3};

pub const ICP_MAX_ITERS: usize = 50;
pub const ICP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcpResult {
    /// Maps source points onto the destination.
    pub transform: Pose,
    pub iterations: usize,
    /// RMS nearest-neighbor distance at each visited transform.
    pub rms_history: Vec<f64>,
}

impl IcpResult {
    pub fn final_rms(&self) -> f64 {
        *self.rms_history.last().expect("at least one evaluation")
    }
}

/// Point-to-point ICP aligning `src` to `dst`. Stops when the RMS error
/// changes by less than `tol` or after `max_iters` updates.
pub fn icp_align(src: &[Vec3], dst: &[Vec3], max_iters: usize, tol: f64) -> IcpResult {
    assert!(
        !src.is_empty() && !dst.is_empty(),
        "icp needs non-empty point sets"
    );
    let tree = KdTree::new(dst);
    let mut transform = Pose::IDENTITY;
    let mut accepted = transform;
    let mut rms_history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    loop {
        let moved: Vec<Vec3> = src.iter().map(|p| transform.transform_point(*p)).collect();
        let matches: Vec<(usize, f64)> = moved
            .par_iter()
            .map(|p| tree.nearest(*p).expect("non-empty tree"))
            .collect();
        let rms = (matches.iter().map(|m| m.1).sum::<f64>() / matches.len() as f64).sqrt();
        let prev = rms_history.last().copied();
        if prev.is_some_and(|prev| rms > prev) || !transform.is_finite() {
            // rounding can undo the last step; keep the better transform
            transform = accepted;
            break;
        }
        rms_history.push(rms);
        accepted = transform;
        if rms == 0.0 || prev.is_some_and(|prev| prev - rms < tol) || iterations == max_iters {
            break;
        }
        let targets: Vec<Vec3> = matches.iter().map(|m| dst[m.0]).collect();
        transform = kabsch(&moved, &targets).compose(&transform);
        iterations += 1;
    }
    IcpResult {
        transform,
        iterations,
        rms_history,
    }
}

/// Least-squares rigid transform taking `a[i]` to `b[i]`.
pub fn kabsch(a: &[Vec3], b: &[Vec3]) -> Pose {
    let n = a.len() as f64;
    let ca = a.iter().fold(Vec3::ZERO, |s, p| s + *p) * (1.0 / n);
    let cb = b.iter().fold(Vec3::ZERO, |s, p| s + *p) * (1.0 / n);
    let mut h = Matrix3::<f64>::zeros();
    for (p, q) in a.iter().zip(b) {
        let u = *p - ca;
        let v = *q - cb;
        h += Vector3::new(u.x, u.y, u.z) * Vector3::new(v.x, v.y, v.z).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let rot = UnitQuat::new(q.w, q.i, q.j, q.k);
    let t = cb - rot.rotate(ca);
    Pose::new(rot, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::sample_triangles;
    use crate::geom::ConvexHull;

    fn l_shape(n: usize) -> Vec<Vec3> {
        let mut tris = Vec::new();
        for (size, center) in [
            (Vec3::new(1.0, 0.2, 0.6), Vec3::new(0.0, 0.1, 0.0)),
            (Vec3::new(0.2, 0.7, 0.6), Vec3::new(-0.4, 0.55, 0.0)),
            (Vec3::new(0.3, 0.3, 0.3), Vec3::new(0.3, 0.35, 0.15)),
        ] {
            let h = ConvexHull::cuboid_at(size, center).unwrap();
            tris.extend(h.faces().iter().map(|f| f.map(|i| h.vertices()[i])));
        }
        sample_triangles(&tris, n, 11).unwrap()
    }

    #[test]
    fn recovers_known_rigid_motion() {
        let src = l_shape(4000);
        let truth = Pose::new(
            UnitQuat::from_axis_angle(Vec3::new(0.2, 1.0, 0.1).normalize(), 5f64.to_radians()),
            Vec3::new(0.1, 0.0, 0.0),
        );
        let dst: Vec<Vec3> = src.iter().map(|p| truth.transform_point(*p)).collect();
        let r = icp_align(&src, &dst, ICP_MAX_ITERS, ICP_TOLERANCE);
        assert!(r.rms_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(
            (r.transform.translation - truth.translation).norm() < 1e-3,
            "{r:?}"
        );
        assert!(r.transform.rotation.angle_to(truth.rotation) < 1e-3);
    }

    #[test]
    fn identical_sets_give_identity() {
        let src = l_shape(500);
        let r = icp_align(&src, &src, ICP_MAX_ITERS, ICP_TOLERANCE);
        assert_eq!(r.transform, Pose::IDENTITY);
        assert_eq!(r.iterations, 0);
    }
}
