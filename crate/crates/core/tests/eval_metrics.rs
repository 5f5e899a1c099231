use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use stablescene::eval::{
    biou, chamfer, evaluate_geometry, fscore, icp_align, phys_metrics, sample_triangles, GeoConfig,
    GroundTruth, KdTree, PointSet, PointSource,
};
use stablescene::geom::{Aabb, ConvexHull, Pose, UnitQuat, Vec3};
use stablescene::scene::{parse_scene, LoadedScene};
use stablescene::sim::{settle, SimConfig};

fn cloud(rng: &mut impl Rng, n: usize, spread: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(-spread..spread),
                rng.random_range(-spread..spread),
                rng.random_range(-spread..spread),
            )
        })
        .collect()
}

fn brute_nn(q: Vec3, pts: &[Vec3]) -> f64 {
    pts.iter()
        .map(|p| (*p - q).norm_squared())
        .fold(f64::INFINITY, f64::min)
}

fn set(points: Vec<Vec3>) -> PointSet {
    PointSet::new(points, PointSource::Sampled).unwrap()
}

#[test]
fn chamfer_and_fscore_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let a = cloud(&mut rng, 1000, 0.5);
        let b = cloud(&mut rng, 1000, 0.5);
        let ab: Vec<f64> = a.iter().map(|q| brute_nn(*q, &b)).collect();
        let ba: Vec<f64> = b.iter().map(|q| brute_nn(*q, &a)).collect();
        let cd =
            ab.iter().sum::<f64>() / ab.len() as f64 + ba.iter().sum::<f64>() / ba.len() as f64;
        let t = 0.05;
        let p = ab.iter().filter(|d| d.sqrt() <= t).count() as f64 / ab.len() as f64;
        let r = ba.iter().filter(|d| d.sqrt() <= t).count() as f64 / ba.len() as f64;
        let f = if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        };
        let (sa, sb) = (set(a), set(b));
        assert!((chamfer(&sa, &sb) - cd).abs() <= 1e-12);
        assert!((fscore(&sa, &sb, t) - f).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn kdtree_matches_linear_scan(pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..200),
                                  q in (-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5)) {
        let pts: Vec<Vec3> = pts.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect();
        let q = Vec3::new(q.0, q.1, q.2);
        let (i, d) = KdTree::new(&pts).nearest(q).unwrap();
        prop_assert_eq!(d, brute_nn(q, &pts));
        prop_assert_eq!((pts[i] - q).norm_squared(), d);
    }

    #[test]
    fn chamfer_is_symmetric_and_zero_on_self(pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..100),
                                             shift in -0.2f64..0.2) {
        let a: Vec<Vec3> = pts.iter().map(|(x, y, z)| Vec3::new(*x, *y, *z)).collect();
        let b: Vec<Vec3> = a.iter().map(|p| *p + Vec3::new(shift, 0.0, 0.0)).collect();
        let (sa, sb) = (set(a), set(b));
        prop_assert_eq!(chamfer(&sa, &sa), 0.0);
        prop_assert_eq!(fscore(&sa, &sa, 0.01), 1.0);
        prop_assert!((chamfer(&sa, &sb) - chamfer(&sb, &sa)).abs() <= 1e-15);
        prop_assert!(chamfer(&sa, &sb) <= 2.0 * shift * shift + 1e-15);
    }
}

/// Surface samples of an asymmetric L-shaped bracket.
fn bracket(n: usize, seed: u64) -> Vec<Vec3> {
    let parts = [
        ConvexHull::cuboid_at(Vec3::new(0.6, 0.1, 0.3), Vec3::new(0.0, 0.0, 0.0)),
        ConvexHull::cuboid_at(Vec3::new(0.1, 0.5, 0.3), Vec3::new(0.25, 0.3, 0.0)),
        ConvexHull::cuboid_at(Vec3::new(0.2, 0.1, 0.1), Vec3::new(-0.2, 0.1, 0.1)),
    ];
    let tris: Vec<[Vec3; 3]> = parts
        .iter()
        .flat_map(|h| {
            let h = h.as_ref().unwrap();
            h.faces()
                .iter()
                .map(|f| f.map(|i| h.vertices()[i]))
                .collect::<Vec<_>>()
        })
        .collect();
    sample_triangles(&tris, n, seed).unwrap()
}

#[test]
fn icp_tolerates_millimetre_noise() {
    let dst = bracket(3000, 1);
    let noise = Normal::new(0.0, 0.001).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pert = Pose::new(
        UnitQuat::from_axis_angle(Vec3::new(1.0, 2.0, 0.5).normalize(), 4f64.to_radians()),
        Vec3::new(0.05, -0.03, 0.04),
    );
    let src: Vec<Vec3> = dst
        .iter()
        .map(|p| {
            pert.transform_point(*p)
                + Vec3::new(
                    noise.sample(&mut rng),
                    noise.sample(&mut rng),
                    noise.sample(&mut rng),
                )
        })
        .collect();
    let res = icp_align(&src, &dst, 50, 1e-9);
    let rms = res.final_rms();
    assert!(rms <= 0.002, "{rms}");
    // the recovered transform undoes the perturbation up to the noise
    let undo = res.transform.compose(&pert);
    assert!(undo.translation.norm() < 2e-3);
    assert!(undo.rotation.angle_to(UnitQuat::IDENTITY) < 2e-3);
    // RMS never increases along the accepted iterations
    for w in res.rms_history.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn half_overlapping_cubes_have_one_third_iou() {
    let a = Aabb::new(Vec3::ZERO, Vec3::splat(1.0));
    let b = Aabb::new(Vec3::new(0.5, 0.0, 0.0), Vec3::new(1.5, 1.0, 1.0));
    assert_eq!(a.iou(&b), 1.0 / 3.0);
    assert_eq!(a.iou(&a), 1.0);
    let c = Aabb::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 1.0, 1.0));
    assert_eq!(a.iou(&c), 0.0);
}

fn unit_cube_scene(x: f64) -> LoadedScene {
    let text = format!(
        r#"{{"objects": [{{"id": "c", "box": [1, 1, 1]}}],
            "tree": {{"c": {{"parent": "ground"}}}},
            "layout": {{"c": {{"quat": [1,0,0,0], "pos": [{x}, 0.5, 0]}}}}}}"#
    );
    parse_scene(&text, Path::new(".")).unwrap()
}

#[test]
fn scene_biou_matches_by_id() {
    let a = unit_cube_scene(0.0);
    let b = unit_cube_scene(0.5);
    assert_eq!(
        biou(&a.scene, &a.raw_layout, &b.scene, &b.raw_layout).unwrap(),
        1.0 / 3.0
    );
}

#[test]
fn identical_scenes_score_perfectly() {
    let a = unit_cube_scene(0.2);
    let cfg = GeoConfig {
        samples: 5000,
        ..GeoConfig::default()
    };
    let gt = GroundTruth::from_scene(&a.scene, &a.raw_layout, cfg.samples, cfg.seed).unwrap();
    let r = evaluate_geometry(&a.scene, &a.raw_layout, &gt, &cfg).unwrap();
    assert_eq!(r.chamfer, 0.0);
    assert_eq!(r.fscore, 1.0);
    assert_eq!(r.biou, 1.0);
    assert_eq!(r.icp_iterations, 0);
}

#[test]
fn point_list_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gt.xyz");
    std::fs::write(&path, "# corners\n0 0 0\n1 0 0\n\n0 1 0\n0 0 1\n").unwrap();
    let gt = GroundTruth::from_file(&path, 10, 0).unwrap();
    assert_eq!(gt.points.points.len(), 4);
    assert_eq!(gt.points.source, PointSource::External);
    assert_eq!(gt.boxes[""], Aabb::new(Vec3::ZERO, Vec3::splat(1.0)));
    let empty = dir.path().join("empty.xyz");
    std::fs::write(&empty, "# nothing\n").unwrap();
    assert!(GroundTruth::from_file(&empty, 10, 0).is_err());
    let bad = dir.path().join("bad.xyz");
    std::fs::write(&bad, "1 2 x\n").unwrap();
    assert!(GroundTruth::from_file(&bad, 10, 0).is_err());
}

#[test]
fn physical_metrics_count_objects() {
    let text = r#"{
        "objects": [
            {"id": "a", "box": [0.3, 0.3, 0.3]},
            {"id": "b", "box": [0.3, 0.3, 0.3]},
            {"id": "c", "box": [0.3, 0.3, 0.3]},
            {"id": "d", "box": [0.3, 0.3, 0.3]},
            {"id": "e", "box": [0.3, 0.3, 0.3], "movable": false}
        ],
        "tree": {"a": {"parent": "ground"}, "b": {"parent": "ground"}, "c": {"parent": "ground"},
                 "d": {"parent": "ground"}, "e": {"parent": "ground"}},
        "layout": {
            "a": {"quat": [1,0,0,0], "pos": [0, 0.15, 0]},
            "b": {"quat": [1,0,0,0], "pos": [2, 0.15, 0]},
            "c": {"quat": [1,0,0,0], "pos": [4, 0.65, 0]},
            "d": {"quat": [1,0,0,0], "pos": [6, 0.15, 0]},
            "e": {"quat": [1,0,0,0], "pos": [6.29, 0.15, 0]}
        }
    }"#;
    let loaded = parse_scene(text, Path::new(".")).unwrap();
    let trace = settle(
        &loaded.scene,
        &loaded.raw_layout,
        &BTreeSet::new(),
        &SimConfig::default(),
    )
    .unwrap();
    let p = phys_metrics(&loaded.scene, &loaded.raw_layout, &trace);
    assert_eq!(p.n_objects, 5);
    assert_eq!(p.n_dynamic, 4);
    assert_eq!(
        p.intersecting_pairs,
        vec![("d".to_string(), "e".to_string())]
    );
    assert_eq!(p.collision_rate, 40.0);
    // the floating box drops half a metre
    assert_eq!(p.unstable, vec!["c".to_string()]);
    assert_eq!(p.stable_rate, 80.0);
    let drifts: BTreeMap<&str, f64> = ["a", "b", "c", "d"]
        .iter()
        .map(|id| {
            (
                *id,
                (trace.final_[*id].pose.translation - trace.initial[*id].pose.translation).norm(),
            )
        })
        .collect();
    assert!((p.pos_drift - drifts.values().sum::<f64>() / 4.0).abs() < 1e-15);
    assert!(drifts["c"] > 0.45);
}
