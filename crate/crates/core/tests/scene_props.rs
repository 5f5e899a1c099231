use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stablescene::fixtures::{generate, TemplateParams};
use stablescene::geom::{Pose, UnitQuat, Vec3};
use stablescene::scene::{layout_from_json, layout_to_json, parse_scene, Layout, Scene, Stage};

/// Random forest as parent labels: `ground`, `ground_wall`, `wall`, or an
/// earlier object.
fn random_parents(n: usize, rng: &mut impl Rng) -> Vec<String> {
    (0..n)
        .map(|i| {
            let r: f64 = rng.random();
            if i == 0 || r < 0.3 {
                ["ground", "ground", "ground_wall", "wall"][rng.random_range(0..4)].to_string()
            } else {
                format!("o{:02}", rng.random_range(0..i))
            }
        })
        .collect()
}

fn scene_from_parents(parents: &[String]) -> Scene {
    let objs: Vec<String> = (0..parents.len())
        .map(|i| format!(r#"{{"id": "o{i:02}", "box": [0.1, 0.1, 0.1]}}"#))
        .collect();
    let tree: Vec<String> = parents
        .iter()
        .enumerate()
        .map(|(i, p)| format!(r#""o{i:02}": {{"parent": "{p}"}}"#))
        .collect();
    let layout: Vec<String> = (0..parents.len())
        .map(|i| {
            format!(
                r#""o{i:02}": {{"quat": [1,0,0,0], "pos": [{}, 0.05, 0]}}"#,
                i as f64
            )
        })
        .collect();
    let text = format!(
        r#"{{"objects": [{}], "tree": {{{}}}, "layout": {{{}}}}}"#,
        objs.join(","),
        tree.join(","),
        layout.join(",")
    );
    parse_scene(&text, Path::new(".")).unwrap().scene
}

fn chain_root(parents: &[String], i: usize) -> &str {
    let mut cur = i;
    loop {
        match parents[cur].strip_prefix('o') {
            Some(k) => cur = k.parse().unwrap(),
            None => return &parents[cur],
        }
    }
}

#[test]
fn forest_groups_and_global_roots_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let parents = random_parents(20, &mut rng);
        let scene = scene_from_parents(&parents);

        let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, p) in parents.iter().enumerate() {
            if p.starts_with('o') {
                children
                    .entry(p.clone())
                    .or_default()
                    .push(format!("o{i:02}"));
            }
        }
        let groups = scene.tree.local_groups();
        let roots: BTreeSet<String> = groups.iter().map(|g| g.root_id.clone()).collect();
        assert_eq!(roots, children.keys().cloned().collect());
        for g in &groups {
            assert_eq!(g.child_ids, children[&g.root_id]);
        }
        // post-order: a group comes after every group rooted below it
        let pos: BTreeMap<&str, usize> = groups
            .iter()
            .enumerate()
            .map(|(i, g)| (g.root_id.as_str(), i))
            .collect();
        for g in &groups {
            for d in scene.tree.descendants(&g.root_id) {
                if let Some(&k) = pos.get(d) {
                    assert!(k < pos[g.root_id.as_str()]);
                }
            }
        }

        let mut expected: BTreeSet<String> = BTreeSet::new();
        for (i, p) in parents.iter().enumerate() {
            let id = format!("o{i:02}");
            let grounded = p == "ground" || p == "ground_wall";
            if (grounded || children.contains_key(&id)) && chain_root(&parents, i) != "wall" {
                expected.insert(id);
            }
        }
        assert_eq!(
            scene.tree.global_roots(),
            expected.into_iter().collect::<Vec<_>>()
        );
    }
}

#[test]
fn layouts_round_trip_byte_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let mut layout = Layout::new(Stage::Optimized);
        for i in 0..rng.random_range(1..6) {
            let q = loop {
                let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                if v.iter().map(|x| x * x).sum::<f64>() > 0.01 {
                    break UnitQuat::new(v[0], v[1], v[2], v[3]);
                }
            };
            let t = Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            layout.set(&format!("obj{i}"), Pose::new(q, t));
        }
        let first = layout_to_json(&layout);
        let back = layout_from_json(&first).unwrap();
        assert_eq!(layout_to_json(&back), first);
        for (id, p) in &layout.poses {
            let q = back.pose(id);
            assert!((q.translation - p.translation).norm() == 0.0);
            assert!(q.rotation.dot(p.rotation).abs() > 1.0 - 1e-15);
        }
    }
}

proptest! {
    #[test]
    fn stored_quaternions_are_canonical(w in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        prop_assume!(w * w + x * x + y * y + z * z > 0.01);
        let mut layout = Layout::new(Stage::Raw);
        layout.set("a", Pose::new(UnitQuat::new(w, x, y, z), Vec3::ZERO));
        let back = layout_from_json(&layout_to_json(&layout)).unwrap();
        let q = back.pose("a").rotation;
        let first = [q.w, q.x, q.y, q.z].into_iter().find(|v| *v != 0.0).unwrap();
        prop_assert!(first > 0.0);
    }
}

#[test]
fn random_forest_fixture_loads() {
    for seed in 0..5 {
        let spec = generate(
            "random_forest",
            &TemplateParams {
                objects: 20,
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let loaded = spec.build(Path::new(".")).unwrap();
        assert_eq!(loaded.scene.objects.len(), 20);
        let n_ground = loaded.scene.tree.top_level().len();
        assert_eq!(n_ground, 7);
    }
}

#[test]
fn fixtures_are_deterministic_per_seed() {
    let p = TemplateParams {
        seed: 7,
        ..Default::default()
    };
    let a = serde_json::to_string(&generate("unstable_office", &p).unwrap()).unwrap();
    let b = serde_json::to_string(&generate("unstable_office", &p).unwrap()).unwrap();
    assert_eq!(a, b);
    let c =
        serde_json::to_string(&generate("unstable_office", &TemplateParams::default()).unwrap())
            .unwrap();
    assert_ne!(a, c);
}

#[test]
fn every_template_validates() {
    for t in stablescene::fixtures::TEMPLATES {
        let spec = generate(t, &TemplateParams::default()).unwrap();
        spec.build(Path::new(".")).unwrap();
    }
    assert!(generate("sofa", &TemplateParams::default()).is_err());
}
