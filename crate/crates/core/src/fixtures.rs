//! Desk-scale scene generators with deliberate physical defects: floating
//! objects, objects sunk into their supports, overlapping neighbours and
//! wall objects clipping into furniture.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{Pose, UnitQuat, Vec3};
use crate::scene::{ObjectSpec, PoseSpec, Relation, SceneSpec, TreeEntrySpec};

pub const TEMPLATES: [&str; 5] = [
    "stack",
    "table_plant",
    "unstable_office",
    "wall_poster",
    "random_forest",
];

/// Gap left under each floating box of `stack` (m).
pub const STACK_FLOAT: f64 = 0.02;
/// Lateral offset alternated between levels of `stack` (m).
pub const STACK_SHIFT: f64 = 0.03;
/// Depth the plant of `table_plant` is sunk into the tabletop (m).
pub const PLANT_SINK: f64 = 0.03;
/// Height the office desk floats above the floor (m).
pub const DESK_FLOAT: f64 = 0.05;
/// Horizontal overlap of the two office chairs (m).
pub const CHAIR_OVERLAP: f64 = 0.04;

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateParams {
    /// Boxes in `stack`.
    pub n: usize,
    pub seed: u64,
    /// Objects in `random_forest`.
    pub objects: usize,
}

impl Default for TemplateParams {
    fn default() -> Self {
        Self {
            n: 3,
            seed: 0,
            objects: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FixtureError {
    #[error("unknown template '{0}' (expected one of: stack, table_plant, unstable_office, wall_poster, random_forest)")]
    UnknownTemplate(String),
    #[error("invalid template parameter: {0}")]
    InvalidParam(String),
}

pub fn generate(template: &str, p: &TemplateParams) -> Result<SceneSpec, FixtureError> {
    match template {
        "stack" => stack(p.n),
        "table_plant" => Ok(table_plant()),
        "unstable_office" => Ok(unstable_office(p.seed)),
        "wall_poster" => Ok(wall_poster()),
        "random_forest" => random_forest(p.objects, p.seed),
        other => Err(FixtureError::UnknownTemplate(other.to_string())),
    }
}

#[derive(Default)]
struct Builder {
    spec: Vec<ObjectSpec>,
    tree: Vec<(String, TreeEntrySpec)>,
    layout: BTreeMap<String, PoseSpec>,
}

impl Builder {
    fn add(&mut self, obj: ObjectSpec, parent: &str, relation: Relation, pose: Pose) {
        self.tree.push((
            obj.id.clone(),
            TreeEntrySpec {
                parent: parent.to_string(),
                relation,
            },
        ));
        self.layout.insert(obj.id.clone(), PoseSpec::from(&pose));
        self.spec.push(obj);
    }

    fn on(&mut self, obj: ObjectSpec, parent: &str, pos: Vec3, yaw: f64) {
        self.add(obj, parent, Relation::On, yawed(pos, yaw));
    }

    fn finish(self) -> SceneSpec {
        SceneSpec {
            objects: self.spec,
            tree: self.tree,
            layout: self.layout,
        }
    }
}

fn yawed(pos: Vec3, yaw: f64) -> Pose {
    let rot = if yaw == 0.0 {
        UnitQuat::IDENTITY
    } else {
        UnitQuat::from_axis_angle(Vec3::Y, yaw)
    };
    Pose::new(rot, pos)
}

/// Box corners centred at `c` with extents `s`.
fn cuboid(s: [f64; 3], c: [f64; 3]) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(8);
    for dx in [-0.5, 0.5] {
        for dy in [-0.5, 0.5] {
            for dz in [-0.5, 0.5] {
                out.push([c[0] + dx * s[0], c[1] + dy * s[1], c[2] + dz * s[2]]);
            }
        }
    }
    out
}

fn multi(id: &str, pieces: Vec<Vec<[f64; 3]>>) -> ObjectSpec {
    ObjectSpec {
        hulls: Some(pieces),
        box_size: None,
        ..ObjectSpec::boxed(id, [1.0, 1.0, 1.0])
    }
}

/// Four-legged table, origin at the floor centre; top surface at `h`.
fn table(id: &str, w: f64, d: f64, h: f64) -> ObjectSpec {
    let top = 0.04;
    let leg = 0.05;
    let mut pieces = vec![cuboid([w, top, d], [0.0, h - top / 2.0, 0.0])];
    for sx in [-1.0, 1.0] {
        for sz in [-1.0, 1.0] {
            pieces.push(cuboid(
                [leg, h - top, leg],
                [sx * (w - leg) / 2.0, (h - top) / 2.0, sz * (d - leg) / 2.0],
            ));
        }
    }
    multi(id, pieces)
}

/// Block seat with a backrest on the -Z side, origin at the floor centre.
fn chair(id: &str) -> ObjectSpec {
    multi(
        id,
        vec![
            cuboid([0.45, 0.45, 0.45], [0.0, 0.225, 0.0]),
            cuboid([0.45, 0.4, 0.06], [0.0, 0.65, -0.195]),
        ],
    )
}

/// Pot with foliage, origin at the pot's base centre.
fn plant(id: &str) -> ObjectSpec {
    multi(
        id,
        vec![
            cuboid([0.16, 0.16, 0.16], [0.0, 0.08, 0.0]),
            cuboid([0.24, 0.24, 0.24], [0.0, 0.28, 0.0]),
        ],
    )
}

/// `n` boxes of shrinking size stacked on the floor. Every box floats
/// `STACK_FLOAT` above its support and alternates `±STACK_SHIFT` in X.
pub fn stack(n: usize) -> Result<SceneSpec, FixtureError> {
    if n == 0 {
        return Err(FixtureError::InvalidParam("stack needs n >= 1".into()));
    }
    let mut b = Builder::default();
    let mut y = 0.0;
    let mut parent = "ground".to_string();
    for i in 0..n {
        let f = 0.8f64.powi(i as i32);
        let size = [0.6 * f, 0.3 * f, 0.6 * f];
        let id = format!("box{i}");
        let x = if i == 0 {
            0.0
        } else if i % 2 == 1 {
            STACK_SHIFT
        } else {
            -STACK_SHIFT
        };
        y += STACK_FLOAT;
        b.on(
            ObjectSpec::boxed(&id, size),
            &parent,
            Vec3::new(x, y + size[1] / 2.0, 0.0),
            0.0,
        );
        y += size[1];
        parent = id;
    }
    Ok(b.finish())
}

/// A table on the floor with a potted plant sunk `PLANT_SINK` into its top.
pub fn table_plant() -> SceneSpec {
    let mut b = Builder::default();
    b.on(table("table", 1.2, 0.8, 0.75), "ground", Vec3::ZERO, 0.0);
    b.on(
        plant("plant"),
        "table",
        Vec3::new(0.3, 0.75 - PLANT_SINK, 0.1),
        0.0,
    );
    b.finish()
}

/// An office corner: a floating desk carrying a sunk plant and a monitor,
/// two overlapping chairs and a bookshelf. `seed` jitters horizontal
/// positions by up to 1 cm.
pub fn unstable_office(seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |scale: f64| rng.random_range(-scale..=scale);
    let mut j = || Vec3::new(jitter(0.01), 0.0, jitter(0.01));
    let mut b = Builder::default();
    let desk_pos = Vec3::new(0.0, DESK_FLOAT, 0.0) + j();
    b.on(table("desk", 1.4, 0.7, 0.74), "ground", desk_pos, 0.0);
    b.on(
        plant("plant"),
        "desk",
        desk_pos + Vec3::new(0.5, 0.74 - PLANT_SINK, 0.15) + j(),
        0.0,
    );
    b.on(
        ObjectSpec::boxed("monitor", [0.5, 0.35, 0.08]),
        "desk",
        desk_pos + Vec3::new(-0.1, 0.74 + 0.175, -0.15) + j(),
        0.0,
    );
    let chair_z = 0.75;
    b.on(
        chair("chair_a"),
        "ground",
        Vec3::new(-0.25, 0.0, chair_z) + j(),
        0.0,
    );
    b.on(
        chair("chair_b"),
        "ground",
        Vec3::new(0.2 - CHAIR_OVERLAP, 0.0, chair_z) + j(),
        0.0,
    );
    b.on(
        ObjectSpec::boxed("bookshelf", [0.8, 1.6, 0.35]),
        "ground",
        Vec3::new(1.4, 0.8, -0.2) + j(),
        0.0,
    );
    b.finish()
}

/// A bookshelf against the back wall with a poster hung 1 cm into it, and
/// a ceiling lamp that clears everything.
pub fn wall_poster() -> SceneSpec {
    let mut b = Builder::default();
    b.on(
        ObjectSpec::boxed("bookshelf", [0.8, 1.6, 0.35]),
        "ground",
        Vec3::new(0.0, 0.8, 0.0),
        0.0,
    );
    b.add(
        ObjectSpec::boxed("poster", [0.6, 0.8, 0.02]),
        "wall",
        Relation::Hanging,
        Pose::from_translation(Vec3::new(0.1, 1.2, 0.175)),
    );
    b.add(
        ObjectSpec::boxed("lamp", [0.3, 0.2, 0.3]),
        "ceiling",
        Relation::Hanging,
        Pose::from_translation(Vec3::new(-1.0, 2.4, -1.0)),
    );
    b.finish()
}

/// `objects` boxes: about a third stand on a floor grid, the rest are
/// stacked onto random earlier objects with up to 1 cm of float or sink.
pub fn random_forest(objects: usize, seed: u64) -> Result<SceneSpec, FixtureError> {
    if objects == 0 {
        return Err(FixtureError::InvalidParam(
            "random_forest needs objects >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::default();
    let n_roots = objects.div_ceil(3);
    let cols = (n_roots as f64).sqrt().ceil() as usize;
    // (id, top height, footprint half extents, centre)
    let mut placed: Vec<(String, f64, f64, Vec3)> = Vec::new();
    for i in 0..objects {
        let id = format!("obj{i:03}");
        if i < n_roots {
            let s = [
                rng.random_range(0.3..0.6),
                rng.random_range(0.2..0.6),
                rng.random_range(0.3..0.6),
            ];
            let c = Vec3::new((i % cols) as f64 * 0.9, s[1] / 2.0, (i / cols) as f64 * 0.9);
            b.on(ObjectSpec::boxed(&id, s), "ground", c, 0.0);
            placed.push((id, s[1], s[0].min(s[2]) / 2.0, c));
        } else {
            let k = rng.random_range(0..placed.len());
            let (parent, top, half, pc) = placed[k].clone();
            let w = (2.0 * half * rng.random_range(0.4..0.8)).max(0.05);
            let h = rng.random_range(0.05..0.25);
            let slack = half - w / 2.0;
            let dx = rng.random_range(-slack..=slack) * 0.5;
            let dz = rng.random_range(-slack..=slack) * 0.5;
            let dy = rng.random_range(-0.01..=0.01);
            let c = Vec3::new(pc.x + dx, top + h / 2.0 + dy, pc.z + dz);
            b.on(ObjectSpec::boxed(&id, [w, h, w]), &parent, c, 0.0);
            placed.push((id, top + h, w / 2.0, Vec3::new(c.x, c.y, c.z)));
        }
    }
    Ok(b.finish())
}
