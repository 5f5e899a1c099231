use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::{aabb_of, hulls_intersect, Aabb, ConvexHull, Pose};

/// A rigid object with convex collision pieces in metric body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: String,
    pub name: String,
    /// Convex pieces, already scaled to meters.
    pub hulls: Vec<ConvexHull>,
    /// Uniform scale that was applied to the source geometry at load time.
    pub scale: f64,
    pub mass: f64,
    pub movable: bool,
}

impl SceneObject {
    pub fn total_volume(&self) -> f64 {
        self.hulls.iter().map(ConvexHull::volume).sum()
    }

    pub fn aabb(&self, pose: &Pose) -> Aabb {
        self.hulls
            .iter()
            .map(|h| aabb_of(h, pose))
            .reduce(|a, b| a.union(&b))
            .expect("object has at least one hull")
    }

    /// World-space vertices of every piece.
    pub fn world_vertices<'a>(
        &'a self,
        pose: &'a Pose,
    ) -> impl Iterator<Item = crate::geom::Vec3> + 'a {
        self.hulls
            .iter()
            .flat_map(move |h| h.vertices().iter().map(move |v| pose.transform_point(*v)))
    }
}

/// True when any piece of `a` intersects any piece of `b` beyond contact tolerance.
pub fn objects_intersect(a: &SceneObject, pose_a: &Pose, b: &SceneObject, pose_b: &Pose) -> bool {
    if !a.aabb(pose_a).overlaps(&b.aabb(pose_b)) {
        return false;
    }
    a.hulls.iter().any(|ha| {
        b.hulls
            .iter()
            .any(|hb| hulls_intersect(ha, pose_a, hb, pose_b))
    })
}

/// Relation of a child to its support parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    On,
    Inside,
    Hanging,
    Attached,
}

impl Relation {
    /// `On` and `Inside` children rest on their parent under gravity.
    pub fn is_supported(self) -> bool {
        matches!(self, Relation::On | Relation::Inside)
    }
}

/// Parent of a tree node: one of the four canonical roots or another object.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SupportKind {
    Ground,
    Wall,
    Ceiling,
    GroundWall,
    Object(String),
}

impl SupportKind {
    pub fn parse(s: &str) -> SupportKind {
        match s {
            "ground" => SupportKind::Ground,
            "wall" => SupportKind::Wall,
            "ceiling" => SupportKind::Ceiling,
            "ground_wall" => SupportKind::GroundWall,
            other => SupportKind::Object(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            SupportKind::Ground => "ground",
            SupportKind::Wall => "wall",
            SupportKind::Ceiling => "ceiling",
            SupportKind::GroundWall => "ground_wall",
            SupportKind::Object(id) => id,
        }
    }

    pub fn is_canonical(&self) -> bool {
        !matches!(self, SupportKind::Object(_))
    }

    pub fn object_id(&self) -> Option<&str> {
        match self {
            SupportKind::Object(id) => Some(id),
            _ => None,
        }
    }
}

impl fmt::Display for SupportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportNode {
    pub kind: SupportKind,
    pub relation: Relation,
}

impl SupportNode {
    pub fn new(kind: SupportKind, relation: Relation) -> Self {
        Self { kind, relation }
    }
}

/// Pipeline stage a layout belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    Canonical,
    Optimized,
}

/// A pose for every object, keyed by id (iterates in lexicographic order).
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub poses: BTreeMap<String, Pose>,
    pub stage: Stage,
}

impl Layout {
    pub fn new(stage: Stage) -> Self {
        Self {
            poses: BTreeMap::new(),
            stage,
        }
    }

    pub fn pose(&self, id: &str) -> &Pose {
        self.poses
            .get(id)
            .unwrap_or_else(|| panic!("layout has no pose for '{id}'"))
    }

    pub fn set(&mut self, id: &str, pose: Pose) {
        self.poses.insert(id.to_string(), pose);
    }

    pub fn with_stage(mut self, stage: Stage) -> Self {
        self.stage = stage;
        self
    }
}

/// A non-canonical node and its direct children, optimized together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalGroup {
    pub root_id: String,
    pub child_ids: Vec<String>,
}

/// Validated objects plus their support tree.
#[derive(Debug, Clone)]
pub struct Scene {
    /// Objects sorted by id.
    pub objects: Vec<SceneObject>,
    pub tree: super::tree::SceneTree,
}

impl Scene {
    pub fn object(&self, id: &str) -> &SceneObject {
        self.try_object(id)
            .unwrap_or_else(|| panic!("unknown object '{id}'"))
    }

    pub fn try_object(&self, id: &str) -> Option<&SceneObject> {
        self.objects
            .binary_search_by(|o| o.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.objects[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.objects.iter().map(|o| o.id.as_str())
    }

    /// Objects that never move in simulation: non-movable objects, and those
    /// hanging on or attached to a wall or ceiling.
    pub fn is_fixed(&self, id: &str) -> bool {
        !self.object(id).movable || self.tree.is_wall_mounted(id)
    }

    /// Unordered pairs of distinct objects whose hulls intersect at `layout`.
    pub fn intersecting_pairs(&self, layout: &Layout, ids: &[&str]) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                if objects_intersect(
                    self.object(a),
                    layout.pose(a),
                    self.object(b),
                    layout.pose(b),
                ) {
                    out.push((a.to_string(), b.to_string()));
                }
            }
        }
        out
    }
}
