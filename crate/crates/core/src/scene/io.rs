use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geom::{convex_hull, ConvexHull, Pose, UnitQuat, Vec3};

use super::model::{Layout, Relation, Scene, SceneObject, Stage, SupportKind, SupportNode};
use super::tree::SceneTree;
use super::SceneError;

/// Density (kg/m³) used to derive a mass when the file gives none.
pub const DEFAULT_DENSITY: f64 = 400.0;

/// Quaternions this close to unit norm are taken verbatim; others (up to
/// 1e-3 off) are renormalized.
const QUAT_EXACT_TOLERANCE: f64 = 1e-9;
const QUAT_LOAD_TOLERANCE: f64 = 1e-3;

/// On-disk scene description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub objects: Vec<ObjectSpec>,
    /// Support tree entries in file order; duplicates are kept so that
    /// validation can report them.
    #[serde(serialize_with = "ser_entries", deserialize_with = "de_entries")]
    pub tree: Vec<(String, TreeEntrySpec)>,
    pub layout: BTreeMap<String, PoseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// OBJ file, relative to the scene file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
    /// Box extents, centered on the body origin.
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub box_size: Option<[f64; 3]>,
    /// Precomputed convex decomposition; each piece is a vertex list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hulls: Option<Vec<Vec<[f64; 3]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub movable: Option<bool>,
}

impl ObjectSpec {
    pub fn boxed(id: &str, size: [f64; 3]) -> Self {
        Self {
            id: id.to_string(),
            name: None,
            mesh: None,
            box_size: Some(size),
            hulls: None,
            scale: None,
            mass: None,
            movable: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeEntrySpec {
    pub parent: String,
    #[serde(default = "default_relation")]
    pub relation: Relation,
}

fn default_relation() -> Relation {
    Relation::On
}

/// A pose as stored on disk: quaternion `[w, x, y, z]` and position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub quat: [f64; 4],
    pub pos: [f64; 3],
}

impl From<&Pose> for PoseSpec {
    fn from(p: &Pose) -> Self {
        let c = p.canonical();
        PoseSpec {
            quat: c.rotation.to_array(),
            pos: c.translation.to_array().map(|v| v + 0.0),
        }
    }
}

impl PoseSpec {
    pub fn to_pose(&self, id: &str) -> Result<Pose, SceneError> {
        let bad = |field: &str, msg: String| SceneError::InvalidField {
            id: id.to_string(),
            field: field.to_string(),
            msg,
        };
        let [w, x, y, z] = self.quat;
        let pos = Vec3::new(self.pos[0], self.pos[1], self.pos[2]);
        if !pos.is_finite() {
            return Err(bad("pos", "non-finite position".into()));
        }
        if !self.quat.iter().all(|v| v.is_finite()) {
            return Err(bad("quat", "non-finite quaternion".into()));
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        let q = if (n - 1.0).abs() <= QUAT_EXACT_TOLERANCE {
            UnitQuat::new_unchecked(w, x, y, z)
        } else if (n - 1.0).abs() <= QUAT_LOAD_TOLERANCE {
            UnitQuat::new(w, x, y, z)
        } else {
            return Err(bad("quat", format!("quaternion norm {n} is not 1")));
        };
        Ok(Pose::new(q, pos))
    }
}

fn ser_entries<S: Serializer>(v: &[(String, TreeEntrySpec)], s: S) -> Result<S::Ok, S::Error> {
    let mut m = s.serialize_map(Some(v.len()))?;
    for (k, e) in v {
        m.serialize_entry(k, e)?;
    }
    m.end()
}

fn de_entries<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(String, TreeEntrySpec)>, D::Error> {
    struct EntriesVisitor;
    impl<'de> Visitor<'de> for EntriesVisitor {
        type Value = Vec<(String, TreeEntrySpec)>;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a map from object id to {parent, relation}")
        }
        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some(entry) = map.next_entry::<String, TreeEntrySpec>()? {
                out.push(entry);
            }
            Ok(out)
        }
    }
    d.deserialize_map(EntriesVisitor)
}

/// A validated scene and the layout it was authored with.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub scene: Scene,
    pub raw_layout: Layout,
}

/// Reads and validates a scene file; mesh paths resolve relative to it.
pub fn load_scene(path: &Path) -> Result<LoadedScene, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let spec: SceneSpec = serde_json::from_str(&text)
        .map_err(|e| SceneError::Parse(format!("{}: {e}", path.display())))?;
    build_scene(&spec, base)
}

/// Parses scene JSON; `base` is the directory mesh paths are relative to.
pub fn parse_scene(text: &str, base: &Path) -> Result<LoadedScene, SceneError> {
    let spec: SceneSpec =
        serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
    build_scene(&spec, base)
}

impl SceneSpec {
    pub fn build(&self, base: &Path) -> Result<LoadedScene, SceneError> {
        build_scene(self, base)
    }
}

fn build_scene(spec: &SceneSpec, base: &Path) -> Result<LoadedScene, SceneError> {
    let mut objects = Vec::with_capacity(spec.objects.len());
    let mut ids = BTreeSet::new();
    for o in &spec.objects {
        if o.id.is_empty() {
            return Err(SceneError::InvalidField {
                id: String::new(),
                field: "id".into(),
                msg: "empty id".into(),
            });
        }
        if SupportKind::parse(&o.id).is_canonical() {
            return Err(SceneError::InvalidField {
                id: o.id.clone(),
                field: "id".into(),
                msg: "id collides with a canonical support node".into(),
            });
        }
        if !ids.insert(o.id.clone()) {
            return Err(SceneError::DuplicateId { id: o.id.clone() });
        }
        objects.push(build_object(o, base)?);
    }
    objects.sort_by(|a, b| a.id.cmp(&b.id));

    let entries = spec
        .tree
        .iter()
        .map(|(id, e)| {
            (
                id.clone(),
                SupportNode::new(SupportKind::parse(&e.parent), e.relation),
            )
        })
        .collect();
    let tree = SceneTree::from_entries(entries, &ids)?;

    let mut raw_layout = Layout::new(Stage::Raw);
    for (id, p) in &spec.layout {
        if !ids.contains(id) {
            return Err(SceneError::UnknownObject { id: id.clone() });
        }
        raw_layout.set(id, p.to_pose(id)?);
    }
    let scene = Scene { objects, tree };
    scene.check_layout(&raw_layout)?;
    Ok(LoadedScene { scene, raw_layout })
}

fn build_object(o: &ObjectSpec, base: &Path) -> Result<SceneObject, SceneError> {
    let bad = |field: &str, msg: &str| SceneError::InvalidField {
        id: o.id.clone(),
        field: field.to_string(),
        msg: msg.to_string(),
    };
    let geom_err = |source| SceneError::Geometry {
        id: o.id.clone(),
        source,
    };
    let scale = o.scale.unwrap_or(1.0);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(bad("scale", "must be a positive finite number"));
    }
    let to_vec = |p: &[f64; 3]| Vec3::new(p[0], p[1], p[2]) * scale;

    let hulls: Vec<ConvexHull> = if let Some(pieces) = &o.hulls {
        if pieces.is_empty() {
            return Err(bad("hulls", "empty hull list"));
        }
        pieces
            .iter()
            .map(|pts| convex_hull(&pts.iter().map(to_vec).collect::<Vec<_>>()).map_err(geom_err))
            .collect::<Result<_, _>>()?
    } else if let Some(mesh) = &o.mesh {
        let path: PathBuf = base.join(mesh);
        let text = std::fs::read_to_string(&path).map_err(|_| SceneError::MissingMesh {
            id: o.id.clone(),
            path: path.clone(),
        })?;
        let pts = parse_obj(&text).map_err(|msg| bad("mesh", &msg))?;
        let pts: Vec<Vec3> = pts.iter().map(|p| *p * scale).collect();
        vec![convex_hull(&pts).map_err(geom_err)?]
    } else if let Some(size) = &o.box_size {
        if !size.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(bad("box", "extents must be positive"));
        }
        vec![ConvexHull::cuboid(to_vec(size)).map_err(geom_err)?]
    } else {
        return Err(bad("mesh", "object needs one of 'mesh', 'box' or 'hulls'"));
    };

    let volume: f64 = hulls.iter().map(ConvexHull::volume).sum();
    let mass = match o.mass {
        Some(m) if m.is_finite() && m > 0.0 => m,
        Some(_) => return Err(bad("mass", "must be a positive finite number")),
        None => DEFAULT_DENSITY * volume,
    };
    Ok(SceneObject {
        id: o.id.clone(),
        name: o.name.clone().unwrap_or_else(|| o.id.clone()),
        hulls,
        scale,
        mass,
        movable: o.movable.unwrap_or(true),
    })
}

/// Vertices and triangles of a Wavefront OBJ; only `v` and triangular `f`
/// records are read, everything else is ignored.
pub fn parse_obj_mesh(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>), String> {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| format!("line {}: {e}", lineno + 1))?;
                if c.len() != 3 || !c.iter().all(|v| v.is_finite()) {
                    return Err(format!(
                        "line {}: expected three finite coordinates",
                        lineno + 1
                    ));
                }
                verts.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<&str> = it.collect();
                if idx.len() != 3 {
                    return Err(format!(
                        "line {}: only triangular faces are supported",
                        lineno + 1
                    ));
                }
                let mut tri = [0usize; 3];
                for (slot, tok) in tri.iter_mut().zip(idx) {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| format!("line {}: bad face index '{tok}'", lineno + 1))?;
                    let n = verts.len() as i64;
                    let resolved = if i > 0 { i - 1 } else { n + i };
                    if resolved < 0 || resolved >= n {
                        return Err(format!("line {}: face index {i} out of range", lineno + 1));
                    }
                    *slot = resolved as usize;
                }
                faces.push(tri);
            }
            _ => {}
        }
    }
    Ok((verts, faces))
}

/// Vertices of a Wavefront OBJ. When faces are present, only vertices they
/// reference are returned.
pub fn parse_obj(text: &str) -> Result<Vec<Vec3>, String> {
    let (verts, faces) = parse_obj_mesh(text)?;
    if faces.is_empty() {
        return Ok(verts);
    }
    let used: BTreeSet<usize> = faces.iter().flatten().copied().collect();
    Ok(used.into_iter().map(|i| verts[i]).collect())
}

impl Scene {
    /// Checks that `layout` has a finite pose for exactly the scene's objects.
    pub fn check_layout(&self, layout: &Layout) -> Result<(), SceneError> {
        for o in &self.objects {
            match layout.poses.get(&o.id) {
                None => return Err(SceneError::MissingPose { id: o.id.clone() }),
                Some(p) if !p.is_finite() => {
                    return Err(SceneError::InvalidField {
                        id: o.id.clone(),
                        field: "layout".into(),
                        msg: "non-finite pose".into(),
                    })
                }
                Some(_) => {}
            }
        }
        if let Some(id) = layout.poses.keys().find(|id| self.try_object(id).is_none()) {
            return Err(SceneError::UnknownObject { id: id.clone() });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    stage: Stage,
    layout: BTreeMap<String, PoseSpec>,
}

/// Layout file contents: canonical quaternions, 17 significant digits.
pub fn layout_to_json(layout: &Layout) -> String {
    let file = LayoutFile {
        stage: layout.stage,
        layout: layout
            .poses
            .iter()
            .map(|(k, p)| (k.clone(), PoseSpec::from(p)))
            .collect(),
    };
    crate::json::to_string(&file).expect("layout serializes")
}

pub fn layout_from_json(text: &str) -> Result<Layout, SceneError> {
    let file: LayoutFile =
        serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
    let mut layout = Layout::new(file.stage);
    for (id, p) in &file.layout {
        layout.set(id, p.to_pose(id)?);
    }
    Ok(layout)
}

pub fn save_layout(layout: &Layout, path: &Path) -> Result<(), SceneError> {
    std::fs::write(path, layout_to_json(layout)).map_err(|source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_layout(path: &Path) -> Result<Layout, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    layout_from_json(&text)
}
