//! Physical and geometric layout metrics.

mod icp;
mod kdtree;
mod points;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Aabb, Vec3};
use crate::scene::{parse_obj_mesh, Layout, PoseSpec, Scene};
use crate::sim::{is_stable, SimTrace, STABLE_POS_THRESHOLD, STABLE_ROT_THRESHOLD};

pub use icp::{icp_align, kabsch, IcpResult, ICP_MAX_ITERS, ICP_TOLERANCE};
pub use kdtree::KdTree;
pub use points::{
    chamfer, fscore, nearest_sq_distances, parse_xyz, sample_scene, sample_triangles,
    scene_triangles, PointSet, PointSource, DEFAULT_SAMPLES, FSCORE_THRESHOLD,
};

pub const CHAMFER_CONVENTION: &str =
    "sum over both directions of the mean squared nearest-neighbor distance (m^2)";
pub const COLLISION_CONVENTION: &str =
    "percent of objects in at least one intersecting pair at the evaluated layout";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("no boxes to compare for B-IoU")]
    EmptyCorrespondence,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed ground truth {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysReport {
    /// Percent of objects involved in at least one intersecting pair.
    pub collision_rate: f64,
    /// Percent of objects that pass the stability test.
    pub stable_rate: f64,
    /// Mean final-vs-initial displacement over dynamic objects (m).
    pub pos_drift: f64,
    /// Mean over dynamic objects of the peak linear speed (m/s).
    pub peak_lin_vel: f64,
    /// Mean over dynamic objects of the peak angular speed (rad/s).
    pub peak_ang_vel: f64,
    pub n_objects: usize,
    pub n_dynamic: usize,
    pub intersecting_pairs: Vec<(String, String)>,
    pub unstable: Vec<String>,
    pub collision_convention: &'static str,
}

/// Metrics of a settling rollout started from `layout`.
pub fn phys_metrics(scene: &Scene, layout: &Layout, trace: &SimTrace) -> PhysReport {
    let ids: Vec<&str> = trace.initial.keys().map(String::as_str).collect();
    let pairs = scene.intersecting_pairs(layout, &ids);
    let colliding: std::collections::BTreeSet<&str> = pairs
        .iter()
        .flat_map(|(a, b)| [a.as_str(), b.as_str()])
        .collect();
    let stable = is_stable(trace, STABLE_POS_THRESHOLD, STABLE_ROT_THRESHOLD);
    let unstable: Vec<String> = stable
        .iter()
        .filter(|(_, ok)| !**ok)
        .map(|(id, _)| id.clone())
        .collect();
    let n = ids.len();
    let pct = |k: usize| {
        if n == 0 {
            0.0
        } else {
            100.0 * k as f64 / n as f64
        }
    };

    let dynamic: Vec<&str> = trace.dynamic_ids().collect();
    let mean = |f: &dyn Fn(&str) -> f64| {
        if dynamic.is_empty() {
            0.0
        } else {
            dynamic.iter().map(|id| f(id)).sum::<f64>() / dynamic.len() as f64
        }
    };
    let pos_drift =
        mean(&|id| (trace.final_[id].pose.translation - trace.initial[id].pose.translation).norm());
    PhysReport {
        collision_rate: pct(colliding.len()),
        stable_rate: pct(n - unstable.len()),
        pos_drift,
        peak_lin_vel: mean(&|id| trace.peak_lin_vel[id]),
        peak_ang_vel: mean(&|id| trace.peak_ang_vel[id]),
        n_objects: n,
        n_dynamic: dynamic.len(),
        intersecting_pairs: pairs,
        unstable,
        collision_convention: COLLISION_CONVENTION,
    }
}

/// World AABB of every object at `layout`, keyed by id.
pub fn object_boxes(scene: &Scene, layout: &Layout) -> BTreeMap<String, Aabb> {
    scene
        .objects
        .iter()
        .map(|o| (o.id.clone(), o.aabb(layout.pose(&o.id))))
        .collect()
}

/// Mean AABB IoU over ids present on both sides; when no id matches, the
/// IoU of the two whole-scene boxes.
pub fn biou_boxes(
    a: &BTreeMap<String, Aabb>,
    b: &BTreeMap<String, Aabb>,
) -> Result<f64, EvalError> {
    let matched: Vec<f64> = a
        .iter()
        .filter_map(|(id, ba)| b.get(id).map(|bb| ba.iou(bb)))
        .collect();
    if !matched.is_empty() {
        return Ok(matched.iter().sum::<f64>() / matched.len() as f64);
    }
    let whole = |m: &BTreeMap<String, Aabb>| m.values().copied().reduce(|x, y| x.union(&y));
    match (whole(a), whole(b)) {
        (Some(x), Some(y)) => Ok(x.iou(&y)),
        _ => Err(EvalError::EmptyCorrespondence),
    }
}

pub fn biou(
    scene_a: &Scene,
    layout_a: &Layout,
    scene_b: &Scene,
    layout_b: &Layout,
) -> Result<f64, EvalError> {
    biou_boxes(
        &object_boxes(scene_a, layout_a),
        &object_boxes(scene_b, layout_b),
    )
}

/// Reference geometry for the geometric metrics.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub points: PointSet,
    /// Per-object boxes when the reference is a scene; a single unnamed
    /// box otherwise.
    pub boxes: BTreeMap<String, Aabb>,
}

impl GroundTruth {
    pub fn from_scene(
        scene: &Scene,
        layout: &Layout,
        samples: usize,
        seed: u64,
    ) -> Result<Self, EvalError> {
        Ok(Self {
            points: sample_scene(scene, layout, samples, seed)?,
            boxes: object_boxes(scene, layout),
        })
    }

    /// Reads an OBJ mesh (surface-sampled) or an `x y z` point list.
    pub fn from_file(path: &Path, samples: usize, seed: u64) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |msg: String| EvalError::Parse {
            path: path.to_path_buf(),
            msg,
        };
        let is_obj = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("obj"));
        let (points, extent) = if is_obj {
            let (verts, faces) = parse_obj_mesh(&text).map_err(parse_err)?;
            if faces.is_empty() {
                return Err(parse_err("mesh has no faces".into()));
            }
            let tris: Vec<[Vec3; 3]> = faces.iter().map(|f| f.map(|i| verts[i])).collect();
            let used = faces.iter().flatten().map(|&i| verts[i]);
            (
                sample_triangles(&tris, samples, seed)?,
                Aabb::from_points(used),
            )
        } else {
            let pts = parse_xyz(&text).map_err(parse_err)?;
            let extent = Aabb::from_points(pts.iter().copied());
            (pts, extent)
        };
        let extent = extent.ok_or(EvalError::EmptyPointSet)?;
        Ok(Self {
            points: PointSet::new(points, PointSource::External)?,
            boxes: BTreeMap::from([(String::new(), extent)]),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoConfig {
    pub samples: usize,
    pub seed: u64,
    pub fscore_threshold: f64,
    pub icp_max_iters: usize,
    pub icp_tolerance: f64,
}

impl GeoConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.samples == 0 {
            return Err("eval samples must be >= 1".into());
        }
        if !(self.fscore_threshold.is_finite() && self.fscore_threshold > 0.0) {
            return Err("eval fscore_threshold must be > 0".into());
        }
        if !(self.icp_tolerance.is_finite() && self.icp_tolerance >= 0.0) {
            return Err("eval icp_tolerance must be >= 0".into());
        }
        Ok(())
    }
}

impl Default for GeoConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            fscore_threshold: FSCORE_THRESHOLD,
            icp_max_iters: ICP_MAX_ITERS,
            icp_tolerance: ICP_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeoReport {
    pub chamfer: f64,
    pub fscore: f64,
    pub fscore_threshold: f64,
    pub biou: f64,
    /// Rigid transform applied to the prediction before scoring.
    pub icp_transform: PoseSpec,
    pub icp_iterations: usize,
    pub icp_rms: f64,
    pub pred_points: usize,
    pub gt_points: usize,
    pub gt_source: PointSource,
    pub chamfer_convention: &'static str,
}

/// Samples the prediction, aligns it to the reference with ICP and scores
/// the aligned result.
pub fn evaluate_geometry(
    scene: &Scene,
    layout: &Layout,
    gt: &GroundTruth,
    cfg: &GeoConfig,
) -> Result<GeoReport, EvalError> {
    let pred = sample_scene(scene, layout, cfg.samples, cfg.seed)?;
    let icp = icp_align(
        &pred.points,
        &gt.points.points,
        cfg.icp_max_iters,
        cfg.icp_tolerance,
    );
    let aligned = PointSet::new(
        pred.points
            .iter()
            .map(|p| icp.transform.transform_point(*p))
            .collect(),
        PointSource::Sampled,
    )?;
    let mut moved = layout.clone();
    for (id, pose) in &layout.poses {
        moved.set(id, icp.transform.compose(pose));
    }
    Ok(GeoReport {
        chamfer: chamfer(&aligned, &gt.points),
        fscore: fscore(&aligned, &gt.points, cfg.fscore_threshold),
        fscore_threshold: cfg.fscore_threshold,
        biou: biou_boxes(&object_boxes(scene, &moved), &gt.boxes)?,
        icp_transform: PoseSpec::from(&icp.transform),
        icp_iterations: icp.iterations,
        icp_rms: icp.final_rms(),
        pred_points: aligned.points.len(),
        gt_points: gt.points.points.len(),
        gt_source: gt.points.source,
        chamfer_convention: CHAMFER_CONVENTION,
    })
}

/// Contents of a metric report file.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport<C: Serialize> {
    pub physical: Option<PhysReport>,
    pub geometric: Option<GeoReport>,
    pub config: C,
}
