use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::kdtree::KdTree;
use super::EvalError;
use crate::geom::Vec3;
use crate::scene::{Layout, Scene};

/// Default number of surface samples per scene.
pub const DEFAULT_SAMPLES: usize = 100_000;
/// F-score distance threshold (m).
pub const FSCORE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSource {
    Sampled,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub points: Vec<Vec3>,
    pub source: PointSource,
}

impl PointSet {
    pub fn new(points: Vec<Vec3>, source: PointSource) -> Result<Self, EvalError> {
        if points.is_empty() {
            return Err(EvalError::EmptyPointSet);
        }
        Ok(Self { points, source })
    }
}

/// Area-weighted uniform samples over triangles.
pub fn sample_triangles(
    triangles: &[[Vec3; 3]],
    n: usize,
    seed: u64,
) -> Result<Vec<Vec3>, EvalError> {
    let areas: Vec<f64> = triangles
        .iter()
        .map(|[a, b, c]| 0.5 * (*b - *a).cross(*c - *a).norm())
        .collect();
    let dist = WeightedIndex::new(&areas).map_err(|_| EvalError::EmptyPointSet)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let [a, b, c] = triangles[dist.sample(&mut rng)];
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            let s = r1.sqrt();
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect())
}

/// World-space triangles of every hull of every object at `layout`.
pub fn scene_triangles(scene: &Scene, layout: &Layout) -> Vec<[Vec3; 3]> {
    let mut out = Vec::new();
    for o in &scene.objects {
        let pose = layout.pose(&o.id);
        for h in &o.hulls {
            let w: Vec<Vec3> = h
                .vertices()
                .iter()
                .map(|v| pose.transform_point(*v))
                .collect();
            out.extend(h.faces().iter().map(|f| f.map(|i| w[i])));
        }
    }
    out
}

/// Samples `n` points uniformly over the surfaces of the scene's hulls.
pub fn sample_scene(
    scene: &Scene,
    layout: &Layout,
    n: usize,
    seed: u64,
) -> Result<PointSet, EvalError> {
    PointSet::new(
        sample_triangles(&scene_triangles(scene, layout), n, seed)?,
        PointSource::Sampled,
    )
}

/// Squared distance from each query to its nearest neighbor in `tree`.
pub fn nearest_sq_distances(tree: &KdTree, queries: &[Vec3]) -> Vec<f64> {
    queries
        .par_iter()
        .map(|q| tree.nearest(*q).map_or(f64::INFINITY, |(_, d)| d))
        .collect()
}

/// Symmetric Chamfer distance: mean squared nearest-neighbor distance from
/// `a` to `b` plus the same from `b` to `a`.
pub fn chamfer(a: &PointSet, b: &PointSet) -> f64 {
    let ta = KdTree::new(&a.points);
    let tb = KdTree::new(&b.points);
    mean(&nearest_sq_distances(&tb, &a.points)) + mean(&nearest_sq_distances(&ta, &b.points))
}

/// Harmonic mean of precision (fraction of `pred` within `thresh` of `gt`)
/// and recall (fraction of `gt` within `thresh` of `pred`).
pub fn fscore(pred: &PointSet, gt: &PointSet, thresh: f64) -> f64 {
    let tp = KdTree::new(&pred.points);
    let tg = KdTree::new(&gt.points);
    let t2 = thresh * thresh;
    let frac = |d: Vec<f64>| d.iter().filter(|&&x| x <= t2).count() as f64 / d.len() as f64;
    let precision = frac(nearest_sq_distances(&tg, &pred.points));
    let recall = frac(nearest_sq_distances(&tp, &gt.points));
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Parses whitespace-separated `x y z` lines; blank lines and `#` comments
/// are skipped, extra columns ignored.
pub fn parse_xyz(text: &str) -> Result<Vec<Vec3>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let c: Vec<f64> = line
            .split(|ch: char| ch.is_whitespace() || ch == ',')
            .filter(|s| !s.is_empty())
            .take(3)
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        if c.len() < 3 {
            return Err(format!("line {}: expected x y z", lineno + 1));
        }
        out.push(Vec3::new(c[0], c[1], c[2]));
    }
    Ok(out)
}
