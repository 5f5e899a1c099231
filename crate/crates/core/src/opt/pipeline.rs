use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cem::{cem_minimize, CemRun, IterationLog, IterationSamples};
use super::{
    apply_adjustment, energy_layout, energy_pen, energy_stab, energy_vel, evaluate_candidate,
    CemConfig, EnergyReport, EnergyWeights, OptError,
};
use crate::canon::{canonicalize, UpEstimate};
use crate::eval::{phys_metrics, PhysReport};
use crate::geom::{Aabb, Vec3};
use crate::scene::{Layout, PoseSpec, Scene, Stage, SupportKind};
use crate::sim::{SimConfig, SimScene};

/// Wall placement step along the plane normal (m).
pub const WALL_STEP: f64 = 0.001;
const WALL_MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Evaluation threads; 0 picks one per core.
    pub workers: usize,
    pub sim: SimConfig,
    pub cem: CemConfig,
    pub energy: EnergyWeights,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        self.sim
            .validate()
            .map_err(|e| OptError::InvalidConfig(e.to_string()))?;
        self.cem.validate()?;
        self.energy.validate()
    }
}

/// Shared state for scoring candidates: simulator geometry, the worker pool
/// and the energy settings.
pub struct Evaluator<'a> {
    pub sim: SimScene<'a>,
    pool: rayon::ThreadPool,
    pub weights: EnergyWeights,
    pub sim_cfg: SimConfig,
    pub cem: CemConfig,
    pub seed: u64,
}

impl<'a> Evaluator<'a> {
    pub fn new(scene: &'a Scene, cfg: &PipelineConfig) -> Result<Self, OptError> {
        cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| OptError::InvalidConfig(format!("worker pool: {e}")))?;
        Ok(Self {
            sim: SimScene::new(scene),
            pool,
            weights: cfg.energy,
            sim_cfg: cfg.sim.clone(),
            cem: cfg.cem,
            seed: cfg.seed,
        })
    }

    pub fn scene(&self) -> &'a Scene {
        self.sim.scene()
    }

    /// Scores candidates concurrently; results keep candidate order.
    pub fn evaluate_batch(
        &self,
        candidates: &[Layout],
        reference: &Layout,
        members: &[&str],
        fixed: &BTreeSet<String>,
    ) -> Vec<EnergyReport> {
        self.pool.install(|| {
            candidates
                .par_iter()
                .map(|c| {
                    evaluate_candidate(
                        &self.sim,
                        c,
                        reference,
                        Some(members),
                        fixed,
                        &self.weights,
                        &self.sim_cfg,
                    )
                })
                .collect()
        })
    }

    /// CEM over adjustments of `opt_ids` applied to `base`. Returns the
    /// lowest-energy candidate layout ever evaluated.
    #[allow(clippy::too_many_arguments)]
    pub fn cem_optimize(
        &self,
        base: &Layout,
        reference: &Layout,
        opt_ids: &[&str],
        members: &[&str],
        fixed: &BTreeSet<String>,
        tag: &str,
        observer: &mut dyn FnMut(&IterationSamples),
    ) -> Result<(Layout, CemRun<EnergyReport>), (usize, usize)> {
        let scene = self.scene();
        let sigma0 = self.cem.sigma0(opt_ids.len());
        let run = cem_minimize(
            &sigma0,
            &self.cem,
            self.seed,
            tag,
            |xs: &[Vec<f64>]| {
                let cands: Vec<Layout> = xs
                    .iter()
                    .map(|x| apply_adjustment(scene, base, opt_ids, x))
                    .collect();
                self.evaluate_batch(&cands, reference, members, fixed)
            },
            |s: &IterationSamples| {
                log::debug!(
                    "{tag} ep {} it {}: best {:.6} (so far {:.6}), {} diverged",
                    s.log.episode,
                    s.log.iteration,
                    s.log.iteration_best,
                    s.log.best_so_far,
                    s.log.n_diverged
                );
                observer(s)
            },
        )
        .map_err(|e| (e.episode, e.iteration))?;
        Ok((apply_adjustment(scene, base, opt_ids, &run.best), run))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    /// Group root for local runs, `global` otherwise.
    pub label: String,
    pub opt_ids: Vec<String>,
    pub sim_ids: Vec<String>,
    pub best_energy: EnergyReport,
    /// Episode, iteration and candidate index of the best candidate.
    pub best_at: (usize, usize, usize),
    pub history: Vec<IterationLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WallMove {
    pub id: String,
    pub plane: &'static str,
    pub steps: usize,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: &'static str,
    pub runs: Vec<RunReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub wall_moves: Vec<WallMove>,
    pub layout: BTreeMap<String, PoseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptReport {
    pub seed: u64,
    pub up: UpEstimate,
    pub canonical: BTreeMap<String, PoseSpec>,
    pub stages: Vec<StageReport>,
    pub final_layout: BTreeMap<String, PoseSpec>,
    /// Energy of the final layout against the canonical one.
    pub final_energy: EnergyReport,
    pub physical: PhysReport,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub canonical: Layout,
    pub after_local: Layout,
    pub after_global: Layout,
    pub final_layout: Layout,
    pub report: OptReport,
}

fn pose_map(l: &Layout) -> BTreeMap<String, PoseSpec> {
    l.poses
        .iter()
        .map(|(k, p)| (k.clone(), PoseSpec::from(p)))
        .collect()
}

fn run_report(
    label: &str,
    opt_ids: &[&str],
    members: &[&str],
    run: CemRun<EnergyReport>,
) -> RunReport {
    RunReport {
        label: label.to_string(),
        opt_ids: opt_ids.iter().map(|s| s.to_string()).collect(),
        sim_ids: members.iter().map(|s| s.to_string()).collect(),
        best_energy: run.best_result,
        best_at: run.best_at,
        history: run.history,
    }
}

/// Optimizes every local group in post-order with the group root held in
/// place; each result is written back before the parent's group runs.
pub fn optimize_local_groups(
    ev: &Evaluator,
    cano: &Layout,
) -> Result<(Layout, Vec<RunReport>), OptError> {
    let scene = ev.scene();
    let mut working = cano.clone();
    let mut runs = Vec::new();
    for group in scene.tree.local_groups() {
        let root = group.root_id.as_str();
        let opt_ids: Vec<&str> = group
            .child_ids
            .iter()
            .map(String::as_str)
            .filter(|c| !scene.is_fixed(c))
            .collect();
        if opt_ids.is_empty() {
            continue;
        }
        let mut members = vec![root];
        members.extend(scene.tree.descendants(root));
        let fixed = BTreeSet::from([root.to_string()]);
        log::info!("local group '{root}': optimizing {opt_ids:?}");
        let (best, run) = ev
            .cem_optimize(
                &working,
                cano,
                &opt_ids,
                &members,
                &fixed,
                &format!("local:{root}"),
                &mut |_| {},
            )
            .map_err(|(episode, iteration)| OptError::Failed {
                stage: "local",
                group: Some(root.to_string()),
                episode,
                iteration,
            })?;
        working = best;
        runs.push(run_report(root, &opt_ids, &members, run));
    }
    Ok((working, runs))
}

/// Movable global roots that have no movable global-root ancestor.
pub fn global_opt_ids(scene: &Scene) -> Vec<String> {
    let roots: BTreeSet<String> = scene
        .tree
        .global_roots()
        .into_iter()
        .filter(|r| !scene.is_fixed(r))
        .collect();
    roots
        .iter()
        .filter(|r| {
            let mut cur = r.as_str();
            while let SupportKind::Object(p) = &scene.tree.parent(cur).kind {
                if roots.contains(p) {
                    return false;
                }
                cur = p;
            }
            true
        })
        .cloned()
        .collect()
}

/// Objects that take part in the global stage: everything outside wall and
/// ceiling subtrees.
fn floor_objects(scene: &Scene) -> Vec<&str> {
    scene
        .ids()
        .filter(|id| !scene.tree.is_wall_rooted(id))
        .collect()
}

/// Moves each global root (and rigidly its subtree) to minimize the energy
/// of the whole floor-standing scene.
pub fn optimize_global(
    ev: &Evaluator,
    working: &Layout,
    cano: &Layout,
) -> Result<(Layout, Vec<RunReport>), OptError> {
    let scene = ev.scene();
    let opt_owned = global_opt_ids(scene);
    let opt_ids: Vec<&str> = opt_owned.iter().map(String::as_str).collect();
    if opt_ids.is_empty() {
        return Ok((working.clone(), Vec::new()));
    }
    let members = floor_objects(scene);
    log::info!("global stage: optimizing {opt_ids:?}");
    let (best, run) = ev
        .cem_optimize(
            working,
            cano,
            &opt_ids,
            &members,
            &BTreeSet::new(),
            "global",
            &mut |_| {},
        )
        .map_err(|(episode, iteration)| OptError::Failed {
            stage: "global",
            group: None,
            episode,
            iteration,
        })?;
    Ok((best, vec![run_report("global", &opt_ids, &members, run)]))
}

/// Pushes wall and ceiling objects that intersect the floor-standing scene
/// out along the normal of the nearest bounding plane, 1 mm at a time.
pub fn place_wall_ceiling(
    scene: &Scene,
    settled: &Layout,
) -> Result<(Layout, Vec<WallMove>), OptError> {
    let mut out = settled.clone().with_stage(Stage::Optimized);
    let mounted: Vec<&str> = scene
        .ids()
        .filter(|id| {
            matches!(
                scene.tree.parent(id).kind,
                SupportKind::Wall | SupportKind::Ceiling
            )
        })
        .collect();
    if mounted.is_empty() {
        return Ok((out, Vec::new()));
    }
    let floor = floor_objects(scene);
    let bounds = floor
        .iter()
        .map(|id| scene.object(id).aabb(settled.pose(id)))
        .reduce(|a, b| a.union(&b))
        .ok_or_else(|| OptError::WallFit("no floor-standing objects to fit walls to".into()))?;

    let mut moves = Vec::new();
    for id in mounted {
        let mut unit = vec![id];
        unit.extend(scene.tree.descendants(id));
        let hits = |l: &Layout| {
            unit.iter().any(|u| {
                floor.iter().any(|f| {
                    crate::scene::objects_intersect(
                        scene.object(u),
                        l.pose(u),
                        scene.object(f),
                        l.pose(f),
                    )
                })
            })
        };
        if !hits(&out) {
            continue;
        }
        let (plane, normal) = nearest_plane(scene, &out, id, &bounds);
        let start: Vec<_> = unit.iter().map(|u| *out.pose(u)).collect();
        let mut steps = 0;
        loop {
            steps += 1;
            if steps > WALL_MAX_STEPS {
                return Err(OptError::WallFit(format!("'{id}' could not be cleared")));
            }
            let offset = normal * (steps as f64 * WALL_STEP);
            for (u, p0) in unit.iter().zip(&start) {
                let mut p = *p0;
                p.translation = p0.translation + offset;
                out.set(u, p);
            }
            if !hits(&out) {
                break;
            }
        }
        log::info!("moved '{id}' {steps} mm towards the {plane} plane");
        moves.push(WallMove {
            id: id.to_string(),
            plane,
            steps,
            offset: steps as f64 * WALL_STEP,
        });
    }
    Ok((out, moves))
}

/// Bounding plane an object is pushed through: the ceiling for ceiling
/// objects, otherwise the closest of back (+Z), left (-X) and right (+X).
fn nearest_plane(scene: &Scene, l: &Layout, id: &str, b: &Aabb) -> (&'static str, Vec3) {
    if scene.tree.parent(id).kind == SupportKind::Ceiling {
        return ("ceiling", Vec3::Y);
    }
    let c = scene.object(id).aabb(l.pose(id)).center();
    let candidates = [
        ("back", (c.z - b.max.z).abs(), Vec3::Z),
        ("left", (c.x - b.min.x).abs(), Vec3::new(-1.0, 0.0, 0.0)),
        ("right", (c.x - b.max.x).abs(), Vec3::X),
    ];
    let best = candidates
        .iter()
        .fold(candidates[0], |acc, c| if c.1 < acc.1 { *c } else { acc });
    (best.0, best.2)
}

/// Canonicalization, local groups, global stage and wall placement, followed
/// by a physical check of the result.
pub fn run_pipeline(
    scene: &Scene,
    raw: &Layout,
    cfg: &PipelineConfig,
) -> Result<PipelineResult, OptError> {
    let ev = Evaluator::new(scene, cfg)?;
    let (cano, up) = canonicalize(scene, raw)?;
    log::info!(
        "canonicalized: up {:?} (confidence {:.3})",
        up.direction,
        up.confidence
    );

    let (after_local, local_runs) = optimize_local_groups(&ev, &cano)?;
    let (after_global, global_runs) = optimize_global(&ev, &after_local, &cano)?;
    let (final_layout, wall_moves) = place_wall_ceiling(scene, &after_global)?;

    let trace = ev
        .sim
        .settle(&final_layout, None, &BTreeSet::new(), &cfg.sim, None)
        .map_err(|source| OptError::Sim {
            stage: "final check",
            source,
        })?;
    let physical = phys_metrics(scene, &final_layout, &trace);
    let final_energy = EnergyReport::from_terms(
        energy_stab(&trace),
        energy_vel(&trace),
        energy_pen(scene, &final_layout, &trace),
        energy_layout(&trace, &cano, &cfg.energy),
        &cfg.energy,
    );

    let report = OptReport {
        seed: cfg.seed,
        up,
        canonical: pose_map(&cano),
        stages: vec![
            StageReport {
                stage: "local",
                runs: local_runs,
                wall_moves: Vec::new(),
                layout: pose_map(&after_local),
            },
            StageReport {
                stage: "global",
                runs: global_runs,
                wall_moves: Vec::new(),
                layout: pose_map(&after_global),
            },
            StageReport {
                stage: "wall",
                runs: Vec::new(),
                wall_moves,
                layout: pose_map(&final_layout),
            },
        ],
        final_layout: pose_map(&final_layout),
        final_energy,
        physical,
        config: cfg.clone(),
    };
    Ok(PipelineResult {
        canonical: cano,
        after_local,
        after_global,
        final_layout,
        report,
    })
}
