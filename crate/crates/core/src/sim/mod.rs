//! Deterministic rigid-body settling simulator.
//!
//! Bodies start at rest at the candidate poses and fall under gravity onto a
//! static ground plane at `Y = 0` for `steps` steps. Contacts come from
//! GJK/EPA on every convex piece pair within the contact offset and are
//! resolved with sequential impulses, Coulomb friction and warm starting.

mod config;
mod shape;
mod world;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Pose, UnitQuat, Vec3};
use crate::scene::{Layout, Scene};

pub use config::SimConfig;
use shape::BodyShape;
use world::{Body, World};

/// Callback receiving the step index and every simulated body's state.
type StepObserver<'a> = dyn FnMut(usize, &[(&str, BodyState)]) + 'a;

/// Stability thresholds of [`is_stable`].
pub const STABLE_POS_THRESHOLD: f64 = 0.1;
pub const STABLE_ROT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("simulation diverged at step {step} (object '{id}')")]
    Diverged { step: usize, id: String },
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("layout has no pose for '{0}'")]
    MissingPose(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub pose: Pose,
    /// Velocity of the center of mass (m/s).
    pub lin_vel: Vec3,
    /// rad/s, world frame.
    pub ang_vel: Vec3,
    pub dynamic: bool,
}

/// Snapshots of a settling rollout at steps 0, `τ` and `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub initial: BTreeMap<String, BodyState>,
    pub probe: BTreeMap<String, BodyState>,
    #[serde(rename = "final")]
    pub final_: BTreeMap<String, BodyState>,
    /// Largest per-step speed of each body (m/s).
    pub peak_lin_vel: BTreeMap<String, f64>,
    pub peak_ang_vel: BTreeMap<String, f64>,
}

impl SimTrace {
    pub fn dynamic_ids(&self) -> impl Iterator<Item = &str> {
        self.initial
            .iter()
            .filter(|(_, s)| s.dynamic)
            .map(|(k, _)| k.as_str())
    }

    /// Final poses merged over `base`.
    pub fn final_layout(&self, base: &Layout) -> Layout {
        let mut out = base.clone();
        for (id, s) in &self.final_ {
            out.set(id, s.pose);
        }
        out
    }
}

/// One record of a per-step trace dump.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord<'a> {
    pub step: usize,
    pub id: &'a str,
    pub quat: [f64; 4],
    pub pos: [f64; 3],
    pub lin_vel: [f64; 3],
    pub ang_vel: [f64; 3],
}

/// Physical properties of every object of a scene, shared read-only by any
/// number of concurrent simulations.
pub struct SimScene<'a> {
    scene: &'a Scene,
    shapes: Vec<BodyShape>,
}

impl<'a> SimScene<'a> {
    pub fn new(scene: &'a Scene) -> Self {
        Self {
            scene,
            shapes: scene.objects.iter().map(BodyShape::new).collect(),
        }
    }

    pub fn scene(&self) -> &'a Scene {
        self.scene
    }

    /// Simulates the objects `ids` (all objects when `None`). Objects in
    /// `fixed`, non-movable objects and wall-mounted objects never move.
    /// `observer` sees the state of every simulated body after each step.
    pub fn settle(
        &self,
        layout: &Layout,
        ids: Option<&[&str]>,
        fixed: &BTreeSet<String>,
        cfg: &SimConfig,
        mut observer: Option<&mut StepObserver>,
    ) -> Result<SimTrace, SimError> {
        cfg.validate()?;
        let mut members: Vec<usize> = match ids {
            None => (0..self.scene.objects.len()).collect(),
            Some(ids) => ids
                .iter()
                .map(|id| {
                    self.scene
                        .objects
                        .binary_search_by(|o| o.id.as_str().cmp(id))
                        .map_err(|_| SimError::MissingPose(id.to_string()))
                })
                .collect::<Result<_, _>>()?,
        };
        members.sort_unstable();
        members.dedup();

        let mut bodies = Vec::with_capacity(members.len());
        for &k in &members {
            let obj = &self.scene.objects[k];
            let pose = *layout
                .poses
                .get(&obj.id)
                .ok_or_else(|| SimError::MissingPose(obj.id.clone()))?;
            let dynamic = !(fixed.contains(&obj.id) || self.scene.is_fixed(&obj.id));
            bodies.push(Body::new(obj, &self.shapes[k], pose, dynamic));
        }
        let mut world = World::new(bodies, cfg);

        let scene: &'a Scene = self.scene;
        let names: Vec<&'a str> = members
            .iter()
            .map(|&k| scene.objects[k].id.as_str())
            .collect();
        let snapshot = |world: &World| -> Vec<(&'a str, BodyState)> {
            world
                .bodies
                .iter()
                .zip(&names)
                .map(|(b, name)| {
                    (
                        *name,
                        BodyState {
                            pose: b.pose,
                            lin_vel: b.v,
                            ang_vel: b.w,
                            dynamic: b.dynamic,
                        },
                    )
                })
                .collect()
        };
        let to_map = |s: &[(&str, BodyState)]| -> BTreeMap<String, BodyState> {
            s.iter().map(|(k, v)| (k.to_string(), *v)).collect()
        };

        let initial = snapshot(&world);
        if let Some(obs) = observer.as_mut() {
            obs(0, &initial);
        }
        let mut peak_lin = vec![0.0f64; members.len()];
        let mut peak_ang = vec![0.0f64; members.len()];
        let mut probe = None;
        let h = cfg.substep_dt();
        for step in 1..=cfg.steps {
            for _ in 0..cfg.substeps {
                if let Err(i) = world.substep(h) {
                    return Err(SimError::Diverged {
                        step,
                        id: world.bodies[i].obj.id.clone(),
                    });
                }
            }
            for (k, b) in world.bodies.iter().enumerate() {
                peak_lin[k] = peak_lin[k].max(b.v.norm());
                peak_ang[k] = peak_ang[k].max(b.w.norm());
            }
            if step == cfg.vel_probe || observer.is_some() {
                let snap = snapshot(&world);
                if let Some(obs) = observer.as_mut() {
                    obs(step, &snap);
                }
                if step == cfg.vel_probe {
                    probe = Some(snap);
                }
            }
        }
        let final_ = snapshot(&world);
        let ids: Vec<String> = world.bodies.iter().map(|b| b.obj.id.clone()).collect();
        Ok(SimTrace {
            initial: to_map(&initial),
            probe: to_map(&probe.expect("0 < vel_probe <= steps")),
            final_: to_map(&final_),
            peak_lin_vel: ids.iter().cloned().zip(peak_lin).collect(),
            peak_ang_vel: ids.into_iter().zip(peak_ang).collect(),
        })
    }
}

/// Settles every object of the scene from `layout`.
pub fn settle(
    scene: &Scene,
    layout: &Layout,
    fixed: &BTreeSet<String>,
    cfg: &SimConfig,
) -> Result<SimTrace, SimError> {
    SimScene::new(scene).settle(layout, None, fixed, cfg, None)
}

/// Settles the scene and writes one NDJSON record per body and step.
pub fn settle_with_dump<W: Write>(
    scene: &Scene,
    layout: &Layout,
    fixed: &BTreeSet<String>,
    cfg: &SimConfig,
    out: &mut W,
) -> Result<SimTrace, SimError> {
    let mut io_err: Option<std::io::Error> = None;
    let mut obs = |step: usize, states: &[(&str, BodyState)]| {
        for (id, s) in states {
            if io_err.is_some() {
                return;
            }
            let rec = TraceRecord {
                step,
                id,
                quat: s.pose.rotation.canonical().to_array(),
                pos: s.pose.translation.to_array(),
                lin_vel: s.lin_vel.to_array(),
                ang_vel: s.ang_vel.to_array(),
            };
            let line = crate::json::to_line(&rec).expect("record serializes");
            if let Err(e) = writeln!(out, "{line}") {
                io_err = Some(e);
            }
        }
    };
    let trace = SimScene::new(scene).settle(layout, None, fixed, cfg, Some(&mut obs))?;
    if let Some(e) = io_err {
        log::warn!("trace dump incomplete: {e}");
    }
    Ok(trace)
}

/// Per-object stability: final pose within `pos_thresh` (m) and `rot_thresh`
/// (rad) of the initial pose. Fixed bodies are always stable.
pub fn is_stable(trace: &SimTrace, pos_thresh: f64, rot_thresh: f64) -> BTreeMap<String, bool> {
    trace
        .initial
        .iter()
        .map(|(id, init)| {
            let fin = &trace.final_[id];
            let ok = !init.dynamic || {
                let dt = (fin.pose.translation - init.pose.translation).norm();
                let dr = rotation_distance(fin.pose.rotation, init.pose.rotation);
                dt <= pos_thresh && dr <= rot_thresh
            };
            (id.clone(), ok)
        })
        .collect()
}

/// Geodesic angle between two rotations produced by the simulator.
pub fn rotation_distance(a: UnitQuat, b: UnitQuat) -> f64 {
    a.angle_to(b).min(std::f64::consts::PI)
}
