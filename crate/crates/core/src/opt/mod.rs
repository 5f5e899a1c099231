//! Simulation-in-the-loop layout optimization: energy terms, CEM search and
//! the local / global / wall placement pipeline.

pub mod cem;
mod pipeline;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::CanonError;
use crate::geom::{Pose, UnitQuat, Vec3};
use crate::scene::{Layout, Scene};
use crate::sim::{rotation_distance, SimConfig, SimError, SimScene, SimTrace};

pub use cem::{
    cem_minimize, elite_count, stream_seed, CemRun, IterationLog, IterationSamples, Scored,
};
pub use pipeline::{
    global_opt_ids, optimize_global, optimize_local_groups, place_wall_ceiling, run_pipeline,
    Evaluator, OptReport, PipelineConfig, PipelineResult, RunReport, StageReport, WallMove,
    WALL_STEP,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyWeights {
    pub lambda_stab: f64,
    pub lambda_vel: f64,
    pub lambda_pen: f64,
    pub lambda_layout: f64,
    /// Weight of the translation part of the layout term.
    pub lambda_pos: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        Self {
            lambda_stab: 1.0,
            lambda_vel: 1.0,
            lambda_pen: 0.5,
            lambda_layout: 1.0,
            lambda_pos: 6.0,
        }
    }
}

impl EnergyWeights {
    pub fn validate(&self) -> Result<(), OptError> {
        let all = [
            self.lambda_stab,
            self.lambda_vel,
            self.lambda_pen,
            self.lambda_layout,
            self.lambda_pos,
        ];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(OptError::InvalidConfig(
                "energy weights must be finite and >= 0".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CemConfig {
    /// Candidates per iteration `K`.
    pub samples: usize,
    /// Iterations per episode `T`.
    pub iterations: usize,
    /// Elite fraction `ρ`.
    pub elite_frac: f64,
    pub episodes: usize,
    /// Initial per-axis translation spread (m).
    pub sigma0_trans: [f64; 3],
    /// Initial per-axis rotation spread (rad).
    pub sigma0_rot: [f64; 3],
    /// Lower bound on every standard deviation after an update.
    pub sigma_floor: f64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            samples: 2048,
            iterations: 15,
            elite_frac: 0.025,
            episodes: 2,
            sigma0_trans: [0.05, 0.005, 0.05],
            sigma0_rot: [0.005, 0.05, 0.005],
            sigma_floor: 1e-4,
        }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        let bad = |m: &str| Err(OptError::InvalidConfig(m.to_string()));
        if self.samples < 1 || self.iterations < 1 || self.episodes < 1 {
            return bad("cem samples, iterations and episodes must be >= 1");
        }
        if !(self.elite_frac > 0.0 && self.elite_frac <= 1.0) {
            return bad("cem elite_frac must lie in (0, 1]");
        }
        let sig = self
            .sigma0_trans
            .iter()
            .chain(&self.sigma0_rot)
            .chain([&self.sigma_floor]);
        if !sig.into_iter().all(|s| s.is_finite() && *s >= 0.0) {
            return bad("cem standard deviations must be finite and >= 0");
        }
        Ok(())
    }

    /// Initial standard deviations for `n` objects, six per object.
    pub fn sigma0(&self, n: usize) -> Vec<f64> {
        let one: Vec<f64> = self
            .sigma0_trans
            .iter()
            .chain(&self.sigma0_rot)
            .copied()
            .collect();
        one.repeat(n)
    }
}

/// Raw energy terms of one candidate and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub e_stab: f64,
    pub e_vel: f64,
    /// Intersecting pairs at placement plus at the end of the rollout.
    pub e_pen: u32,
    pub e_layout: f64,
    pub total: f64,
    pub diverged: bool,
}

impl EnergyReport {
    pub fn diverged() -> Self {
        Self {
            e_stab: f64::INFINITY,
            e_vel: f64::INFINITY,
            e_pen: 0,
            e_layout: f64::INFINITY,
            total: f64::INFINITY,
            diverged: true,
        }
    }

    pub fn from_terms(
        e_stab: f64,
        e_vel: f64,
        e_pen: u32,
        e_layout: f64,
        w: &EnergyWeights,
    ) -> Self {
        Self {
            e_stab,
            e_vel,
            e_pen,
            e_layout,
            total: w.lambda_stab * e_stab
                + w.lambda_vel * e_vel
                + w.lambda_pen * e_pen as f64
                + w.lambda_layout * e_layout,
            diverged: false,
        }
    }
}

impl Scored for EnergyReport {
    fn score(&self) -> f64 {
        self.total
    }
}

#[derive(Debug, Error)]
pub enum OptError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("canonicalization failed: {0}")]
    Canon(#[from] CanonError),
    #[error("{stage} optimization failed{}: every candidate diverged in episode {episode}, iteration {iteration}",
        .group.as_ref().map(|g| format!(" for group '{g}'")).unwrap_or_default())]
    Failed {
        stage: &'static str,
        group: Option<String>,
        episode: usize,
        iteration: usize,
    },
    #[error("wall placement failed: {0}")]
    WallFit(String),
    #[error("{stage}: {source}")]
    Sim {
        stage: &'static str,
        #[source]
        source: SimError,
    },
}

/// Translation drift plus rotation change from start to end of the rollout,
/// summed over dynamic bodies.
pub fn energy_stab(trace: &SimTrace) -> f64 {
    trace
        .dynamic_ids()
        .map(|id| {
            let (a, b) = (&trace.initial[id].pose, &trace.final_[id].pose);
            (b.translation - a.translation).norm() + rotation_distance(b.rotation, a.rotation)
        })
        .sum()
}

/// Sum of linear speeds of dynamic bodies at the velocity probe step.
pub fn energy_vel(trace: &SimTrace) -> f64 {
    trace
        .dynamic_ids()
        .map(|id| trace.probe[id].lin_vel.norm())
        .sum()
}

/// Intersecting object pairs among the simulated bodies at placement plus
/// those still intersecting at the end.
pub fn energy_pen(scene: &Scene, candidate: &Layout, trace: &SimTrace) -> u32 {
    let ids: Vec<&str> = trace.initial.keys().map(String::as_str).collect();
    let settled = trace.final_layout(candidate);
    (scene.intersecting_pairs(candidate, &ids).len()
        + scene.intersecting_pairs(&settled, &ids).len()) as u32
}

/// Weighted deviation of final poses from the reference layout over dynamic
/// bodies.
pub fn energy_layout(trace: &SimTrace, reference: &Layout, w: &EnergyWeights) -> f64 {
    trace
        .dynamic_ids()
        .map(|id| {
            let (f, r) = (&trace.final_[id].pose, reference.pose(id));
            w.lambda_pos * (f.translation - r.translation).norm()
                + rotation_distance(f.rotation, r.rotation)
        })
        .sum()
}

/// Settles `candidate` once and scores it. A diverged rollout scores +∞.
pub fn evaluate_candidate(
    sim: &SimScene,
    candidate: &Layout,
    reference: &Layout,
    members: Option<&[&str]>,
    fixed: &BTreeSet<String>,
    weights: &EnergyWeights,
    cfg: &SimConfig,
) -> EnergyReport {
    match sim.settle(candidate, members, fixed, cfg, None) {
        Ok(trace) => EnergyReport::from_terms(
            energy_stab(&trace),
            energy_vel(&trace),
            energy_pen(sim.scene(), candidate, &trace),
            energy_layout(&trace, reference, weights),
            weights,
        ),
        Err(e) => {
            log::warn!("candidate rejected: {e}");
            EnergyReport::diverged()
        }
    }
}

/// New pose of an object under a 6-vector adjustment `(δt, δθ)`:
/// rotation `R · exp(δθ)`, translation `t + δt`.
pub fn adjust_pose(base: &Pose, delta: &[f64]) -> Pose {
    let dt = Vec3::new(delta[0], delta[1], delta[2]);
    let dr = UnitQuat::from_rotation_vector(Vec3::new(delta[3], delta[4], delta[5]));
    Pose::new((base.rotation * dr).normalized(), base.translation + dt)
}

/// Applies one 6-vector per id in `opt_ids`; every descendant of an adjusted
/// object follows it rigidly.
pub fn apply_adjustment(scene: &Scene, base: &Layout, opt_ids: &[&str], x: &[f64]) -> Layout {
    assert_eq!(x.len(), 6 * opt_ids.len(), "six values per object");
    let mut out = base.clone();
    for (k, id) in opt_ids.iter().enumerate() {
        let old = *base.pose(id);
        let new = adjust_pose(&old, &x[6 * k..6 * k + 6]);
        out.set(id, new);
        let carry = new.compose(&old.inverse());
        for d in scene.tree.descendants(id) {
            out.set(d, carry.compose(base.pose(d)));
        }
    }
    out
}
