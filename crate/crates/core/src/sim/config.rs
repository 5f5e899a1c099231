use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geom::Vec3;

/// Settling simulator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// m/s².
    pub gravity: Vec3,
    /// Step length (s).
    pub dt: f64,
    pub substeps: usize,
    /// Number of steps `L`.
    pub steps: usize,
    /// Step `τ` at which velocities are probed.
    pub vel_probe: usize,
    pub lin_damping: f64,
    pub ang_damping: f64,
    pub friction: f64,
    pub restitution: f64,
    /// Contacts are generated for gaps up to this distance (m).
    pub contact_offset: f64,
    /// Cap on the positional-correction velocity (m/s).
    pub max_depenetration_vel: f64,
    pub solver_iterations: usize,
    /// Fraction of penetration corrected per substep.
    pub baumgarte: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            gravity: Vec3::new(0.0, -9.8, 0.0),
            dt: 1.0 / 60.0,
            substeps: 2,
            steps: 60,
            vel_probe: 15,
            lin_damping: 0.3,
            ang_damping: 0.3,
            friction: 1.0,
            restitution: 0.0,
            contact_offset: 0.01,
            max_depenetration_vel: 5.0,
            solver_iterations: 6,
            baumgarte: 0.2,
        }
    }
}

impl SimConfig {
    pub fn substep_dt(&self) -> f64 {
        self.dt / self.substeps as f64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !self.gravity.is_finite() {
            return bad("gravity must be finite");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be > 0");
        }
        if self.substeps < 1 {
            return bad("substeps must be >= 1");
        }
        if self.vel_probe == 0 || self.vel_probe > self.steps {
            return bad("vel_probe must satisfy 0 < vel_probe <= steps");
        }
        for (name, v) in [
            ("lin_damping", self.lin_damping),
            ("ang_damping", self.ang_damping),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.friction.is_finite() && self.friction >= 0.0) {
            return bad("friction must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.restitution) {
            return bad("restitution must lie in [0, 1]");
        }
        if !(self.contact_offset.is_finite() && self.contact_offset >= 0.0) {
            return bad("contact_offset must be >= 0");
        }
        if !(self.max_depenetration_vel.is_finite() && self.max_depenetration_vel > 0.0) {
            return bad("max_depenetration_vel must be > 0");
        }
        if self.solver_iterations < 1 {
            return bad("solver_iterations must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.baumgarte) {
            return bad("baumgarte must lie in [0, 1]");
        }
        Ok(())
    }
}
