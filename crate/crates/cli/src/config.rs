//! Effective run configuration: built-in defaults, then an optional JSON
//! config file, then command-line overrides.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use stablescene::eval::GeoConfig;
use stablescene::opt::{CemConfig, EnergyWeights, PipelineConfig};
use stablescene::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub sim: SimConfig,
    pub cem: CemConfig,
    pub energy: EnergyWeights,
    pub eval: GeoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            seed: p.seed,
            workers: p.workers,
            sim: p.sim,
            cem: p.cem,
            energy: p.energy,
            eval: GeoConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            seed: self.seed,
            workers: self.workers,
            sim: self.sim.clone(),
            cem: self.cem,
            energy: self.energy,
        }
    }
}

/// Flags shared by every command that runs the simulator or optimizer.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file with any subset of the configuration keys.
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    /// Evaluation threads (0 = one per core).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Generic override, e.g. `--set sim.friction=0.8`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long = "cem.samples", id = "cem_samples", value_name = "K")]
    pub cem_samples: Option<usize>,
    #[arg(long = "cem.iterations", id = "cem_iterations", value_name = "T")]
    pub cem_iterations: Option<usize>,
    #[arg(long = "cem.episodes", id = "cem_episodes", value_name = "N")]
    pub cem_episodes: Option<usize>,
    #[arg(long = "cem.elite-frac", id = "cem_elite_frac", value_name = "RHO")]
    pub cem_elite_frac: Option<f64>,
    #[arg(long = "sim.steps", id = "sim_steps", value_name = "L")]
    pub sim_steps: Option<usize>,
    #[arg(long = "sim.substeps", id = "sim_substeps", value_name = "N")]
    pub sim_substeps: Option<usize>,
    #[arg(long = "sim.dt", id = "sim_dt", value_name = "SECONDS")]
    pub sim_dt: Option<f64>,
    #[arg(
        long = "energy.lambda-stab",
        id = "energy_lambda_stab",
        value_name = "W"
    )]
    pub lambda_stab: Option<f64>,
    #[arg(long = "energy.lambda-vel", id = "energy_lambda_vel", value_name = "W")]
    pub lambda_vel: Option<f64>,
    #[arg(long = "energy.lambda-pen", id = "energy_lambda_pen", value_name = "W")]
    pub lambda_pen: Option<f64>,
    #[arg(
        long = "energy.lambda-layout",
        id = "energy_lambda_layout",
        value_name = "W"
    )]
    pub lambda_layout: Option<f64>,
    #[arg(long = "energy.lambda-pos", id = "energy_lambda_pos", value_name = "W")]
    pub lambda_pos: Option<f64>,
    #[arg(long = "eval.samples", id = "eval_samples", value_name = "N")]
    pub eval_samples: Option<usize>,
}

impl ConfigArgs {
    fn overrides(&self, seed: Option<u64>) -> Result<Vec<(String, Value)>> {
        let mut out: Vec<(String, Value)> = Vec::new();
        let mut push = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("seed", seed.map(Value::from));
        push("workers", self.workers.map(Value::from));
        push("cem.samples", self.cem_samples.map(Value::from));
        push("cem.iterations", self.cem_iterations.map(Value::from));
        push("cem.episodes", self.cem_episodes.map(Value::from));
        push("cem.elite_frac", self.cem_elite_frac.map(Value::from));
        push("sim.steps", self.sim_steps.map(Value::from));
        push("sim.substeps", self.sim_substeps.map(Value::from));
        push("sim.dt", self.sim_dt.map(Value::from));
        push("energy.lambda_stab", self.lambda_stab.map(Value::from));
        push("energy.lambda_vel", self.lambda_vel.map(Value::from));
        push("energy.lambda_pen", self.lambda_pen.map(Value::from));
        push("energy.lambda_layout", self.lambda_layout.map(Value::from));
        push("energy.lambda_pos", self.lambda_pos.map(Value::from));
        push("eval.samples", self.eval_samples.map(Value::from));
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got '{s}'"))?;
            let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            out.push((k.trim().replace('-', "_"), v));
        }
        Ok(out)
    }

    /// Resolves the effective configuration. The returned flag tells whether
    /// a seed was given explicitly (flag or config file).
    pub fn resolve(&self, seed: Option<u64>) -> Result<(RunConfig, bool)> {
        let mut value = serde_json::to_value(RunConfig::default()).expect("config serializes");
        let mut seeded = seed.is_some();
        if let Some(path) = &self.config {
            let file = read_config(path)?;
            seeded |= file.get("seed").is_some();
            merge(&mut value, file);
        }
        for (key, v) in self.overrides(seed)? {
            set_path(&mut value, &key, v)?;
        }
        let cfg: RunConfig = serde_json::from_value(value).context("invalid configuration")?;
        cfg.pipeline().validate()?;
        cfg.eval.validate().map_err(|e| anyhow!(e))?;
        Ok((cfg, seeded))
    }
}

fn read_config(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let v: Value = serde_json::from_str(&text)
        .with_context(|| format!("malformed config {}", path.display()))?;
    if !v.is_object() {
        bail!("config {} must be a JSON object", path.display());
    }
    Ok(v)
}

/// Recursively overlays `over` onto `base`; non-object values replace.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, key: &str, v: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj: &mut Map<String, Value> = cur
            .as_object_mut()
            .ok_or_else(|| anyhow!("configuration key '{key}' does not name a section"))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*part) {
                bail!("unknown configuration key '{key}'");
            }
            obj.insert(part.to_string(), v);
            return Ok(());
        }
        cur = obj
            .get_mut(*part)
            .ok_or_else(|| anyhow!("unknown configuration key '{key}'"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"cem": {"samples": 64, "iterations": 3}, "seed": 9}"#,
        )
        .unwrap();
        let args = ConfigArgs {
            config: Some(path),
            cem_samples: Some(32),
            set: vec!["sim.friction=0.5".into()],
            ..Default::default()
        };
        let (cfg, seeded) = args.resolve(None).unwrap();
        assert!(seeded);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.cem.samples, 32);
        assert_eq!(cfg.cem.iterations, 3);
        assert_eq!(cfg.sim.friction, 0.5);
        assert_eq!(cfg.energy, EnergyWeights::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let args = ConfigArgs {
            set: vec!["cem.sample=3".into()],
            ..Default::default()
        };
        assert!(args
            .resolve(Some(1))
            .unwrap_err()
            .to_string()
            .contains("cem.sample"));
    }

    #[test]
    fn invariant_violations_are_rejected() {
        let args = ConfigArgs {
            cem_elite_frac: Some(0.0),
            ..Default::default()
        };
        assert!(args.resolve(Some(1)).is_err());
    }
}
