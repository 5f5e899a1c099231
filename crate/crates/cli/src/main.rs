mod config;

use std::collections::BTreeSet;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand};
use serde::Serialize;

use stablescene::canon::canonicalize;
use stablescene::eval::{evaluate_geometry, phys_metrics, EvalError, GroundTruth, MetricReport};
use stablescene::fixtures::{generate, FixtureError, TemplateParams};
use stablescene::opt::{run_pipeline, OptError};
use stablescene::scene::{load_layout, load_scene, save_layout, Layout, LoadedScene, SceneError};
use stablescene::sim::{settle_with_dump, SimError};

use config::{ConfigArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "stablescene",
    version,
    about = "Physically stable layouts for reconstructed 3D scenes"
)]
struct Cli {
    /// More log output (-v info, -vv debug); STABLESCENE_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Align the scene with gravity and snap supported objects onto their parents.
    Canonicalize {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full optimization pipeline.
    Optimize {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Required here or as `seed` in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Settle a layout and report physical metrics.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        /// Layout file; defaults to the layout stored in the scene.
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Compare a layout against reference geometry.
    Evaluate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Reference OBJ mesh or `x y z` point list.
        #[arg(long, conflicts_with = "gt_scene")]
        gt: Option<PathBuf>,
        /// Reference scene file; boxes are matched by object id.
        #[arg(long)]
        gt_scene: Option<PathBuf>,
        #[arg(long, requires = "gt_scene")]
        gt_layout: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also settle the prediction and report physical metrics.
        #[arg(long)]
        physics: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write a fixture scene.
    GenScene {
        /// stack, table_plant, unstable_office, wall_poster or random_forest.
        template: String,
        /// Boxes in `stack`.
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Objects in `random_forest`.
        #[arg(long, default_value_t = 10)]
        objects: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_STAGE: u8 = 3;
const EXIT_OPT_FAILED: u8 = 4;
const EXIT_DIVERGED: u8 = 5;

fn fail(code: u8, err: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code,
        err: err.into(),
    }
}

impl From<SceneError> for Failure {
    fn from(e: SceneError) -> Self {
        fail(EXIT_VALIDATION, e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::Diverged { .. } => EXIT_DIVERGED,
            _ => EXIT_VALIDATION,
        };
        fail(code, e)
    }
}

impl From<OptError> for Failure {
    fn from(e: OptError) -> Self {
        let code = match &e {
            OptError::InvalidConfig(_) => EXIT_VALIDATION,
            OptError::Canon(_) | OptError::WallFit(_) => EXIT_STAGE,
            OptError::Failed { .. } => EXIT_OPT_FAILED,
            OptError::Sim { source, .. } => match source {
                SimError::Diverged { .. } => EXIT_DIVERGED,
                _ => EXIT_VALIDATION,
            },
        };
        fail(code, e)
    }
}

impl From<FixtureError> for Failure {
    fn from(e: FixtureError) -> Self {
        fail(EXIT_VALIDATION, e)
    }
}

fn validation(e: anyhow::Error) -> Failure {
    fail(EXIT_VALIDATION, e)
}

fn output_dir(out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out)
        .map_err(|e| fail(EXIT_STAGE, anyhow!("cannot create {}: {e}", out.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    stablescene::json::write_file(path, value)
        .map_err(|e| fail(EXIT_STAGE, anyhow!("cannot write {}: {e}", path.display())))
}

fn input_layout(loaded: &LoadedScene, path: Option<&Path>) -> Result<Layout, Failure> {
    match path {
        None => Ok(loaded.raw_layout.clone()),
        Some(p) => {
            let l = load_layout(p)?;
            loaded.scene.check_layout(&l)?;
            Ok(l)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Canonicalize { scene, out } => {
            let loaded = load_scene(&scene)?;
            let (cano, up) =
                canonicalize(&loaded.scene, &loaded.raw_layout).map_err(|e| fail(EXIT_STAGE, e))?;
            output_dir(&out)?;
            let path = out.join("layout_canonical.json");
            save_layout(&cano, &path).map_err(|e| fail(EXIT_STAGE, e))?;
            println!(
                "up [{:.6}, {:.6}, {:.6}] (confidence {:.3}); wrote {}",
                up.direction.x,
                up.direction.y,
                up.direction.z,
                up.confidence,
                path.display()
            );
        }
        Command::Optimize {
            scene,
            out,
            seed,
            cfg,
        } => {
            let (cfg, seeded) = cfg.resolve(seed).map_err(validation)?;
            if !seeded {
                return Err(validation(anyhow!(
                    "optimize needs --seed (or `seed` in the config file)"
                )));
            }
            let loaded = load_scene(&scene)?;
            let result = run_pipeline(&loaded.scene, &loaded.raw_layout, &cfg.pipeline())?;
            output_dir(&out)?;
            save_layout(&result.final_layout, &out.join("layout_optimized.json"))
                .map_err(|e| fail(EXIT_STAGE, e))?;
            write_json(&out.join("report.json"), &result.report)?;
            write_json(
                &out.join("metrics.json"),
                &MetricReport {
                    physical: Some(result.report.physical.clone()),
                    geometric: None,
                    config: &cfg,
                },
            )?;
            write_json(&out.join("config.json"), &cfg)?;
            let p = &result.report.physical;
            println!(
                "total energy {:.6}, collision rate {:.1}%, stable rate {:.1}%",
                result.report.final_energy.total, p.collision_rate, p.stable_rate
            );
        }
        Command::Simulate {
            scene,
            layout,
            out,
            cfg,
        } => {
            let (cfg, _) = cfg.resolve(None).map_err(validation)?;
            let loaded = load_scene(&scene)?;
            let layout = input_layout(&loaded, layout.as_deref())?;
            output_dir(&out)?;
            let trace_path = out.join("trace.ndjson");
            let file = std::fs::File::create(&trace_path).map_err(|e| {
                fail(
                    EXIT_STAGE,
                    anyhow!("cannot write {}: {e}", trace_path.display()),
                )
            })?;
            let mut w = BufWriter::new(file);
            let trace =
                settle_with_dump(&loaded.scene, &layout, &BTreeSet::new(), &cfg.sim, &mut w)?;
            drop(w);
            let phys = phys_metrics(&loaded.scene, &layout, &trace);
            println!(
                "collision rate {:.1}%, stable rate {:.1}%, drift {:.6} m",
                phys.collision_rate, phys.stable_rate, phys.pos_drift
            );
            write_json(
                &out.join("metrics.json"),
                &MetricReport {
                    physical: Some(phys),
                    geometric: None,
                    config: &cfg,
                },
            )?;
            write_json(&out.join("config.json"), &cfg)?;
        }
        Command::Evaluate {
            scene,
            layout,
            gt,
            gt_scene,
            gt_layout,
            out,
            physics,
            seed,
            cfg,
        } => {
            let (mut cfg, _): (RunConfig, bool) = cfg.resolve(None).map_err(validation)?;
            if let Some(s) = seed {
                cfg.eval.seed = s;
            }
            let loaded = load_scene(&scene)?;
            let layout = input_layout(&loaded, layout.as_deref())?;
            let reference = match (gt, gt_scene) {
                (Some(path), None) => {
                    GroundTruth::from_file(&path, cfg.eval.samples, cfg.eval.seed)
                        .map_err(|e| fail(EXIT_VALIDATION, e))?
                }
                (None, Some(path)) => {
                    let g = load_scene(&path)?;
                    let l = input_layout(&g, gt_layout.as_deref())?;
                    GroundTruth::from_scene(&g.scene, &l, cfg.eval.samples, cfg.eval.seed)
                        .map_err(|e| fail(EXIT_VALIDATION, e))?
                }
                _ => {
                    return Err(validation(anyhow!(
                        "evaluate needs exactly one of --gt or --gt-scene"
                    )))
                }
            };
            let geo =
                evaluate_geometry(&loaded.scene, &layout, &reference, &cfg.eval).map_err(|e| {
                    match e {
                        EvalError::EmptyCorrespondence => fail(EXIT_STAGE, e),
                        other => fail(EXIT_VALIDATION, other),
                    }
                })?;
            let physical = if physics {
                let trace =
                    stablescene::sim::settle(&loaded.scene, &layout, &BTreeSet::new(), &cfg.sim)?;
                Some(phys_metrics(&loaded.scene, &layout, &trace))
            } else {
                None
            };
            println!(
                "chamfer {:.6e}, f-score {:.4}, b-iou {:.4}",
                geo.chamfer, geo.fscore, geo.biou
            );
            output_dir(&out)?;
            write_json(
                &out.join("metrics.json"),
                &MetricReport {
                    physical,
                    geometric: Some(geo),
                    config: &cfg,
                },
            )?;
            write_json(&out.join("config.json"), &cfg)?;
        }
        Command::GenScene {
            template,
            n,
            seed,
            objects,
            out,
        } => {
            let spec = generate(&template, &TemplateParams { n, seed, objects })?;
            // the generated file must load cleanly
            spec.build(out.parent().unwrap_or(Path::new(".")))?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                output_dir(dir)?;
            }
            write_json(&out, &spec)?;
            println!("wrote {} ({} objects)", out.display(), spec.objects.len());
        }
    }
    Ok(())
}

/// Error message with each distinct cause appended once.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = err.to_string();
    for cause in err.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg = format!("{msg}: {c}");
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STABLESCENE_LOG", level))
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(&f.err));
            ExitCode::from(f.code)
        }
    }
}
