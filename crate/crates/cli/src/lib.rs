//! Command-line pipeline around `surfreg`: parameterize a case, render and
//! solve coordinate maps, score pose sets, run synthetic benchmarks and host
//! the manual-registration service.
//!
//! Exit codes: 0 success, 2 input error, 3 empty or degenerate data,
//! 4 numerical failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod render;
pub mod server;

use clap::{Args, Parser, Subcommand};
use commands::{ExampleShape, NoiseLevel, SolverKind};
use config::{Lookup, ProjectConfig};
use error::CliError;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use surfreg::datagen::PoseSampler;

#[derive(Debug, Parser)]
#[command(name = "surfreg", version, about = "Surface-coordinate 2D/3D registration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Project configuration (TOML).
    #[arg(short, long)]
    pub config: PathBuf,
}

/// Overrides of the config's `[tolerances]` table.
#[derive(Debug, Args, Default)]
pub struct SolverFlags {
    /// Maximum refinement iterations.
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Relative RMS decrease below which refinement stops.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Consensus hypotheses to draw.
    #[arg(long)]
    pub ransac_iterations: Option<usize>,
    /// Inlier threshold in pixels.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Consensus sampling seed.
    #[arg(long)]
    pub ransac_seed: Option<u64>,
    /// (μ, ν) to surface point lookup.
    #[arg(long, value_enum)]
    pub lookup: Option<Lookup>,
}

impl SolverFlags {
    fn apply(&self, cfg: &mut ProjectConfig) {
        let t = &mut cfg.tolerances;
        if let Some(v) = self.max_iterations {
            t.solver_max_iterations = v;
        }
        if let Some(v) = self.tol {
            t.solver_tol = v;
        }
        if let Some(v) = self.ransac_iterations {
            t.ransac_iterations = v;
        }
        if let Some(v) = self.threshold {
            t.ransac_threshold_px = v;
        }
        if let Some(v) = self.ransac_seed {
            t.ransac_seed = v;
        }
        if let Some(v) = self.lookup {
            t.lookup = v;
        }
    }
}

/// Pose sampling ranges for synthetic scenes.
#[derive(Debug, Args)]
pub struct SamplerFlags {
    #[arg(long, default_value_t = PoseSampler::default().max_yaw_deg)]
    pub max_yaw: f64,
    #[arg(long, default_value_t = PoseSampler::default().max_tilt_deg)]
    pub max_tilt: f64,
    /// Largest |x| translation in millimeters.
    #[arg(long, default_value_t = PoseSampler::default().max_x_mm)]
    pub max_x: f64,
    /// Largest |y| translation in millimeters.
    #[arg(long, default_value_t = PoseSampler::default().max_y_mm)]
    pub max_y: f64,
    #[arg(long, default_value_t = PoseSampler::default().z_mm[0])]
    pub min_z: f64,
    #[arg(long, default_value_t = PoseSampler::default().z_mm[1])]
    pub max_z: f64,
    /// Poses drawn per sample before giving up on showing the region.
    #[arg(long, default_value_t = 10)]
    pub max_attempts: usize,
}

impl SamplerFlags {
    fn sampler(&self) -> PoseSampler {
        PoseSampler {
            max_yaw_deg: self.max_yaw,
            max_tilt_deg: self.max_tilt,
            max_x_mm: self.max_x,
            max_y_mm: self.max_y,
            z_mm: [self.min_z, self.max_z],
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute (μ, ν) for the configured region and write the
    /// parameterization file.
    Parameterize {
        #[command(flatten)]
        config: ConfigArg,
        /// Output file [default: <output>/parameterization.txt].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the coordinate map and overlay for a pose file.
    Render {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        pose: PathBuf,
        /// Background PNG [default: black].
        #[arg(long)]
        frame: Option<PathBuf>,
        #[arg(long, default_value_t = render::DEFAULT_OPACITY)]
        opacity: f64,
        /// [default: <output>/render/<pose>_map.png]
        #[arg(long)]
        map_out: Option<PathBuf>,
        /// [default: <output>/render/<pose>_overlay.png]
        #[arg(long)]
        overlay_out: Option<PathBuf>,
    },
    /// Estimate the pose that produced a coordinate map.
    Solve {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverKind::Ransac)]
        solver: SolverKind,
        #[command(flatten)]
        flags: SolverFlags,
        /// [default: <output>/solve/<map>.json]
        #[arg(long)]
        out: Option<PathBuf>,
        /// [default: <output>/solve/<map>.diagnostics.json]
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Compare predicted pose files with ground truth, matched by file name.
    Eval {
        /// Directory of ground-truth pose files.
        #[arg(long)]
        truth: PathBuf,
        /// Directory of predicted pose files.
        #[arg(long)]
        predicted: PathBuf,
        /// Focal length for the depth error [default: from the ground truth].
        #[arg(long)]
        focal: Option<f64>,
        /// Directory for errors.csv and summary.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a scene of random poses with ground truth.
    Synth {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        sampler: SamplerFlags,
        /// [default: <output>/scene]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve noisy oracle predictions of a synthetic scene over a noise grid.
    Bench {
        #[command(flatten)]
        config: ConfigArg,
        /// Grid point, `none` or specs joined by `+`, e.g.
        /// `gaussian:0.02+outlier:0.1`. Repeat for more points.
        #[arg(long = "noise", default_values_t = ["none".to_string(), "gaussian:0.02+outlier:0.1".to_string()])]
        noise: Vec<String>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = SolverKind::Ransac)]
        solver: SolverKind,
        #[command(flatten)]
        flags: SolverFlags,
        #[command(flatten)]
        sampler: SamplerFlags,
        /// [default: <output>/bench]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the manual-registration API.
    Serve {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        bind: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Starting depth of new sessions in millimeters.
        #[arg(long, default_value_t = 700.0)]
        depth: f64,
    },
    /// Write a self-contained example case (mesh, region, config, frame,
    /// pose).
    Example {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ExampleShape::Ossicle)]
        shape: ExampleShape,
    },
}

fn load(c: &ConfigArg) -> Result<ProjectConfig, CliError> {
    ProjectConfig::load(&c.config)
}

/// Runs a command and returns what it has to report on stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Parameterize { config, out } => {
            commands::parameterize(&load(&config)?, out.as_deref())
        }
        Command::Render {
            config,
            pose,
            frame,
            opacity,
            map_out,
            overlay_out,
        } => commands::render(
            &load(&config)?,
            &commands::RenderArgs {
                pose: &pose,
                frame: frame.as_deref(),
                opacity,
                map_out: map_out.as_deref(),
                overlay_out: overlay_out.as_deref(),
            },
        ),
        Command::Solve {
            config,
            map,
            solver,
            flags,
            out,
            diagnostics,
        } => {
            let mut cfg = load(&config)?;
            flags.apply(&mut cfg);
            commands::solve(
                &cfg,
                &commands::SolveArgs {
                    map: &map,
                    solver,
                    pose_out: out.as_deref(),
                    diagnostics_out: diagnostics.as_deref(),
                },
            )
        }
        Command::Eval {
            truth,
            predicted,
            focal,
            out,
        } => commands::eval(&commands::EvalArgs {
            truth: &truth,
            predicted: &predicted,
            focal,
            out: &out,
        }),
        Command::Synth {
            config,
            count,
            seed,
            sampler,
            out,
        } => commands::synth(
            &load(&config)?,
            &commands::SynthArgs {
                count,
                seed,
                max_attempts: sampler.max_attempts,
                sampler: sampler.sampler(),
                out: out.as_deref(),
            },
        ),
        Command::Bench {
            config,
            noise,
            count,
            seed,
            solver,
            flags,
            sampler,
            out,
        } => {
            let mut cfg = load(&config)?;
            flags.apply(&mut cfg);
            let grid = noise
                .iter()
                .map(|s| s.parse::<NoiseLevel>())
                .collect::<Result<Vec<_>, _>>()?;
            commands::bench(
                &cfg,
                &commands::BenchArgs {
                    grid: &grid,
                    count,
                    seed,
                    max_attempts: sampler.max_attempts,
                    sampler: sampler.sampler(),
                    solver,
                    out: out.as_deref(),
                },
            )
        }
        Command::Serve {
            config,
            bind,
            port,
            depth,
        } => {
            let cfg = load(&config)?;
            let param = Arc::new(cfg.parameterization()?);
            let state = Arc::new(server::ServiceState::new(&cfg, param, depth)?);
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| CliError::input(format!("runtime: {e}")))?;
            rt.block_on(server::serve(state, SocketAddr::new(bind, port)))?;
            Ok(String::new())
        }
        Command::Example { out, shape } => commands::example(&out, shape),
    }
}
