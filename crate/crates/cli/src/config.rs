//! Per-case project configuration (TOML).
//!
//! ```toml
//! mesh = "mesh.ply"          # OBJ or PLY, relative to this file
//! region = "region.txt"      # optional; one vertex index per line
//! alpha = 12                 # north pole, parent-mesh vertex index
//! beta = 340                 # south pole
//! output = "out"             # optional, default "out"
//! frames = "frames"          # optional; PNG backgrounds for `serve`
//!
//! [camera]
//! focal = 50000.0            # optional, pixels
//! width = 1920
//! height = 1080
//!
//! [tolerances]               # every key optional
//! ransac_seed = 0
//! lookup = "nearest"
//! ```

use crate::error::{io_error, CliError};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use surfreg::camera::{CameraModel, DEFAULT_FOCAL};
use surfreg::geodesic::{
    parameterize_with, read_parameterization, FmmOptions, ParamOptions, TraceOptions,
};
use surfreg::mesh::{extract_region, load_mesh, read_selection, MeshFormat};
use surfreg::pnp::{LookupMode, PnpOptions, RansacOptions};
use surfreg::{RegionMesh, SurfaceParameterization, TriangleMesh};

/// Name of the parameterization file inside the output directory.
pub const PARAM_FILE: &str = "parameterization.txt";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    #[serde(default = "default_focal")]
    pub focal: f64,
    pub width: u32,
    pub height: u32,
    /// Principal point; the image center when absent.
    pub cx: Option<f64>,
    pub cy: Option<f64>,
}

fn default_focal() -> f64 {
    DEFAULT_FOCAL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Lookup {
    #[default]
    Nearest,
    Interpolated,
}

impl From<Lookup> for LookupMode {
    fn from(l: Lookup) -> Self {
        match l {
            Lookup::Nearest => LookupMode::Nearest,
            Lookup::Interpolated => LookupMode::Interpolated,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub fmm_max_unfold: usize,
    pub trace_snap: f64,
    pub trace_edge_bias: f64,
    pub solver_max_iterations: usize,
    pub solver_tol: f64,
    pub planar_threshold: f64,
    pub ransac_iterations: usize,
    pub ransac_threshold_px: f64,
    pub ransac_seed: u64,
    pub ransac_min_inlier_ratio: f64,
    pub lookup: Lookup,
}

impl Default for Tolerances {
    fn default() -> Self {
        let p = ParamOptions::default();
        let s = PnpOptions::default();
        let r = RansacOptions::default();
        Self {
            fmm_max_unfold: p.fmm.max_unfold,
            trace_snap: p.trace.snap,
            trace_edge_bias: p.trace.edge_bias,
            solver_max_iterations: s.max_iterations,
            solver_tol: s.tol,
            planar_threshold: s.planar_threshold,
            ransac_iterations: r.iterations,
            ransac_threshold_px: r.inlier_threshold_px,
            ransac_seed: r.seed,
            ransac_min_inlier_ratio: r.min_inlier_ratio,
            lookup: Lookup::Nearest,
        }
    }
}

impl Tolerances {
    pub fn param_options(&self) -> ParamOptions {
        ParamOptions {
            fmm: FmmOptions {
                max_unfold: self.fmm_max_unfold,
            },
            trace: TraceOptions {
                snap: self.trace_snap,
                edge_bias: self.trace_edge_bias,
            },
        }
    }

    pub fn pnp_options(&self) -> PnpOptions {
        PnpOptions {
            max_iterations: self.solver_max_iterations,
            tol: self.solver_tol,
            planar_threshold: self.planar_threshold,
        }
    }

    pub fn ransac_options(&self) -> RansacOptions {
        RansacOptions {
            iterations: self.ransac_iterations,
            inlier_threshold_px: self.ransac_threshold_px,
            seed: self.ransac_seed,
            min_inlier_ratio: self.ransac_min_inlier_ratio,
            solver: self.pnp_options(),
            ..RansacOptions::default()
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mesh: PathBuf,
    region: Option<PathBuf>,
    alpha: usize,
    beta: usize,
    camera: CameraConfig,
    #[serde(default)]
    tolerances: Tolerances,
    output: Option<PathBuf>,
    frames: Option<PathBuf>,
}

/// A loaded configuration with every path resolved against the config file's
/// directory.
#[derive(Debug, Clone)]
pub struct ProjectConfig {
    pub mesh: PathBuf,
    pub region: Option<PathBuf>,
    pub alpha: usize,
    pub beta: usize,
    pub camera: CameraModel,
    pub tolerances: Tolerances,
    pub output: PathBuf,
    pub frames: Option<PathBuf>,
}

fn must_exist(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::input(format!("{what} not found: {}", path.display())))
    }
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|e| e.context(path.display()))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::input(e.to_string()))?;
        let mesh = base.join(&raw.mesh);
        must_exist(&mesh, "mesh")?;
        let region = raw.region.map(|r| base.join(r));
        if let Some(r) = &region {
            must_exist(r, "region")?;
        }
        let frames = raw.frames.map(|f| base.join(f));
        if let Some(f) = &frames {
            must_exist(f, "frames directory")?;
        }
        let c = &raw.camera;
        let mut camera = CameraModel::new(c.focal, c.width, c.height)?;
        camera.cx = c.cx.unwrap_or(camera.cx);
        camera.cy = c.cy.unwrap_or(camera.cy);
        camera.validate()?;
        Ok(Self {
            mesh,
            region,
            alpha: raw.alpha,
            beta: raw.beta,
            camera,
            tolerances: raw.tolerances,
            output: base.join(raw.output.unwrap_or_else(|| "out".into())),
            frames,
        })
    }

    pub fn load_mesh(&self) -> Result<TriangleMesh, CliError> {
        let format = MeshFormat::from_path(&self.mesh).ok_or_else(|| {
            CliError::input(format!(
                "{}: unknown mesh format (expected .obj or .ply)",
                self.mesh.display()
            ))
        })?;
        Ok(load_mesh(&self.mesh, format)?)
    }

    /// The region mesh; poles must lie inside it.
    pub fn load_region(&self) -> Result<RegionMesh, CliError> {
        let mesh = Arc::new(self.load_mesh()?);
        let ids = match &self.region {
            Some(p) => read_selection(p)?,
            None => (0..mesh.vertex_count()).collect(),
        };
        let region = extract_region(mesh, &ids)?;
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if region.to_local(v).is_none() {
                return Err(CliError::input(format!(
                    "pole {name} = {v} is not a vertex of the region"
                )));
            }
        }
        Ok(region)
    }

    pub fn param_path(&self) -> PathBuf {
        self.output.join(PARAM_FILE)
    }

    pub fn compute_parameterization(&self) -> Result<SurfaceParameterization, CliError> {
        let region = self.load_region()?;
        Ok(parameterize_with(
            &region,
            self.alpha,
            self.beta,
            &self.tolerances.param_options(),
        )?)
    }

    /// Reads the parameterization written by `parameterize` if present,
    /// otherwise computes it.
    pub fn parameterization(&self) -> Result<SurfaceParameterization, CliError> {
        let path = self.param_path();
        if !path.exists() {
            return self.compute_parameterization();
        }
        let text = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        let mesh = Arc::new(self.load_mesh()?);
        let p = read_parameterization(&text, mesh).map_err(|e| CliError::from(e).context(path.display()))?;
        if (p.alpha(), p.beta()) != (self.alpha, self.beta) {
            return Err(CliError::input(format!(
                "{} was computed for poles ({}, {}), the config names ({}, {})",
                path.display(),
                p.alpha(),
                p.beta(),
                self.alpha,
                self.beta
            )));
        }
        Ok(p)
    }
}
