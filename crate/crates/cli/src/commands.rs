//! The subcommands. Each writes its outputs to disk and returns a short
//! human-readable report for stdout.

use crate::config::ProjectConfig;
use crate::error::{io_error, CliError};
use crate::render::{blank_frame, overlay_png, read_frame};
use nalgebra::Rotation3;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use surfreg::camera::{CameraModel, Pose, PoseRecord};
use surfreg::datagen::{
    generate_scene, oracle_predict, sample_id, sub_seed, write_scene, NoiseSpec, PoseSampler,
};
use surfreg::geodesic::write_parameterization;
use surfreg::metrics::{summarize, write_errors_csv, write_summary_csv, PoseErrorReport};
use surfreg::mesh::{write_ply, PlyEncoding};
use surfreg::pnp::{
    extract_correspondences, solve_pnp, solve_pnp_ransac, CorrespondenceSet, InitMethod,
    ParamIndex, PnpResult,
};
use surfreg::raster::{decode_map, encode_map, render_coordinate_map};
use surfreg::shapes::{icosphere, ossicle_patch};
use surfreg::{SurfaceParameterization, Vec3};

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into())
}

fn csv_err(e: impl std::fmt::Display) -> CliError {
    CliError::input(format!("csv: {e}"))
}

pub fn parameterize(cfg: &ProjectConfig, out: Option<&Path>) -> Result<String, CliError> {
    let p = cfg.compute_parameterization()?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.param_path());
    let mut bytes = Vec::new();
    write_parameterization(&p, &mut bytes).map_err(|e| io_error(&path, e))?;
    write_file(&path, &bytes)?;

    let region = p.region();
    let chart = p.chart();
    let (mut mu, mut nu) = ([f64::INFINITY, f64::NEG_INFINITY], [f64::INFINITY, f64::NEG_INFINITY]);
    for uv in p.uv() {
        mu = [mu[0].min(uv[0]), mu[1].max(uv[0])];
        nu = [nu[0].min(uv[1]), nu[1].max(uv[1])];
    }
    let mut r = String::new();
    let _ = writeln!(r, "region: {} vertices, {} faces", region.vertex_count(), region.mesh().face_count());
    let _ = writeln!(r, "poles: alpha {} beta {}", p.alpha(), p.beta());
    let _ = writeln!(
        r,
        "meridian: {} points, length {:.6}",
        p.meridian().len(),
        p.meridian().length()
    );
    let _ = writeln!(
        r,
        "chart: {} vertices ({} inserted on edges, {} duplicated along the seam)",
        chart.mesh.vertex_count(),
        chart.inserted,
        chart.duplicated
    );
    let _ = writeln!(r, "mu in [{:.6}, {:.6}], nu in [{:.6}, {:.6}]", mu[0], mu[1], nu[0], nu[1]);
    let _ = writeln!(r, "wrote {}", path.display());
    Ok(r)
}

/// Reads a pose file and checks it was authored for the configured camera.
pub fn read_pose(path: &Path, camera: &CameraModel) -> Result<Pose, CliError> {
    let rec = PoseRecord::read(path)?;
    if rec.camera != *camera {
        return Err(CliError::input(format!(
            "{}: pose record camera {:?} differs from the configured camera {:?}",
            path.display(),
            rec.camera,
            camera
        )));
    }
    Ok(rec.pose()?)
}

pub struct RenderArgs<'a> {
    pub pose: &'a Path,
    pub frame: Option<&'a Path>,
    pub opacity: f64,
    pub map_out: Option<&'a Path>,
    pub overlay_out: Option<&'a Path>,
}

pub fn render(cfg: &ProjectConfig, args: &RenderArgs) -> Result<String, CliError> {
    let param = cfg.parameterization()?;
    let cam = &cfg.camera;
    let pose = read_pose(args.pose, cam)?;
    let frame = match args.frame {
        Some(f) => read_frame(f, cam)?,
        None => blank_frame(cam),
    };
    let name = stem(args.pose);
    let dir = cfg.output.join("render");
    let map_path = args
        .map_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(format!("{name}_map.png")));
    let overlay_path = args
        .overlay_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(format!("{name}_overlay.png")));
    let map = render_coordinate_map(&param, cam, &pose)?;
    write_file(&map_path, &encode_map(&map)?)?;
    write_file(&overlay_path, &overlay_png(&param, cam, &pose, &frame, args.opacity)?)?;
    Ok(format!(
        "{} visible pixels\nwrote {}\nwrote {}\n",
        map.valid_count(),
        map_path.display(),
        overlay_path.display()
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SolverKind {
    /// Linear initialization and refinement on all correspondences.
    Direct,
    /// Consensus sampling, then refinement on the inliers.
    Ransac,
}

#[derive(Debug, Serialize)]
pub struct SolveDiagnostics {
    pub map: String,
    pub solver: &'static str,
    pub correspondences: usize,
    pub init: InitMethod,
    pub initial_rms: f64,
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub inliers: usize,
    pub inlier_ratio: f64,
    pub rms_history: Vec<f64>,
}

fn run_solver(
    cfg: &ProjectConfig,
    corr: &CorrespondenceSet,
    solver: SolverKind,
) -> Result<PnpResult, CliError> {
    let t = &cfg.tolerances;
    Ok(match solver {
        SolverKind::Direct => solve_pnp(corr, &cfg.camera, &t.pnp_options())?,
        SolverKind::Ransac => solve_pnp_ransac(corr, &cfg.camera, &t.ransac_options())?,
    })
}

pub struct SolveArgs<'a> {
    pub map: &'a Path,
    pub solver: SolverKind,
    pub pose_out: Option<&'a Path>,
    pub diagnostics_out: Option<&'a Path>,
}

pub fn solve(cfg: &ProjectConfig, args: &SolveArgs) -> Result<String, CliError> {
    let bytes = std::fs::read(args.map).map_err(|e| io_error(args.map, e))?;
    let map = decode_map(&bytes).map_err(|e| CliError::from(e).context(args.map.display()))?;
    let cam = &cfg.camera;
    if (map.width(), map.height()) != (cam.width, cam.height) {
        return Err(CliError::input(format!(
            "{}: map is {}x{}, the camera is {}x{}",
            args.map.display(),
            map.width(),
            map.height(),
            cam.width,
            cam.height
        )));
    }
    if map.valid_count() == 0 {
        return Err(CliError::empty(format!(
            "{}: map has no valid pixels, so there are no correspondences",
            args.map.display()
        )));
    }
    let param = cfg.parameterization()?;
    let index = ParamIndex::new(&param, cfg.tolerances.lookup.into());
    let corr = extract_correspondences(&map, &index);
    let result = run_solver(cfg, &corr, args.solver)?;

    let name = stem(args.map);
    let dir = cfg.output.join("solve");
    let pose_path = args
        .pose_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(format!("{name}.json")));
    let diag_path = args
        .diagnostics_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(format!("{name}.diagnostics.json")));
    let diag = SolveDiagnostics {
        map: args.map.display().to_string(),
        solver: match args.solver {
            SolverKind::Direct => "direct",
            SolverKind::Ransac => "ransac",
        },
        correspondences: corr.len(),
        init: result.init,
        initial_rms: result.initial_rms,
        rms: result.rms,
        iterations: result.iterations,
        converged: result.converged,
        inliers: result.inliers.len(),
        inlier_ratio: result.inlier_ratio,
        rms_history: result.rms_history.clone(),
    };
    if !result.rms.is_finite() {
        return Err(CliError::numerical("reprojection error is not finite"));
    }
    write_file(&pose_path, PoseRecord::new(&result.pose, cam).to_json().as_bytes())?;
    let mut text = serde_json::to_string_pretty(&diag).expect("diagnostics serialize");
    text.push('\n');
    write_file(&diag_path, text.as_bytes())?;
    Ok(format!(
        "{} correspondences, {} inliers, rms {:.6} px after {} iterations\nwrote {}\nwrote {}\n",
        corr.len(),
        result.inliers.len(),
        result.rms,
        result.iterations,
        pose_path.display(),
        diag_path.display()
    ))
}

/// Pose files of a directory, keyed by file stem. Solver diagnostics written
/// alongside poses are skipped.
fn pose_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(".json") && !name.ends_with(".diagnostics.json") && path.is_file() {
            out.insert(stem(&path), path);
        }
    }
    Ok(out)
}

pub struct EvalArgs<'a> {
    pub truth: &'a Path,
    pub predicted: &'a Path,
    /// Overrides the focal length recorded in the ground-truth files.
    pub focal: Option<f64>,
    pub out: &'a Path,
}

pub fn eval(args: &EvalArgs) -> Result<String, CliError> {
    let truth = pose_files(args.truth)?;
    let pred = pose_files(args.predicted)?;
    if let Some(id) = truth.keys().find(|id| !pred.contains_key(*id)) {
        return Err(CliError::input(format!(
            "sample {id}: no predicted pose in {}",
            args.predicted.display()
        )));
    }
    if let Some(id) = pred.keys().find(|id| !truth.contains_key(*id)) {
        return Err(CliError::input(format!(
            "sample {id}: no ground-truth pose in {}",
            args.truth.display()
        )));
    }
    if truth.is_empty() {
        return Err(CliError::empty(format!("no pose files in {}", args.truth.display())));
    }
    let mut reports = Vec::with_capacity(truth.len());
    for (id, path) in &truth {
        let t = PoseRecord::read(path)?;
        let p = PoseRecord::read(&pred[id])?;
        let focal = args.focal.unwrap_or(t.camera.focal);
        reports.push(PoseErrorReport::compare(id, &t.pose()?, &p.pose()?, focal)?);
    }
    let summary = summarize(&reports)?;
    let errors_path = args.out.join("errors.csv");
    let summary_path = args.out.join("summary.csv");
    let mut bytes = Vec::new();
    write_errors_csv(&reports, &mut bytes)?;
    write_file(&errors_path, &bytes)?;
    let mut bytes = Vec::new();
    write_summary_csv(&summary, &mut bytes)?;
    write_file(&summary_path, &bytes)?;

    let mut r = format!("{} samples\n", reports.len());
    for s in &summary {
        let _ = writeln!(
            r,
            "{:8} median {:.6}  q1 {:.6}  q3 {:.6}  max {:.6}",
            s.metric, s.median, s.q1, s.q3, s.max
        );
    }
    let _ = writeln!(r, "wrote {}\nwrote {}", errors_path.display(), summary_path.display());
    Ok(r)
}

pub struct SynthArgs<'a> {
    pub count: usize,
    pub seed: u64,
    pub max_attempts: usize,
    pub sampler: PoseSampler,
    pub out: Option<&'a Path>,
}

pub fn synth(cfg: &ProjectConfig, args: &SynthArgs) -> Result<String, CliError> {
    let param = cfg.parameterization()?;
    let samples = generate_scene(
        &param,
        &cfg.camera,
        &args.sampler,
        args.count,
        args.seed,
        args.max_attempts,
    )?;
    let dir = args.out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.join("scene"));
    create_dir(&dir)?;
    write_scene(&dir, &param, &cfg.camera, &args.sampler, args.seed, &samples)?;
    let pixels: usize = samples.iter().map(|s| s.map.valid_count()).sum();
    Ok(format!(
        "{} samples, {} visible pixels in total\nwrote {}\n",
        samples.len(),
        pixels,
        dir.display()
    ))
}

/// One point of a noise grid: `none`, or noise specs joined with `+`, for
/// example `gaussian:0.02+outlier:0.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseLevel(pub Vec<NoiseSpec>);

impl std::str::FromStr for NoiseLevel {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Self(Vec::new()));
        }
        s.split('+')
            .map(|part| part.trim().parse::<NoiseSpec>().map_err(CliError::from))
            .collect::<Result<_, _>>()
            .map(Self)
    }
}

impl std::fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return f.write_str("none");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct BenchRow {
    noise: String,
    sample_id: String,
    status: String,
    rot_deg: Option<f64>,
    ex_mm: Option<f64>,
    ey_mm: Option<f64>,
    ez_pct: Option<f64>,
    rms: Option<f64>,
    inlier_ratio: Option<f64>,
}

#[derive(Debug, Serialize)]
struct BenchSummaryRow<'a> {
    noise: &'a str,
    metric: &'a str,
    count: usize,
    failures: usize,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
    mean: f64,
}

pub struct BenchArgs<'a> {
    pub grid: &'a [NoiseLevel],
    pub count: usize,
    pub seed: u64,
    pub max_attempts: usize,
    pub sampler: PoseSampler,
    pub solver: SolverKind,
    pub out: Option<&'a Path>,
}

/// Renders `count` samples, corrupts each map at every noise level of the
/// grid and solves. Sample `i` draws its noise from `sub_seed(seed, i)`.
pub fn bench(cfg: &ProjectConfig, args: &BenchArgs) -> Result<String, CliError> {
    if args.grid.is_empty() {
        return Err(CliError::input("the noise grid is empty"));
    }
    let param = cfg.parameterization()?;
    let index = ParamIndex::new(&param, cfg.tolerances.lookup.into());
    let samples = generate_scene(
        &param,
        &cfg.camera,
        &args.sampler,
        args.count,
        args.seed,
        args.max_attempts,
    )?;
    let mut rows = Vec::with_capacity(args.grid.len() * samples.len());
    let mut summary_rows = Vec::new();
    let mut report = String::new();
    let labels: Vec<String> = args.grid.iter().map(|g| g.to_string()).collect();
    let mut summaries = Vec::new();
    for (level, label) in args.grid.iter().zip(&labels) {
        let results: Vec<(BenchRow, Option<PoseErrorReport>)> = samples
            .par_iter()
            .map(|s| {
                let id = sample_id(s.index);
                let noisy = oracle_predict(&s.map, &level.0, sub_seed(args.seed, s.index));
                let corr = extract_correspondences(&noisy, &index);
                let solved = run_solver(cfg, &corr, args.solver).and_then(|r| {
                    let e = PoseErrorReport::compare(&id, &s.pose, &r.pose, cfg.camera.focal)?;
                    Ok((r, e))
                });
                match solved {
                    Ok((r, e)) => (
                        BenchRow {
                            noise: label.clone(),
                            sample_id: id,
                            status: "ok".into(),
                            rot_deg: Some(e.rot_deg),
                            ex_mm: Some(e.ex_mm),
                            ey_mm: Some(e.ey_mm),
                            ez_pct: Some(e.ez_pct),
                            rms: Some(r.rms),
                            inlier_ratio: Some(r.inlier_ratio),
                        },
                        Some(e),
                    ),
                    Err(err) => (
                        BenchRow {
                            noise: label.clone(),
                            sample_id: id,
                            status: format!("failed: {err}"),
                            rot_deg: None,
                            ex_mm: None,
                            ey_mm: None,
                            ez_pct: None,
                            rms: None,
                            inlier_ratio: None,
                        },
                        None,
                    ),
                }
            })
            .collect();
        let mut ok = Vec::new();
        for (row, e) in results {
            rows.push(row);
            ok.extend(e);
        }
        let failures = samples.len() - ok.len();
        let _ = writeln!(report, "noise {label}: {} solved, {failures} failed", ok.len());
        if !ok.is_empty() {
            for s in summarize(&ok)? {
                let _ = writeln!(
                    report,
                    "  {:8} median {:.6}  q3 {:.6}  max {:.6}",
                    s.metric, s.median, s.q3, s.max
                );
                summaries.push((label.as_str(), failures, s));
            }
        }
    }
    for (label, failures, s) in &summaries {
        summary_rows.push(BenchSummaryRow {
            noise: label,
            metric: &s.metric,
            count: s.count,
            failures: *failures,
            min: s.min,
            q1: s.q1,
            median: s.median,
            q3: s.q3,
            max: s.max,
            mean: s.mean,
        });
    }

    let dir = args.out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.join("bench"));
    let report_path = dir.join("report.csv");
    let summary_path = dir.join("summary.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(csv_err)?;
    }
    if rows.is_empty() {
        w.write_record([
            "noise", "sample_id", "status", "rot_deg", "ex_mm", "ey_mm", "ez_pct", "rms",
            "inlier_ratio",
        ])
        .map_err(csv_err)?;
    }
    write_file(&report_path, &w.into_inner().map_err(csv_err)?)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &summary_rows {
        w.serialize(r).map_err(csv_err)?;
    }
    if summary_rows.is_empty() {
        w.write_record([
            "noise", "metric", "count", "failures", "min", "q1", "median", "q3", "max", "mean",
        ])
        .map_err(csv_err)?;
    }
    write_file(&summary_path, &w.into_inner().map_err(csv_err)?)?;
    let _ = writeln!(report, "wrote {}\nwrote {}", report_path.display(), summary_path.display());
    Ok(report)
}

/// Starting pose of a manual registration session: the region turned over
/// (180° about x) and centered on the optical axis at `depth` millimeters.
pub fn initial_pose(param: &SurfaceParameterization, depth: f64) -> Pose {
    let mesh = param.region().mesh();
    let c = mesh.vertices().iter().fold(Vec3::zeros(), |a, v| a + v) / mesh.vertex_count() as f64;
    let r = Rotation3::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI).into_inner();
    Pose {
        rotation: r,
        translation: Vec3::new(0.0, 0.0, depth) - r * c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExampleShape {
    /// Lens-shaped open ridge patch a few millimeters across.
    Ossicle,
    /// Unit icosphere (subdivision 4) with poles at opposite vertices.
    Sphere,
}

/// Writes a self-contained example case: mesh, region, config and one
/// background frame.
pub fn example(dir: &Path, shape: ExampleShape) -> Result<String, CliError> {
    create_dir(dir)?;
    let camera = CameraModel::new(surfreg::camera::DEFAULT_FOCAL, 1920, 1080)?;
    let (mesh, region, alpha, beta) = match shape {
        ExampleShape::Ossicle => {
            let c = ossicle_patch();
            (c.mesh, Some(c.region), c.alpha, c.beta)
        }
        ExampleShape::Sphere => (icosphere(4), None, 0, 11),
    };
    write_file(&dir.join("mesh.ply"), &write_ply(&mesh, PlyEncoding::BinaryLittleEndian))?;
    let mut config = String::from("mesh = \"mesh.ply\"\n");
    if let Some(ids) = &region {
        let mut text = String::from("# region vertex indices\n");
        for v in ids {
            let _ = writeln!(text, "{v}");
        }
        write_file(&dir.join("region.txt"), text.as_bytes())?;
        config.push_str("region = \"region.txt\"\n");
    }
    let _ = write!(
        config,
        "alpha = {alpha}\nbeta = {beta}\noutput = \"out\"\nframes = \"frames\"\n\n\
         [camera]\nfocal = {:?}\nwidth = {}\nheight = {}\n\n[tolerances]\nransac_seed = 0\n",
        camera.focal, camera.width, camera.height
    );
    write_file(&dir.join("config.toml"), config.as_bytes())?;

    // a dim diagonal gradient stands in for a video frame
    let frame = image::RgbaImage::from_fn(camera.width, camera.height, |x, y| {
        let g = (40 + (x + y) * 80 / (camera.width + camera.height)) as u8;
        image::Rgba([g, g, g.saturating_add(10), 255])
    });
    write_file(&dir.join("frames").join("frame000.png"), &crate::render::encode_rgba(&frame)?)?;

    // a pose that shows the region, for trying out `render`
    let param = ProjectConfig::load(&dir.join("config.toml"))?.compute_parameterization()?;
    let depth = match shape {
        ExampleShape::Ossicle => 700.0,
        ExampleShape::Sphere => 100.0,
    };
    PoseRecord::new(&initial_pose(&param, depth), &camera).write(&dir.join("pose.json"))?;
    Ok(format!("wrote example case to {}\n", dir.display()))
}
