use super::cut::{cut_along_meridian, ChartVertex};
use super::fmm::{fast_march_with, FmmOptions};
use super::trace::{trace_meridian_with, TraceOptions};
use super::{GeodesicError, GeodesicPath, SurfacePoint};
use crate::mesh::{extract_region, RegionMesh, Topology, TriangleMesh};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParamOptions {
    pub fmm: FmmOptions,
    pub trace: TraceOptions,
}

/// The region slit open along the meridian, carrying (μ, ν) per vertex.
///
/// Unlike the per-region-vertex table, the chart is single-valued across the
/// seam: left-bank copies have ν = 0 and right-bank copies ν = 1, so triangles
/// beside the meridian interpolate without wrapping. Rendering and
/// correspondence lookup work on the chart.
#[derive(Debug, Clone)]
pub struct Chart {
    pub vertices: Vec<ChartVertex>,
    pub mesh: TriangleMesh,
    pub uv: Vec<[f64; 2]>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub inserted: usize,
    pub duplicated: usize,
}

/// Latitude/longitude coordinates over a region.
#[derive(Debug, Clone)]
pub struct SurfaceParameterization {
    region: RegionMesh,
    alpha: usize,
    beta: usize,
    uv: Vec<[f64; 2]>,
    meridian: GeodesicPath,
    meridian_mu: Vec<f64>,
    chart: Chart,
    options: ParamOptions,
}

impl SurfaceParameterization {
    pub fn region(&self) -> &RegionMesh {
        &self.region
    }

    /// North pole, as a parent-mesh index.
    pub fn alpha(&self) -> usize {
        self.region.to_parent(self.alpha)
    }

    /// South pole, as a parent-mesh index.
    pub fn beta(&self) -> usize {
        self.region.to_parent(self.beta)
    }

    pub fn alpha_local(&self) -> usize {
        self.alpha
    }

    pub fn beta_local(&self) -> usize {
        self.beta
    }

    /// (μ, ν) per region vertex, in local order.
    pub fn uv(&self) -> &[[f64; 2]] {
        &self.uv
    }

    /// (μ, ν) of a parent-mesh vertex, if it belongs to the region.
    pub fn uv_of_parent(&self, parent: usize) -> Option<[f64; 2]> {
        self.region.to_local(parent).map(|l| self.uv[l])
    }

    pub fn meridian(&self) -> &GeodesicPath {
        &self.meridian
    }

    /// μ at each meridian point.
    pub fn meridian_mu(&self) -> &[f64] {
        &self.meridian_mu
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn options(&self) -> &ParamOptions {
        &self.options
    }

    /// Rebuilds the chart from stored per-vertex values and the meridian.
    pub(crate) fn from_parts(
        region: RegionMesh,
        alpha: usize,
        beta: usize,
        uv: Vec<[f64; 2]>,
        meridian: GeodesicPath,
        meridian_mu: Vec<f64>,
        options: ParamOptions,
    ) -> Result<Self, GeodesicError> {
        let chart = build_chart(&region, &uv, &meridian, &meridian_mu)?;
        Ok(Self {
            region,
            alpha,
            beta,
            uv,
            meridian,
            meridian_mu,
            chart,
            options,
        })
    }
}

fn build_chart(
    region: &RegionMesh,
    uv: &[[f64; 2]],
    meridian: &GeodesicPath,
    meridian_mu: &[f64],
) -> Result<Chart, GeodesicError> {
    let cut = cut_along_meridian(region, meridian)?;
    if meridian_mu.len() != cut.left.len() {
        return Err(GeodesicError::Cut {
            vertex: cut.left[0],
            reason: format!(
                "{} meridian μ values for {} meridian vertices",
                meridian_mu.len(),
                cut.left.len()
            ),
        });
    }
    let n = region.vertex_count();
    let mut chart_uv = vec![[f64::NAN; 2]; cut.mesh.vertex_count()];
    chart_uv[..n].copy_from_slice(uv);
    for (i, &mu) in meridian_mu.iter().enumerate() {
        chart_uv[cut.right[i]] = [mu, 1.0];
    }
    for (i, &mu) in meridian_mu.iter().enumerate() {
        chart_uv[cut.left[i]] = [mu, 0.0];
    }
    if let Some(bad) = chart_uv.iter().position(|p| p[0].is_nan()) {
        return Err(GeodesicError::Cut {
            vertex: bad,
            reason: "chart vertex without coordinates".into(),
        });
    }
    Ok(Chart {
        vertices: cut.recipes,
        mesh: cut.mesh,
        uv: chart_uv,
        left: cut.left,
        right: cut.right,
        inserted: cut.inserted,
        duplicated: cut.duplicated,
    })
}

pub fn parameterize(
    region: &RegionMesh,
    alpha: usize,
    beta: usize,
) -> Result<SurfaceParameterization, GeodesicError> {
    parameterize_with(region, alpha, beta, &ParamOptions::default())
}

/// Computes (μ, ν) for every region vertex. `alpha` and `beta` are parent-mesh
/// vertex indices.
pub fn parameterize_with(
    region: &RegionMesh,
    alpha: usize,
    beta: usize,
    opts: &ParamOptions,
) -> Result<SurfaceParameterization, GeodesicError> {
    if alpha == beta {
        return Err(GeodesicError::SamePoles(alpha));
    }
    let a = region
        .to_local(alpha)
        .ok_or(GeodesicError::PoleOutsideRegion(alpha))?;
    let b = region
        .to_local(beta)
        .ok_or(GeodesicError::PoleOutsideRegion(beta))?;
    let mesh = region.mesh();
    let topo = Topology::new(mesh.vertex_count(), mesh.faces());
    let (from_alpha, from_beta) = rayon::join(
        || fast_march_with(mesh, &topo, &[a], &opts.fmm),
        || fast_march_with(mesh, &topo, &[b], &opts.fmm),
    );
    let (from_alpha, from_beta) = (from_alpha?, from_beta?);
    let meridian = trace_meridian_with(mesh, &topo, &from_beta, a, &opts.trace)?;
    let cut = cut_along_meridian(region, &meridian)?;
    let cut_topo = Topology::new(cut.mesh.vertex_count(), cut.mesh.faces());
    let (to_left, to_right) = rayon::join(
        || fast_march_with(&cut.mesh, &cut_topo, &cut.left, &opts.fmm),
        || fast_march_with(&cut.mesh, &cut_topo, &cut.right, &opts.fmm),
    );
    let (to_left, to_right) = (to_left?, to_right?);

    let latitude = |da: f64, db: f64, v: usize| {
        let s = da + db;
        if s > 0.0 {
            Ok((da / s).clamp(0.0, 1.0))
        } else {
            Err(GeodesicError::DegenerateDistances(v))
        }
    };
    let n = region.vertex_count();
    let mut on_meridian = vec![false; n];
    for &v in &cut.left {
        if v < n {
            on_meridian[v] = true;
        }
    }
    let mut uv = Vec::with_capacity(n);
    for v in 0..n {
        let mu = latitude(from_alpha.value(v), from_beta.value(v), v)?;
        let nu = if on_meridian[v] {
            0.0
        } else {
            let (dl, dr) = (to_left.value(v), to_right.value(v));
            if dl + dr > 0.0 {
                (dl / (dl + dr)).clamp(0.0, 1.0)
            } else {
                0.0
            }
        };
        uv.push([mu, nu]);
    }
    let mut meridian_mu = Vec::with_capacity(meridian.len());
    for (i, p) in meridian.points().iter().enumerate() {
        let f = mesh.faces()[p.face];
        let da = from_alpha.interpolate(&f, &p.bary);
        let db = from_beta.interpolate(&f, &p.bary);
        let mu = match cut.left[i] {
            v if v < n => uv[v][0],
            v => latitude(da, db, v)?,
        };
        meridian_mu.push(mu);
    }
    SurfaceParameterization::from_parts(region.clone(), a, b, uv, meridian, meridian_mu, *opts)
}

/// Copies a parameterization onto another instance of the same template
/// mesh, purely by vertex index.
pub fn transfer_parameterization(
    source: &SurfaceParameterization,
    target: Arc<TriangleMesh>,
) -> Result<SurfaceParameterization, GeodesicError> {
    let expected = source.region.parent().vertex_count();
    if target.vertex_count() != expected {
        return Err(GeodesicError::VertexCountMismatch {
            expected,
            got: target.vertex_count(),
        });
    }
    let region = extract_region(target, source.region.vertex_ids())?;
    let points = source
        .meridian
        .points()
        .iter()
        .map(|p| SurfacePoint::at(region.mesh(), p.face, p.bary))
        .collect();
    SurfaceParameterization::from_parts(
        region,
        source.alpha,
        source.beta,
        source.uv.clone(),
        GeodesicPath::new(points),
        source.meridian_mu.clone(),
        source.options,
    )
}
