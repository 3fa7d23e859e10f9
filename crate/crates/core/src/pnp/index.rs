//! Lookup from (μ, ν) to surface points.

use crate::geodesic::SurfaceParameterization;
use crate::mesh::TriangleMesh;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LookupMode {
    /// Position of the chart vertex closest in (μ, ν); ties go to the lower
    /// vertex index.
    #[default]
    Nearest,
    /// Barycentric interpolation inside the chart triangle containing
    /// (μ, ν), falling back to the nearest vertex outside the chart.
    Interpolated,
}

/// Uniform-grid index over the chart's (μ, ν) values. Built once per
/// parameterization and immutable afterwards.
#[derive(Debug, Clone)]
pub struct ParamIndex {
    uv: Vec<[f64; 2]>,
    positions: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    grid: usize,
    vertex_cells: Vec<Vec<u32>>,
    face_cells: Vec<Vec<u32>>,
    mode: LookupMode,
}

impl ParamIndex {
    pub fn new(param: &SurfaceParameterization, mode: LookupMode) -> Self {
        let chart = param.chart();
        Self::from_parts(&chart.mesh, &chart.uv, mode)
    }

    /// Index over arbitrary per-vertex (μ, ν) values of `mesh`.
    pub fn from_parts(mesh: &TriangleMesh, uv: &[[f64; 2]], mode: LookupMode) -> Self {
        assert_eq!(uv.len(), mesh.vertex_count(), "one (μ, ν) per vertex");
        let grid = ((uv.len() as f64 / 2.0).sqrt().ceil() as usize).clamp(1, 1024);
        let mut vertex_cells = vec![Vec::new(); grid * grid];
        let cell = |x: f64| ((x.clamp(0.0, 1.0) * grid as f64) as usize).min(grid - 1);
        for (i, p) in uv.iter().enumerate() {
            vertex_cells[cell(p[1]) * grid + cell(p[0])].push(i as u32);
        }
        let mut face_cells = vec![Vec::new(); grid * grid];
        if mode == LookupMode::Interpolated {
            for (fi, f) in mesh.faces().iter().enumerate() {
                let lo = |k: usize| f.iter().map(|&v| uv[v][k]).fold(f64::INFINITY, f64::min);
                let hi = |k: usize| f.iter().map(|&v| uv[v][k]).fold(f64::NEG_INFINITY, f64::max);
                for cy in cell(lo(1))..=cell(hi(1)) {
                    for cx in cell(lo(0))..=cell(hi(0)) {
                        face_cells[cy * grid + cx].push(fi as u32);
                    }
                }
            }
        }
        Self {
            uv: uv.to_vec(),
            positions: mesh.vertices().to_vec(),
            faces: mesh.faces().to_vec(),
            grid,
            vertex_cells,
            face_cells,
            mode,
        }
    }

    pub fn mode(&self) -> LookupMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.uv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uv.is_empty()
    }

    fn cell_of(&self, x: f64) -> usize {
        ((x.clamp(0.0, 1.0) * self.grid as f64) as usize).min(self.grid - 1)
    }

    /// Index of the vertex nearest to `q` in (μ, ν).
    pub fn nearest_vertex(&self, q: [f64; 2]) -> Option<usize> {
        if self.uv.is_empty() {
            return None;
        }
        let g = self.grid as isize;
        let h = 1.0 / self.grid as f64;
        let (cx, cy) = (self.cell_of(q[0]) as isize, self.cell_of(q[1]) as isize);
        let mut best: Option<(f64, usize)> = None;
        for ring in 0..=g {
            for y in (cy - ring)..=(cy + ring) {
                for x in (cx - ring)..=(cx + ring) {
                    let on_ring = (y - cy).abs() == ring || (x - cx).abs() == ring;
                    if !on_ring || x < 0 || y < 0 || x >= g || y >= g {
                        continue;
                    }
                    for &v in &self.vertex_cells[(y * g + x) as usize] {
                        let p = self.uv[v as usize];
                        let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                        let better = match best {
                            None => true,
                            Some((bd, bv)) => d < bd || (d == bd && (v as usize) < bv),
                        };
                        if better {
                            best = Some((d, v as usize));
                        }
                    }
                }
            }
            // every unvisited cell is at least `ring * h` away
            if let Some((bd, _)) = best {
                let reach = ring as f64 * h;
                if bd < reach * reach {
                    break;
                }
            }
        }
        best.map(|(_, v)| v)
    }

    /// Chart face containing `q` and the barycentric weights there.
    pub fn locate(&self, q: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let cell = self.cell_of(q[1]) * self.grid + self.cell_of(q[0]);
        for &fi in &self.face_cells[cell] {
            let f = self.faces[fi as usize];
            let [a, b, c] = f.map(|v| self.uv[v]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            if det == 0.0 {
                continue;
            }
            let l1 = ((q[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (q[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (q[1] - a[1]) - (q[0] - a[0]) * (b[1] - a[1])) / det;
            let l0 = 1.0 - l1 - l2;
            let eps = -1e-12;
            if l0 >= eps && l1 >= eps && l2 >= eps {
                return Some((fi as usize, [l0, l1, l2]));
            }
        }
        None
    }

    /// Surface point for a (μ, ν) query under the index's lookup mode.
    pub fn lookup(&self, q: [f64; 2]) -> Option<Vec3> {
        if self.mode == LookupMode::Interpolated {
            if let Some((fi, w)) = self.locate(q) {
                let f = self.faces[fi];
                return Some(
                    self.positions[f[0]] * w[0]
                        + self.positions[f[1]] * w[1]
                        + self.positions[f[2]] * w[2],
                );
            }
        }
        self.nearest_vertex(q).map(|v| self.positions[v])
    }

    pub fn position(&self, v: usize) -> Vec3 {
        self.positions[v]
    }

    pub fn uv(&self, v: usize) -> [f64; 2] {
        self.uv[v]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::flat_grid;

    fn brute(uv: &[[f64; 2]], q: [f64; 2]) -> usize {
        let d = |p: &[f64; 2]| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        (0..uv.len())
            .min_by(|&a, &b| d(&uv[a]).total_cmp(&d(&uv[b])).then(a.cmp(&b)))
            .unwrap()
    }

    #[test]
    fn nearest_matches_brute_force() {
        let m = flat_grid(7, 5, 1.0, 1.0);
        let uv: Vec<[f64; 2]> = m
            .vertices()
            .iter()
            .map(|p| [p.x * p.x, 0.5 * p.y + 0.2 * p.x])
            .collect();
        let idx = ParamIndex::from_parts(&m, &uv, LookupMode::Nearest);
        for i in 0..40 {
            let q = [(i as f64 * 0.137) % 1.0, (i as f64 * 0.311) % 1.0];
            assert_eq!(idx.nearest_vertex(q), Some(brute(&uv, q)));
        }
    }

    #[test]
    fn ties_go_to_lower_index() {
        let m = flat_grid(2, 2, 1.0, 1.0);
        let uv = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let idx = ParamIndex::from_parts(&m, &uv, LookupMode::Nearest);
        assert_eq!(idx.nearest_vertex([0.5, 0.5]), Some(0));
    }

    #[test]
    fn interpolated_lookup_inverts_linear_chart() {
        let m = flat_grid(5, 5, 2.0, 3.0);
        let uv: Vec<[f64; 2]> = m.vertices().iter().map(|p| [p.x / 2.0, p.y / 3.0]).collect();
        let idx = ParamIndex::from_parts(&m, &uv, LookupMode::Interpolated);
        let p = idx.lookup([0.3, 0.7]).unwrap();
        assert!((p.x - 0.6).abs() < 1e-12 && (p.y - 2.1).abs() < 1e-12);
    }
}
