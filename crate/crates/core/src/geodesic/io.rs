//! Plain-text storage for parameterizations.
//!
//! ```text
//! surfreg-param 1
//! parent_vertices 2562
//! poles 0 11
//! options 8 0.01 0.0001
//! region 2562
//! <parent id> <μ> <ν>          one line per region vertex
//! meridian 41
//! <face> <b0> <b1> <b2> <μ>    one line per meridian point
//! ```
//!
//! Faces in the meridian block index the region mesh rebuilt from the listed
//! parent ids. Floats are written in shortest round-trip form, so a file read
//! back reproduces the parameterization bit for bit.

use super::fmm::FmmOptions;
use super::param::{ParamOptions, SurfaceParameterization};
use super::trace::TraceOptions;
use super::{GeodesicError, GeodesicPath, SurfacePoint};
use crate::mesh::{extract_region, TriangleMesh};
use std::io::Write;
use std::sync::Arc;

pub const PARAM_FORMAT_VERSION: u32 = 1;

pub fn write_parameterization<W: Write>(
    p: &SurfaceParameterization,
    mut out: W,
) -> std::io::Result<()> {
    let region = p.region();
    writeln!(out, "surfreg-param {PARAM_FORMAT_VERSION}")?;
    writeln!(out, "parent_vertices {}", region.parent().vertex_count())?;
    writeln!(out, "poles {} {}", p.alpha(), p.beta())?;
    let o = p.options();
    writeln!(
        out,
        "options {} {:?} {:?}",
        o.fmm.max_unfold, o.trace.snap, o.trace.edge_bias
    )?;
    writeln!(out, "region {}", region.vertex_count())?;
    for (local, uv) in p.uv().iter().enumerate() {
        writeln!(out, "{} {:?} {:?}", region.to_parent(local), uv[0], uv[1])?;
    }
    writeln!(out, "meridian {}", p.meridian().len())?;
    for (pt, mu) in p.meridian().points().iter().zip(p.meridian_mu()) {
        let b = pt.bary;
        writeln!(out, "{} {:?} {:?} {:?} {:?}", pt.face, b[0], b[1], b[2], mu)?;
    }
    out.flush()
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>), GeodesicError> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok((i + 1, line.split_whitespace().collect()));
        }
        Err(GeodesicError::Format {
            line: 0,
            message: "unexpected end of file".into(),
        })
    }

    fn header(&mut self, key: &str, args: usize) -> Result<(usize, Vec<&'a str>), GeodesicError> {
        let (line, words) = self.next()?;
        if words[0] != key || words.len() != args + 1 {
            return Err(GeodesicError::Format {
                line,
                message: format!("expected `{key}` with {args} value(s)"),
            });
        }
        Ok((line, words[1..].to_vec()))
    }
}

fn num<T: std::str::FromStr>(line: usize, word: &str) -> Result<T, GeodesicError> {
    word.parse().map_err(|_| GeodesicError::Format {
        line,
        message: format!("bad number `{word}`"),
    })
}

/// Reads a parameterization and attaches it to `mesh`, which must have the
/// vertex count it was computed for.
pub fn read_parameterization(
    text: &str,
    mesh: Arc<TriangleMesh>,
) -> Result<SurfaceParameterization, GeodesicError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (line, v) = lines.header("surfreg-param", 1)?;
    let version: u32 = num(line, v[0])?;
    if version != PARAM_FORMAT_VERSION {
        return Err(GeodesicError::Format {
            line,
            message: format!("unsupported version {version}"),
        });
    }
    let (line, v) = lines.header("parent_vertices", 1)?;
    let expected: usize = num(line, v[0])?;
    if expected != mesh.vertex_count() {
        return Err(GeodesicError::VertexCountMismatch {
            expected,
            got: mesh.vertex_count(),
        });
    }
    let (line, v) = lines.header("poles", 2)?;
    let (alpha, beta): (usize, usize) = (num(line, v[0])?, num(line, v[1])?);
    let (line, v) = lines.header("options", 3)?;
    let options = ParamOptions {
        fmm: FmmOptions {
            max_unfold: num(line, v[0])?,
        },
        trace: TraceOptions {
            snap: num(line, v[1])?,
            edge_bias: num(line, v[2])?,
        },
    };
    let (line, v) = lines.header("region", 1)?;
    let count: usize = num(line, v[0])?;
    let mut ids = Vec::with_capacity(count);
    let mut uv = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, w) = lines.next()?;
        if w.len() != 3 {
            return Err(GeodesicError::Format {
                line,
                message: "expected `<id> <mu> <nu>`".into(),
            });
        }
        ids.push(num::<usize>(line, w[0])?);
        uv.push([num(line, w[1])?, num(line, w[2])?]);
    }
    if ids.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GeodesicError::Format {
            line,
            message: "region ids must be strictly increasing".into(),
        });
    }
    let region = extract_region(mesh, &ids)?;
    let (line, v) = lines.header("meridian", 1)?;
    let count: usize = num(line, v[0])?;
    let mut points = Vec::with_capacity(count);
    let mut meridian_mu = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, w) = lines.next()?;
        if w.len() != 5 {
            return Err(GeodesicError::Format {
                line,
                message: "expected `<face> <b0> <b1> <b2> <mu>`".into(),
            });
        }
        let face: usize = num(line, w[0])?;
        if face >= region.mesh().face_count() {
            return Err(GeodesicError::Format {
                line,
                message: format!("face {face} out of range"),
            });
        }
        let bary = [num(line, w[1])?, num(line, w[2])?, num(line, w[3])?];
        points.push(SurfacePoint::at(region.mesh(), face, bary));
        meridian_mu.push(num(line, w[4])?);
    }
    let local = |id: usize| region.to_local(id).ok_or(GeodesicError::PoleOutsideRegion(id));
    let (a, b) = (local(alpha)?, local(beta)?);
    SurfaceParameterization::from_parts(
        region,
        a,
        b,
        uv,
        GeodesicPath::new(points),
        meridian_mu,
        options,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::parameterize;
    use crate::shapes::ossicle_patch;

    #[test]
    fn round_trip_is_exact() {
        let case = ossicle_patch();
        let mesh = Arc::new(case.mesh);
        let region = extract_region(mesh.clone(), &case.region).unwrap();
        let p = parameterize(&region, case.alpha, case.beta).unwrap();
        let mut buf = Vec::new();
        write_parameterization(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let q = read_parameterization(&text, mesh).unwrap();
        assert_eq!(q.uv(), p.uv());
        assert_eq!(q.meridian(), p.meridian());
        assert_eq!(q.chart().uv, p.chart().uv);
        assert_eq!(q.chart().mesh, p.chart().mesh);
        let mut again = Vec::new();
        write_parameterization(&q, &mut again).unwrap();
        assert_eq!(String::from_utf8(again).unwrap(), text);
    }

    #[test]
    fn rejects_wrong_version_and_count() {
        let mesh = Arc::new(crate::shapes::unit_square());
        let err = read_parameterization("surfreg-param 9\n", mesh.clone()).unwrap_err();
        assert!(matches!(err, GeodesicError::Format { line: 1, .. }));
        let err =
            read_parameterization("surfreg-param 1\nparent_vertices 7\n", mesh).unwrap_err();
        assert!(matches!(
            err,
            GeodesicError::VertexCountMismatch { expected: 7, got: 4 }
        ));
    }
}
