//! OBJ / PLY readers and writers, and region selection files.
//!
//! OBJ: only `v x y z` and `f i j k` records are read (1-based indices,
//! `i/t/n` forms accepted, negative indices rejected); everything else is
//! ignored. PLY: `ascii 1.0` and `binary_little_endian 1.0`, element `vertex`
//! with x, y, z and element `face` with a list property of 3 indices. Other
//! elements and properties are skipped. Faces with more than 3 vertices are
//! rejected in both formats.

use super::{MeshError, TriangleMesh};
use crate::Vec3;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, MeshError> {
    std::fs::read(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh, MeshError> {
    let bytes = read_bytes(path)?;
    match format {
        MeshFormat::Obj => {
            let text = std::str::from_utf8(&bytes).map_err(|e| parse_err("file", e))?;
            parse_obj(text)
        }
        MeshFormat::Ply => parse_ply(&bytes),
    }
}

fn parse_err(location: impl Into<String>, message: impl ToString) -> MeshError {
    MeshError::Parse {
        location: location.into(),
        message: message.to_string(),
    }
}

pub fn parse_obj(text: &str) -> Result<TriangleMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut face_lines = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let loc = || format!("line {}", lineno + 1);
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(loc(), "vertex needs 3 coordinates"))?;
                    *c = tok
                        .parse()
                        .map_err(|_| parse_err(loc(), format!("bad coordinate {tok:?}")))?;
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err(parse_err(
                        loc(),
                        format!("face has {} vertices, only triangles are accepted", refs.len()),
                    ));
                }
                let mut f = [0usize; 3];
                for (slot, r) in f.iter_mut().zip(&refs) {
                    let idx = r.split('/').next().unwrap_or("");
                    let one_based: usize = idx
                        .parse()
                        .map_err(|_| parse_err(loc(), format!("bad vertex reference {r:?}")))?;
                    if one_based == 0 {
                        return Err(parse_err(loc(), "vertex references are 1-based"));
                    }
                    *slot = one_based - 1;
                }
                faces.push(f);
                face_lines.push(lineno + 1);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces).map_err(|e| match e {
        MeshError::IndexOutOfRange { face, index, count } => parse_err(
            format!("line {}", face_lines[face]),
            format!("vertex {} out of range ({count} vertices)", index + 1),
        ),
        MeshError::RepeatedIndex { face, index } => parse_err(
            format!("line {}", face_lines[face]),
            format!("vertex {} repeated in face", index + 1),
        ),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    encoding: PlyEncoding,
}

impl Cursor<'_> {
    fn scalar(&mut self, ty: Scalar, ctx: &dyn Fn() -> String) -> Result<f64, MeshError> {
        match self.encoding {
            PlyEncoding::BinaryLittleEndian => {
                let end = self.pos + ty.size();
                let bytes = self
                    .data
                    .get(self.pos..end)
                    .ok_or_else(|| parse_err(ctx(), "unexpected end of binary data"))?;
                self.pos = end;
                Ok(ty.read_le(bytes))
            }
            PlyEncoding::Ascii => {
                while self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
                    self.pos += 1;
                }
                let start = self.pos;
                while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(parse_err(ctx(), "unexpected end of ascii data"));
                }
                let tok = std::str::from_utf8(&self.data[start..self.pos])
                    .map_err(|e| parse_err(ctx(), e))?;
                tok.parse()
                    .map_err(|_| parse_err(ctx(), format!("bad number {tok:?}")))
            }
        }
    }
}

pub fn parse_ply(bytes: &[u8]) -> Result<TriangleMesh, MeshError> {
    let header_end = find_header_end(bytes)?;
    let header = std::str::from_utf8(&bytes[..header_end.0]).map_err(|e| parse_err("header", e))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(parse_err("header line 1", "missing 'ply' magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in lines.enumerate() {
        let loc = || format!("header line {}", i + 2);
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => encoding = Some(PlyEncoding::Ascii),
            ["format", "binary_little_endian", _] => {
                encoding = Some(PlyEncoding::BinaryLittleEndian)
            }
            ["format", other, ..] => {
                return Err(parse_err(loc(), format!("unsupported format {other}")))
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(loc(), format!("bad element count {count:?}")))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(loc(), "property before element"))?;
                el.props.push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(count)
                        .ok_or_else(|| parse_err(loc(), format!("unknown type {count}")))?,
                    item: Scalar::parse(item)
                        .ok_or_else(|| parse_err(loc(), format!("unknown type {item}")))?,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(loc(), "property before element"))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty)
                        .ok_or_else(|| parse_err(loc(), format!("unknown type {ty}")))?,
                });
            }
            ["comment", ..] | ["obj_info", ..] | [] | ["end_header"] => {}
            _ => return Err(parse_err(loc(), format!("unrecognized header line {line:?}"))),
        }
    }
    let encoding = encoding.ok_or_else(|| parse_err("header", "missing format line"))?;
    let mut cur = Cursor {
        data: bytes,
        pos: header_end.1,
        encoding,
    };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        let xyz_idx: Vec<Option<usize>> = ["x", "y", "z"]
            .iter()
            .map(|n| {
                el.props
                    .iter()
                    .position(|p| matches!(p, Property::Scalar { name, .. } if name == n))
            })
            .collect();
        if el.name == "vertex" && xyz_idx.iter().any(Option::is_none) {
            return Err(parse_err("header", "vertex element lacks x/y/z"));
        }
        for rec in 0..el.count {
            let ctx = || format!("{} record {}", el.name, rec);
            let mut values = [0.0f64; 3];
            let mut face = None;
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => {
                        let v = cur.scalar(*ty, &ctx)?;
                        if let Some(k) = xyz_idx.iter().position(|&x| x == Some(pi)) {
                            values[k] = v;
                        }
                    }
                    Property::List { name, count, item } => {
                        let n = cur.scalar(*count, &ctx)? as usize;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            items.push(cur.scalar(*item, &ctx)?);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index")
                        {
                            if n != 3 {
                                return Err(parse_err(
                                    ctx(),
                                    format!("face has {n} vertices, only triangles are accepted"),
                                ));
                            }
                            let mut f = [0usize; 3];
                            for (slot, &x) in f.iter_mut().zip(&items) {
                                if x < 0.0 || x.fract() != 0.0 {
                                    return Err(parse_err(ctx(), format!("bad index {x}")));
                                }
                                *slot = x as usize;
                            }
                            face = Some(f);
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Vec3::new(values[0], values[1], values[2]));
            } else if el.name == "face" {
                faces.push(face.ok_or_else(|| parse_err(ctx(), "face without index list"))?);
            }
        }
    }
    TriangleMesh::new(vertices, faces).map_err(|e| match e {
        MeshError::IndexOutOfRange { face, index, count } => parse_err(
            format!("face record {face}"),
            format!("vertex {index} out of range ({count} vertices)"),
        ),
        MeshError::RepeatedIndex { face, index } => parse_err(
            format!("face record {face}"),
            format!("vertex {index} repeated in face"),
        ),
        other => other,
    })
}

/// Returns (end of header text, start of body).
fn find_header_end(bytes: &[u8]) -> Result<(usize, usize), MeshError> {
    let marker = b"end_header";
    let at = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| parse_err("header", "missing end_header"))?;
    let mut body = at + marker.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) == Some(&b'\n') {
        body += 1;
    }
    Ok((at + marker.len(), body))
}

/// Writes an OBJ with shortest round-trip float formatting.
pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

/// Writes a PLY. Coordinates are stored as `double` so round trips are exact.
pub fn write_ply(mesh: &TriangleMesh, encoding: PlyEncoding) -> Vec<u8> {
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {format} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertex_count(),
        mesh.face_count()
    )
    .into_bytes();
    match encoding {
        PlyEncoding::Ascii => {
            let mut body = String::new();
            for v in mesh.vertices() {
                let _ = writeln!(body, "{:?} {:?} {:?}", v.x, v.y, v.z);
            }
            for f in mesh.faces() {
                let _ = writeln!(body, "3 {} {} {}", f[0], f[1], f[2]);
            }
            out.extend_from_slice(body.as_bytes());
        }
        PlyEncoding::BinaryLittleEndian => {
            for v in mesh.vertices() {
                for c in [v.x, v.y, v.z] {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            for f in mesh.faces() {
                out.push(3);
                for &i in f {
                    out.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
    }
    out
}

/// Parses a region selection: one 0-based vertex index per line, `#` comments.
pub fn parse_selection(text: &str) -> Result<Vec<usize>, MeshError> {
    let mut ids = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        ids.push(content.parse().map_err(|_| {
            parse_err(
                format!("line {}", lineno + 1),
                format!("bad vertex index {content:?}"),
            )
        })?);
    }
    Ok(ids)
}

pub fn read_selection(path: &Path) -> Result<Vec<usize>, MeshError> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| parse_err("file", e))?;
    parse_selection(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::icosphere;

    #[test]
    fn minimal_obj() {
        let m = parse_obj("# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1 2 3\n").unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.faces(), &[[0, 1, 2]]);
        assert_eq!(m.position(1), Vec3::x());
    }

    #[test]
    fn obj_slash_references() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 3//3\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn obj_out_of_range_reports_line() {
        let mut text = String::new();
        for i in 0..8 {
            text.push_str(&format!("v {i} 0 0\n"));
        }
        text.push_str("f 1 2 9\n");
        let err = parse_obj(&text).unwrap_err();
        match err {
            MeshError::Parse { location, .. } => assert_eq!(location, "line 9"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn obj_rejects_quads() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        assert!(err.to_string().contains("only triangles"));
    }

    #[test]
    fn ply_and_obj_agree() {
        let mesh = icosphere(2);
        let from_obj = parse_obj(&write_obj(&mesh)).unwrap();
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let from_ply = parse_ply(&write_ply(&mesh, enc)).unwrap();
            assert_eq!(from_ply, from_obj);
        }
        assert_eq!(from_obj, mesh);
    }

    #[test]
    fn ply_float_vertices_and_extra_elements() {
        let mut data = b"ply\nformat binary_little_endian 1.0\ncomment x\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 1\nproperty list uchar uint vertex_indices\nelement edge 1\nproperty int a\nproperty int b\nend_header\n".to_vec();
        for p in [[0.0f32, 0.0, 0.0], [1.5, 0.0, 0.0], [0.0, 2.25, 0.0]] {
            for c in p {
                data.extend_from_slice(&c.to_le_bytes());
            }
            data.push(7);
        }
        data.push(3);
        for i in [0u32, 1, 2] {
            data.extend_from_slice(&i.to_le_bytes());
        }
        data.extend_from_slice(&1i32.to_le_bytes());
        data.extend_from_slice(&2i32.to_le_bytes());
        let m = parse_ply(&data).unwrap();
        assert_eq!(m.position(2), Vec3::new(0.0, 2.25, 0.0));
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn ply_rejects_quads_with_record() {
        let text = "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let err = parse_ply(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("face record 0"), "{err}");
    }

    #[test]
    fn selection_with_comments() {
        let ids = parse_selection("# region\n3\n 1 # pole\n\n7\n").unwrap();
        assert_eq!(ids, vec![3, 1, 7]);
        assert!(parse_selection("x\n").is_err());
    }
}
