//! PLY / OBJ mesh files and CSV per-vertex fields.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Point, TriangleMesh, Unit, VertexField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Ply,
    Obj,
    /// Pick from the file extension.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default()
}

/// Reads and validates a triangle mesh. Polygons are fan-triangulated.
pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let format = match format {
        MeshFormat::Auto => match extension(path).as_str() {
            "ply" => MeshFormat::Ply,
            "obj" => MeshFormat::Obj,
            other => return Err(parse_err(path, 0, format!("unknown mesh extension '{other}'"))),
        },
        f => f,
    };
    let bytes = fs::read(path)?;
    let (vertices, polygons) = match format {
        MeshFormat::Ply => {
            let ply = parse_ply(path, &bytes)?;
            (ply.positions()?, ply.polygons()?)
        }
        MeshFormat::Obj => parse_obj(path, &bytes)?,
        MeshFormat::Auto => unreachable!(),
    };
    let mut faces = Vec::with_capacity(polygons.len());
    for (f, poly) in polygons.iter().enumerate() {
        if poly.len() < 3 {
            return Err(Error::Validation {
                element: "face",
                index: f,
                message: format!("polygon with {} vertices", poly.len()),
            });
        }
        for k in 1..poly.len() - 1 {
            faces.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Writes positions as float64 and faces as uint32 vertex lists.
pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>, encoding: PlyEncoding) -> Result<()> {
    write_ply(mesh, None, path.as_ref(), encoding)
}

/// Writes `vertex_index,value` CSV; for a `.ply` path, additionally writes
/// the mesh with a per-vertex `quality` property, and the CSV goes next to
/// it with a `.csv` extension.
pub fn save_field(mesh: &TriangleMesh, field: &VertexField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if field.len() != mesh.n_vertices() {
        return Err(Error::Contract(format!(
            "field has {} values but mesh has {} vertices",
            field.len(),
            mesh.n_vertices()
        )));
    }
    let csv_path = if extension(path) == "ply" {
        write_ply(mesh, Some(field.values()), path, PlyEncoding::BinaryLittleEndian)?;
        path.with_extension("csv")
    } else {
        path.to_path_buf()
    };
    let mut w = BufWriter::new(fs::File::create(&csv_path)?);
    writeln!(w, "vertex_index,value")?;
    for (i, v) in field.values().iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field written by [`save_field`] (CSV, or the `quality` property of a PLY).
pub fn load_field(path: impl AsRef<Path>, unit: Unit) -> Result<VertexField> {
    let path = path.as_ref();
    if extension(path) == "ply" {
        let ply = parse_ply(path, &fs::read(path)?)?;
        let values = ply.vertex_property("quality")?;
        return VertexField::new(values, unit);
    }
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let (idx, val) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, lineno + 1, "expected 'vertex_index,value'"))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno + 1, format!("bad vertex index '{idx}'")))?;
        if idx != values.len() {
            return Err(parse_err(path, lineno + 1, format!("expected index {}, found {idx}", values.len())));
        }
        let val: f64 = val
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno + 1, format!("bad value '{val}'")))?;
        values.push(val);
    }
    VertexField::new(values, unit)
}

fn write_ply(mesh: &TriangleMesh, quality: Option<&[f64]>, path: &Path, encoding: PlyEncoding) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply\nformat {format} 1.0")?;
    writeln!(w, "element vertex {}", mesh.n_vertices())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if quality.is_some() {
        writeln!(w, "property double quality")?;
    }
    writeln!(w, "element face {}", mesh.n_faces())?;
    writeln!(w, "property list uchar uint vertex_indices\nend_header")?;
    match encoding {
        PlyEncoding::Ascii => {
            for (i, p) in mesh.vertices().iter().enumerate() {
                write!(w, "{} {} {}", p.x, p.y, p.z)?;
                if let Some(q) = quality {
                    write!(w, " {}", q[i])?;
                }
                writeln!(w)?;
            }
            for f in mesh.faces() {
                writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            for (i, p) in mesh.vertices().iter().enumerate() {
                for c in [p.x, p.y, p.z] {
                    w.write_all(&c.to_le_bytes())?;
                }
                if let Some(q) = quality {
                    w.write_all(&q[i].to_le_bytes())?;
                }
            }
            for f in mesh.faces() {
                w.write_all(&[3u8])?;
                for &v in f {
                    let v = u32::try_from(v).map_err(|_| Error::Contract("vertex index exceeds u32".into()))?;
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
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
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, kind: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
    /// rows[i][p] holds the values of property p for item i
    rows: Vec<Vec<Vec<f64>>>,
}

struct Ply<'a> {
    path: &'a Path,
    elements: Vec<Element>,
}

impl Ply<'_> {
    fn element(&self, name: &str) -> Result<&Element> {
        self.elements
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| parse_err(self.path, 0, format!("missing element '{name}'")))
    }

    fn vertex_property(&self, prop: &str) -> Result<Vec<f64>> {
        let vert = self.element("vertex")?;
        let p = vert
            .properties
            .iter()
            .position(|p| p.name() == prop)
            .ok_or_else(|| parse_err(self.path, 0, format!("missing vertex property '{prop}'")))?;
        Ok(vert.rows.iter().map(|r| r[p][0]).collect())
    }

    fn positions(&self) -> Result<Vec<Point>> {
        let (x, y, z) = (
            self.vertex_property("x")?,
            self.vertex_property("y")?,
            self.vertex_property("z")?,
        );
        Ok((0..x.len()).map(|i| Point::new(x[i], y[i], z[i])).collect())
    }

    fn polygons(&self) -> Result<Vec<Vec<usize>>> {
        let face = self.element("face")?;
        let p = face
            .properties
            .iter()
            .position(|p| matches!(p.name(), "vertex_indices" | "vertex_index"))
            .ok_or_else(|| parse_err(self.path, 0, "face element lacks vertex_indices"))?;
        face.rows
            .iter()
            .enumerate()
            .map(|(f, r)| {
                r[p].iter()
                    .map(|&v| {
                        if v < 0.0 || v.fract() != 0.0 {
                            Err(Error::Validation {
                                element: "face",
                                index: f,
                                message: format!("invalid vertex index {v}"),
                            })
                        } else {
                            Ok(v as usize)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

fn parse_ply<'a>(path: &'a Path, bytes: &[u8]) -> Result<Ply<'a>> {
    // header is ASCII, terminated by "end_header\n"
    let marker = b"end_header";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| parse_err(path, 1, "missing end_header"))?;
    let mut body_start = end + marker.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| parse_err(path, 1, "header is not UTF-8"))?;
    let mut lines = header.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_err(path, 1, "missing 'ply' magic")),
    }
    let mut ascii = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _version] => {
                ascii = Some(match *fmt {
                    "ascii" => true,
                    "binary_little_endian" => false,
                    other => return Err(parse_err(path, lineno, format!("unsupported format '{other}'"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(path, lineno, format!("bad element count '{count}'")))?,
                properties: Vec::new(),
                rows: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(parse_err(path, lineno, "unknown list property type"));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, lineno, "property before element"))?
                    .properties
                    .push(Property::List {
                        name: name.to_string(),
                        count,
                        item,
                    });
            }
            ["property", kind, name] => {
                let kind = Scalar::parse(kind)
                    .ok_or_else(|| parse_err(path, lineno, format!("unknown property type '{kind}'")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, lineno, "property before element"))?
                    .properties
                    .push(Property::Scalar {
                        name: name.to_string(),
                        kind,
                    });
            }
            _ => return Err(parse_err(path, lineno, format!("unrecognized header line '{line}'"))),
        }
    }
    let ascii = ascii.ok_or_else(|| parse_err(path, 1, "missing format line"))?;
    let header_lines = header.lines().count() + 1;
    let body = &bytes[body_start..];

    if ascii {
        let text = std::str::from_utf8(body).map_err(|_| parse_err(path, header_lines, "body is not UTF-8"))?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        for el in &mut elements {
            el.rows.reserve(el.count);
            for _ in 0..el.count {
                let (i, line) = lines
                    .next()
                    .ok_or_else(|| parse_err(path, 0, format!("unexpected end of '{}' data", el.name)))?;
                let lineno = header_lines + i + 1;
                let mut nums = line.split_whitespace().map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| parse_err(path, lineno, format!("bad number '{t}'")))
                });
                let mut next = || nums.next().unwrap_or_else(|| Err(parse_err(path, lineno, "too few values")));
                let mut row = Vec::with_capacity(el.properties.len());
                for prop in &el.properties {
                    match prop {
                        Property::Scalar { .. } => row.push(vec![next()?]),
                        Property::List { .. } => {
                            let n = next()?;
                            if n < 0.0 || n.fract() != 0.0 {
                                return Err(parse_err(path, lineno, format!("bad list length {n}")));
                            }
                            row.push((0..n as usize).map(|_| next()).collect::<Result<_>>()?);
                        }
                    }
                }
                el.rows.push(row);
            }
        }
    } else {
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize, what: &str| -> Result<&[u8]> {
            let s = body
                .get(*pos..*pos + n)
                .ok_or_else(|| parse_err(path, 0, format!("truncated binary data in '{what}'")))?;
            *pos += n;
            Ok(s)
        };
        for el in &mut elements {
            el.rows.reserve(el.count);
            for _ in 0..el.count {
                let mut row = Vec::with_capacity(el.properties.len());
                for prop in &el.properties {
                    match prop {
                        Property::Scalar { kind, .. } => {
                            row.push(vec![kind.read_le(take(&mut pos, kind.size(), &el.name)?)]);
                        }
                        Property::List { count, item, .. } => {
                            let n = count.read_le(take(&mut pos, count.size(), &el.name)?);
                            if n < 0.0 {
                                return Err(parse_err(path, 0, "negative list length"));
                            }
                            let mut vals = Vec::with_capacity(n as usize);
                            for _ in 0..n as usize {
                                vals.push(item.read_le(take(&mut pos, item.size(), &el.name)?));
                            }
                            row.push(vals);
                        }
                    }
                }
                el.rows.push(row);
            }
        }
    }
    Ok(Ply { path, elements })
}

type ObjData = (Vec<Point>, Vec<Vec<usize>>);

fn parse_obj(path: &Path, bytes: &[u8]) -> Result<ObjData> {
    let text = std::str::from_utf8(bytes).map_err(|_| parse_err(path, 0, "file is not UTF-8"))?;
    let mut vertices = Vec::new();
    let mut polygons = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse().map_err(|_| parse_err(path, lineno, format!("bad coordinate '{t}'"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(parse_err(path, lineno, "vertex needs 3 coordinates"));
                }
                vertices.push(Point::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let poly = tok
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let k: i64 = head
                            .parse()
                            .map_err(|_| parse_err(path, lineno, format!("bad face index '{t}'")))?;
                        // OBJ is 1-based; negative indices count back from the end
                        let idx = if k > 0 { k - 1 } else { vertices.len() as i64 + k };
                        if idx < 0 {
                            return Err(parse_err(path, lineno, format!("face index {k} out of range")));
                        }
                        Ok(idx as usize)
                    })
                    .collect::<Result<Vec<_>>>()?;
                polygons.push(poly);
            }
            _ => {}
        }
    }
    Ok((vertices, polygons))
}

/// Path with `suffix` appended to the file stem, e.g. `a.ply` -> `a_crest.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::{icosphere, tetrahedron};
    use std::fs;

    const TETRA_PLY: &str = "ply\nformat ascii 1.0\ncomment tetra\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nelement face 4\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";

    #[test]
    fn ascii_ply_tetrahedron() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        fs::write(&p, TETRA_PLY).unwrap();
        let m = load_mesh(&p, MeshFormat::Auto).unwrap();
        assert_eq!((m.n_vertices(), m.n_faces()), (4, 4));
        assert!(m.is_closed());
    }

    #[test]
    fn ply_index_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        fs::write(&p, TETRA_PLY.replace("3 1 2 3", "3 1 2 99")).unwrap();
        let err = load_mesh(&p, MeshFormat::Ply).unwrap_err();
        assert!(matches!(err, Error::Validation { element: "face", index: 3, .. }), "{err}");
    }

    #[test]
    fn malformed_ply_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.ply");
        fs::write(&p, TETRA_PLY.replace("1 0 0\n", "1 zero 0\n")).unwrap();
        assert!(matches!(load_mesh(&p, MeshFormat::Ply), Err(Error::Parse { .. })));
        fs::write(&p, "ply\nformat binary_big_endian 1.0\nend_header\n").unwrap();
        assert!(matches!(load_mesh(&p, MeshFormat::Ply), Err(Error::Parse { .. })));
    }

    #[test]
    fn obj_quad_is_fan_triangulated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.obj");
        fs::write(&p, "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n").unwrap();
        let m = load_mesh(&p, MeshFormat::Auto).unwrap();
        assert_eq!(m.n_faces(), 2);
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn binary_and_ascii_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = icosphere(2, 7.3);
        for enc in [PlyEncoding::BinaryLittleEndian, PlyEncoding::Ascii] {
            let p = dir.path().join(format!("{enc:?}.ply"));
            save_mesh(&m, &p, enc).unwrap();
            let back = load_mesh(&p, MeshFormat::Auto).unwrap();
            assert_eq!(back.faces(), m.faces());
            assert_eq!(back.vertices(), m.vertices());
        }
    }

    #[test]
    fn float32_binary_ply() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.ply");
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nelement face 4\nproperty list uchar uint vertex_indices\nend_header\n".to_vec();
        for v in [[0f32, 0., 0.], [1., 0., 0.], [0., 1., 0.], [0., 0., 1.]] {
            for c in v {
                bytes.extend_from_slice(&c.to_le_bytes());
            }
        }
        for f in [[0u32, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]] {
            bytes.push(3);
            for v in f {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(&p, bytes).unwrap();
        let m = load_mesh(&p, MeshFormat::Ply).unwrap();
        assert_eq!(m.vertices(), tetrahedron().vertices());
    }

    #[test]
    fn constant_field_csv() {
        let dir = tempfile::tempdir().unwrap();
        let m = tetrahedron();
        let f = VertexField::constant(4, 0.0, Unit::Millimeter).unwrap();
        let p = dir.path().join("f.csv");
        save_field(&m, &f, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "vertex_index,value\n0,0\n1,0\n2,0\n3,0\n");
    }

    #[test]
    fn field_round_trip_csv_and_ply() {
        let dir = tempfile::tempdir().unwrap();
        let m = icosphere(1, 1.0);
        let values: Vec<f64> = (0..m.n_vertices()).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        let f = VertexField::new(values, Unit::Dimensionless).unwrap();
        let csv = dir.path().join("d.csv");
        save_field(&m, &f, &csv).unwrap();
        let back = load_field(&csv, Unit::Dimensionless).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
        let ply = dir.path().join("d.ply");
        save_field(&m, &f, &ply).unwrap();
        assert_eq!(load_field(&ply, Unit::Dimensionless).unwrap(), f);
        assert_eq!(load_field(dir.path().join("d.csv"), Unit::Dimensionless).unwrap(), f);
        assert_eq!(load_mesh(&ply, MeshFormat::Ply).unwrap().vertices(), m.vertices());
    }

    #[test]
    fn save_field_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let m = tetrahedron();
        let f = VertexField::constant(3, 1.0, Unit::Millimeter).unwrap();
        assert!(matches!(save_field(&m, &f, dir.path().join("x.csv")), Err(Error::Contract(_))));
    }
}
