//! OBJ and PLY mesh I/O.
//!
//! OBJ: `v` and `f` records only (polygons are fan-triangulated, `v/vt/vn`
//! references use the vertex index). PLY: ascii or binary (either
//! endianness) with `x y z` vertex properties, optional `red green blue`
//! uchar colors and a `vertex_indices` list per face.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::mesh::{Mesh, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    #[default]
    Ascii,
    BinaryLittleEndian,
}

pub const CONTACT_COLOR: [u8; 3] = [0, 255, 0];
pub const NO_CONTACT_COLOR: [u8; 3] = [128, 128, 128];

/// Green for contact vertices, gray elsewhere.
pub fn contact_colors(labels: &[bool]) -> Vec<[u8; 3]> {
    labels
        .iter()
        .map(|&c| if c { CONTACT_COLOR } else { NO_CONTACT_COLOR })
        .collect()
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Mesh> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (vertices, faces) = match format {
        MeshFormat::Obj => parse_obj(path, &bytes)?,
        MeshFormat::Ply => {
            let ply = parse_ply(path, &bytes)?;
            (ply.vertices, ply.faces)
        }
    };
    Mesh::new(vertices, faces)
}

/// Loads a PLY and returns its per-vertex colors when present.
pub fn load_ply_with_colors(path: &Path) -> Result<(Mesh, Option<Vec<[u8; 3]>>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ply = parse_ply(path, &bytes)?;
    Ok((Mesh::new(ply.vertices, ply.faces)?, ply.colors))
}

pub fn save_mesh(
    mesh: &Mesh,
    path: &Path,
    format: MeshFormat,
    vertex_colors: Option<&[[u8; 3]]>,
) -> Result<()> {
    let bytes = match format {
        MeshFormat::Obj => encode_obj(mesh).into_bytes(),
        MeshFormat::Ply => encode_ply(mesh, vertex_colors, PlyEncoding::Ascii)?,
    };
    write_atomic(path, &bytes)
}

pub fn save_ply(
    mesh: &Mesh,
    path: &Path,
    vertex_colors: Option<&[[u8; 3]]>,
    encoding: PlyEncoding,
) -> Result<()> {
    write_atomic(path, &encode_ply(mesh, vertex_colors, encoding)?)
}

/// Writes to a sibling temp file then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp: PathBuf = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn encode_obj(mesh: &Mesh) -> String {
    let mut s = String::with_capacity(mesh.vertex_count() * 40 + mesh.face_count() * 20);
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

fn parse_obj(path: &Path, bytes: &[u8]) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: format!("not utf-8: {e}"),
    })?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| err(format!("bad coordinate `{t}`: {e}"))))
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(err("vertex needs 3 coordinates".into()));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tokens {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|e| err(format!("bad face index `{t}`: {e}")))?;
                    if i <= 0 {
                        return Err(err(format!(
                            "unsupported face index {i} (negative or zero indices are not allowed)"
                        )));
                    }
                    idx.push(i as usize - 1);
                }
                if idx.len() < 3 {
                    return Err(err("face needs at least 3 vertices".into()));
                }
                for &i in &idx {
                    if i >= vertices.len() {
                        return Err(err(format!("face index {} refers to an undefined vertex", i + 1)));
                    }
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

fn encode_ply(mesh: &Mesh, colors: Option<&[[u8; 3]]>, encoding: PlyEncoding) -> Result<Vec<u8>> {
    if let Some(c) = colors {
        if c.len() != mesh.vertex_count() {
            return Err(Error::DimensionMismatch {
                field: "vertex_colors",
                expected: mesh.vertex_count(),
                actual: c.len(),
            });
        }
    }
    let mut header = String::from("ply\n");
    header.push_str(match encoding {
        PlyEncoding::Ascii => "format ascii 1.0\n",
        PlyEncoding::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    let _ = writeln!(header, "element vertex {}", mesh.vertex_count());
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    let _ = writeln!(header, "element face {}", mesh.face_count());
    header.push_str("property list uchar int vertex_indices\nend_header\n");

    let mut out = header.into_bytes();
    match encoding {
        PlyEncoding::Ascii => {
            let mut body = String::new();
            for (i, v) in mesh.vertices().iter().enumerate() {
                let _ = write!(body, "{} {} {}", v.x, v.y, v.z);
                if let Some(c) = colors {
                    let _ = write!(body, " {} {} {}", c[i][0], c[i][1], c[i][2]);
                }
                body.push('\n');
            }
            for f in mesh.faces() {
                let _ = writeln!(body, "3 {} {} {}", f[0], f[1], f[2]);
            }
            out.extend_from_slice(body.as_bytes());
        }
        PlyEncoding::BinaryLittleEndian => {
            for (i, v) in mesh.vertices().iter().enumerate() {
                for k in 0..3 {
                    out.extend_from_slice(&v[k].to_le_bytes());
                }
                if let Some(c) = colors {
                    out.extend_from_slice(&c[i]);
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
    Ok(out)
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

    fn read(self, b: &[u8], little: bool) -> f64 {
        macro_rules! rd {
            ($t:ty, $n:expr) => {{
                let arr: [u8; $n] = b[..$n].try_into().unwrap();
                (if little { <$t>::from_le_bytes(arr) } else { <$t>::from_be_bytes(arr) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => rd!(i16, 2),
            Scalar::U16 => rd!(u16, 2),
            Scalar::I32 => rd!(i32, 4),
            Scalar::U32 => rd!(u32, 4),
            Scalar::F32 => rd!(f32, 4),
            Scalar::F64 => rd!(f64, 8),
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
    properties: Vec<Property>,
}

struct PlyData {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    colors: Option<Vec<[u8; 3]>>,
}

#[derive(PartialEq)]
enum Encoding {
    Ascii,
    Little,
    Big,
}

fn parse_ply(path: &Path, bytes: &[u8]) -> Result<PlyData> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    // header is ascii, terminated by `end_header\n`
    let mut pos = 0;
    let mut line_no = 0;
    let next_line = |pos: &mut usize| -> Option<String> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..].iter().position(|&b| b == b'\n').map(|e| *pos + e).unwrap_or(bytes.len());
        let line = String::from_utf8_lossy(&bytes[*pos..end]).trim_end_matches('\r').to_string();
        *pos = (end + 1).min(bytes.len());
        Some(line)
    };

    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut magic = false;
    loop {
        let Some(line) = next_line(&mut pos) else {
            return Err(perr(line_no, "unexpected end of header".into()));
        };
        line_no += 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if !magic {
            if tokens.first() != Some(&"ply") {
                return Err(perr(line_no, "missing `ply` magic".into()));
            }
            magic = true;
            continue;
        }
        match tokens.as_slice() {
            ["format", fmt, _] => {
                encoding = Some(match *fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::Little,
                    "binary_big_endian" => Encoding::Big,
                    other => return Err(perr(line_no, format!("unknown format `{other}`"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|e| perr(line_no, format!("bad element count: {e}")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr(line_no, "property before element".into()))?;
                let count = Scalar::parse(count).ok_or_else(|| perr(line_no, format!("unknown type `{count}`")))?;
                let item = Scalar::parse(item).ok_or_else(|| perr(line_no, format!("unknown type `{item}`")))?;
                el.properties.push(Property::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr(line_no, "property before element".into()))?;
                let ty = Scalar::parse(ty).ok_or_else(|| perr(line_no, format!("unknown type `{ty}`")))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            ["end_header"] => break,
            [] => {}
            _ => return Err(perr(line_no, format!("unrecognised header line `{line}`"))),
        }
    }
    let encoding = encoding.ok_or_else(|| perr(line_no, "missing format line".into()))?;

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut colors: Option<Vec<[u8; 3]>> = None;

    // ascii body is tokenised line by line; binary is a byte cursor
    let text_lines: Vec<(usize, Vec<f64>)>;
    let mut text_iter;
    let mut cursor = pos;
    if encoding == Encoding::Ascii {
        let body = String::from_utf8_lossy(&bytes[pos..]).into_owned();
        text_lines = body
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                let vals = l
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| perr(line_no + i + 1, format!("bad number `{t}`: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                Ok((line_no + i + 1, vals))
            })
            .collect::<Result<_>>()?;
        text_iter = text_lines.into_iter();
    } else {
        text_iter = Vec::new().into_iter();
    }
    let little = encoding == Encoding::Little;

    for el in &elements {
        for rec in 0..el.count {
            // one record's values keyed by property name
            let mut scalars: Vec<(&str, f64)> = Vec::new();
            let mut lists: Vec<(&str, Vec<f64>)> = Vec::new();
            if encoding == Encoding::Ascii {
                let (ln, vals) = text_iter
                    .next()
                    .ok_or_else(|| perr(line_no, format!("missing {} record {rec}", el.name)))?;
                let mut it = vals.into_iter();
                for p in &el.properties {
                    match p {
                        Property::Scalar { name, .. } => scalars.push((
                            name,
                            it.next().ok_or_else(|| perr(ln, format!("short {} record", el.name)))?,
                        )),
                        Property::List { name, .. } => {
                            let n = it.next().ok_or_else(|| perr(ln, format!("short {} record", el.name)))? as usize;
                            let items: Vec<f64> = it.by_ref().take(n).collect();
                            if items.len() != n {
                                return Err(perr(ln, format!("short list in {} record", el.name)));
                            }
                            lists.push((name, items));
                        }
                    }
                }
            } else {
                let need = |cursor: usize, n: usize| {
                    if cursor + n > bytes.len() {
                        Err(perr(line_no, format!("truncated binary data in {} record {rec}", el.name)))
                    } else {
                        Ok(())
                    }
                };
                for p in &el.properties {
                    match p {
                        Property::Scalar { name, ty } => {
                            need(cursor, ty.size())?;
                            scalars.push((name, ty.read(&bytes[cursor..], little)));
                            cursor += ty.size();
                        }
                        Property::List { name, count, item } => {
                            need(cursor, count.size())?;
                            let n = count.read(&bytes[cursor..], little) as usize;
                            cursor += count.size();
                            need(cursor, n * item.size())?;
                            let items = (0..n)
                                .map(|k| item.read(&bytes[cursor + k * item.size()..], little))
                                .collect();
                            cursor += n * item.size();
                            lists.push((name, items));
                        }
                    }
                }
            }
            let get = |key: &str| scalars.iter().find(|(n, _)| *n == key).map(|(_, v)| *v);
            match el.name.as_str() {
                "vertex" => {
                    let (Some(x), Some(y), Some(z)) = (get("x"), get("y"), get("z")) else {
                        return Err(perr(line_no, "vertex element lacks x/y/z".into()));
                    };
                    vertices.push(Vec3::new(x, y, z));
                    if let (Some(r), Some(g), Some(b)) = (get("red"), get("green"), get("blue")) {
                        colors.get_or_insert_with(Vec::new).push([r as u8, g as u8, b as u8]);
                    }
                }
                "face" => {
                    let Some((_, idx)) = lists
                        .iter()
                        .find(|(n, _)| *n == "vertex_indices" || *n == "vertex_index")
                    else {
                        return Err(perr(line_no, "face element lacks vertex_indices".into()));
                    };
                    if idx.len() < 3 || idx.iter().any(|&i| i < 0.0) {
                        return Err(perr(line_no, format!("invalid face record {rec}")));
                    }
                    for k in 1..idx.len() - 1 {
                        faces.push([idx[0] as usize, idx[k] as usize, idx[k + 1] as usize]);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(PlyData {
        vertices,
        faces,
        colors,
    })
}
