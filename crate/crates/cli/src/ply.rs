//! PLY reading and writing for the dataset vertex format.
//!
//! The format this project emits: ASCII 1.0 or binary little-endian 1.0,
//! one `vertex` element with float x, y, z, uchar red, green, blue, and an
//! optional uchar label. The reader also tolerates unknown scalar vertex
//! properties (skipping their values) and double-typed coordinates.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use pcsod_core::view::PointView;

#[derive(Debug, thiserror::Error)]
pub enum PlyError {
    #[error("not a PLY file: missing 'ply' signature")]
    NotPly,
    #[error("unsupported format line: {0}")]
    BadFormat(String),
    #[error("malformed header line: {0}")]
    BadHeader(String),
    #[error("missing property {0}")]
    MissingProperty(&'static str),
    #[error("property {name} has unsupported type {ty}")]
    BadPropertyType { name: String, ty: String },
    #[error("truncated payload: expected {expected} vertices, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("malformed vertex row {row}: {detail}")]
    BadRow { row: usize, detail: String },
    #[error("scalar out of range")]
    ScalarOutOfRange,
    #[error("view has no points")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum ScalarType {
    U8,
    I8,
    U16,
    I16,
    U32,
    I32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<ScalarType> {
        match s {
            "uchar" | "uint8" => Some(ScalarType::U8),
            "char" | "int8" => Some(ScalarType::I8),
            "ushort" | "uint16" => Some(ScalarType::U16),
            "short" | "int16" => Some(ScalarType::I16),
            "uint" | "uint32" => Some(ScalarType::U32),
            "int" | "int32" => Some(ScalarType::I32),
            "float" | "float32" => Some(ScalarType::F32),
            "double" | "float64" => Some(ScalarType::F64),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            ScalarType::U8 | ScalarType::I8 => 1,
            ScalarType::U16 | ScalarType::I16 => 2,
            ScalarType::U32 | ScalarType::I32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read_f64(self, bytes: &[u8]) -> f64 {
        match self {
            ScalarType::U8 => bytes[0] as f64,
            ScalarType::I8 => bytes[0] as i8 as f64,
            ScalarType::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes([
                bytes[0], bytes[1], bytes[2], bytes[3], bytes[4], bytes[5], bytes[6], bytes[7],
            ]),
        }
    }
}

struct Property {
    name: String,
    ty: ScalarType,
}

struct Header {
    format: PlyFormat,
    vertex_count: usize,
    properties: Vec<Property>,
}

fn parse_header<R: BufRead>(reader: &mut R) -> Result<Header, PlyError> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != "ply" {
        return Err(PlyError::NotPly);
    }

    let mut format = None;
    let mut vertex_count = None;
    let mut properties = Vec::new();
    let mut in_vertex_element = false;

    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(PlyError::BadHeader("unterminated header".into()));
        }
        let trimmed = line.trim_end();
        let mut words = trimmed.split_whitespace();
        match words.next() {
            Some("end_header") => break,
            Some("comment") | Some("obj_info") => continue,
            Some("format") => {
                format = match words.next() {
                    Some("ascii") => Some(PlyFormat::Ascii),
                    Some("binary_little_endian") => Some(PlyFormat::BinaryLittleEndian),
                    _ => return Err(PlyError::BadFormat(trimmed.into())),
                };
            }
            Some("element") => {
                let name = words.next().unwrap_or("");
                let count: usize = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| PlyError::BadHeader(trimmed.into()))?;
                if name == "vertex" {
                    vertex_count = Some(count);
                    in_vertex_element = true;
                } else {
                    in_vertex_element = false;
                }
            }
            Some("property") => {
                if !in_vertex_element {
                    continue;
                }
                let ty_word = words.next().unwrap_or("");
                if ty_word == "list" {
                    return Err(PlyError::BadPropertyType {
                        name: words.last().unwrap_or("").into(),
                        ty: "list".into(),
                    });
                }
                let name = words.next().unwrap_or("").to_string();
                let ty = ScalarType::parse(ty_word).ok_or_else(|| PlyError::BadPropertyType {
                    name: name.clone(),
                    ty: ty_word.into(),
                })?;
                properties.push(Property { name, ty });
            }
            _ => return Err(PlyError::BadHeader(trimmed.into())),
        }
    }

    Ok(Header {
        format: format.ok_or_else(|| PlyError::BadFormat("no format line".into()))?,
        vertex_count: vertex_count.ok_or(PlyError::BadHeader("no vertex element".into()))?,
        properties,
    })
}

/// Loads a view. Colors are rescaled from 0-255 to [0,1]; a nonzero label
/// byte becomes 1.
pub fn load_ply(path: &Path) -> Result<PointView, PlyError> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let header = parse_header(&mut reader)?;

    let find = |name: &'static str| -> Result<usize, PlyError> {
        header
            .properties
            .iter()
            .position(|p| p.name == name)
            .ok_or(PlyError::MissingProperty(name))
    };
    let ix = find("x")?;
    let iy = find("y")?;
    let iz = find("z")?;
    let ir = find("red")?;
    let ig = find("green")?;
    let ib = find("blue")?;
    let il = header.properties.iter().position(|p| p.name == "label");

    let n = header.vertex_count;
    let mut positions = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut labels: Option<Vec<u8>> = il.map(|_| Vec::with_capacity(n));

    match header.format {
        PlyFormat::Ascii => {
            let mut line = String::new();
            for row in 0..n {
                line.clear();
                if reader.read_line(&mut line)? == 0 {
                    return Err(PlyError::Truncated {
                        expected: n,
                        got: row,
                    });
                }
                // parse at the declared width: a float32 token must round-trip
                // through f32, or it lands on a different f64
                let values: Vec<f64> = line
                    .split_whitespace()
                    .zip(&header.properties)
                    .map(|(w, p)| match p.ty {
                        ScalarType::F32 => w.parse::<f32>().map(|v| v as f64),
                        _ => w.parse::<f64>(),
                    })
                    .collect::<Result<_, _>>()
                    .map_err(|e| PlyError::BadRow {
                        row,
                        detail: e.to_string(),
                    })?;
                if values.len() < header.properties.len() {
                    return Err(PlyError::BadRow {
                        row,
                        detail: format!(
                            "{} values, expected {}",
                            values.len(),
                            header.properties.len()
                        ),
                    });
                }
                push_vertex(
                    &values,
                    (ix, iy, iz),
                    (ir, ig, ib),
                    il,
                    &mut positions,
                    &mut colors,
                    &mut labels,
                );
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let row_size: usize = header.properties.iter().map(|p| p.ty.size()).sum();
            let mut buf = vec![0u8; row_size];
            for row in 0..n {
                if let Err(e) = reader.read_exact(&mut buf) {
                    if e.kind() == std::io::ErrorKind::UnexpectedEof {
                        return Err(PlyError::Truncated {
                            expected: n,
                            got: row,
                        });
                    }
                    return Err(e.into());
                }
                let mut offset = 0usize;
                let mut values = Vec::with_capacity(header.properties.len());
                for p in &header.properties {
                    values.push(p.ty.read_f64(&buf[offset..]));
                    offset += p.ty.size();
                }
                push_vertex(
                    &values,
                    (ix, iy, iz),
                    (ir, ig, ib),
                    il,
                    &mut positions,
                    &mut colors,
                    &mut labels,
                );
            }
        }
    }

    if positions.is_empty() {
        return Err(PlyError::Empty);
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let view = PointView {
        positions,
        colors,
        labels,
        scene_id: stem.clone(),
        view_id: stem,
    };
    Ok(view)
}

#[allow(clippy::too_many_arguments)]
fn push_vertex(
    values: &[f64],
    (ix, iy, iz): (usize, usize, usize),
    (ir, ig, ib): (usize, usize, usize),
    il: Option<usize>,
    positions: &mut Vec<[f64; 3]>,
    colors: &mut Vec<[f64; 3]>,
    labels: &mut Option<Vec<u8>>,
) {
    positions.push([values[ix], values[iy], values[iz]]);
    colors.push([
        (values[ir] / 255.0).clamp(0.0, 1.0),
        (values[ig] / 255.0).clamp(0.0, 1.0),
        (values[ib] / 255.0).clamp(0.0, 1.0),
    ]);
    if let (Some(l), Some(idx)) = (labels.as_mut(), il) {
        l.push((values[idx] != 0.0) as u8);
    }
}

fn heat_color(s: f64) -> [u8; 3] {
    // cold blue to hot red through magenta
    let r = (s * 255.0 + 0.5) as u8;
    let b = ((1.0 - s) * 255.0 + 0.5) as u8;
    let g = ((0.25 - (s - 0.5) * (s - 0.5)) * 4.0 * 80.0).max(0.0) as u8;
    [r, g, b]
}

/// Writes a view. When `scalar_map` is given, per-point scalars in [0,1]
/// are color-mapped into the RGB channels (a viewable heatmap); labels are
/// written whenever the view has them.
pub fn save_ply(
    view: &PointView,
    path: &Path,
    format: PlyFormat,
    scalar_map: Option<&[f64]>,
) -> Result<(), PlyError> {
    if view.is_empty() {
        return Err(PlyError::Empty);
    }
    if let Some(scalars) = scalar_map {
        if scalars.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
            return Err(PlyError::ScalarOutOfRange);
        }
    }

    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let n = view.len();
    let has_labels = view.labels.is_some();

    writeln!(w, "ply")?;
    match format {
        PlyFormat::Ascii => writeln!(w, "format ascii 1.0")?,
        PlyFormat::BinaryLittleEndian => writeln!(w, "format binary_little_endian 1.0")?,
    }
    writeln!(w, "element vertex {n}")?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "property uchar red")?;
    writeln!(w, "property uchar green")?;
    writeln!(w, "property uchar blue")?;
    if has_labels {
        writeln!(w, "property uchar label")?;
    }
    writeln!(w, "end_header")?;

    let color_bytes = |i: usize| -> [u8; 3] {
        match scalar_map {
            Some(scalars) => heat_color(scalars[i]),
            None => {
                let c = view.colors[i];
                [
                    (c[0] * 255.0 + 0.5) as u8,
                    (c[1] * 255.0 + 0.5) as u8,
                    (c[2] * 255.0 + 0.5) as u8,
                ]
            }
        }
    };

    match format {
        PlyFormat::Ascii => {
            for i in 0..n {
                let p = view.positions[i];
                let c = color_bytes(i);
                write!(w, "{} {} {} {} {} {}", p[0] as f32, p[1] as f32, p[2] as f32, c[0], c[1], c[2])?;
                if let Some(labels) = &view.labels {
                    write!(w, " {}", labels[i])?;
                }
                writeln!(w)?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for i in 0..n {
                let p = view.positions[i];
                for v in p {
                    w.write_all(&(v as f32).to_le_bytes())?;
                }
                w.write_all(&color_bytes(i))?;
                if let Some(labels) = &view.labels {
                    w.write_all(&[labels[i]])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
