//! Binary little-endian PLY reading and writing for splat scenes and
//! triangle meshes.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::convert::{Surfel, SurfelScene};
use super::gaussian::{Gaussian, GaussianScene, Vec3};
use super::mesh::CageMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::I8 => "char",
            Self::U8 => "uchar",
            Self::I16 => "short",
            Self::U16 => "ushort",
            Self::I32 => "int",
            Self::U32 => "uint",
            Self::F32 => "float",
            Self::F64 => "double",
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Property {
    Scalar { name: String, ty: ScalarType },
    List { name: String, count: ScalarType, item: ScalarType },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Element {
    pub name: String,
    pub count: usize,
    pub props: Vec<Property>,
}

impl Element {
    /// Fixed record size when the element has no list properties.
    fn stride(&self) -> Option<usize> {
        self.props
            .iter()
            .map(|p| match p {
                Property::Scalar { ty, .. } => Some(ty.size()),
                Property::List { .. } => None,
            })
            .sum()
    }

    /// Byte offset and type of scalar property `name` within a record.
    fn scalar(&self, name: &str) -> Option<(usize, ScalarType)> {
        let mut off = 0;
        for p in &self.props {
            match p {
                Property::Scalar { name: n, ty } => {
                    if n == name {
                        return Some((off, *ty));
                    }
                    off += ty.size();
                }
                Property::List { .. } => return None,
            }
        }
        None
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Header {
    pub elements: Vec<Element>,
    /// Byte length of the header including the `end_header` line.
    pub len: usize,
}

pub(crate) fn parse_header(bytes: &[u8]) -> Result<Header> {
    const END: &[u8] = b"end_header";
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let nl = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::PlyHeader(format!("no end_header before byte {}", bytes.len())))?;
        let line = &bytes[pos..pos + nl];
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        pos += nl + 1;
        if line == END {
            break;
        }
        let s = std::str::from_utf8(line)
            .map_err(|_| Error::PlyHeader(format!("non-UTF-8 header line ending at byte {pos}")))?;
        lines.push((pos, s.to_string()));
    }

    let mut it = lines.into_iter();
    match it.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::PlyHeader("missing `ply` magic at byte 0".into())),
    }
    let mut format_ok = false;
    let mut elements: Vec<Element> = Vec::new();
    for (end, line) in it {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _ver] => {
                if *fmt != "binary_little_endian" {
                    return Err(Error::PlyHeader(format!(
                        "unsupported format `{fmt}` (line ending at byte {end}); only binary_little_endian is supported"
                    )));
                }
                format_ok = true;
            }
            ["element", name, count] => {
                let count = count.parse().map_err(|_| {
                    Error::PlyHeader(format!("bad element count `{count}` at byte {end}"))
                })?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", cty, ity, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::PlyHeader(format!("property before element at byte {end}")))?;
                let count = ScalarType::parse(cty)
                    .ok_or_else(|| Error::PlyHeader(format!("unknown type `{cty}` at byte {end}")))?;
                let item = ScalarType::parse(ity)
                    .ok_or_else(|| Error::PlyHeader(format!("unknown type `{ity}` at byte {end}")))?;
                el.props.push(Property::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::PlyHeader(format!("property before element at byte {end}")))?;
                let ty = ScalarType::parse(ty)
                    .ok_or_else(|| Error::PlyHeader(format!("unknown type `{ty}` at byte {end}")))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => {
                return Err(Error::PlyHeader(format!(
                    "unrecognized header line `{line}` ending at byte {end}"
                )))
            }
        }
    }
    if !format_ok {
        return Err(Error::PlyHeader("missing format line".into()));
    }
    Ok(Header { elements, len: pos })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Leading vertex element of a splat file plus its raw payload.
struct SplatTable<'a> {
    el: Element,
    stride: usize,
    payload: &'a [u8],
}

impl<'a> SplatTable<'a> {
    fn open(bytes: &'a [u8]) -> Result<Self> {
        let header = parse_header(bytes)?;
        let el = header
            .elements
            .first()
            .filter(|e| e.name == "vertex")
            .cloned()
            .ok_or_else(|| Error::PlyHeader("first element must be `vertex`".into()))?;
        let stride = el
            .stride()
            .ok_or_else(|| Error::PlyHeader("list properties are not allowed on splat vertices".into()))?;
        let expected = stride * el.count;
        let found = bytes.len() - header.len;
        if found < expected {
            return Err(Error::Truncated {
                offset: header.len,
                expected,
                found,
            });
        }
        Ok(Self {
            el,
            stride,
            payload: &bytes[header.len..header.len + expected],
        })
    }

    fn float(&self, name: &str) -> Result<usize> {
        let (off, ty) = self
            .el
            .scalar(name)
            .ok_or_else(|| Error::MissingProperty(name.to_string()))?;
        if ty != ScalarType::F32 {
            return Err(Error::PropertyType {
                name: name.to_string(),
                ty: ty.name().to_string(),
            });
        }
        Ok(off)
    }

    fn optional_float(&self, name: &str) -> Result<Option<usize>> {
        match self.el.scalar(name) {
            None => Ok(None),
            Some(_) => self.float(name).map(Some),
        }
    }

    fn count_prefix(&self, prefix: &str) -> usize {
        self.el
            .props
            .iter()
            .filter(|p| p.name().starts_with(prefix))
            .count()
    }

    #[inline]
    fn get(&self, row: usize, off: usize) -> f32 {
        let b = &self.payload[row * self.stride + off..];
        f32::from_le_bytes([b[0], b[1], b[2], b[3]])
    }
}

fn sh_degree_for_rest(count: usize) -> Result<usize> {
    if count % 3 != 0 {
        return Err(Error::ShCount { count });
    }
    let per_channel = count / 3 + 1;
    let d = (per_channel as f64).sqrt().round() as usize;
    if d * d != per_channel {
        return Err(Error::ShCount { count });
    }
    Ok(d - 1)
}

struct CommonOffsets {
    pos: [usize; 3],
    sh: Vec<usize>,
    opacity: usize,
    rot: [usize; 4],
    sh_degree: usize,
}

fn common_offsets(t: &SplatTable<'_>) -> Result<CommonOffsets> {
    let pos = [t.float("x")?, t.float("y")?, t.float("z")?];
    let n_rest = t.count_prefix("f_rest_");
    let sh_degree = sh_degree_for_rest(n_rest)?;
    let mut sh = vec![t.float("f_dc_0")?, t.float("f_dc_1")?, t.float("f_dc_2")?];
    for i in 0..n_rest {
        sh.push(t.float(&format!("f_rest_{i}"))?);
    }
    let opacity = t.float("opacity")?;
    let rot = [t.float("rot_0")?, t.float("rot_1")?, t.float("rot_2")?, t.float("rot_3")?];
    // normals are carried by the reference layout but unused; validate their type if present
    for n in ["nx", "ny", "nz"] {
        t.optional_float(n)?;
    }
    Ok(CommonOffsets {
        pos,
        sh,
        opacity,
        rot,
        sh_degree,
    })
}

/// Reads a 3DGS checkpoint PLY. Raw (pre-activation) values are kept.
pub fn load_gaussian_ply(path: impl AsRef<Path>) -> Result<GaussianScene> {
    let bytes = read_file(path.as_ref())?;
    parse_gaussian_ply(&bytes)
}

pub fn parse_gaussian_ply(bytes: &[u8]) -> Result<GaussianScene> {
    let t = SplatTable::open(bytes)?;
    let c = common_offsets(&t)?;
    let scale = [t.float("scale_0")?, t.float("scale_1")?, t.float("scale_2")?];
    let gaussians = (0..t.el.count)
        .map(|r| {
            let g = |o: usize| t.get(r, o) as f64;
            Gaussian {
                mean: Vec3::new(g(c.pos[0]), g(c.pos[1]), g(c.pos[2])),
                rotation: [g(c.rot[0]), g(c.rot[1]), g(c.rot[2]), g(c.rot[3])],
                log_scale: Vec3::new(g(scale[0]), g(scale[1]), g(scale[2])),
                logit_opacity: g(c.opacity),
                sh: c.sh.iter().map(|&o| t.get(r, o)).collect(),
            }
        })
        .collect();
    Ok(GaussianScene {
        sh_degree: c.sh_degree,
        gaussians,
    })
}

/// Reads a 2D Gaussian (surfel) checkpoint: like the 3DGS layout but with
/// only `scale_0` and `scale_1`. The tangential axes are the first two
/// rotation columns scaled by the activated scales.
pub fn load_surfel_ply(path: impl AsRef<Path>) -> Result<SurfelScene> {
    let bytes = read_file(path.as_ref())?;
    let t = SplatTable::open(&bytes)?;
    let c = common_offsets(&t)?;
    let scale = [t.float("scale_0")?, t.float("scale_1")?];
    let surfels = (0..t.el.count)
        .map(|r| {
            let g = |o: usize| t.get(r, o) as f64;
            let proto = Gaussian::new(
                Vec3::zeros(),
                [g(c.rot[0]), g(c.rot[1]), g(c.rot[2]), g(c.rot[3])],
                Vec3::zeros(),
                0.0,
            );
            let rm = proto.rotation_matrix();
            Surfel {
                mean: Vec3::new(g(c.pos[0]), g(c.pos[1]), g(c.pos[2])),
                tangent_u: rm.column(0) * g(scale[0]).exp(),
                tangent_v: rm.column(1) * g(scale[1]).exp(),
                logit_opacity: g(c.opacity),
                sh: c.sh.iter().map(|&o| t.get(r, o)).collect(),
            }
        })
        .collect();
    Ok(SurfelScene {
        sh_degree: c.sh_degree,
        surfels,
    })
}

/// Canonical property names in serialization order.
pub fn canonical_properties(sh_degree: usize) -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let n_rest = super::gaussian::sh_coefficient_count(sh_degree) - 3;
    names.extend((0..n_rest).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

pub fn encode_gaussian_ply(scene: &GaussianScene) -> Result<Vec<u8>> {
    if scene.is_empty() {
        return Err(Error::EmptyScene);
    }
    let sh_len = scene.sh_len();
    let props = canonical_properties(scene.sh_degree);
    let mut out = Vec::with_capacity(scene.len() * props.len() * 4 + 1024);
    write!(out, "ply\nformat binary_little_endian 1.0\nelement vertex {}\n", scene.len()).unwrap();
    for p in &props {
        writeln!(out, "property float {p}").unwrap();
    }
    out.extend_from_slice(b"end_header\n");
    let put = |v: f32, out: &mut Vec<u8>| out.extend_from_slice(&v.to_le_bytes());
    for g in &scene.gaussians {
        for v in g.mean.iter() {
            put(*v as f32, &mut out);
        }
        for _ in 0..3 {
            put(0.0, &mut out);
        }
        for i in 0..sh_len {
            put(g.sh.get(i).copied().unwrap_or(0.0), &mut out);
        }
        put(g.logit_opacity as f32, &mut out);
        for v in g.log_scale.iter() {
            put(*v as f32, &mut out);
        }
        for v in g.rotation {
            put(v as f32, &mut out);
        }
    }
    Ok(out)
}

/// Writes the scene in canonical 3DGS property order.
pub fn save_gaussian_ply(scene: &GaussianScene, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_gaussian_ply(scene)?;
    write_file(path.as_ref(), &bytes)
}

fn mesh_err(msg: impl Into<String>) -> Error {
    Error::MeshFormat(msg.into())
}

pub fn parse_mesh_ply(bytes: &[u8]) -> Result<CageMesh> {
    let header = parse_header(bytes)?;
    let mut pos = header.len;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let need = |pos: usize, n: usize| -> Result<()> {
        if pos + n > bytes.len() {
            Err(Error::Truncated {
                offset: pos,
                expected: n,
                found: bytes.len().saturating_sub(pos),
            })
        } else {
            Ok(())
        }
    };
    for el in &header.elements {
        match el.name.as_str() {
            "vertex" => {
                let stride = el
                    .stride()
                    .ok_or_else(|| mesh_err("list property on vertex element"))?;
                let lookup = |n: &str| el.scalar(n).ok_or_else(|| Error::MissingProperty(n.into()));
                let (xo, xt) = lookup("x")?;
                let (yo, yt) = lookup("y")?;
                let (zo, zt) = lookup("z")?;
                need(pos, stride * el.count)?;
                for r in 0..el.count {
                    let b = &bytes[pos + r * stride..];
                    vertices.push(Vec3::new(xt.read(&b[xo..]), yt.read(&b[yo..]), zt.read(&b[zo..])));
                }
                pos += stride * el.count;
            }
            "face" => {
                for fi in 0..el.count {
                    for p in &el.props {
                        match p {
                            Property::Scalar { ty, .. } => {
                                need(pos, ty.size())?;
                                pos += ty.size();
                            }
                            Property::List { name, count, item } => {
                                need(pos, count.size())?;
                                let n = count.read(&bytes[pos..]) as usize;
                                pos += count.size();
                                need(pos, n * item.size())?;
                                if name == "vertex_indices" || name == "vertex_index" {
                                    if n != 3 {
                                        return Err(mesh_err(format!(
                                            "non-triangular face {fi} with {n} vertices"
                                        )));
                                    }
                                    let mut f = [0usize; 3];
                                    for (k, slot) in f.iter_mut().enumerate() {
                                        let v = item.read(&bytes[pos + k * item.size()..]);
                                        if v < 0.0 {
                                            return Err(mesh_err(format!("negative index in face {fi}")));
                                        }
                                        *slot = v as usize;
                                    }
                                    faces.push(f);
                                }
                                pos += n * item.size();
                            }
                        }
                    }
                }
            }
            other => {
                let stride = el
                    .stride()
                    .ok_or_else(|| mesh_err(format!("cannot skip list element `{other}`")))?;
                need(pos, stride * el.count)?;
                pos += stride * el.count;
            }
        }
    }
    CageMesh::new(vertices, faces)
}

pub fn encode_mesh_ply(mesh: &CageMesh) -> Vec<u8> {
    let mut out = Vec::new();
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.faces.len()
    )
    .unwrap();
    for v in &mesh.vertices {
        for c in v.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    for f in &mesh.faces {
        out.push(3);
        for &i in f {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    out
}

pub fn load_mesh_ply(path: impl AsRef<Path>) -> Result<CageMesh> {
    parse_mesh_ply(&read_file(path.as_ref())?)
}

pub fn save_mesh_ply(mesh: &CageMesh, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_mesh_ply(mesh))
}
