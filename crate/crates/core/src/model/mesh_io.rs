//! Cage mesh files: ASCII OBJ and binary PLY, chosen by extension.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::gaussian::Vec3;
use super::mesh::CageMesh;
use super::ply;

pub fn parse_obj(text: &str) -> Result<CageMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<f64> = toks
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Obj { line: line_no, msg: e.to_string() })?;
                if c.len() != 3 {
                    return Err(Error::Obj {
                        line: line_no,
                        msg: "vertex needs three coordinates".into(),
                    });
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<&str> = toks.collect();
                if idx.len() != 3 {
                    return Err(Error::NonTriangularFace { line: line_no });
                }
                let mut f = [0usize; 3];
                for (slot, t) in f.iter_mut().zip(&idx) {
                    let head = t.split('/').next().unwrap_or("");
                    let v: i64 = head.parse().map_err(|_| Error::Obj {
                        line: line_no,
                        msg: format!("bad face index `{t}`"),
                    })?;
                    let resolved = if v > 0 {
                        v - 1
                    } else if v < 0 {
                        vertices.len() as i64 + v
                    } else {
                        -1
                    };
                    if resolved < 0 {
                        return Err(Error::IndexOutOfRange {
                            face: faces.len(),
                            index: v.unsigned_abs() as usize,
                            count: vertices.len(),
                        });
                    }
                    *slot = resolved as usize;
                }
                faces.push(f);
            }
            _ => {}
        }
    }
    CageMesh::new(vertices, faces)
}

pub fn encode_obj(mesh: &CageMesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        // shortest round-trip formatting keeps coordinates exact
        writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
    }
    for f in &mesh.faces {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    s
}

fn is_ply(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"))
}

/// Loads an OBJ or binary PLY mesh depending on the file extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<CageMesh> {
    let path = path.as_ref();
    if is_ply(path) {
        ply::load_mesh_ply(path)
    } else {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_obj(&text)
    }
}

pub fn save_mesh(mesh: &CageMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_ply(path) {
        ply::save_mesh_ply(mesh, path)
    } else {
        fs::write(path, encode_obj(mesh)).map_err(|e| Error::io(path, e))
    }
}
