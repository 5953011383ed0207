use std::collections::HashMap;

use crate::error::{Error, Result};

use super::gaussian::{Mat3, Vec3};

/// Closed triangular surface mesh used as a deformation cage. Faces are
/// counter-clockwise when seen from outside.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CageMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl CageMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let m = Self { vertices, faces };
        m.check_indices()?;
        Ok(m)
    }

    pub fn check_indices(&self) -> Result<()> {
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            for &i in f {
                if i >= n {
                    return Err(Error::IndexOutOfRange {
                        face: fi,
                        index: i,
                        count: n,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Area-weighted normal (twice the area in magnitude).
    pub fn face_area_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let n = self.face_area_normal(f);
        let l = n.norm();
        if l > 0.0 {
            n / l
        } else {
            n
        }
    }

    /// Number of directed uses of each undirected edge, keyed `(min, max)`.
    pub fn edge_face_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::with_capacity(self.faces.len() * 3 / 2);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Every undirected edge is shared by exactly two faces which traverse it
    /// in opposite directions.
    pub fn is_closed(&self) -> bool {
        self.closedness_defect().is_none()
    }

    /// Describes the first reason the mesh is not closed and consistently
    /// oriented, if any.
    pub fn closedness_defect(&self) -> Option<String> {
        if self.faces.is_empty() {
            return Some("mesh has no faces".into());
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a == b {
                    return Some(format!("degenerate face with repeated vertex {a}"));
                }
                *directed.entry((a, b)).or_insert(0) += 1;
            }
        }
        for (&(a, b), &n) in &directed {
            if n != 1 {
                return Some(format!("directed edge ({a}, {b}) used {n} times"));
            }
            if !directed.contains_key(&(b, a)) {
                return Some(format!("boundary edge ({a}, {b})"));
            }
        }
        None
    }

    /// Closed, and every vertex's incident faces form a single fan.
    pub fn is_closed_manifold(&self) -> bool {
        if !self.is_closed() {
            return false;
        }
        // Walk the fan around each vertex via the "next" map a->b for faces (v, a, b).
        let mut fans: Vec<HashMap<usize, usize>> = vec![HashMap::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let v = f[k];
                let a = f[(k + 1) % 3];
                let b = f[(k + 2) % 3];
                if fans[v].insert(a, b).is_some() {
                    return false;
                }
            }
        }
        for fan in &fans {
            if fan.is_empty() {
                continue;
            }
            let start = *fan.keys().next().unwrap();
            let mut cur = start;
            let mut steps = 0;
            loop {
                cur = match fan.get(&cur) {
                    Some(&n) => n,
                    None => return false,
                };
                steps += 1;
                if cur == start {
                    break;
                }
                if steps > fan.len() {
                    return false;
                }
            }
            if steps != fan.len() {
                return false;
            }
        }
        true
    }

    pub fn euler_characteristic(&self) -> i64 {
        let used = {
            let mut u = vec![false; self.vertices.len()];
            for f in &self.faces {
                for &i in f {
                    u[i] = true;
                }
            }
            u.iter().filter(|&&b| b).count()
        };
        used as i64 - self.edge_face_counts().len() as i64 + self.faces.len() as i64
    }

    /// Signed enclosed volume (positive for outward orientation).
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                self.vertices[a]
                    .dot(&self.vertices[b].cross(&self.vertices[c]))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Same topology, vertices mapped through `f`.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> CageMesh {
        CageMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, t: &Vec3) -> CageMesh {
        self.map_vertices(|v| v + t)
    }

    pub fn affine(&self, a: &Mat3, t: &Vec3) -> CageMesh {
        self.map_vertices(|v| a * v + t)
    }

    /// Same vertex count and face list.
    pub fn same_topology(&self, other: &CageMesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.faces == other.faces
    }

    /// Vertex-to-vertex adjacency (sorted, deduplicated).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                nb[a].push(b);
                nb[b].push(a);
            }
        }
        for l in nb.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        nb
    }

    /// Area-weighted vertex normals.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut n = vec![Vec3::zeros(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            let an = self.face_area_normal(fi);
            for &i in f {
                n[i] += an;
            }
        }
        for v in n.iter_mut() {
            let l = v.norm();
            if l > 0.0 {
                *v /= l;
            }
        }
        n
    }

    pub fn mean_edge_length(&self) -> f64 {
        let mut edges: Vec<(usize, usize)> = self.edge_face_counts().into_keys().collect();
        if edges.is_empty() {
            return 0.0;
        }
        edges.sort_unstable();
        edges
            .iter()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .sum::<f64>()
            / edges.len() as f64
    }

    /// Axis-aligned box split into two triangles per side, outward oriented.
    pub fn cuboid(lo: Vec3, hi: Vec3) -> CageMesh {
        let v = |x: bool, y: bool, z: bool| {
            Vec3::new(
                if x { hi.x } else { lo.x },
                if y { hi.y } else { lo.y },
                if z { hi.z } else { lo.z },
            )
        };
        let vertices = vec![
            v(false, false, false),
            v(true, false, false),
            v(true, true, false),
            v(false, true, false),
            v(false, false, true),
            v(true, false, true),
            v(true, true, true),
            v(false, true, true),
        ];
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [2, 3, 7],
            [2, 7, 6],
            [1, 2, 6],
            [1, 6, 5],
            [0, 4, 7],
            [0, 7, 3],
        ];
        CageMesh { vertices, faces }
    }

    /// Unit cube centred at the origin with side 2.
    pub fn cube() -> CageMesh {
        CageMesh::cuboid(Vec3::repeat(-1.0), Vec3::repeat(1.0))
    }

    /// Icosphere of the given radius and subdivision level.
    pub fn icosphere(radius: f64, subdivisions: usize) -> CageMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        for v in vertices.iter_mut() {
            *v *= radius;
        }
        CageMesh { vertices, faces }
    }

    /// Prism extruded along z from a simple counter-clockwise polygon.
    /// Caps are ear-clipped.
    pub fn prism(polygon: &[(f64, f64)], z0: f64, z1: f64) -> CageMesh {
        let n = polygon.len();
        let mut vertices: Vec<Vec3> = polygon.iter().map(|&(x, y)| Vec3::new(x, y, z0)).collect();
        vertices.extend(polygon.iter().map(|&(x, y)| Vec3::new(x, y, z1)));
        let mut faces = Vec::new();
        for [a, b, c] in ear_clip(polygon) {
            faces.push([n + a, n + b, n + c]);
            faces.push([a, c, b]);
        }
        for i in 0..n {
            let j = (i + 1) % n;
            faces.push([i, j, n + j]);
            faces.push([i, n + j, n + i]);
        }
        CageMesh { vertices, faces }
    }

    /// Concatenates two meshes (indices of `other` are offset).
    pub fn merged(&self, other: &CageMesh) -> CageMesh {
        let off = self.vertices.len();
        let mut m = self.clone();
        m.vertices.extend_from_slice(&other.vertices);
        m.faces
            .extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        m
    }
}

/// Triangulates a simple counter-clockwise polygon by ear clipping.
pub fn ear_clip(poly: &[(f64, f64)]) -> Vec<[usize; 3]> {
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::new();
    while idx.len() > 3 {
        let m = idx.len();
        let ear = (0..m).find(|&k| {
            let (a, b, c) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            if cross(poly[a], poly[b], poly[c]) <= 0.0 {
                return false;
            }
            idx.iter().all(|&q| {
                q == a
                    || q == b
                    || q == c
                    || cross(poly[a], poly[b], poly[q]) < 0.0
                    || cross(poly[b], poly[c], poly[q]) < 0.0
                    || cross(poly[c], poly[a], poly[q]) < 0.0
            })
        });
        // a degenerate polygon has no strict ear; fall back to any vertex
        let k = ear.unwrap_or(0);
        out.push([idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]]);
        idx.remove(k);
    }
    if idx.len() == 3 {
        out.push([idx[0], idx[1], idx[2]]);
    }
    out
}
