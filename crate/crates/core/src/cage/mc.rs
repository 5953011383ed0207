use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{CageMesh, Vec3, VoxelGrid};

/// Corner `c` of a cell sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// Cell edge between two corners, as `(lower corner, axis)` → 0..12.
fn edge_id(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    let axis = (hi - lo).trailing_zeros() as usize;
    let [x, y, z] = corner(lo);
    let others = match axis {
        0 => y + 2 * z,
        1 => x + 2 * z,
        _ => x + 2 * y,
    };
    axis * 4 + others
}

fn edge_endpoints(e: usize) -> (usize, usize) {
    let (axis, others) = (e / 4, e % 4);
    let (p, q) = (others & 1, others >> 1);
    let lo = match axis {
        0 => 2 * p + 4 * q,
        1 => p + 4 * q,
        _ => p + 2 * q,
    };
    (lo, lo + (1 << axis))
}

/// Corners of each cell face, counter-clockwise seen from outside.
fn faces() -> [[usize; 4]; 6] {
    let mut out = [[0; 4]; 6];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        for side in 0..2 {
            let at = |u: usize, v: usize| (side << a) | (u << b) | (v << c);
            let ring = [at(0, 0), at(1, 0), at(1, 1), at(0, 1)];
            out[2 * a + side] = if side == 1 { ring } else { [ring[0], ring[3], ring[2], ring[1]] };
        }
    }
    out
}

/// Triangulated surface pieces of one cell configuration.
#[derive(Clone, Debug, Default)]
struct CellCase {
    loops: Vec<Vec<u8>>,
    /// Corner indices are cell edge ids; `12 + l` is the centroid of loop `l`.
    tris: Vec<[u8; 3]>,
}

/// Faces (by index into [`faces`]) that contain cell edge `e`.
fn edge_faces(e: usize) -> [usize; 2] {
    let (a, b) = edge_endpoints(e);
    let mut out = [usize::MAX; 2];
    let mut k = 0;
    for (f, ring) in faces().iter().enumerate() {
        if ring.contains(&a) && ring.contains(&b) {
            out[k] = f;
            k += 1;
        }
    }
    out
}

fn share_face(e: usize, g: usize) -> bool {
    let (a, b) = (edge_faces(e), edge_faces(g));
    a.iter().any(|f| b.contains(f))
}

/// Surface loops for one occupancy configuration. On each face, every
/// entry into an occupied corner is joined to the following exit, which
/// keeps diagonally touching occupied corners apart; the same rule on both
/// sides of a shared face makes neighbouring cells agree. Loops become fans
/// when no fan diagonal lies on a cell face (where a neighbour might reuse
/// it), otherwise stars around the loop centroid.
fn triangulate(config: u8) -> CellCase {
    let occ = |c: usize| config >> c & 1 == 1;
    let mut next = [usize::MAX; 12];
    for ring in faces() {
        let mut crossings = Vec::new();
        for k in 0..4 {
            let (p, q) = (ring[k], ring[(k + 1) % 4]);
            if occ(p) != occ(q) {
                crossings.push((edge_id(p, q), occ(q)));
            }
        }
        for (k, &(e, entering)) in crossings.iter().enumerate() {
            if entering {
                let (exit, _) = crossings[(k + 1) % crossings.len()];
                next[e] = exit;
            }
        }
    }
    let mut used = [false; 12];
    let mut case = CellCase::default();
    for start in 0..12 {
        if next[start] == usize::MAX || used[start] {
            continue;
        }
        let mut lp = vec![start];
        used[start] = true;
        let mut e = next[start];
        while e != start {
            used[e] = true;
            lp.push(e);
            e = next[e];
        }
        let n = lp.len();
        let apex = (0..n).find(|&a| (2..n - 1).all(|k| !share_face(lp[a], lp[(a + k) % n])));
        match apex {
            Some(a) => {
                for t in 1..n - 1 {
                    case.tris.push([lp[a] as u8, lp[(a + t) % n] as u8, lp[(a + t + 1) % n] as u8]);
                }
            }
            None => {
                let c = 12 + case.loops.len() as u8;
                for t in 0..n {
                    case.tris.push([c, lp[t] as u8, lp[(t + 1) % n] as u8]);
                }
            }
        }
        case.loops.push(lp.into_iter().map(|e| e as u8).collect());
    }
    case
}

fn table() -> &'static Vec<CellCase> {
    static TABLE: OnceLock<Vec<CellCase>> = OnceLock::new();
    TABLE.get_or_init(|| (0..=255u8).map(triangulate).collect())
}

/// Iso-surface at 0.5 of the binary occupancy field sampled at voxel
/// centres. The grid is padded with one empty layer so the result is closed;
/// faces are oriented with normals pointing out of the occupied region.
pub fn marching_cubes(v: &VoxelGrid) -> Result<CageMesh> {
    if v.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let p = v.padded(1);
    let g = p.grid;
    let d = g.dims;
    let mut ids = vec![u32::MAX; 3 * g.len()];
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for k in 0..d[2] - 1 {
        for j in 0..d[1] - 1 {
            for i in 0..d[0] - 1 {
                let mut config = 0u8;
                for c in 0..8 {
                    let [x, y, z] = corner(c);
                    if p.get(i + x, j + y, k + z) {
                        config |= 1 << c;
                    }
                }
                if config == 0 || config == 255 {
                    continue;
                }
                let case = &table()[config as usize];
                let mut edge_vertex = |e: usize, vertices: &mut Vec<Vec3>| {
                    let (lo, _) = edge_endpoints(e);
                    let [x, y, z] = corner(lo);
                    let axis = e / 4;
                    let key = 3 * g.index(i + x, j + y, k + z) + axis;
                    if ids[key] == u32::MAX {
                        ids[key] = vertices.len() as u32;
                        let mut pos = g.center(i + x, j + y, k + z);
                        pos[axis] += 0.5 * g.voxel_size;
                        vertices.push(pos);
                    }
                    ids[key] as usize
                };
                let mut loop_ids = Vec::with_capacity(case.loops.len());
                for lp in &case.loops {
                    let ids: Vec<usize> = lp.iter().map(|&e| edge_vertex(e as usize, &mut vertices)).collect();
                    loop_ids.push(ids);
                }
                let mut centre_ids = vec![usize::MAX; case.loops.len()];
                for tri in &case.tris {
                    let mut f = [0usize; 3];
                    for (slot, &e) in f.iter_mut().zip(tri) {
                        *slot = if e < 12 {
                            edge_vertex(e as usize, &mut vertices)
                        } else {
                            let l = (e - 12) as usize;
                            if centre_ids[l] == usize::MAX {
                                let c = loop_ids[l].iter().map(|&v| vertices[v]).sum::<Vec3>() / loop_ids[l].len() as f64;
                                centre_ids[l] = vertices.len();
                                vertices.push(c);
                            }
                            centre_ids[l]
                        };
                    }
                    faces.push(f);
                }
            }
        }
    }
    Ok(CageMesh { vertices, faces })
}
