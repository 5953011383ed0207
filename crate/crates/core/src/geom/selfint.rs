//! Self-intersection queries over triangle meshes.

use super::tritri::{triangles_intersect, Tri};
use super::{Aabb, Bvh};
use crate::model::CageMesh;
use crate::par;

pub fn shares_vertex(a: &[usize; 3], b: &[usize; 3]) -> bool {
    a.iter().any(|v| b.contains(v))
}

pub fn face_box(t: &Tri) -> Aabb {
    Aabb::from_points(t.iter())
}

/// Intersecting face pairs `(f, g)` with `f < g`, ignoring pairs that share
/// a vertex. Sorted.
pub fn intersecting_pairs(m: &CageMesh) -> Vec<(usize, usize)> {
    let tris: Vec<Tri> = (0..m.faces.len()).map(|f| m.triangle(f)).collect();
    let boxes: Vec<Aabb> = tris.iter().map(face_box).collect();
    let bvh = Bvh::build(&boxes);
    let per = par::map_range(tris.len(), |f| {
        let mut hits = Vec::new();
        bvh.query(&boxes[f], |g| {
            if g > f && !shares_vertex(&m.faces[f], &m.faces[g]) && triangles_intersect(&tris[f], &tris[g]) {
                hits.push((f, g));
            }
        });
        hits.sort_unstable();
        hits
    });
    per.into_iter().flatten().collect()
}

/// All-pairs reference for [`intersecting_pairs`].
pub fn intersecting_pairs_brute(m: &CageMesh) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for f in 0..m.faces.len() {
        for g in f + 1..m.faces.len() {
            if !shares_vertex(&m.faces[f], &m.faces[g]) && triangles_intersect(&m.triangle(f), &m.triangle(g)) {
                out.push((f, g));
            }
        }
    }
    out
}
