use crate::geom::selfint::intersecting_pairs;
use crate::model::{CageMesh, Vec3};
use crate::par;

/// Feature-preserving bilateral smoothing: each vertex moves along its
/// normal by a weighted mean of its neighbours' normal offsets. Weights fall
/// off with distance (`sigma_s`) and with normal disagreement (`sigma_n`);
/// each move is clamped to `max_step`. Moves that would flip a face or make
/// two faces intersect are undone, so a clean input stays clean.
pub fn bilateral_filter(m: &CageMesh, iterations: usize, sigma_s: f64, sigma_n: f64, max_step: f64) -> CageMesh {
    let mut out = m.clone();
    let rings = m.vertex_neighbors();
    for _ in 0..iterations {
        let normals = out.vertex_normals();
        let verts = &out.vertices;
        let moved: Vec<Vec3> = par::map_range(verts.len(), |i| {
            let (v, n) = (verts[i], normals[i]);
            let (mut sum, mut wsum) = (0.0, 0.0);
            for &j in &rings[i] {
                let q = verts[j];
                let t2 = (q - v).norm_squared();
                let nd2 = (normals[j] - n).norm_squared();
                let w = (-t2 / (2.0 * sigma_s * sigma_s)).exp() * (-nd2 / (2.0 * sigma_n * sigma_n)).exp();
                sum += w * n.dot(&(q - v));
                wsum += w;
            }
            if wsum > 0.0 {
                v + n * (sum / wsum).clamp(-max_step, max_step)
            } else {
                v
            }
        });
        let before = std::mem::replace(&mut out.vertices, moved);
        revert_defects(&mut out, &before);
    }
    out
}

/// Restores `before` positions on the vertices of flipped or intersecting
/// faces until none remain.
fn revert_defects(m: &mut CageMesh, before: &[Vec3]) {
    let old = CageMesh { vertices: before.to_vec(), faces: m.faces.clone() };
    let old_normals: Vec<Vec3> = (0..m.faces.len()).map(|f| old.face_area_normal(f)).collect();
    loop {
        let mut bad = vec![false; m.vertices.len()];
        for (f, n0) in old_normals.iter().enumerate() {
            if m.face_area_normal(f).dot(n0) <= 0.0 {
                m.faces[f].iter().for_each(|&v| bad[v] = true);
            }
        }
        for (f, g) in intersecting_pairs(m) {
            m.faces[f].iter().chain(&m.faces[g]).for_each(|&v| bad[v] = true);
        }
        let mut changed = false;
        for (v, b) in bad.iter().enumerate() {
            if *b && m.vertices[v] != before[v] {
                m.vertices[v] = before[v];
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}
