//! Mean value coordinates for closed triangle meshes.

mod dual;
mod loss;

pub use loss::{mvc_loss, mvc_weight_gradients, MvcLoss, MvcLossEval};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{CageMesh, Vec3};
use crate::par;

use dual::Scalar;

/// Half-perimeter deficit `π − h` below which the query point counts as
/// inside a triangle's outline.
pub const ANGLE_EPS: f64 = 1e-8;
/// Triple product of the corner directions below which a point inside the
/// outline lies on the face.
const PLANE_EPS: f64 = 1e-14;
/// Triple product below which a point outside the outline is in the face
/// plane; the face then contributes nothing.
const SKIP_EPS: f64 = 1e-10;
/// Vertex-snap distance relative to the cage bounding-box diagonal.
pub const SNAP_REL: f64 = 1e-10;

/// One row of cage-vertex weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MvcWeights {
    pub weights: Vec<f64>,
}

impl MvcWeights {
    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Row-major matrix of weights, one row per query point.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct WeightMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl WeightMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Which branch produced a weight row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Interior,
    /// The point coincides with this cage vertex.
    Vertex(usize),
    /// The point lies on this face.
    OnFace(usize),
}

pub(crate) enum TriTerm<S> {
    /// Point lies in the triangle's plane outside it; no contribution.
    Skip,
    /// Point lies on the triangle; 2D barycentric weights.
    OnPlane([S; 3]),
    Weights([S; 3]),
}

/// Per-triangle contribution given distances `d` and unit directions `u`
/// from the query point to the three corners.
///
/// The spherical triangle's mean normal `m = Σ θᵢ·n̂ᵢ` (side angles θᵢ,
/// unit side normals n̂ᵢ) is expanded in the corner directions,
/// `[u0 u1 u2]·λ = m`, and `wₖ = λₖ / dₖ`. The sign of the triple product
/// makes back-facing triangles count negatively. Close to the face the
/// triple product is small but common to all three weights, so accuracy
/// survives normalization.
#[inline]
pub(crate) fn tri_term<S: Scalar>(d: [S; 3], u: [[S; 3]; 3]) -> TriTerm<S> {
    let two = S::cst(2.0);
    let mut theta = [S::cst(0.0); 3];
    let mut sin_t = [S::cst(0.0); 3];
    for i in 0..3 {
        let (a, b) = (u[(i + 1) % 3], u[(i + 2) % 3]);
        let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
        let (sx, sy, sz) = (a[0] + b[0], a[1] + b[1], a[2] + b[2]);
        // 2·asin(|a−b|/2), written with atan2 to stay accurate near π
        let chord = (dx * dx + dy * dy + dz * dz).sqrt();
        let sum = (sx * sx + sy * sy + sz * sz).sqrt();
        theta[i] = two * chord.atan2(sum);
        sin_t[i] = theta[i].sin();
    }
    let h = (theta[0] + theta[1] + theta[2]) / two;
    let cross = |a: [S; 3], b: [S; 3]| {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    };
    let n = [cross(u[1], u[2]), cross(u[2], u[0]), cross(u[0], u[1])];
    let det = u[0][0] * n[0][0] + u[0][1] * n[0][1] + u[0][2] * n[0][2];
    let inside = PI - h.val() < ANGLE_EPS;
    if inside && det.val().abs() < PLANE_EPS {
        let w = [
            sin_t[0] * d[2] * d[1],
            sin_t[1] * d[0] * d[2],
            sin_t[2] * d[1] * d[0],
        ];
        return TriTerm::OnPlane(w);
    }
    if !inside && det.val().abs() < SKIP_EPS {
        return TriTerm::Skip;
    }
    let mut m = [S::cst(0.0); 3];
    for i in 0..3 {
        if sin_t[i].val() == 0.0 {
            continue;
        }
        let f = theta[i] / sin_t[i];
        for a in 0..3 {
            m[a] = m[a] + f * n[i][a];
        }
    }
    let mut w = [S::cst(0.0); 3];
    for k in 0..3 {
        w[k] = (n[k][0] * m[0] + n[k][1] * m[1] + n[k][2] * m[2]) / (det * d[k]);
    }
    TriTerm::Weights(w)
}

/// A cage validated for MVC evaluation.
#[derive(Clone, Copy, Debug)]
pub struct MvcCage<'a> {
    pub(crate) cage: &'a CageMesh,
    pub(crate) snap: f64,
}

impl<'a> MvcCage<'a> {
    pub fn new(cage: &'a CageMesh) -> Result<Self> {
        if let Some(defect) = cage.closedness_defect() {
            return Err(Error::OpenCage(defect));
        }
        Ok(Self {
            cage,
            snap: SNAP_REL * cage.bbox_diagonal(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.cage.vertices.len()
    }

    /// Writes normalized weights for `x` into `out` and returns the
    /// un-normalized total together with the branch taken.
    pub(crate) fn raw_into(&self, x: &Vec3, out: &mut [f64], scratch: &mut Vec<(f64, [f64; 3])>) -> (f64, Branch) {
        let verts = &self.cage.vertices;
        out.iter_mut().for_each(|w| *w = 0.0);
        scratch.clear();
        for (j, p) in verts.iter().enumerate() {
            let r = p - x;
            let d = r.norm();
            if d < self.snap {
                out[j] = 1.0;
                return (1.0, Branch::Vertex(j));
            }
            let u = r / d;
            scratch.push((d, [u.x, u.y, u.z]));
        }
        for (fi, f) in self.cage.faces.iter().enumerate() {
            let (a, b, c) = (scratch[f[0]], scratch[f[1]], scratch[f[2]]);
            match tri_term([a.0, b.0, c.0], [a.1, b.1, c.1]) {
                TriTerm::Skip => {}
                TriTerm::OnPlane(w) => {
                    out.iter_mut().for_each(|v| *v = 0.0);
                    let total = w[0] + w[1] + w[2];
                    for k in 0..3 {
                        out[f[k]] = w[k] / total;
                    }
                    return (total, Branch::OnFace(fi));
                }
                TriTerm::Weights(w) => {
                    for k in 0..3 {
                        out[f[k]] += w[k];
                    }
                }
            }
        }
        let total: f64 = out.iter().sum();
        let inv = 1.0 / total;
        out.iter_mut().for_each(|v| *v *= inv);
        (total, Branch::Interior)
    }

    pub fn weights(&self, x: &Vec3) -> Result<MvcWeights> {
        if !(x.x.is_finite() && x.y.is_finite() && x.z.is_finite()) {
            return Err(Error::NonFinite("MVC query point"));
        }
        let mut w = vec![0.0; self.vertex_count()];
        self.raw_into(x, &mut w, &mut Vec::new());
        Ok(MvcWeights { weights: w })
    }

    pub fn weights_batch(&self, points: &[Vec3]) -> Result<WeightMatrix> {
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("MVC query point"));
        }
        let cols = self.vertex_count();
        let mut data = vec![0.0; points.len() * cols];
        if cols > 0 {
            par::for_each_chunk_mut(&mut data, cols, |i, row| {
                self.raw_into(&points[i], row, &mut Vec::new());
            });
        }
        Ok(WeightMatrix {
            rows: points.len(),
            cols,
            data,
        })
    }
}

/// Mean value coordinates of `x` with respect to a closed cage.
pub fn mvc_weights(x: &Vec3, cage: &CageMesh) -> Result<MvcWeights> {
    MvcCage::new(cage)?.weights(x)
}

/// Row-wise [`mvc_weights`], evaluated in parallel.
pub fn mvc_weights_batch(points: &[Vec3], cage: &CageMesh) -> Result<WeightMatrix> {
    MvcCage::new(cage)?.weights_batch(points)
}

/// Weighted sum of the cage vertices.
pub fn mvc_apply(w: &MvcWeights, cage_d: &CageMesh) -> Result<Vec3> {
    if w.weights.len() != cage_d.vertices.len() {
        return Err(Error::LengthMismatch {
            weights: w.weights.len(),
            vertices: cage_d.vertices.len(),
        });
    }
    Ok(apply_row(&w.weights, &cage_d.vertices))
}

#[inline]
pub(crate) fn apply_row(w: &[f64], verts: &[Vec3]) -> Vec3 {
    let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
    for (wj, v) in w.iter().zip(verts) {
        x += wj * v.x;
        y += wj * v.y;
        z += wj * v.z;
    }
    Vec3::new(x, y, z)
}

#[cfg(test)]
mod tests;
