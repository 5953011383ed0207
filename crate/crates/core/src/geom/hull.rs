//! Incremental 3D convex hull with exact orientation tests.

use std::collections::HashSet;

use robust::{orient3d, Coord3D};

use crate::error::{Error, Result};
use crate::model::Vec3;

fn c3(p: &Vec3) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

/// Positive when `d` lies on the inner side of the outward face `abc`.
fn orient(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    orient3d(c3(a), c3(b), c3(c), c3(d))
}

#[derive(Clone, Debug)]
pub struct ConvexHull {
    pub points: Vec<Vec3>,
    /// Outward-oriented faces indexing `points`.
    pub faces: Vec<[usize; 3]>,
    /// Unit outward normal and offset per face: `n·x − offset` is the signed
    /// distance to the face plane.
    pub planes: Vec<(Vec3, f64)>,
    pub diagonal: f64,
}

impl ConvexHull {
    pub fn new(points: &[Vec3]) -> Result<Self> {
        let n = points.len();
        if n < 4 {
            return Err(Error::DegenerateHull);
        }
        let p0 = 0;
        let far = |from: &dyn Fn(&Vec3) -> f64| {
            (0..n)
                .max_by(|&a, &b| from(&points[a]).total_cmp(&from(&points[b])).then(b.cmp(&a)))
                .unwrap()
        };
        let p1 = far(&|p| (p - points[p0]).norm_squared());
        let dir = points[p1] - points[p0];
        let p2 = far(&|p| (p - points[p0]).cross(&dir).norm_squared());
        let p3 = far(&|p| orient(&points[p0], &points[p1], &points[p2], p).abs());
        if orient(&points[p0], &points[p1], &points[p2], &points[p3]) == 0.0
            || (points[p1] - points[p0]).cross(&(points[p2] - points[p0])).norm_squared() == 0.0
        {
            return Err(Error::DegenerateHull);
        }
        // orient so that p3 is inside every initial face
        let (a, b, c) = if orient(&points[p0], &points[p1], &points[p2], &points[p3]) > 0.0 {
            (p0, p1, p2)
        } else {
            (p0, p2, p1)
        };
        let mut faces: Vec<Option<[usize; 3]>> = vec![
            Some([a, b, c]),
            Some([a, p3, b]),
            Some([b, p3, c]),
            Some([c, p3, a]),
        ];
        let seed = [p0, p1, p2, p3];
        for q in 0..n {
            if seed.contains(&q) {
                continue;
            }
            let x = &points[q];
            let visible: Vec<usize> = faces
                .iter()
                .enumerate()
                .filter_map(|(i, f)| {
                    let f = (*f)?;
                    (orient(&points[f[0]], &points[f[1]], &points[f[2]], x) < 0.0).then_some(i)
                })
                .collect();
            if visible.is_empty() {
                continue;
            }
            let mut edges = HashSet::new();
            for &i in &visible {
                let f = faces[i].unwrap();
                for k in 0..3 {
                    edges.insert((f[k], f[(k + 1) % 3]));
                }
            }
            let mut horizon: Vec<(usize, usize)> = edges
                .iter()
                .copied()
                .filter(|&(u, v)| !edges.contains(&(v, u)))
                .collect();
            horizon.sort_unstable();
            for &i in &visible {
                faces[i] = None;
            }
            for (u, v) in horizon {
                faces.push(Some([u, v, q]));
            }
        }
        let faces: Vec<[usize; 3]> = faces.into_iter().flatten().collect();
        let planes = faces
            .iter()
            .map(|f| {
                let (a, b, c) = (points[f[0]], points[f[1]], points[f[2]]);
                let nrm = (b - a).cross(&(c - a)).normalize();
                (nrm, nrm.dot(&a))
            })
            .collect();
        let lo = points.iter().fold(points[0], |m, p| m.inf(p));
        let hi = points.iter().fold(points[0], |m, p| m.sup(p));
        Ok(Self {
            points: points.to_vec(),
            faces,
            planes,
            diagonal: (hi - lo).norm(),
        })
    }

    /// Largest signed plane distance of `x` (≤ 0 inside).
    pub fn max_signed_distance(&self, x: &Vec3) -> f64 {
        self.planes
            .iter()
            .map(|(n, d)| n.dot(x) - d)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Membership with tolerance `rel_tol · bbox diagonal`.
    pub fn contains(&self, x: &Vec3, rel_tol: f64) -> bool {
        self.max_signed_distance(x) <= rel_tol * self.diagonal
    }
}
