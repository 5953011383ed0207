//! Ray–triangle intersection and ray-parity inside/outside classification.

use crate::model::{CageMesh, Vec3};

use super::bvh::{Aabb, Bvh};

/// Möller–Trumbore. Returns `(t, u, v)` with barycentrics of corners 1 and 2.
#[inline]
pub fn ray_triangle(o: &Vec3, d: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<(f64, f64, f64)> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det == 0.0 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(&p) * inv;
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    let t = e2.dot(&q) * inv;
    Some((t, u, v))
}

/// Fixed, irrational-looking ray directions tried in order until one avoids
/// grazing an edge or vertex.
const DIRECTIONS: [[f64; 3]; 8] = [
    [0.5773502691896258, 0.5773502691896257, 0.5773502691896259],
    [0.2672612419124244, -0.5345224838248488, 0.8017837257372732],
    [-0.8164965809277260, 0.4082482904638630, 0.4082482904638631],
    [0.1104315261097463, 0.9938837346736189, -0.0035773187],
    [-0.3015113445777636, -0.3015113445777636, -0.9045340337332909],
    [0.9486832980505138, 0.0019873611, -0.3162277660168379],
    [-0.0727392967453308, -0.9455838576893016, 0.3173978765],
    [0.6246950475544243, -0.7808688094430304, 0.0123456789],
];

/// Point-in-closed-mesh queries by ray parity.
pub struct ParityTester<'a> {
    mesh: &'a CageMesh,
    bvh: Bvh,
    eps: f64,
}

impl<'a> ParityTester<'a> {
    pub fn new(mesh: &'a CageMesh) -> Self {
        let boxes: Vec<Aabb> = (0..mesh.faces.len())
            .map(|f| Aabb::from_points(mesh.triangle(f).iter()))
            .collect();
        Self {
            mesh,
            bvh: Bvh::build(&boxes),
            eps: 1e-12 * mesh.bbox_diagonal().max(f64::MIN_POSITIVE),
        }
    }

    /// `Some(inside)` or `None` when `x` lies on the surface.
    pub fn classify(&self, x: &Vec3) -> Option<bool> {
        const EDGE: f64 = 1e-9;
        'dirs: for dir in DIRECTIONS {
            let d = Vec3::new(dir[0], dir[1], dir[2]).normalize();
            let mut hits = 0usize;
            let mut degenerate = false;
            let mut on_surface = false;
            self.bvh.ray_candidates(x, &d, |f| {
                if degenerate || on_surface {
                    return;
                }
                let [a, b, c] = self.mesh.triangle(f);
                let Some((t, u, v)) = ray_triangle(x, &d, &a, &b, &c) else {
                    return;
                };
                let w = 1.0 - u - v;
                let inside = u >= -EDGE && v >= -EDGE && w >= -EDGE;
                if !inside {
                    return;
                }
                if t.abs() <= self.eps {
                    if u > EDGE && v > EDGE && w > EDGE {
                        on_surface = true;
                    } else {
                        degenerate = true;
                    }
                    return;
                }
                if t < 0.0 {
                    return;
                }
                if u <= EDGE || v <= EDGE || w <= EDGE {
                    degenerate = true;
                    return;
                }
                hits += 1;
            });
            if on_surface {
                return None;
            }
            if degenerate {
                continue 'dirs;
            }
            return Some(hits % 2 == 1);
        }
        // every direction grazed something; treat as on the surface
        None
    }

    pub fn strictly_inside(&self, x: &Vec3) -> bool {
        self.classify(x) == Some(true)
    }
}
