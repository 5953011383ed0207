use crate::geom::{Aabb, Bvh};
use crate::model::{CameraPose, DepthMap, GaussianScene, Mat3, Vec3};
use crate::par;

use super::CageBuildConfig;

/// Opaque iso-ellipsoid of one Gaussian.
#[derive(Clone, Debug)]
struct Ellipsoid {
    mean: Vec3,
    /// Maps world offsets into coordinates where the ellipsoid is the unit sphere.
    to_unit: Mat3,
}

impl Ellipsoid {
    fn hit(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        let u0 = self.to_unit * (o - self.mean);
        let u1 = self.to_unit * d;
        let a = u1.norm_squared();
        let b = u0.dot(&u1);
        let c = u0.norm_squared() - 1.0;
        let disc = b * b - a * c;
        if !(disc >= 0.0) || a == 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let t0 = (-b - sq) / a;
        let t1 = (-b + sq) / a;
        if t0 > 0.0 {
            Some(t0)
        } else if t1 > 0.0 {
            Some(t1)
        } else {
            None
        }
    }
}

/// Ray caster over the iso-ellipsoids of all sufficiently opaque Gaussians.
pub struct DepthRenderer {
    items: Vec<Ellipsoid>,
    boxes: Vec<Aabb>,
    bvh: Bvh,
}

impl DepthRenderer {
    pub fn new(scene: &GaussianScene, cfg: &CageBuildConfig) -> Self {
        let k = cfg.iso_sigmas;
        let mut items = Vec::new();
        let mut boxes = Vec::new();
        for g in &scene.gaussians {
            if g.opacity() < cfg.alpha_min || !g.is_valid() {
                continue;
            }
            let r = g.rotation_matrix();
            let s = g.scales();
            let inv_s = Mat3::from_diagonal(&s.map(|v| 1.0 / (k * v)));
            let sigma = g.covariance();
            let half = Vec3::from_fn(|a, _| k * sigma.matrix()[(a, a)].max(0.0).sqrt());
            items.push(Ellipsoid {
                mean: g.mean,
                to_unit: inv_s * r.transpose(),
            });
            boxes.push(Aabb { lo: g.mean - half, hi: g.mean + half });
        }
        let bvh = Bvh::build(&boxes);
        Self { items, boxes, bvh }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Bounds of every rendered ellipsoid, or `None` when nothing is opaque.
    pub fn bounds(&self) -> Option<Aabb> {
        if self.boxes.is_empty() {
            return None;
        }
        Some(self.boxes.iter().fold(Aabb::empty(), |acc, b| acc.union(b)))
    }

    /// Depth (distance along the optical axis) of the nearest iso-surface per pixel.
    pub fn render(&self, pose: &CameraPose) -> DepthMap {
        let f = pose.frame();
        let mut map = DepthMap::empty(pose);
        if self.items.is_empty() {
            return map;
        }
        let w = pose.width;
        par::for_each_chunk_mut(&mut map.depth, w, |v, row| {
            for (u, px) in row.iter_mut().enumerate() {
                let d = f.pixel_direction(u, v);
                let hit = self
                    .bvh
                    .closest_hit(&f.origin, &d, f64::INFINITY, |p, _| self.items[p].hit(&f.origin, &d));
                if let Some((t, _)) = hit {
                    *px = t;
                }
            }
        });
        map
    }
}

pub fn render_depth(scene: &GaussianScene, pose: &CameraPose, cfg: &CageBuildConfig) -> DepthMap {
    DepthRenderer::new(scene, cfg).render(pose)
}
