use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{CameraPose, GaussianScene, Vec3};

use super::CageBuildConfig;

/// Centroid of the means and the camera sphere radius.
pub fn camera_sphere(scene: &GaussianScene, cfg: &CageBuildConfig) -> Result<(Vec3, f64)> {
    if scene.is_empty() {
        return Err(Error::EmptyScene);
    }
    let m = scene.gaussians.iter().map(|g| g.mean).sum::<Vec3>() / scene.len() as f64;
    let far = scene.gaussians.iter().map(|g| (g.mean - m).norm()).fold(0.0, f64::max);
    let r = cfg.expand_factor * far;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::DegenerateScene("all Gaussian means coincide".into()));
    }
    Ok((m, r))
}

/// Rings of cameras plus two poles on a sphere around the scene, all
/// looking at the centroid of the means. `fov_y` is wide enough to see a
/// ball of radius `extent` around the centroid.
pub fn synthesize_cameras(
    scene: &GaussianScene,
    cfg: &CageBuildConfig,
    extent: f64,
) -> Result<Vec<CameraPose>> {
    let (m, r) = camera_sphere(scene, cfg)?;
    let half = (extent / r).clamp(0.0, 0.98).asin() * 1.05;
    let fov_y = (2.0 * half).clamp(10f64.to_radians(), 170f64.to_radians());
    let pose = |dir: Vec3| CameraPose {
        position: m + dir * r,
        look_at: m,
        up: Vec3::z(),
        fov_y,
        width: cfg.image_width,
        height: cfg.image_height,
    };
    let mut out = Vec::with_capacity(cfg.num_rings * cfg.cameras_per_ring + 2);
    for i in 0..cfg.num_rings {
        let lat = -0.5 * PI + PI * (i + 1) as f64 / (cfg.num_rings + 1) as f64;
        for j in 0..cfg.cameras_per_ring {
            let lon = 2.0 * PI * j as f64 / cfg.cameras_per_ring as f64;
            out.push(pose(Vec3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())));
        }
    }
    out.push(pose(Vec3::z()));
    out.push(pose(-Vec3::z()));
    Ok(out)
}
