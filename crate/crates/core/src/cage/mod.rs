//! Automatic cage construction: multi-view depth of the opaque splats,
//! TSDF fusion, carving, closing, marching cubes, smoothing and
//! MVC-aware decimation. Also hosts the density-voxelization baseline.

mod cameras;
mod config;
pub mod decimate;
mod mc;
mod qp;
mod render;
mod smooth;
mod tsdf;
mod voxel;

pub use cameras::{camera_sphere, synthesize_cameras};
pub use config::CageBuildConfig;
pub use decimate::{decimate_two_stage, DecimationReport};
pub use mc::marching_cubes;
pub use render::{render_depth, DepthRenderer};
pub use smooth::bilateral_filter;
pub use tsdf::{extract_surface_voxels, tsdf_integrate, tsdf_render_depth};
pub use voxel::{
    baseline_grid, baseline_voxelize, baseline_voxelize_in, depth_carve, merge_voxels,
    morphological_close, squared_distance_field, voxel_components,
};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{CageMesh, CameraPose, DepthMap, GaussianScene, GridSpec, TsdfVolume, Vec3, VoxelGrid};

/// Intermediate products kept for debug dumps.
#[derive(Clone, Debug)]
pub struct Intermediates {
    pub cameras: Vec<CameraPose>,
    pub depths: Vec<DepthMap>,
    pub clean_depths: Vec<DepthMap>,
    pub tsdf: TsdfVolume,
    pub surface: VoxelGrid,
    pub interior: VoxelGrid,
    pub closed: VoxelGrid,
    pub raw_mesh: CageMesh,
}

#[derive(Clone, Debug, Default)]
pub struct BuildReport {
    pub cameras: usize,
    pub grid_dims: [usize; 3],
    pub voxel_size: f64,
    pub surface_voxels: usize,
    pub solid_voxels: usize,
    pub raw_vertices: usize,
    pub samples: usize,
    pub decimation: DecimationReport,
    /// Wall time per stage in milliseconds.
    pub timings: Vec<(&'static str, f64)>,
}

pub struct CageBuild {
    pub cage: CageMesh,
    pub report: BuildReport,
    pub intermediates: Option<Intermediates>,
}

/// Up to `count` points chosen by farthest-point sampling, starting from
/// the first point.
pub fn farthest_point_samples(points: &[Vec3], count: usize) -> Vec<Vec3> {
    if points.len() <= count {
        return points.to_vec();
    }
    let mut out = Vec::with_capacity(count);
    let mut dist = vec![f64::INFINITY; points.len()];
    let mut next = 0;
    for _ in 0..count {
        let p = points[next];
        out.push(p);
        let mut best = (-1.0, 0);
        for (k, q) in points.iter().enumerate() {
            dist[k] = dist[k].min((q - p).norm_squared());
            if dist[k] > best.0 {
                best = (dist[k], k);
            }
        }
        next = best.1;
    }
    out
}

/// Means of the Gaussians at or above the opacity cutoff.
pub fn opaque_means(scene: &GaussianScene, alpha_min: f64) -> Vec<Vec3> {
    scene
        .gaussians
        .iter()
        .filter(|g| g.opacity() >= alpha_min)
        .map(|g| g.mean)
        .collect()
}

pub fn build_cage(scene: &GaussianScene, cfg: &CageBuildConfig) -> Result<CageMesh> {
    build_cage_with(scene, cfg, false).map(|b| b.cage)
}

pub fn build_cage_with(scene: &GaussianScene, cfg: &CageBuildConfig, keep: bool) -> Result<CageBuild> {
    cfg.validate()?;
    let mut report = BuildReport::default();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, report: &mut BuildReport| {
        report.timings.push((name, clock.elapsed().as_secs_f64() * 1e3));
        clock = Instant::now();
    };

    let renderer = DepthRenderer::new(scene, cfg);
    let bounds = renderer
        .bounds()
        .ok_or_else(|| Error::DegenerateScene(format!("no Gaussian reaches opacity {}", cfg.alpha_min)))?;
    let (centre, _) = camera_sphere(scene, cfg)?;
    let extent = (0..8)
        .map(|c| {
            let p = Vec3::new(
                if c & 1 == 0 { bounds.lo.x } else { bounds.hi.x },
                if c & 2 == 0 { bounds.lo.y } else { bounds.hi.y },
                if c & 4 == 0 { bounds.lo.z } else { bounds.hi.z },
            );
            (p - centre).norm()
        })
        .fold(0.0, f64::max);
    let cameras = synthesize_cameras(scene, cfg, extent)?;
    report.cameras = cameras.len();
    let depths: Vec<DepthMap> = cameras.iter().map(|p| renderer.render(p)).collect();
    lap("render", &mut report);

    let pad = cfg.tsdf_truncation.ceil() as usize + cfg.closing_radius + cfg.carve_margin.ceil() as usize + 2;
    let grid = GridSpec::covering(bounds.lo, bounds.hi, cfg.voxel_res, pad)?;
    report.grid_dims = grid.dims;
    report.voxel_size = grid.voxel_size;
    let tsdf = tsdf_integrate(&depths, grid, cfg.tsdf_truncation * grid.voxel_size)?;
    let surface = extract_surface_voxels(&tsdf);
    report.surface_voxels = surface.count();
    lap("tsdf", &mut report);

    let clean: Vec<DepthMap> = cameras.iter().map(|p| tsdf_render_depth(&tsdf, p)).collect();
    let interior = depth_carve(&clean, grid, cfg.carve_margin * grid.voxel_size);
    let merged = merge_voxels(&surface, &interior)?;
    let closed = morphological_close(&merged, cfg.closing_radius);
    report.solid_voxels = closed.count();
    lap("carve", &mut report);

    let raw = marching_cubes(&closed)?;
    report.raw_vertices = raw.vertices.len();
    let sigma_s = cfg.bilateral_sigma_s * raw.mean_edge_length();
    let smooth = bilateral_filter(&raw, cfg.bilateral_iterations, sigma_s, cfg.bilateral_sigma_n, 2.0 * grid.voxel_size);
    lap("mesh", &mut report);

    let samples = farthest_point_samples(&opaque_means(scene, cfg.alpha_min), cfg.sample_count);
    report.samples = samples.len();
    let (cage, dec) = decimate_two_stage(&smooth, &samples, cfg)?;
    report.decimation = dec;
    lap("decimate", &mut report);

    let intermediates = keep.then(|| Intermediates {
        cameras,
        depths,
        clean_depths: clean,
        tsdf,
        surface,
        interior,
        closed,
        raw_mesh: raw,
    });
    Ok(CageBuild { cage, report, intermediates })
}
