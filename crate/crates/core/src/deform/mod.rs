//! Cage-based deformation of Gaussian scenes through seven-point ellipsoid
//! proxies, with bend-triggered splitting and a replayable per-scene cache.

mod cache;
mod proxy;
mod split;

pub use cache::{cache_key, hull_filter, precompute_cache, DeformCache, HULL_TOLERANCE};
pub use proxy::{
    estimate_transform, proxy_points, pseudo_inverse_factor, transform_gaussian, AxisMatrix,
    ProxyPointSet,
};
pub use split::{angle_deg, detect_bend, split_gaussian};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{CageMesh, Gaussian, GaussianScene, Vec3};
use crate::mvc::MvcCage;
use crate::par;

use cache::{replay, source_data};
use proxy::transform_with;
use split::{bend_from_offsets, split_deformed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SplitMode {
    /// Split in source space and re-run the cage mapping on the children.
    #[default]
    PreMvc,
    /// Split the deformed proxy directly: halves of the bent axis, source
    /// ellipsoid reused for both children.
    PostMvcSimplified,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre_mvc" | "pre-mvc" => Ok(Self::PreMvc),
            "post_mvc_simplified" | "post-mvc-simplified" => Ok(Self::PostMvcSimplified),
            _ => Err(Error::Config(format!(
                "split_mode must be pre_mvc or post_mvc_simplified, got `{s}`"
            ))),
        }
    }
}

impl std::fmt::Display for SplitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PreMvc => "pre_mvc",
            Self::PostMvcSimplified => "post_mvc_simplified",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeformConfig {
    /// Axes whose deformed endpoints form an angle below this split.
    pub split_threshold_deg: f64,
    /// Source semi-axes shorter than this are never split.
    pub min_split_axis_len: f64,
    pub split_factor_k: f64,
    pub max_split_rounds: usize,
    pub hull_gate: bool,
    pub split_mode: SplitMode,
}

impl Default for DeformConfig {
    fn default() -> Self {
        Self {
            split_threshold_deg: 175.0,
            min_split_axis_len: 1e-2,
            split_factor_k: 0.5,
            max_split_rounds: 3,
            hull_gate: true,
            split_mode: SplitMode::PreMvc,
        }
    }
}

impl DeformConfig {
    /// Config with splitting switched off.
    pub fn no_split() -> Self {
        Self {
            max_split_rounds: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_threshold_deg > 0.0 && self.split_threshold_deg < 180.0) {
            return Err(Error::Config(format!(
                "split threshold must be in (0, 180) degrees, got {}",
                self.split_threshold_deg
            )));
        }
        if !(self.split_factor_k > 0.0 && self.split_factor_k <= 1.0) {
            return Err(Error::Config(format!(
                "split factor k must be in (0, 1], got {}",
                self.split_factor_k
            )));
        }
        if !(self.min_split_axis_len >= 0.0) {
            return Err(Error::Config(format!(
                "minimum split axis length must be non-negative, got {}",
                self.min_split_axis_len
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeformStats {
    pub input_gaussians: usize,
    pub admitted: usize,
    pub splits: usize,
    pub output_gaussians: usize,
    pub preprocess_ms: f64,
    pub deform_ms: f64,
}

fn check_topology(cage_s: &CageMesh, cage_d: &CageMesh) -> Result<()> {
    if cage_s.vertices.len() != cage_d.vertices.len() {
        return Err(Error::TopologyMismatch(format!(
            "source cage has {} vertices, target has {}",
            cage_s.vertices.len(),
            cage_d.vertices.len()
        )));
    }
    if cage_s.faces != cage_d.faces {
        return Err(Error::TopologyMismatch("face lists differ".into()));
    }
    if !cage_d.vertices.iter().all(|v| v.iter().all(|c| c.is_finite())) {
        return Err(Error::NonFinite("target cage vertex"));
    }
    Ok(())
}

/// One proxy in flight: its source Gaussian data and deformed geometry.
struct Piece {
    /// `None` means the original Gaussian's cached source data.
    child: Option<(Gaussian, cache::SourceData)>,
    c: Vec3,
    off: [Vec3; 6],
}

fn deform_one(
    g: &Gaussian,
    slot: usize,
    cache: &DeformCache,
    mc: &MvcCage<'_>,
    verts: &[Vec3],
    cfg: &DeformConfig,
) -> Result<Vec<Gaussian>> {
    let (c, off) = replay(cache.rows_of(slot), verts);
    let mut pieces = vec![Piece { child: None, c, off }];
    let base_scales = g.scales();
    for _ in 0..cfg.max_split_rounds {
        let mut split_any = false;
        for axis in 0..3 {
            let mut next = Vec::with_capacity(pieces.len() * 2);
            for p in pieces {
                let semi = match &p.child {
                    Some((cg, _)) => cg.scales()[axis],
                    None => base_scales[axis],
                };
                if !bend_from_offsets(&p.off[axis], &p.off[axis + 3], semi, cfg) {
                    next.push(p);
                    continue;
                }
                split_any = true;
                match cfg.split_mode {
                    SplitMode::PreMvc => {
                        let src = p.child.as_ref().map(|(cg, _)| cg).unwrap_or(g);
                        let (a, b) = split_gaussian(src, axis, cfg.split_factor_k)?;
                        for child in [a, b] {
                            let data = source_data(&child, mc)?;
                            let (c, off) = replay(&data.rows, verts);
                            next.push(Piece { child: Some((child, data)), c, off });
                        }
                    }
                    SplitMode::PostMvcSimplified => {
                        for (c, off) in split_deformed(&p.c, &p.off, axis) {
                            next.push(Piece { child: None, c, off });
                        }
                    }
                }
            }
            pieces = next;
        }
        if !split_any {
            break;
        }
    }
    pieces
        .iter()
        .map(|p| {
            let (pinv, sigma, rot) = match &p.child {
                Some((_, d)) => (&d.pinv, &d.sigma, &d.rot),
                None => (&cache.pinv[slot], &cache.sigma[slot], &cache.rot[slot]),
            };
            let mut dd = nalgebra::Matrix3x6::zeros();
            for k in 0..6 {
                dd.set_column(k, &p.off[k]);
            }
            let t = dd * pinv;
            let src = p.child.as_ref().map(|(cg, _)| cg).unwrap_or(g);
            transform_with(src, sigma, rot, &t, &p.c)
        })
        .collect()
}

/// Replays a cache against a target cage.
pub fn deform_cached(
    scene: &GaussianScene,
    cage_d: &CageMesh,
    cfg: &DeformConfig,
    cache: &DeformCache,
) -> Result<(GaussianScene, DeformStats)> {
    cfg.validate()?;
    if scene.is_empty() {
        return Err(Error::EmptyScene);
    }
    if cache.admitted.len() != scene.len() {
        return Err(Error::StaleCache(format!(
            "cache covers {} Gaussians, scene has {}",
            cache.admitted.len(),
            scene.len()
        )));
    }
    check_topology(&cache.cage_s, cage_d)?;
    let start = Instant::now();
    let mc = MvcCage::new(&cache.cage_s)?;
    let per = par::map_range(scene.len(), |i| {
        let g = &scene.gaussians[i];
        match cache.slot[i] {
            u32::MAX => Ok(vec![g.clone()]),
            s => deform_one(g, s as usize, cache, &mc, &cage_d.vertices, cfg),
        }
    });
    let mut gaussians = Vec::with_capacity(scene.len());
    let mut splits = 0;
    for r in per {
        let v = r?;
        splits += v.len() - 1;
        gaussians.extend(v);
    }
    let stats = DeformStats {
        input_gaussians: scene.len(),
        admitted: cache.admitted_count(),
        splits,
        output_gaussians: gaussians.len(),
        preprocess_ms: 0.0,
        deform_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((GaussianScene::new(scene.sh_degree, gaussians), stats))
}

/// Deforms `scene` from `cage_s` to `cage_d`. With a cache, its key must
/// match the scene and source cage.
pub fn deform_scene_report(
    scene: &GaussianScene,
    cage_s: &CageMesh,
    cage_d: &CageMesh,
    cfg: &DeformConfig,
    cache: Option<&DeformCache>,
) -> Result<(GaussianScene, DeformStats)> {
    cfg.validate()?;
    if scene.is_empty() {
        return Err(Error::EmptyScene);
    }
    check_topology(cage_s, cage_d)?;
    match cache {
        Some(c) => {
            let key = cache_key(scene, cage_s, cfg.hull_gate);
            if key != c.key {
                return Err(Error::StaleCache(format!(
                    "content hash {key:016x} does not match cached {:016x}",
                    c.key
                )));
            }
            deform_cached(scene, cage_d, cfg, c)
        }
        None => {
            let start = Instant::now();
            let c = precompute_cache(scene, cage_s, cfg)?;
            let pre = start.elapsed().as_secs_f64() * 1e3;
            let (out, mut stats) = deform_cached(scene, cage_d, cfg, &c)?;
            stats.preprocess_ms = pre;
            Ok((out, stats))
        }
    }
}

pub fn deform_scene(
    scene: &GaussianScene,
    cage_s: &CageMesh,
    cage_d: &CageMesh,
    cfg: &DeformConfig,
    cache: Option<&DeformCache>,
) -> Result<GaussianScene> {
    deform_scene_report(scene, cage_s, cage_d, cfg, cache).map(|(s, _)| s)
}
