use crate::error::{Error, Result};
use crate::mvc::MvcLoss;

#[derive(Clone, Debug, PartialEq)]
pub struct CageBuildConfig {
    pub num_rings: usize,
    pub cameras_per_ring: usize,
    /// Camera sphere radius relative to the farthest Gaussian mean.
    pub expand_factor: f64,
    pub image_width: usize,
    pub image_height: usize,
    /// Voxels along the longest side of the object bounds.
    pub voxel_res: usize,
    /// TSDF truncation in voxels.
    pub tsdf_truncation: f64,
    /// Closing ball radius in voxels.
    pub closing_radius: usize,
    /// Carving tolerance in voxels.
    pub carve_margin: f64,
    pub target_vertices: usize,
    pub collapses_per_cycle: usize,
    pub gd_steps_per_cycle: usize,
    pub alternate_start_vertices: usize,
    pub sample_count: usize,
    pub mu: f64,
    pub rho: f64,
    pub learning_rate: f64,
    /// Run the MVC-aware gradient stage during decimation.
    pub two_stage: bool,
    pub alpha_min: f64,
    /// Iso-ellipsoid radius in standard deviations.
    pub iso_sigmas: f64,
    pub bilateral_iterations: usize,
    /// Spatial bilateral width as a multiple of the mean edge length.
    pub bilateral_sigma_s: f64,
    pub bilateral_sigma_n: f64,
    pub baseline_k: usize,
    pub baseline_threshold: f64,
}

impl Default for CageBuildConfig {
    fn default() -> Self {
        Self {
            num_rings: 6,
            cameras_per_ring: 12,
            expand_factor: 1.25,
            image_width: 256,
            image_height: 256,
            voxel_res: 128,
            tsdf_truncation: 4.0,
            closing_radius: 3,
            carve_margin: 1.0,
            target_vertices: 160,
            collapses_per_cycle: 10,
            gd_steps_per_cycle: 10,
            alternate_start_vertices: 1000,
            sample_count: 256,
            mu: 100.0,
            rho: 1e-4,
            learning_rate: 0.005,
            two_stage: true,
            alpha_min: 0.5,
            iso_sigmas: 2.0,
            bilateral_iterations: 5,
            bilateral_sigma_s: 2.0,
            bilateral_sigma_n: 0.3,
            baseline_k: 16,
            baseline_threshold: 1e-6,
        }
    }
}

impl CageBuildConfig {
    pub fn validate(&self) -> Result<()> {
        let positive_int = [
            ("num_rings", self.num_rings),
            ("cameras_per_ring", self.cameras_per_ring),
            ("image_width", self.image_width),
            ("image_height", self.image_height),
            ("collapses_per_cycle", self.collapses_per_cycle),
            ("sample_count", self.sample_count),
            ("baseline_k", self.baseline_k),
        ];
        for (name, v) in positive_int {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let positive = [
            ("expand_factor", self.expand_factor),
            ("tsdf_truncation", self.tsdf_truncation),
            ("mu", self.mu),
            ("learning_rate", self.learning_rate),
            ("iso_sigmas", self.iso_sigmas),
            ("bilateral_sigma_s", self.bilateral_sigma_s),
            ("bilateral_sigma_n", self.bilateral_sigma_n),
            ("baseline_threshold", self.baseline_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rho >= 0.0 && self.carve_margin >= 0.0) {
            return Err(Error::Config("rho and carve_margin must be non-negative".into()));
        }
        if self.voxel_res < 16 {
            return Err(Error::Config(format!(
                "voxel resolution must be at least 16, got {}",
                self.voxel_res
            )));
        }
        if self.target_vertices < 4 {
            return Err(Error::Config(format!(
                "target vertex count must be at least 4, got {}",
                self.target_vertices
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha_min) {
            return Err(Error::Config(format!("alpha_min must be in [0, 1], got {}", self.alpha_min)));
        }
        Ok(())
    }

    pub fn loss(&self) -> MvcLoss {
        MvcLoss { mu: self.mu, rho: self.rho }
    }
}
