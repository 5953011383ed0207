//! Run configuration: defaults, then an optional flat `key=value` file,
//! then command-line flags.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use gsdeform::cage::CageBuildConfig;
use gsdeform::deform::DeformConfig;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Cage,
    Deform,
    Common,
}

/// Every configurable key with the subcommands it applies to.
pub const KEYS: &[(&str, Scope, &str)] = &[
    ("num-rings", Scope::Cage, "camera latitude rings"),
    ("cameras-per-ring", Scope::Cage, "cameras on each ring"),
    ("expand-factor", Scope::Cage, "camera sphere radius over object radius"),
    ("image-width", Scope::Cage, "depth map width in pixels"),
    ("image-height", Scope::Cage, "depth map height in pixels"),
    ("voxel-res", Scope::Cage, "voxels along the longest object side"),
    ("tsdf-truncation", Scope::Cage, "TSDF truncation in voxels"),
    ("closing-radius", Scope::Cage, "morphological closing radius in voxels"),
    ("carve-margin", Scope::Cage, "carving tolerance in voxels"),
    ("target-vertices", Scope::Cage, "cage vertex budget"),
    ("collapses-per-cycle", Scope::Cage, "edge collapses between gradient cycles"),
    ("gd-steps-per-cycle", Scope::Cage, "gradient steps per cycle"),
    ("alternate-start-vertices", Scope::Cage, "vertex count where alternation starts"),
    ("sample-count", Scope::Cage, "object samples for the MVC penalty"),
    ("mu", Scope::Cage, "negative-weight penalty"),
    ("rho", Scope::Cage, "displacement regularizer"),
    ("learning-rate", Scope::Cage, "gradient step size"),
    ("two-stage", Scope::Cage, "alternate collapses with gradient cycles (true/false)"),
    ("alpha-min", Scope::Cage, "opacity below which Gaussians are ignored"),
    ("iso-sigmas", Scope::Cage, "rendered ellipsoid radius in standard deviations"),
    ("bilateral-iterations", Scope::Cage, "mesh smoothing iterations"),
    ("bilateral-sigma-s", Scope::Cage, "smoothing width in mean edge lengths"),
    ("bilateral-sigma-n", Scope::Cage, "smoothing normal tolerance"),
    ("split-threshold-deg", Scope::Deform, "bend angle that triggers a split"),
    ("min-split-axis-len", Scope::Deform, "shortest axis that may be split"),
    ("split-factor", Scope::Deform, "child axis scale"),
    ("max-split-rounds", Scope::Deform, "split recursion limit"),
    ("hull-gate", Scope::Deform, "only deform Gaussians inside the cage hull (true/false)"),
    ("split-mode", Scope::Deform, "pre_mvc or post_mvc_simplified"),
    ("seed", Scope::Common, "seed recorded with the run"),
    ("threads", Scope::Common, "worker threads, 0 for all cores"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub cage: CageBuildConfig,
    pub deform: DeformConfig,
    pub seed: u64,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cage: CageBuildConfig::default(),
            deform: DeformConfig::default(),
            seed: 0,
            threads: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid value `{value}` for `{key}`: expected true or false"))),
    }
}

impl RunConfig {
    /// Starts from defaults with the thread count taken from `GSD_THREADS`
    /// when set.
    pub fn from_env() -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Ok(v) = std::env::var("GSD_THREADS") {
            cfg.threads = parse("GSD_THREADS", &v)?;
        }
        Ok(cfg)
    }

    /// Sets one key. Keys may use `-` or `_` as separator.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().replace('_', "-");
        let c = &mut self.cage;
        let d = &mut self.deform;
        match key.as_str() {
            "num-rings" => c.num_rings = parse(&key, value)?,
            "cameras-per-ring" => c.cameras_per_ring = parse(&key, value)?,
            "expand-factor" => c.expand_factor = parse(&key, value)?,
            "image-width" => c.image_width = parse(&key, value)?,
            "image-height" => c.image_height = parse(&key, value)?,
            "voxel-res" => c.voxel_res = parse(&key, value)?,
            "tsdf-truncation" => c.tsdf_truncation = parse(&key, value)?,
            "closing-radius" => c.closing_radius = parse(&key, value)?,
            "carve-margin" => c.carve_margin = parse(&key, value)?,
            "target-vertices" => c.target_vertices = parse(&key, value)?,
            "collapses-per-cycle" => c.collapses_per_cycle = parse(&key, value)?,
            "gd-steps-per-cycle" => c.gd_steps_per_cycle = parse(&key, value)?,
            "alternate-start-vertices" => c.alternate_start_vertices = parse(&key, value)?,
            "sample-count" => c.sample_count = parse(&key, value)?,
            "mu" => c.mu = parse(&key, value)?,
            "rho" => c.rho = parse(&key, value)?,
            "learning-rate" => c.learning_rate = parse(&key, value)?,
            "two-stage" => c.two_stage = parse_bool(&key, value)?,
            "alpha-min" => c.alpha_min = parse(&key, value)?,
            "iso-sigmas" => c.iso_sigmas = parse(&key, value)?,
            "bilateral-iterations" => c.bilateral_iterations = parse(&key, value)?,
            "bilateral-sigma-s" => c.bilateral_sigma_s = parse(&key, value)?,
            "bilateral-sigma-n" => c.bilateral_sigma_n = parse(&key, value)?,
            "split-threshold-deg" => d.split_threshold_deg = parse(&key, value)?,
            "min-split-axis-len" => d.min_split_axis_len = parse(&key, value)?,
            "split-factor" => d.split_factor_k = parse(&key, value)?,
            "max-split-rounds" => d.max_split_rounds = parse(&key, value)?,
            "hull-gate" => d.hull_gate = parse_bool(&key, value)?,
            "split-mode" => d.split_mode = value.trim().parse()?,
            "seed" => self.seed = parse(&key, value)?,
            "threads" => self.threads = parse(&key, value)?,
            _ => return Err(CliError::Usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key=value` text. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("{origin}:{}: expected key=value", n + 1)));
            };
            self.set(k, v).map_err(|e| CliError::Usage(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.cage.validate()?;
        self.deform.validate()?;
        Ok(())
    }
}
