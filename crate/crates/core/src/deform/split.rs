//! Bend detection and the two splitting schemes.

use crate::error::{Error, Result};
use crate::model::{Gaussian, Vec3};

use super::proxy::ProxyPointSet;
use super::DeformConfig;

/// Angle in degrees between two vectors; `None` if either is zero.
pub fn angle_deg(a: &Vec3, b: &Vec3) -> Option<f64> {
    if a.norm_squared() == 0.0 || b.norm_squared() == 0.0 {
        return None;
    }
    Some(a.cross(b).norm().atan2(a.dot(b)).to_degrees())
}

/// True when the deformed `axis` (0..3) bends below the threshold angle and
/// the source semi-axis is long enough to be worth splitting.
pub fn detect_bend(apd: &ProxyPointSet, axis: usize, source_semi_axis: f64, cfg: &DeformConfig) -> bool {
    let (p1, p2) = apd.endpoints(axis);
    bend_from_offsets(&(p1 - apd.c), &(p2 - apd.c), source_semi_axis, cfg)
}

#[inline]
pub(crate) fn bend_from_offsets(a: &Vec3, b: &Vec3, source_semi_axis: f64, cfg: &DeformConfig) -> bool {
    if source_semi_axis < cfg.min_split_axis_len {
        return false;
    }
    match angle_deg(a, b) {
        Some(angle) => angle < cfg.split_threshold_deg,
        None => false,
    }
}

/// Splits a source-space Gaussian along `axis` into two children with every
/// axis scaled by `k`, centred at `c ± k·σ_axis·â` (positive side first).
pub fn split_gaussian(g: &Gaussian, axis: usize, k: f64) -> Result<(Gaussian, Gaussian)> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::SplitFactor(k));
    }
    let dir = g.rotation_matrix().column(axis).into_owned();
    let shift = dir * (k * g.scales()[axis]);
    let ln_k = k.ln();
    let child = |mean: Vec3| Gaussian {
        mean,
        rotation: g.rotation,
        log_scale: g.log_scale.add_scalar(ln_k),
        logit_opacity: g.logit_opacity,
        sh: g.sh.clone(),
    };
    Ok((child(g.mean + shift), child(g.mean - shift)))
}

/// Deformed-space split of a proxy given as centre plus six offsets. Each
/// child takes one half of the bent axis (centre to endpoint) and carries
/// the other axes over unchanged.
pub(crate) fn split_deformed(c: &Vec3, off: &[Vec3; 6], axis: usize) -> [(Vec3, [Vec3; 6]); 2] {
    let (l, r) = (off[axis], off[axis + 3]);
    let mut left = *off;
    left[axis] = l * 0.5;
    left[axis + 3] = -l * 0.5;
    let mut right = *off;
    right[axis] = -r * 0.5;
    right[axis + 3] = r * 0.5;
    [(c + l * 0.5, left), (c + r * 0.5, right)]
}
