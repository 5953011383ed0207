//! 2D Gaussian (surfel) scenes and their conversion to 3D Gaussians.

use crate::error::{Error, Result};

use super::covariance::{refit_rotation_scale, Covariance3};
use super::gaussian::{Gaussian, GaussianScene, Vec3};

/// Length of the axis synthesized along the surfel normal.
pub const NORMAL_AXIS_LENGTH: f64 = 1e-5;

/// A flat splat described by two tangential axes (scaled directions).
#[derive(Clone, Debug, PartialEq)]
pub struct Surfel {
    pub mean: Vec3,
    pub tangent_u: Vec3,
    pub tangent_v: Vec3,
    pub logit_opacity: f64,
    pub sh: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SurfelScene {
    pub sh_degree: usize,
    pub surfels: Vec<Surfel>,
}

pub fn convert_surfel(s: &Surfel) -> Result<Gaussian> {
    let cross = s.tangent_u.cross(&s.tangent_v);
    let norm = cross.norm();
    if !(norm >= 1e-12) {
        return Err(Error::DegenerateAxes { norm });
    }
    let n = cross / norm * NORMAL_AXIS_LENGTH;
    let sigma = s.tangent_u * s.tangent_u.transpose()
        + s.tangent_v * s.tangent_v.transpose()
        + n * n.transpose();
    let (rotation, log_scale) = refit_rotation_scale(&Covariance3(sigma))?;
    Ok(Gaussian {
        mean: s.mean,
        rotation,
        log_scale,
        logit_opacity: s.logit_opacity,
        sh: s.sh.clone(),
    })
}

/// Converts every surfel to a 3D Gaussian whose third axis is the unit
/// normal scaled to [`NORMAL_AXIS_LENGTH`].
pub fn convert_2dgs_scene(scene: &SurfelScene) -> Result<GaussianScene> {
    let gaussians = scene
        .surfels
        .iter()
        .map(convert_surfel)
        .collect::<Result<Vec<_>>>()?;
    Ok(GaussianScene::new(scene.sh_degree, gaussians))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::covariance::covariance_of;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn surfel(u: Vec3, v: Vec3) -> Surfel {
        Surfel {
            mean: Vec3::zeros(),
            tangent_u: u,
            tangent_v: v,
            logit_opacity: 0.0,
            sh: vec![0.0; 3],
        }
    }

    #[test]
    fn disk_gets_normal_axis() {
        let g = convert_surfel(&surfel(Vec3::x(), Vec3::y())).unwrap();
        let r = g.rotation_matrix();
        let s = g.scales();
        let k = (0..3).min_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert!((s[k] - 1e-5).abs() < 1e-15);
        assert!((r.column(k).dot(&Vec3::z()).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_axes_rejected() {
        assert!(matches!(
            convert_surfel(&surfel(Vec3::x(), Vec3::x())),
            Err(Error::DegenerateAxes { .. })
        ));
    }

    #[test]
    fn random_pairs_have_expected_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = nalgebra::UnitQuaternion::from_euler_angles(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-3.0..3.0),
            );
            let m = q.to_rotation_matrix();
            let (a, b) = (rng.gen_range(0.01..2.0), rng.gen_range(0.01..2.0));
            let g = convert_surfel(&surfel(m * Vec3::x() * a, m * Vec3::y() * b)).unwrap();
            let mut ev: Vec<f64> = SymmetricEigen::new(covariance_of(&g).0).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            let mut want = vec![a * a, b * b, 1e-10];
            want.sort_by(f64::total_cmp);
            for (e, w) in ev.iter().zip(&want) {
                assert!((e - w).abs() <= 1e-9 * w.max(1e-6), "{ev:?} vs {want:?}");
            }
        }
    }
}
