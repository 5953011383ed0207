use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use super::covariance::Covariance3;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// One splat primitive, stored with the raw (pre-activation) parameters of
/// the checkpoint it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub mean: Vec3,
    /// Raw quaternion in (w, x, y, z) order. Not necessarily unit length.
    pub rotation: [f64; 4],
    pub log_scale: Vec3,
    pub logit_opacity: f64,
    /// Spherical-harmonic coefficients: the three DC terms followed by the
    /// `f_rest_*` block, exactly as serialized.
    pub sh: Vec<f32>,
}

impl Gaussian {
    pub fn new(mean: Vec3, rotation: [f64; 4], log_scale: Vec3, logit_opacity: f64) -> Self {
        Self {
            mean,
            rotation,
            log_scale,
            logit_opacity,
            sh: vec![0.0; 3],
        }
    }

    /// Axis-aligned isotropic Gaussian with standard deviation `sigma`.
    pub fn isotropic(mean: Vec3, sigma: f64, logit_opacity: f64) -> Self {
        Self::new(
            mean,
            [1.0, 0.0, 0.0, 0.0],
            Vec3::repeat(sigma.ln()),
            logit_opacity,
        )
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.logit_opacity)
    }

    pub fn scales(&self) -> Vec3 {
        self.log_scale.map(f64::exp)
    }

    /// Normalized rotation. A zero quaternion is read as the identity.
    pub fn unit_rotation(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.rotation;
        let q = Quaternion::new(w, x, y, z);
        if q.norm() == 0.0 || !q.norm().is_finite() {
            UnitQuaternion::identity()
        } else {
            UnitQuaternion::from_quaternion(q)
        }
    }

    /// Rotation matrix whose columns are the principal axes.
    pub fn rotation_matrix(&self) -> Mat3 {
        self.unit_rotation().to_rotation_matrix().into_inner()
    }

    pub fn covariance(&self) -> Covariance3 {
        super::covariance::covariance_of(self)
    }

    /// Checks the activation invariants: finite parameters, opacity strictly
    /// inside (0, 1) and finite positive scales.
    pub fn is_valid(&self) -> bool {
        let a = self.opacity();
        let s = self.scales();
        self.mean.iter().all(|v| v.is_finite())
            && self.rotation.iter().all(|v| v.is_finite())
            && a > 0.0
            && a < 1.0
            && s.iter().all(|v| v.is_finite() && *v > 0.0)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Converts a rotation matrix to a raw (w, x, y, z) quaternion with `w >= 0`.
pub fn quaternion_from_matrix(r: &Mat3) -> [f64; 4] {
    let rot = nalgebra::Rotation3::from_matrix_unchecked(*r);
    let q = UnitQuaternion::from_rotation_matrix(&rot);
    let q = q.quaternion();
    let s = if q.w < 0.0 { -1.0 } else { 1.0 };
    [s * q.w, s * q.i, s * q.j, s * q.k]
}

/// A loaded splat scene.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GaussianScene {
    pub sh_degree: usize,
    pub gaussians: Vec<Gaussian>,
}

impl GaussianScene {
    pub fn new(sh_degree: usize, gaussians: Vec<Gaussian>) -> Self {
        Self {
            sh_degree,
            gaussians,
        }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn means(&self) -> Vec<Vec3> {
        self.gaussians.iter().map(|g| g.mean).collect()
    }

    /// Number of SH scalars per Gaussian for the scene's degree.
    pub fn sh_len(&self) -> usize {
        sh_coefficient_count(self.sh_degree)
    }

    /// Axis-aligned bounds of the means.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.gaussians.iter();
        let first = it.next()?.mean;
        Some(it.fold((first, first), |(lo, hi), g| {
            (lo.inf(&g.mean), hi.sup(&g.mean))
        }))
    }
}

pub fn sh_coefficient_count(degree: usize) -> usize {
    3 * (degree + 1) * (degree + 1)
}
