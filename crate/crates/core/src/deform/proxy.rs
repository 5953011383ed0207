//! Seven-point ellipsoid proxies and the least-squares linear map between
//! two of them.

use nalgebra::{Matrix3x6, Matrix6x3};

use crate::error::{Error, Result};
use crate::model::covariance::{refit_aligned, sym_eigen3, Covariance3};
use crate::model::{Gaussian, Mat3, Vec3};

/// Condition number of `D Dᵀ` above which the diagonal is regularized.
pub const MAX_CONDITION: f64 = 1e12;
pub const REGULARIZATION: f64 = 1e-12;

/// Centre plus the two endpoints of each principal axis on the 1-sigma
/// ellipsoid. `x1` is `c + σ₀·a₀`, `x2` is `c − σ₀·a₀`, and likewise for y, z.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxyPointSet {
    pub c: Vec3,
    pub x1: Vec3,
    pub y1: Vec3,
    pub z1: Vec3,
    pub x2: Vec3,
    pub y2: Vec3,
    pub z2: Vec3,
}

impl ProxyPointSet {
    /// Points in storage order: c, x1, y1, z1, x2, y2, z2.
    pub fn to_array(&self) -> [Vec3; 7] {
        [self.c, self.x1, self.y1, self.z1, self.x2, self.y2, self.z2]
    }

    pub fn from_array(p: [Vec3; 7]) -> Self {
        Self {
            c: p[0],
            x1: p[1],
            y1: p[2],
            z1: p[3],
            x2: p[4],
            y2: p[5],
            z2: p[6],
        }
    }

    /// The two endpoints of `axis` (0 = x, 1 = y, 2 = z).
    pub fn endpoints(&self, axis: usize) -> (Vec3, Vec3) {
        let p = self.to_array();
        (p[1 + axis], p[4 + axis])
    }

    pub fn axis_matrix(&self) -> AxisMatrix {
        let p = self.to_array();
        let mut d = Matrix3x6::zeros();
        for k in 0..6 {
            d.set_column(k, &(p[k + 1] - p[0]));
        }
        AxisMatrix(d)
    }
}

/// Endpoint offsets `[x1−c, y1−c, z1−c, x2−c, y2−c, z2−c]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisMatrix(pub Matrix3x6<f64>);

pub fn proxy_points(g: &Gaussian) -> ProxyPointSet {
    let r = g.rotation_matrix();
    let s = g.scales();
    let c = g.mean;
    let a = |i: usize| r.column(i) * s[i];
    ProxyPointSet {
        c,
        x1: c + a(0),
        y1: c + a(1),
        z1: c + a(2),
        x2: c - a(0),
        y2: c - a(1),
        z2: c - a(2),
    }
}

/// `Dᵀ(D Dᵀ)⁻¹`, the source-only factor of the least-squares transform.
pub fn pseudo_inverse_factor(ds: &AxisMatrix) -> Result<Matrix6x3<f64>> {
    let d = &ds.0;
    if !d.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("axis matrix"));
    }
    let mut g: Mat3 = d * d.transpose();
    let eig = sym_eigen3(&g);
    let (hi, lo) = (eig.values[0], eig.values[2]);
    if !(lo > 0.0) || hi / lo >= MAX_CONDITION {
        let bump = REGULARIZATION * g.trace();
        g += Mat3::identity() * bump;
    }
    let inv = g.try_inverse().ok_or(Error::DegenerateGaussian)?;
    if !inv.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateGaussian);
    }
    Ok(d.transpose() * inv)
}

/// Least-squares `T` minimizing `‖D_d − T·D_s‖_F`.
pub fn estimate_transform(ds: &AxisMatrix, dd: &AxisMatrix) -> Result<Mat3> {
    Ok(dd.0 * pseudo_inverse_factor(ds)?)
}

/// New Gaussian centred at `c_d` with covariance `T·Σ·Tᵀ`. Opacity and SH are
/// copied; the rotation keeps the axis labelling of `T·R`.
pub fn transform_gaussian(g: &Gaussian, t: &Mat3, c_d: &Vec3) -> Result<Gaussian> {
    transform_with(g, &g.covariance(), &g.rotation_matrix(), t, c_d)
}

pub(crate) fn transform_with(
    g: &Gaussian,
    sigma: &Covariance3,
    rot: &Mat3,
    t: &Mat3,
    c_d: &Vec3,
) -> Result<Gaussian> {
    if !t.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("transform"));
    }
    let sd = sigma.transformed(t);
    let (rotation, log_scale) = refit_aligned(&sd, &(t * rot))?;
    Ok(Gaussian {
        mean: *c_d,
        rotation,
        log_scale,
        logit_opacity: g.logit_opacity,
        sh: g.sh.clone(),
    })
}
