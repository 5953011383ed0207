use crate::error::{Error, Result};

use super::gaussian::Vec3;

/// Pinhole camera looking from `position` towards `look_at`.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Vertical field of view in radians.
    pub fov_y: f64,
    pub width: usize,
    pub height: usize,
}

/// Orthonormal camera frame: `right`, `down` and `forward` (image x, image y,
/// optical axis).
#[derive(Clone, Copy, Debug)]
pub struct CameraFrame {
    pub origin: Vec3,
    pub right: Vec3,
    pub down: Vec3,
    pub forward: Vec3,
    /// tan(fov_y / 2)
    pub tan_half_y: f64,
    pub tan_half_x: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraPose {
    pub fn validate(&self) -> Result<()> {
        if (self.position - self.look_at).norm() == 0.0 {
            return Err(Error::Config("camera position equals look_at".into()));
        }
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return Err(Error::Config(format!("fov_y {} outside (0, pi)", self.fov_y)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("camera image has zero size".into()));
        }
        Ok(())
    }

    pub fn frame(&self) -> CameraFrame {
        let forward = (self.look_at - self.position).normalize();
        let mut up = self.up;
        if up.cross(&forward).norm() < 1e-9 * up.norm().max(1.0) {
            // up parallel to the view direction: pick any perpendicular
            up = if forward.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        }
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let tan_half_y = (0.5 * self.fov_y).tan();
        let tan_half_x = tan_half_y * self.width as f64 / self.height as f64;
        CameraFrame {
            origin: self.position,
            right,
            down,
            forward,
            tan_half_y,
            tan_half_x,
            width: self.width,
            height: self.height,
        }
    }
}

impl CameraFrame {
    /// Unnormalized ray direction through the centre of pixel (u, v); its
    /// component along `forward` is exactly 1, so the ray parameter equals
    /// z-depth.
    pub fn pixel_direction(&self, u: usize, v: usize) -> Vec3 {
        let x = ((u as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * self.tan_half_x;
        let y = ((v as f64 + 0.5) / self.height as f64 * 2.0 - 1.0) * self.tan_half_y;
        self.forward + self.right * x + self.down * y
    }

    /// Camera-space coordinates (right, down, forward).
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        let d = p - self.origin;
        Vec3::new(d.dot(&self.right), d.dot(&self.down), d.dot(&self.forward))
    }

    /// Pixel containing the projection of `p` together with its z-depth, or
    /// `None` when behind the camera or outside the image.
    pub fn project(&self, p: &Vec3) -> Option<(usize, usize, f64)> {
        let c = self.to_camera(p);
        if c.z <= 0.0 {
            return None;
        }
        let fx = (c.x / c.z / self.tan_half_x + 1.0) * 0.5 * self.width as f64;
        let fy = (c.y / c.z / self.tan_half_y + 1.0) * 0.5 * self.height as f64;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (u, v) = (fx as usize, fy as usize);
        if u >= self.width || v >= self.height {
            return None;
        }
        Some((u, v, c.z))
    }
}

/// Per-pixel z-depth image. Zero marks "no hit".
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub pose: CameraPose,
}

impl DepthMap {
    pub const NO_HIT: f64 = 0.0;

    pub fn empty(pose: &CameraPose) -> Self {
        Self {
            width: pose.width,
            height: pose.height,
            depth: vec![Self::NO_HIT; pose.width * pose.height],
            pose: pose.clone(),
        }
    }

    pub fn at(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.depth[v * self.width + u];
        (d > 0.0 && d.is_finite()).then_some(d)
    }

    pub fn hit_count(&self) -> usize {
        self.depth.iter().filter(|&&d| d > 0.0 && d.is_finite()).count()
    }
}
