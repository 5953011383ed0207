//! Seeded synthetic scenes for tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::gaussian::{logit, quaternion_from_matrix};
use crate::model::{CageMesh, Gaussian, GaussianScene, Mat3, Vec3};

/// Surface disk Gaussian at `p` facing `normal`.
pub fn surface_disk(p: Vec3, normal: Vec3, tangent_sigma: f64, normal_sigma: f64, opacity: f64) -> Gaussian {
    let n = normal.normalize();
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let t1 = helper.cross(&n).normalize();
    let t2 = n.cross(&t1);
    let r = Mat3::from_columns(&[t1, t2, n]);
    let mut g = Gaussian::new(
        p,
        quaternion_from_matrix(&r),
        Vec3::new(tangent_sigma.ln(), tangent_sigma.ln(), normal_sigma.ln()),
        logit(opacity),
    );
    g.sh = vec![0.5, 0.5, 0.5];
    g
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let l = v.norm();
        if l > 1e-3 && l <= 1.0 {
            return v / l;
        }
    }
}

/// `n` opaque disks on a sphere of the given radius around the origin.
pub fn sphere_shell(n: usize, radius: f64, seed: u64) -> GaussianScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = radius * (4.0 * std::f64::consts::PI / n as f64).sqrt();
    let gaussians = (0..n)
        .map(|_| {
            let d = unit_vector(&mut rng);
            surface_disk(d * radius, d, spacing, 0.002 * radius, 0.9)
        })
        .collect();
    GaussianScene::new(0, gaussians)
}

/// `n` opaque disks on a torus around the z axis.
pub fn torus(n: usize, major: f64, minor: f64, seed: u64) -> GaussianScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let area = 4.0 * std::f64::consts::PI.powi(2) * major * minor;
    let spacing = (area / n as f64).sqrt();
    let mut gaussians = Vec::with_capacity(n);
    while gaussians.len() < n {
        let u = rng.gen_range(0.0..std::f64::consts::TAU);
        let v = rng.gen_range(0.0..std::f64::consts::TAU);
        // Rejection keeps the samples uniform in area.
        if rng.gen_range(0.0..major + minor) > major + minor * v.cos() {
            continue;
        }
        let ring = Vec3::new(u.cos(), u.sin(), 0.0);
        let normal = ring * v.cos() + Vec3::z() * v.sin();
        gaussians.push(surface_disk(ring * major + normal * minor, normal, spacing, 0.002, 0.9));
    }
    GaussianScene::new(0, gaussians)
}

/// Area-weighted disks on the surface of a closed mesh.
pub fn mesh_surface(mesh: &CageMesh, n: usize, seed: u64) -> GaussianScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let areas: Vec<f64> = (0..mesh.faces.len()).map(|f| 0.5 * mesh.face_area_normal(f).norm()).collect();
    let total: f64 = areas.iter().sum();
    let spacing = (total / n as f64).sqrt();
    let gaussians = (0..n)
        .map(|_| {
            let mut pick = rng.gen_range(0.0..total);
            let mut f = 0;
            while f + 1 < areas.len() && pick >= areas[f] {
                pick -= areas[f];
                f += 1;
            }
            let [a, b, c] = mesh.triangle(f);
            let (mut s, mut t) = (rng.gen::<f64>(), rng.gen::<f64>());
            if s + t > 1.0 {
                s = 1.0 - s;
                t = 1.0 - t;
            }
            let p = a + (b - a) * s + (c - a) * t;
            surface_disk(p, mesh.face_normal(f), spacing, 0.002, 0.9)
        })
        .collect();
    GaussianScene::new(0, gaussians)
}

/// L-shaped prism: the unit-thick extrusion of a 2×2 square minus one quadrant.
pub fn l_solid() -> CageMesh {
    let l = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)];
    CageMesh::prism(&l, 0.0, 1.0)
}

/// Adds `count` isotropic floaters of the given opacity scattered in a
/// shell between `inner` and `outer` times the scene radius.
pub fn with_floaters(scene: &GaussianScene, count: usize, opacity: f64, inner: f64, outer: f64, seed: u64) -> GaussianScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = scene.len().max(1) as f64;
    let centre = scene.gaussians.iter().map(|g| g.mean).sum::<Vec3>() / n;
    let radius = scene.gaussians.iter().map(|g| (g.mean - centre).norm()).fold(0.0, f64::max);
    let mut out = scene.clone();
    let sh_len = scene.sh_len();
    for _ in 0..count {
        let d = unit_vector(&mut rng);
        let r = radius * rng.gen_range(inner..outer);
        let mut g = Gaussian::isotropic(centre + d * r, 0.02 * radius, logit(opacity));
        g.sh = vec![0.5; sh_len];
        out.gaussians.push(g);
    }
    out
}

/// Random Gaussians with means uniform in the axis-aligned box `[lo, hi]`.
pub fn random_box(n: usize, lo: Vec3, hi: Vec3, log_scale: (f64, f64), seed: u64) -> GaussianScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussians = (0..n)
        .map(|_| {
            let mean = Vec3::from_fn(|a, _| rng.gen_range(lo[a]..hi[a]));
            let r = nalgebra::Rotation3::new(Vec3::from_fn(|_, _| rng.gen_range(-2.0..2.0)));
            let ls = Vec3::from_fn(|_, _| rng.gen_range(log_scale.0..log_scale.1));
            let mut g = Gaussian::new(mean, quaternion_from_matrix(r.matrix()), ls, rng.gen_range(-3.0..3.0));
            g.sh = vec![rng.gen(), rng.gen(), rng.gen()];
            g
        })
        .collect();
    GaussianScene::new(0, gaussians)
}
