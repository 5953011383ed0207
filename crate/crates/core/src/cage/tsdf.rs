use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::model::{CameraFrame, CameraPose, DepthMap, GridSpec, TsdfVolume, Vec3, VoxelGrid};
use crate::par;

/// Weighted truncated signed distance fusion. Each view casts the signed
/// distance `depth_pixel - voxel_depth` (in world units, along the optical
/// axis), truncated and normalized to [-1, 1]; voxels further than the
/// truncation band behind the observed surface are left untouched.
pub fn tsdf_integrate(depths: &[DepthMap], grid: GridSpec, truncation: f64) -> Result<TsdfVolume> {
    let mut vol = TsdfVolume::new(grid, truncation)?;
    if !(truncation > 0.0) {
        return Err(Error::Config(format!("truncation must be positive, got {truncation}")));
    }
    let frames: Vec<CameraFrame> = depths.iter().map(|d| d.pose.frame()).collect();
    let fused = par::map_range(grid.len(), |idx| {
        let [i, j, k] = grid.coords(idx);
        let p = grid.center(i, j, k);
        let (mut sum, mut w) = (0.0f64, 0.0f64);
        for (map, f) in depths.iter().zip(&frames) {
            let Some((u, v, z)) = f.project(&p) else { continue };
            let Some(d) = map.at(u, v) else { continue };
            let sdf = d - z;
            if sdf < -truncation {
                continue;
            }
            sum += (sdf / truncation).min(1.0);
            w += 1.0;
        }
        if w > 0.0 {
            ((sum / w) as f32, w as f32)
        } else {
            (1.0, 0.0)
        }
    });
    for (idx, (t, w)) in fused.into_iter().enumerate() {
        vol.tsdf[idx] = t;
        vol.weight[idx] = w;
    }
    Ok(vol)
}

/// Observed voxels with a sign change towards an observed 6-neighbour.
pub fn extract_surface_voxels(tsdf: &TsdfVolume) -> VoxelGrid {
    let g = tsdf.grid;
    let d = g.dims;
    let flags = par::map_range(g.len(), |idx| {
        if tsdf.weight[idx] <= 0.0 {
            return false;
        }
        let inside = tsdf.tsdf[idx] < 0.0;
        let [i, j, k] = g.coords(idx);
        let c = [i as isize, j as isize, k as isize];
        for (a, s) in [(0, -1), (0, 1), (1, -1), (1, 1), (2, -1), (2, 1)] {
            let mut n = c;
            n[a] += s;
            if n[a] < 0 || n[a] as usize >= d[a] {
                continue;
            }
            let nidx = g.index(n[0] as usize, n[1] as usize, n[2] as usize);
            if tsdf.weight[nidx] > 0.0 && (tsdf.tsdf[nidx] < 0.0) != inside {
                return true;
            }
        }
        false
    });
    VoxelGrid::from_flags(g, &flags)
}

fn ray_box(o: &Vec3, d: &Vec3, b: &Aabb) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < b.lo[a] || o[a] > b.hi[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[a];
        let (mut n, mut f) = ((b.lo[a] - o[a]) * inv, (b.hi[a] - o[a]) * inv);
        if n > f {
            std::mem::swap(&mut n, &mut f);
        }
        t0 = t0.max(n);
        t1 = t1.min(f);
    }
    (t0 <= t1).then_some((t0, t1))
}

const BRICK: usize = 8;

/// Fused values with unobserved voxels folded in as NaN, plus a coarse map
/// of bricks (`BRICK`^3 sampling cells) that have no observed non-positive
/// corner. A sample inside such a brick is positive or missing, so it can
/// never end a ray.
struct MarchField {
    grid: GridSpec,
    vals: Vec<f32>,
    bdims: [usize; 3],
    clean: Vec<bool>,
}

impl MarchField {
    fn new(tsdf: &TsdfVolume) -> Self {
        let g = tsdf.grid;
        let vals: Vec<f32> = tsdf.tsdf.iter().zip(&tsdf.weight).map(|(&t, &w)| if w > 0.0 { t } else { f32::NAN }).collect();
        let bdims = [0, 1, 2].map(|a| g.dims[a].div_ceil(BRICK));
        let clean = par::map_range(bdims[0] * bdims[1] * bdims[2], |b| {
            let (bi, bj, bk) = (b % bdims[0], (b / bdims[0]) % bdims[1], b / (bdims[0] * bdims[1]));
            let lo = [bi, bj, bk].map(|x| x * BRICK);
            let hi = [0, 1, 2].map(|a| (lo[a] + BRICK).min(g.dims[a] - 1));
            (lo[2]..=hi[2]).all(|k| (lo[1]..=hi[1]).all(|j| (lo[0]..=hi[0]).all(|i| !(vals[g.index(i, j, k)] <= 0.0))))
        });
        Self { grid: g, vals, bdims, clean }
    }

    #[inline]
    fn cell(&self, p: &Vec3) -> Option<Vec3> {
        let q = (p - self.grid.origin) / self.grid.voxel_size - Vec3::repeat(0.5);
        (q.x >= 0.0 && q.y >= 0.0 && q.z >= 0.0).then_some(q)
    }

    /// Trilinear sample; `None` outside the grid or next to an unobserved voxel.
    fn sample(&self, p: &Vec3) -> Option<f64> {
        let g = &self.grid;
        let q = self.cell(p)?;
        let (i, j, k) = (q.x as usize, q.y as usize, q.z as usize);
        if i + 1 >= g.dims[0] || j + 1 >= g.dims[1] || k + 1 >= g.dims[2] {
            return None;
        }
        let (fx, fy, fz) = (q.x - i as f64, q.y - j as f64, q.z - k as f64);
        let mut acc = 0.0;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let v = self.vals[g.index(i + dx, j + dy, k + dz)];
                    if v.is_nan() {
                        return None;
                    }
                    let w = (if dx == 1 { fx } else { 1.0 - fx })
                        * (if dy == 1 { fy } else { 1.0 - fy })
                        * (if dz == 1 { fz } else { 1.0 - fz });
                    acc += w * v as f64;
                }
            }
        }
        Some(acc)
    }

    fn clean_brick(&self, p: &Vec3) -> Option<[usize; 3]> {
        let q = self.cell(p)?;
        let b = [q.x, q.y, q.z].map(|x| x as usize / BRICK);
        if (0..3).any(|a| b[a] >= self.bdims[a]) {
            return None;
        }
        self.clean[b[0] + self.bdims[0] * (b[1] + self.bdims[1] * b[2])].then_some(b)
    }

    fn brick_box(&self, b: [usize; 3]) -> Aabb {
        let g = &self.grid;
        let lo = Vec3::new(b[0] as f64, b[1] as f64, b[2] as f64) * BRICK as f64 + Vec3::repeat(0.5);
        Aabb { lo: g.origin + lo * g.voxel_size, hi: g.origin + (lo + Vec3::repeat(BRICK as f64)) * g.voxel_size }
    }
}

/// Ray-marches the fused field with trilinear sampling at half-voxel steps
/// and reports the first positive-to-negative crossing, linearly
/// interpolated. A ray whose first sample is already negative hits there.
/// Runs of steps inside clean bricks are skipped without sampling.
pub fn tsdf_render_depth(tsdf: &TsdfVolume, pose: &CameraPose) -> DepthMap {
    let f = pose.frame();
    let mut map = DepthMap::empty(pose);
    let field = MarchField::new(tsdf);
    let g = &tsdf.grid;
    let half = Vec3::repeat(0.5 * g.voxel_size);
    let bounds = Aabb { lo: g.origin + half, hi: g.max_corner() - half };
    par::for_each_chunk_mut(&mut map.depth, pose.width, |v, row| {
        for (u, px) in row.iter_mut().enumerate() {
            let d = f.pixel_direction(u, v);
            let Some((t0, t1)) = ray_box(&f.origin, &d, &bounds) else { continue };
            let dt = 0.5 * g.voxel_size / d.norm();
            let at = |n: usize| t0 + n as f64 * dt;
            // previous sample; `Err(t)` when it was skipped and not evaluated
            let mut prev: std::result::Result<Option<(f64, f64)>, f64> = Ok(None);
            let mut n = 0usize;
            loop {
                let t = at(n);
                if t > t1 {
                    break;
                }
                let p = f.origin + d * t;
                if let Some(b) = field.clean_brick(&p) {
                    let exit = ray_box(&f.origin, &d, &field.brick_box(b)).map_or(t, |r| r.1);
                    let mut m = (((exit - t0) / dt).floor().max(0.0) as usize).max(n);
                    while m > n && (at(m) > t1 || field.clean_brick(&(f.origin + d * at(m))) != Some(b)) {
                        m -= 1;
                    }
                    prev = Err(at(m));
                    n = m + 1;
                    continue;
                }
                let s = field.sample(&p);
                if let Some(cur) = s.filter(|&c| c <= 0.0) {
                    if n == 0 {
                        // Depth 0 is the no-hit sentinel.
                        *px = t.max(f64::MIN_POSITIVE);
                        break;
                    }
                    let before = prev.unwrap_or_else(|tp| field.sample(&(f.origin + d * tp)).map(|v| (tp, v)));
                    if let Some((tp, sp)) = before.filter(|b| b.1 > 0.0) {
                        *px = tp + (t - tp) * sp / (sp - cur);
                        break;
                    }
                }
                prev = Ok(s.map(|v| (t, v)));
                n += 1;
            }
        }
    });
    map
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::cage::{synthesize_cameras, CageBuildConfig};
    use crate::model::{Gaussian, GaussianScene};

    /// Depth map of an analytic sphere at the origin.
    pub(crate) fn sphere_depth(pose: &CameraPose, radius: f64) -> DepthMap {
        let f = pose.frame();
        let mut map = DepthMap::empty(pose);
        for v in 0..pose.height {
            for u in 0..pose.width {
                let d = f.pixel_direction(u, v);
                let o = f.origin;
                let (a, b, c) = (d.norm_squared(), o.dot(&d), o.norm_squared() - radius * radius);
                let disc = b * b - a * c;
                if disc >= 0.0 {
                    let t = (-b - disc.sqrt()) / a;
                    if t > 0.0 {
                        map.depth[v * pose.width + u] = t;
                    }
                }
            }
        }
        map
    }

    pub(crate) fn sphere_views(n_r: usize, n_c: usize, size: usize) -> Vec<CameraPose> {
        let scene = GaussianScene::new(
            0,
            vec![
                Gaussian::isotropic(Vec3::new(1.0, 0.0, 0.0), 0.01, 0.0),
                Gaussian::isotropic(Vec3::new(-1.0, 0.0, 0.0), 0.01, 0.0),
            ],
        );
        let cfg = CageBuildConfig {
            num_rings: n_r,
            cameras_per_ring: n_c,
            image_width: size,
            image_height: size,
            expand_factor: 2.0,
            ..Default::default()
        };
        synthesize_cameras(&scene, &cfg, 1.0).unwrap()
    }

    pub(crate) fn sphere_grid(res: usize) -> GridSpec {
        GridSpec::covering(Vec3::repeat(-1.2), Vec3::repeat(1.2), res, 0).unwrap()
    }

    /// Zero crossing of the field along a ray from the origin.
    fn zero_radius(vol: &TsdfVolume, dir: &Vec3) -> f64 {
        let mut prev: Option<(f64, f64)> = None;
        let mut r = 0.5;
        while r < 1.19 {
            if let Some(s) = vol.sample(&(dir * r)) {
                if let Some((rp, sp)) = prev {
                    if sp < 0.0 && s >= 0.0 {
                        return rp + (r - rp) * (-sp) / (s - sp);
                    }
                }
                prev = Some((r, s));
            }
            r += 0.001;
        }
        panic!("no zero crossing along {dir:?}");
    }

    #[test]
    fn sphere_zero_set_radius() {
        let grid = sphere_grid(48);
        let views = sphere_views(4, 8, 64);
        let depths: Vec<DepthMap> = views.iter().map(|p| sphere_depth(p, 0.8)).collect();
        let vol = tsdf_integrate(&depths, grid, 4.0 * grid.voxel_size).unwrap();
        for dir in [Vec3::x(), Vec3::new(1.0, 1.0, 1.0).normalize(), Vec3::new(-0.3, 0.2, -0.9).normalize()] {
            let r = zero_radius(&vol, &dir);
            assert!((r - 0.8).abs() < 2.0 * grid.voxel_size, "{r}");
        }
        let shell = extract_surface_voxels(&vol);
        for idx in 0..grid.len() {
            if shell.get_index(idx) {
                let [i, j, k] = grid.coords(idx);
                let r = grid.center(i, j, k).norm();
                assert!((r - 0.8).abs() < 2.0 * grid.voxel_size, "{r}");
            }
        }
        assert!(shell.count() > 100);
    }

    #[test]
    fn single_view_defines_frustum_only() {
        let grid = sphere_grid(16);
        let mut p = sphere_views(1, 1, 8)[0].clone();
        p.fov_y = 10f64.to_radians();
        let vol = tsdf_integrate(&[sphere_depth(&p, 0.8)], grid, 0.3).unwrap();
        let f = p.frame();
        for idx in 0..grid.len() {
            let [i, j, k] = grid.coords(idx);
            if f.project(&grid.center(i, j, k)).is_none() {
                assert_eq!(vol.weight[idx], 0.0);
            }
        }
        assert!(vol.weight.iter().any(|&w| w > 0.0));
    }

    #[test]
    fn empty_depths_leave_no_weight() {
        let grid = sphere_grid(16);
        let views = sphere_views(2, 3, 8);
        let depths: Vec<DepthMap> = views.iter().map(DepthMap::empty).collect();
        let vol = tsdf_integrate(&depths, grid, 0.3).unwrap();
        assert!(vol.weight.iter().all(|&w| w == 0.0));
        assert!(extract_surface_voxels(&vol).is_empty());
        assert_eq!(tsdf_render_depth(&vol, &views[0]).hit_count(), 0);
    }

    #[test]
    fn all_positive_field_has_no_surface() {
        let grid = sphere_grid(8);
        let mut vol = TsdfVolume::new(grid, 0.1).unwrap();
        vol.weight.iter_mut().for_each(|w| *w = 1.0);
        vol.tsdf.iter_mut().for_each(|t| *t = 0.5);
        assert!(extract_surface_voxels(&vol).is_empty());
    }

    #[test]
    fn rerendered_depth_matches_sphere() {
        let grid = sphere_grid(48);
        let views = sphere_views(4, 8, 64);
        let depths: Vec<DepthMap> = views.iter().map(|p| sphere_depth(p, 0.8)).collect();
        let vol = tsdf_integrate(&depths, grid, 4.0 * grid.voxel_size).unwrap();
        let p = &views[3];
        let truth = sphere_depth(p, 0.8);
        let out = tsdf_render_depth(&vol, p);
        let c = p.width / 2;
        let (a, b) = (out.at(c, c).unwrap(), truth.at(c, c).unwrap());
        assert!((a - b).abs() < grid.voxel_size, "{a} vs {b}");
    }

    #[test]
    fn camera_inside_negative_region_hits_immediately() {
        let grid = sphere_grid(8);
        let mut vol = TsdfVolume::new(grid, 0.1).unwrap();
        vol.weight.iter_mut().for_each(|w| *w = 1.0);
        vol.tsdf.iter_mut().for_each(|t| *t = -0.5);
        let p = CameraPose {
            position: Vec3::zeros(),
            look_at: Vec3::x(),
            up: Vec3::z(),
            fov_y: 0.5,
            width: 4,
            height: 4,
        };
        let out = tsdf_render_depth(&vol, &p);
        assert_eq!(out.hit_count(), 16);
        assert!(out.depth.iter().all(|&d| d <= 1e-9));
    }
}
