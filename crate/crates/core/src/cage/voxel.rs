use kiddo::{KdTree, SquaredEuclidean};

use crate::error::{Error, Result};
use crate::model::{CameraFrame, DepthMap, GaussianScene, GridSpec, Mat3, Vec3, VoxelGrid};
use crate::par;

use super::CageBuildConfig;

/// Space carving: a voxel survives unless some view sees it in free space,
/// either through a no-hit pixel or more than `margin` in front of the
/// observed depth. With no views every voxel survives.
pub fn depth_carve(depths: &[DepthMap], grid: GridSpec, margin: f64) -> VoxelGrid {
    let frames: Vec<CameraFrame> = depths.iter().map(|d| d.pose.frame()).collect();
    let flags = par::map_range(grid.len(), |idx| {
        let [i, j, k] = grid.coords(idx);
        let p = grid.center(i, j, k);
        depths.iter().zip(&frames).all(|(map, f)| match f.project(&p) {
            None => true,
            Some((u, v, z)) => match map.at(u, v) {
                None => false,
                Some(d) => z >= d - margin,
            },
        })
    });
    VoxelGrid::from_flags(grid, &flags)
}

pub fn merge_voxels(a: &VoxelGrid, b: &VoxelGrid) -> Result<VoxelGrid> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let flags: Vec<bool> = (0..a.grid.len()).map(|i| a.get_index(i) || b.get_index(i)).collect();
    Ok(VoxelGrid::from_flags(a.grid, &flags))
}

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let mut first = None;
    for q in 0..n {
        if f[q].is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(start) = first else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v[0] = start;
    for q in start + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared Euclidean distance (in voxels) from each voxel to the nearest set voxel.
pub fn squared_distance_field(v: &VoxelGrid) -> Vec<f64> {
    let g = v.grid;
    let d = g.dims;
    let mut field: Vec<f64> = (0..g.len()).map(|i| if v.get_index(i) { 0.0 } else { f64::INFINITY }).collect();
    let longest = d[0].max(d[1]).max(d[2]);
    let mut f = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut vv = vec![0usize; longest];
    let mut z = vec![0.0; longest + 1];
    for axis in 0..3 {
        let n = d[axis];
        let (a1, a2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for p in 0..d[a1] {
            for q in 0..d[a2] {
                let idx = |t: usize| {
                    let mut c = [0usize; 3];
                    c[axis] = t;
                    c[a1] = p;
                    c[a2] = q;
                    g.index(c[0], c[1], c[2])
                };
                for t in 0..n {
                    f[t] = field[idx(t)];
                }
                edt_1d(&f[..n], &mut out[..n], &mut vv[..n], &mut z[..n + 1]);
                for t in 0..n {
                    field[idx(t)] = out[t];
                }
            }
        }
    }
    field
}

/// Dilation then erosion by the discrete ball `|o|² ≤ radius²`. The
/// domain is treated as unbounded empty space beyond the grid.
pub fn morphological_close(v: &VoxelGrid, radius: usize) -> VoxelGrid {
    if radius == 0 {
        return v.clone();
    }
    let pad = radius + 1;
    let big = v.padded(pad);
    let r2 = (radius * radius) as f64;
    let dist = squared_distance_field(&big);
    let dilated: Vec<bool> = dist.iter().map(|&d| d <= r2).collect();
    let complement = VoxelGrid::from_flags(big.grid, &dilated.iter().map(|&b| !b).collect::<Vec<_>>());
    let dist = squared_distance_field(&complement);
    let closed = VoxelGrid::from_flags(big.grid, &dist.iter().map(|&d| d > r2).collect::<Vec<_>>());
    closed.cropped(pad, v.grid)
}

/// Connected components of occupied voxels under face adjacency.
pub fn voxel_components(v: &VoxelGrid) -> usize {
    let g = v.grid;
    let d = g.dims;
    let mut seen = vec![false; g.len()];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..g.len() {
        if seen[start] || !v.get_index(start) {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let [i, j, k] = g.coords(idx);
            let c = [i, j, k];
            for a in 0..3 {
                for up in [false, true] {
                    let mut n = c;
                    if up {
                        if n[a] + 1 >= d[a] {
                            continue;
                        }
                        n[a] += 1;
                    } else {
                        if n[a] == 0 {
                            continue;
                        }
                        n[a] -= 1;
                    }
                    let ni = g.index(n[0], n[1], n[2]);
                    if !seen[ni] && v.get_index(ni) {
                        seen[ni] = true;
                        stack.push(ni);
                    }
                }
            }
        }
    }
    count
}

/// Grid over all Gaussian means at the configured resolution, one empty
/// voxel of padding on each side.
pub fn baseline_grid(scene: &GaussianScene, cfg: &CageBuildConfig) -> Result<GridSpec> {
    let (lo, hi) = scene.bounds().ok_or(Error::EmptyScene)?;
    if !((hi - lo).max() > 0.0) {
        return Err(Error::DegenerateScene("all Gaussian means coincide".into()));
    }
    GridSpec::covering(lo, hi, cfg.voxel_res, 1)
}

/// Density occupancy over the `k` nearest Gaussians of each voxel centre:
/// occupied iff `Σ α exp(-½ dᵀΣ⁻¹d)` exceeds `threshold`.
pub fn baseline_voxelize_in(scene: &GaussianScene, grid: GridSpec, k: usize, threshold: f64) -> VoxelGrid {
    let mut tree: KdTree<f64, 3> = KdTree::new();
    for (i, g) in scene.gaussians.iter().enumerate() {
        tree.add(&[g.mean.x, g.mean.y, g.mean.z], i as u64);
    }
    let inv: Vec<Mat3> = scene
        .gaussians
        .iter()
        .map(|g| {
            let r = g.rotation_matrix();
            let s = g.scales().map(|v| 1.0 / (v * v));
            r * Mat3::from_diagonal(&s) * r.transpose()
        })
        .collect();
    let k = k.min(scene.len()).max(1);
    let flags = par::map_range(grid.len(), |idx| {
        let [i, j, l] = grid.coords(idx);
        let p = grid.center(i, j, l);
        let mut near: Vec<usize> = tree
            .nearest_n::<SquaredEuclidean>(&[p.x, p.y, p.z], k)
            .into_iter()
            .map(|n| n.item as usize)
            .collect();
        near.sort_unstable();
        density_at(scene, &inv, &near, &p) > threshold
    });
    VoxelGrid::from_flags(grid, &flags)
}

fn density_at(scene: &GaussianScene, inv: &[Mat3], ids: &[usize], p: &Vec3) -> f64 {
    ids.iter()
        .map(|&i| {
            let g = &scene.gaussians[i];
            let d = p - g.mean;
            g.opacity() * (-0.5 * d.dot(&(inv[i] * d))).exp()
        })
        .sum()
}

pub fn baseline_voxelize(scene: &GaussianScene, cfg: &CageBuildConfig) -> Result<VoxelGrid> {
    let grid = baseline_grid(scene, cfg)?;
    Ok(baseline_voxelize_in(scene, grid, cfg.baseline_k, cfg.baseline_threshold))
}
