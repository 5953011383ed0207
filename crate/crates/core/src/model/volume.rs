use crate::error::{Error, Result};

use super::gaussian::Vec3;

/// Regular grid geometry shared by TSDF volumes and occupancy grids.
/// `origin` is the minimum corner; voxel (i, j, k) has its centre at
/// `origin + (i + ½, j + ½, k + ½) · voxel_size`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub origin: Vec3,
    pub voxel_size: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin
            + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.voxel_size
    }

    pub fn max_corner(&self) -> Vec3 {
        self.origin
            + Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64)
                * self.voxel_size
    }

    /// Grid covering `[lo, hi]` with `resolution` voxels along the longest
    /// axis and `pad` extra voxels on every side.
    pub fn covering(lo: Vec3, hi: Vec3, resolution: usize, pad: usize) -> Result<Self> {
        let ext = hi - lo;
        let longest = ext.max();
        if !(longest > 0.0) || resolution == 0 {
            return Err(Error::EmptyVolume);
        }
        let voxel_size = longest / resolution as f64;
        let mut dims = [0usize; 3];
        for a in 0..3 {
            dims[a] = ((ext[a] / voxel_size).ceil() as usize).max(1) + 2 * pad;
        }
        let center = (lo + hi) * 0.5;
        let half = Vec3::new(dims[0] as f64, dims[1] as f64, dims[2] as f64) * voxel_size * 0.5;
        Ok(Self {
            origin: center - half,
            voxel_size,
            dims,
        })
    }

    /// Same voxel size, `pad` voxels added on every side.
    pub fn padded(&self, pad: usize) -> Self {
        Self {
            origin: self.origin - Vec3::repeat(pad as f64 * self.voxel_size),
            voxel_size: self.voxel_size,
            dims: [self.dims[0] + 2 * pad, self.dims[1] + 2 * pad, self.dims[2] + 2 * pad],
        }
    }
}

/// Truncated signed distance volume. Values are normalized to [−1, 1];
/// positive in front of the observed surface.
#[derive(Clone, Debug, PartialEq)]
pub struct TsdfVolume {
    pub grid: GridSpec,
    pub tsdf: Vec<f32>,
    pub weight: Vec<f32>,
    /// Truncation distance in world units.
    pub truncation: f64,
}

impl TsdfVolume {
    pub fn new(grid: GridSpec, truncation: f64) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyVolume);
        }
        Ok(Self {
            grid,
            tsdf: vec![1.0; grid.len()],
            weight: vec![0.0; grid.len()],
            truncation,
        })
    }

    /// Trilinear TSDF at `p`; `None` outside the voxel-centre lattice or when
    /// any of the eight neighbours is unobserved.
    pub fn sample(&self, p: &Vec3) -> Option<f64> {
        let g = &self.grid;
        let q = (p - g.origin) / g.voxel_size - Vec3::repeat(0.5);
        if q.x < 0.0 || q.y < 0.0 || q.z < 0.0 {
            return None;
        }
        let (i, j, k) = (q.x as usize, q.y as usize, q.z as usize);
        if i + 1 >= g.dims[0] || j + 1 >= g.dims[1] || k + 1 >= g.dims[2] {
            return None;
        }
        let (fx, fy, fz) = (q.x - i as f64, q.y - j as f64, q.z - k as f64);
        let mut acc = 0.0;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let idx = g.index(i + dx, j + dy, k + dz);
                    if self.weight[idx] <= 0.0 {
                        return None;
                    }
                    let w = (if dx == 1 { fx } else { 1.0 - fx })
                        * (if dy == 1 { fy } else { 1.0 - fy })
                        * (if dz == 1 { fz } else { 1.0 - fz });
                    acc += w * self.tsdf[idx] as f64;
                }
            }
        }
        Some(acc)
    }
}

/// Binary occupancy grid backed by a packed bit array.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub grid: GridSpec,
    bits: Vec<u64>,
}

impl VoxelGrid {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            bits: vec![0; grid.len().div_ceil(64)],
        }
    }

    pub fn filled(grid: GridSpec) -> Self {
        let mut v = Self::new(grid);
        for i in 0..grid.len() {
            v.set_index(i, true);
        }
        v
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(usize, usize, usize) -> bool) -> Self {
        let mut v = Self::new(grid);
        for k in 0..grid.dims[2] {
            for j in 0..grid.dims[1] {
                for i in 0..grid.dims[0] {
                    if f(i, j, k) {
                        v.set(i, j, k, true);
                    }
                }
            }
        }
        v
    }

    /// Builds a grid from one flag per voxel in index order.
    pub fn from_flags(grid: GridSpec, flags: &[bool]) -> Self {
        assert_eq!(flags.len(), grid.len());
        let mut v = Self::new(grid);
        for (i, &f) in flags.iter().enumerate() {
            if f {
                v.bits[i / 64] |= 1 << (i % 64);
            }
        }
        v
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        (self.bits[idx / 64] >> (idx % 64)) & 1 == 1
    }

    #[inline]
    pub fn set_index(&mut self, idx: usize, on: bool) {
        if on {
            self.bits[idx / 64] |= 1 << (idx % 64);
        } else {
            self.bits[idx / 64] &= !(1 << (idx % 64));
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.get_index(self.grid.index(i, j, k))
    }

    /// Out-of-range signed coordinates read as empty.
    #[inline]
    pub fn get_signed(&self, i: isize, j: isize, k: isize) -> bool {
        let d = self.grid.dims;
        if i < 0 || j < 0 || k < 0 || i as usize >= d[0] || j as usize >= d[1] || k as usize >= d[2] {
            return false;
        }
        self.get(i as usize, j as usize, k as usize)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, on: bool) {
        let idx = self.grid.index(i, j, k);
        self.set_index(idx, on);
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    /// True when every voxel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &VoxelGrid) -> bool {
        self.grid == other.grid
            && self
                .bits
                .iter()
                .zip(&other.bits)
                .all(|(a, b)| a & !b == 0)
    }

    /// Copy with `pad` empty voxels on every side.
    pub fn padded(&self, pad: usize) -> VoxelGrid {
        let g = self.grid.padded(pad);
        let mut out = VoxelGrid::new(g);
        let d = self.grid.dims;
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    if self.get(i, j, k) {
                        out.set(i + pad, j + pad, k + pad, true);
                    }
                }
            }
        }
        out
    }

    /// Inverse of [`VoxelGrid::padded`].
    pub fn cropped(&self, pad: usize, grid: GridSpec) -> VoxelGrid {
        let mut out = VoxelGrid::new(grid);
        let d = grid.dims;
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    if self.get(i + pad, j + pad, k + pad) {
                        out.set(i, j, k, true);
                    }
                }
            }
        }
        out
    }
}
