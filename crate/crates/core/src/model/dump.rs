//! Debug dumps: depth maps as PFM, voxel grids and TSDF volumes as raw
//! little-endian blobs behind a small grid header.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::camera::DepthMap;
use super::volume::{GridSpec, TsdfVolume, VoxelGrid};

/// Grayscale PFM, little-endian (negative scale), bottom row first.
/// No-hit pixels are written as 0.
pub fn encode_pfm(d: &DepthMap) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", d.width, d.height).into_bytes();
    for v in (0..d.height).rev() {
        for u in 0..d.width {
            out.extend_from_slice(&(d.depth[v * d.width + u] as f32).to_le_bytes());
        }
    }
    out
}

/// Grid header: origin f32×3, voxel_size f32, dims u32×3 (28 bytes).
pub fn encode_grid_header(g: &GridSpec) -> Vec<u8> {
    let mut out = Vec::with_capacity(28);
    for c in g.origin.iter() {
        out.extend_from_slice(&(*c as f32).to_le_bytes());
    }
    out.extend_from_slice(&(g.voxel_size as f32).to_le_bytes());
    for d in g.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out
}

/// Header followed by occupancy bits, x fastest, packed LSB-first into bytes.
pub fn encode_voxels(v: &VoxelGrid) -> Vec<u8> {
    let mut out = encode_grid_header(&v.grid);
    let n = v.grid.len();
    let mut bytes = vec![0u8; n.div_ceil(8)];
    for i in 0..n {
        if v.get_index(i) {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&bytes);
    out
}

/// Header followed by one (tsdf, weight) f32 pair per voxel.
pub fn encode_tsdf(t: &TsdfVolume) -> Vec<u8> {
    let mut out = encode_grid_header(&t.grid);
    out.reserve(t.tsdf.len() * 8);
    for (s, w) in t.tsdf.iter().zip(&t.weight) {
        out.extend_from_slice(&s.to_le_bytes());
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
