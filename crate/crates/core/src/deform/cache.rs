//! Per-scene precomputation: MVC rows of every proxy point against the
//! source cage, the source-side transform factor, and the hull admission
//! mask. Replaying a new target cage then costs a few dot products per
//! Gaussian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Matrix6x3;
use xxhash_rust::xxh3::Xxh3;

use crate::error::{Error, Result};
use crate::geom::ConvexHull;
use crate::model::covariance::Covariance3;
use crate::model::{CageMesh, Gaussian, GaussianScene, Mat3, Vec3};
use crate::mvc::MvcCage;
use crate::par;

use super::proxy::{proxy_points, pseudo_inverse_factor};
use super::DeformConfig;

/// Relative tolerance (to the cage diagonal) for hull admission.
pub const HULL_TOLERANCE: f64 = 1e-9;

/// Source-side data for one Gaussian.
#[derive(Clone, Debug)]
pub(crate) struct SourceData {
    /// Seven rows of length |V|: centre weights, then endpoint-minus-centre
    /// weights for x1, y1, z1, x2, y2, z2.
    pub rows: Vec<f64>,
    pub pinv: Matrix6x3<f64>,
    pub sigma: Covariance3,
    pub rot: Mat3,
}

pub(crate) fn source_data(g: &Gaussian, mc: &MvcCage<'_>) -> Result<SourceData> {
    let (pinv, sigma, rot) = source_factors(g)?;
    let mut rows = vec![0.0; 7 * mc.vertex_count()];
    fill_rows(g, mc, &mut rows);
    Ok(SourceData { rows, pinv, sigma, rot })
}

fn source_factors(g: &Gaussian) -> Result<(Matrix6x3<f64>, Covariance3, Mat3)> {
    let proxy = proxy_points(g);
    if !proxy.to_array().iter().all(|p| p.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite("Gaussian parameters"));
    }
    Ok((pseudo_inverse_factor(&proxy.axis_matrix())?, g.covariance(), g.rotation_matrix()))
}

/// Writes the seven weight rows of `g`'s proxy into `out` (length 7·|V|).
fn fill_rows(g: &Gaussian, mc: &MvcCage<'_>, out: &mut [f64]) {
    let n = mc.vertex_count();
    let mut scratch = Vec::with_capacity(n);
    for (k, p) in proxy_points(g).to_array().iter().enumerate() {
        mc.raw_into(p, &mut out[k * n..(k + 1) * n], &mut scratch);
    }
    let (centre, rest) = out.split_at_mut(n);
    for row in rest.chunks_mut(n) {
        for (w, c) in row.iter_mut().zip(centre.iter()) {
            *w -= c;
        }
    }
}

/// Deformed centre and six endpoint offsets from precomputed rows.
#[inline]
pub(crate) fn replay(rows: &[f64], verts: &[Vec3]) -> (Vec3, [Vec3; 6]) {
    let n = verts.len();
    let dot = |k: usize| crate::mvc::apply_row(&rows[k * n..(k + 1) * n], verts);
    (dot(0), [dot(1), dot(2), dot(3), dot(4), dot(5), dot(6)])
}

/// Content hash over everything the cache depends on.
pub fn cache_key(scene: &GaussianScene, cage_s: &CageMesh, hull_gate: bool) -> u64 {
    let mut h = Xxh3::new();
    h.update(b"gsdeform-cache-v1");
    h.update(&(scene.len() as u64).to_le_bytes());
    h.update(&(scene.sh_degree as u64).to_le_bytes());
    for g in &scene.gaussians {
        for v in g.mean.iter().chain(g.log_scale.iter()).chain(g.rotation.iter()) {
            h.update(&v.to_bits().to_le_bytes());
        }
        h.update(&g.logit_opacity.to_bits().to_le_bytes());
        h.update(&(g.sh.len() as u64).to_le_bytes());
        for s in &g.sh {
            h.update(&s.to_bits().to_le_bytes());
        }
    }
    h.update(&(cage_s.vertices.len() as u64).to_le_bytes());
    for v in &cage_s.vertices {
        for c in v.iter() {
            h.update(&c.to_bits().to_le_bytes());
        }
    }
    h.update(&(cage_s.faces.len() as u64).to_le_bytes());
    for f in &cage_s.faces {
        for i in f {
            h.update(&(*i as u64).to_le_bytes());
        }
    }
    h.update(&[hull_gate as u8]);
    h.digest()
}

/// Admission mask: means inside the convex hull of the cage vertices.
pub fn hull_filter(scene: &GaussianScene, cage_s: &CageMesh) -> Result<Vec<bool>> {
    let hull = ConvexHull::new(&cage_s.vertices)?;
    Ok(par::map(&scene.gaussians, |g| hull.contains(&g.mean, HULL_TOLERANCE)))
}

/// Reusable per-scene precomputation.
#[derive(Clone, Debug)]
pub struct DeformCache {
    pub(crate) key: u64,
    pub(crate) cage_s: CageMesh,
    pub(crate) admitted: Vec<bool>,
    /// Index into the per-admitted arrays, or `u32::MAX`.
    pub(crate) slot: Vec<u32>,
    pub(crate) rows: Vec<f64>,
    pub(crate) pinv: Vec<Matrix6x3<f64>>,
    pub(crate) sigma: Vec<Covariance3>,
    pub(crate) rot: Vec<Mat3>,
}

impl DeformCache {
    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn admitted(&self) -> &[bool] {
        &self.admitted
    }

    pub fn admitted_count(&self) -> usize {
        self.pinv.len()
    }

    /// Approximate heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.rows.len() * 8 + self.pinv.len() * (18 + 9 + 9) * 8 + self.slot.len() * 5
    }

    pub(crate) fn rows_of(&self, slot: usize) -> &[f64] {
        let stride = 7 * self.cage_s.vertices.len();
        &self.rows[slot * stride..(slot + 1) * stride]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let u64w = |w: &mut dyn Write, v: u64| w.write_all(&v.to_le_bytes());
        let f64w = |w: &mut dyn Write, v: f64| w.write_all(&v.to_le_bytes());
        w.write_all(MAGIC)?;
        u64w(w, self.key)?;
        u64w(w, self.admitted.len() as u64)?;
        u64w(w, self.cage_s.vertices.len() as u64)?;
        u64w(w, self.cage_s.faces.len() as u64)?;
        for v in &self.cage_s.vertices {
            for c in v.iter() {
                f64w(w, *c)?;
            }
        }
        for f in &self.cage_s.faces {
            for i in f {
                u64w(w, *i as u64)?;
            }
        }
        let mask: Vec<u8> = self.admitted.iter().map(|&b| b as u8).collect();
        w.write_all(&mask)?;
        for v in &self.rows {
            f64w(w, *v)?;
        }
        for i in 0..self.pinv.len() {
            for v in self.pinv[i].iter().chain(self.sigma[i].0.iter()).chain(self.rot[i].iter()) {
                f64w(w, *v)?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::CacheFormat("bad magic".into()));
        }
        let key = read_u64(&mut r)?;
        let n = read_len(&mut r)?;
        let nv = read_len(&mut r)?;
        let nf = read_len(&mut r)?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            vertices.push(Vec3::new(read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?));
        }
        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            let mut f = [0usize; 3];
            for i in &mut f {
                *i = read_len(&mut r)?;
            }
            faces.push(f);
        }
        let cage_s = CageMesh::new(vertices, faces).map_err(|e| Error::CacheFormat(e.to_string()))?;
        let mut mask = vec![0u8; n];
        read_exact(&mut r, &mut mask)?;
        let admitted: Vec<bool> = mask.iter().map(|&b| b != 0).collect();
        let (slot, count) = slots(&admitted);
        let mut rows = vec![0.0; count * 7 * nv];
        for v in &mut rows {
            *v = read_f64(&mut r)?;
        }
        let (mut pinv, mut sigma, mut rot) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..count {
            let mut buf = [0.0; 36];
            for v in &mut buf {
                *v = read_f64(&mut r)?;
            }
            pinv.push(Matrix6x3::from_column_slice(&buf[..18]));
            sigma.push(Covariance3(Mat3::from_column_slice(&buf[18..27])));
            rot.push(Mat3::from_column_slice(&buf[27..]));
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(|e| Error::CacheFormat(e.to_string()))? != 0 {
            return Err(Error::CacheFormat("trailing bytes".into()));
        }
        Ok(Self {
            key,
            cage_s,
            admitted,
            slot,
            rows,
            pinv,
            sigma,
            rot,
        })
    }
}

const MAGIC: &[u8; 8] = b"GSDCACH1";

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::CacheFormat(format!("truncated: {e}")))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_len(r: &mut impl Read) -> Result<usize> {
    let v = read_u64(r)?;
    if v > (1u64 << 40) {
        return Err(Error::CacheFormat(format!("implausible length {v}")));
    }
    Ok(v as usize)
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn slots(admitted: &[bool]) -> (Vec<u32>, usize) {
    let mut next = 0u32;
    let slot = admitted
        .iter()
        .map(|&a| {
            if a {
                next += 1;
                next - 1
            } else {
                u32::MAX
            }
        })
        .collect();
    (slot, next as usize)
}

/// Builds the cache for `scene` against `cage_s`.
pub fn precompute_cache(scene: &GaussianScene, cage_s: &CageMesh, cfg: &DeformConfig) -> Result<DeformCache> {
    cfg.validate()?;
    if scene.is_empty() {
        return Err(Error::EmptyScene);
    }
    let mc = MvcCage::new(cage_s)?;
    let admitted = if cfg.hull_gate {
        hull_filter(scene, cage_s)?
    } else {
        vec![true; scene.len()]
    };
    let (slot, _) = slots(&admitted);
    let chosen: Vec<&Gaussian> = scene
        .gaussians
        .iter()
        .zip(&admitted)
        .filter_map(|(g, &a)| a.then_some(g))
        .collect();
    let factors = par::map(&chosen, |g| source_factors(g));
    let (mut pinv, mut sigma, mut rot) = (Vec::new(), Vec::new(), Vec::new());
    for f in factors {
        let (p, s, r) = f?;
        pinv.push(p);
        sigma.push(s);
        rot.push(r);
    }
    let stride = 7 * cage_s.vertices.len();
    let mut rows = vec![0.0; chosen.len() * stride];
    if stride > 0 {
        par::for_each_chunk_mut(&mut rows, stride, |i, out| fill_rows(chosen[i], &mc, out));
    }
    Ok(DeformCache {
        key: cache_key(scene, cage_s, cfg.hull_gate),
        cage_s: cage_s.clone(),
        admitted,
        slot,
        rows,
        pinv,
        sigma,
        rot,
    })
}
