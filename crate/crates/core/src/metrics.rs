//! Quality measurements for cages and their coordinate fields.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::ray::ParityTester;
use crate::geom::selfint::intersecting_pairs;
use crate::model::{CageMesh, Vec3};
use crate::mvc::mvc_weights_batch;
use crate::par;

/// Weights above this are treated as numerical noise rather than negative.
pub const NEGATIVE_DEADBAND: f64 = -1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CageQuality {
    pub components: usize,
    pub self_intersections: usize,
    pub closed: bool,
    pub enclosure_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MvcStats {
    pub negative_entry_fraction: f64,
    pub worst_negative: f64,
    pub sample_count: usize,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components of the face graph, faces being adjacent when they
/// share an edge.
pub fn mesh_components(m: &CageMesh) -> usize {
    let mut parent: Vec<usize> = (0..m.faces.len()).collect();
    let mut first: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in m.faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            match first.get(&key) {
                Some(&other) => {
                    let (ra, rb) = (find(&mut parent, fi), find(&mut parent, other));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
                None => {
                    first.insert(key, fi);
                }
            }
        }
    }
    (0..parent.len()).filter(|&f| find(&mut parent, f) == f).count()
}

/// Intersecting face pairs, ignoring pairs that share a vertex.
pub fn self_intersections(m: &CageMesh) -> usize {
    intersecting_pairs(m).len()
}

/// Share of strictly negative entries among all sample-by-vertex weights,
/// and the most negative entry (0 when none is below the deadband).
pub fn negative_mvc_stats(samples: &[Vec3], cage: &CageMesh) -> Result<MvcStats> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let w = mvc_weights_batch(samples, cage)?;
    let negative = w.data.iter().filter(|&&x| x < NEGATIVE_DEADBAND).count();
    let worst = w.data.iter().copied().filter(|&x| x < NEGATIVE_DEADBAND).fold(0.0, f64::min);
    Ok(MvcStats {
        negative_entry_fraction: negative as f64 / w.data.len().max(1) as f64,
        worst_negative: worst,
        sample_count: samples.len(),
    })
}

/// Fraction of `points` strictly inside a closed cage. Points on the
/// surface count as outside.
pub fn enclosure_fraction(points: &[Vec3], cage: &CageMesh) -> Result<f64> {
    if let Some(defect) = cage.closedness_defect() {
        return Err(Error::OpenCage(defect));
    }
    if points.is_empty() {
        return Ok(1.0);
    }
    let tester = ParityTester::new(cage);
    let inside = par::map(points, |p| tester.strictly_inside(p)).into_iter().filter(|&b| b).count();
    Ok(inside as f64 / points.len() as f64)
}

pub fn cage_quality(cage: &CageMesh, points: &[Vec3]) -> CageQuality {
    let closed = cage.is_closed();
    CageQuality {
        components: mesh_components(cage),
        self_intersections: self_intersections(cage),
        closed,
        enclosure_fraction: if closed { enclosure_fraction(points, cage).unwrap_or(0.0) } else { 0.0 },
    }
}

/// Everything the metrics command reports for one cage.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub vertices: usize,
    pub faces: usize,
    pub quality: CageQuality,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mvc: Option<MvcStats>,
}

impl MetricsReport {
    /// Quality of `cage` against `points`; with `with_mvc`, also the
    /// negative-weight statistics of all points.
    pub fn new(cage: &CageMesh, points: &[Vec3], with_mvc: bool) -> Result<Self> {
        let mvc = if with_mvc && !points.is_empty() { Some(negative_mvc_stats(points, cage)?) } else { None };
        Ok(Self {
            vertices: cage.vertices.len(),
            faces: cage.faces.len(),
            quality: cage_quality(cage, points),
            mvc,
        })
    }

    /// Flat `key=value` lines.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let q = &self.quality;
        let _ = writeln!(s, "vertices={}", self.vertices);
        let _ = writeln!(s, "faces={}", self.faces);
        let _ = writeln!(s, "components={}", q.components);
        let _ = writeln!(s, "self_intersections={}", q.self_intersections);
        let _ = writeln!(s, "closed={}", q.closed);
        let _ = writeln!(s, "enclosure_fraction={}", q.enclosure_fraction);
        if let Some(m) = &self.mvc {
            let _ = writeln!(s, "negative_entry_fraction={}", m.negative_entry_fraction);
            let _ = writeln!(s, "worst_negative={}", m.worst_negative);
            let _ = writeln!(s, "mvc_sample_count={}", m.sample_count);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::selfint::intersecting_pairs_brute;
    use crate::model::Mat3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn l_prism() -> CageMesh {
        CageMesh::prism(&[(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)], 0.0, 1.0)
    }

    #[test]
    fn components() {
        let cube = CageMesh::cube();
        assert_eq!(mesh_components(&cube), 1);
        let far = cube.translated(&Vec3::new(5.0, 0.0, 0.0));
        assert_eq!(mesh_components(&cube.merged(&far)), 2);
        let tri = CageMesh::new(
            vec![Vec3::new(9.0, 0.0, 0.0), Vec3::new(10.0, 0.0, 0.0), Vec3::new(9.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(mesh_components(&cube.merged(&tri)), 2);
        assert_eq!(mesh_components(&CageMesh::new(vec![], vec![]).unwrap()), 0);
    }

    #[test]
    fn intersections() {
        assert_eq!(self_intersections(&CageMesh::cube()), 0);
        let m = CageMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(2.0, 0.0, 0.0),
                Vec3::new(0.0, 2.0, 0.0),
                Vec3::new(0.5, 0.5, -1.0),
                Vec3::new(0.5, 0.5, 1.0),
                Vec3::new(1.5, 1.5, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        assert_eq!(self_intersections(&m), 1);
    }

    #[test]
    fn intersections_match_all_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let vertices: Vec<Vec3> = (0..120).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
            let faces: Vec<[usize; 3]> = (0..200).map(|_| [rng.gen_range(0..40), rng.gen_range(40..80), rng.gen_range(80..120)]).collect();
            let m = CageMesh::new(vertices, faces).unwrap();
            assert_eq!(self_intersections(&m), intersecting_pairs_brute(&m).len());
        }
    }

    #[test]
    fn convex_cage_has_no_negative_weights() {
        let cage = CageMesh::icosphere(1.0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<Vec3> = (0..200)
            .map(|_| Vec3::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)))
            .collect();
        let s = negative_mvc_stats(&samples, &cage).unwrap();
        assert_eq!(s.negative_entry_fraction, 0.0);
        assert_eq!(s.worst_negative, 0.0);
        assert_eq!(s.sample_count, 200);
    }

    #[test]
    fn concavity_produces_negative_weights() {
        let cage = l_prism();
        let x = Vec3::new(0.2, 1.9, 0.5);
        let w = mvc_weights_batch(&[x], &cage).unwrap();
        let direct = w.data.iter().filter(|&&v| v < -1e-12).count();
        assert!(direct > 0);
        let s = negative_mvc_stats(&[x], &cage).unwrap();
        assert_eq!(s.negative_entry_fraction, direct as f64 / cage.vertices.len() as f64);
        assert_eq!(s.worst_negative, w.data.iter().copied().fold(f64::INFINITY, f64::min));
        assert!(matches!(negative_mvc_stats(&[], &cage), Err(Error::EmptySamples)));
    }

    #[test]
    fn enclosure() {
        let cube = CageMesh::cube();
        let inside = [Vec3::new(0.1, 0.2, 0.3), Vec3::new(0.9, 0.5, 0.5)];
        let outside = [Vec3::new(1.5, 0.2, 0.3), Vec3::new(-1.1, 0.5, 0.5)];
        assert_eq!(enclosure_fraction(&inside, &cube).unwrap(), 1.0);
        assert_eq!(enclosure_fraction(&outside, &cube).unwrap(), 0.0);
        let half: Vec<Vec3> = inside.iter().chain(&outside).copied().collect();
        assert_eq!(enclosure_fraction(&half, &cube).unwrap(), 0.5);
        let mut open = cube.clone();
        open.faces.pop();
        assert!(matches!(enclosure_fraction(&inside, &open), Err(Error::OpenCage(_))));
    }

    #[test]
    fn reports() {
        let cage = l_prism();
        let pts = vec![Vec3::new(0.9, 0.9, 0.5), Vec3::new(0.5, 1.5, 0.5), Vec3::new(5.0, 0.0, 0.0)];
        let r = MetricsReport::new(&cage, &pts, true).unwrap();
        assert_eq!(r.quality.components, 1);
        assert!(r.quality.closed);
        assert!((r.quality.enclosure_fraction - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.mvc.as_ref().unwrap().sample_count, 3);
        let kv = r.to_key_value();
        assert!(kv.contains("components=1\n"));
        assert!(kv.contains("self_intersections=0\n"));
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["quality"]["closed"], true);
        assert_eq!(json["faces"], cage.faces.len());
    }

    fn rotation(a: f64, b: f64, c: f64) -> Mat3 {
        let r = nalgebra::Rotation3::from_euler_angles(a, b, c);
        *r.matrix()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn enclosure_is_rigid_invariant(a in -3.0..3.0f64, b in -1.5..1.5f64, c in -3.0..3.0f64,
                                        tx in -5.0..5.0f64, ty in -5.0..5.0f64, tz in -5.0..5.0f64,
                                        seed in 0u64..1000) {
            let cage = l_prism();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec3> = (0..64)
                .map(|_| Vec3::new(rng.gen_range(-0.5..2.5), rng.gen_range(-0.5..2.5), rng.gen_range(-0.5..1.5)))
                .collect();
            let r = rotation(a, b, c);
            let t = Vec3::new(tx, ty, tz);
            let moved: Vec<Vec3> = pts.iter().map(|p| r * p + t).collect();
            let e0 = enclosure_fraction(&pts, &cage).unwrap();
            let e1 = enclosure_fraction(&moved, &cage.affine(&r, &t)).unwrap();
            prop_assert_eq!(e0, e1);
        }

        #[test]
        fn convex_stats_are_zero(seed in 0u64..1000, sub in 0usize..2) {
            let cage = CageMesh::icosphere(1.0, sub);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<Vec3> = (0..32)
                .map(|_| Vec3::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)))
                .collect();
            let s = negative_mvc_stats(&samples, &cage).unwrap();
            prop_assert_eq!((s.negative_entry_fraction, s.worst_negative), (0.0, 0.0));
        }
    }
}
