use super::*;
use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tet() -> CageMesh {
    CageMesh::new(
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ],
        vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
    )
    .unwrap()
}

pub(crate) fn l_prism() -> CageMesh {
    let l = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)];
    CageMesh::prism(&l, 0.0, 1.0)
}

/// Cube whose face diagonals form an inscribed tetrahedron on vertices
/// 0, 2, 5, 7, so the triangulation keeps the tetrahedral symmetry.
fn tetrahedral_cube() -> CageMesh {
    let mut m = CageMesh::cube();
    m.faces = vec![
        [0, 2, 1], [0, 3, 2], [4, 5, 7], [5, 6, 7], [0, 1, 5], [0, 5, 4],
        [2, 3, 7], [2, 7, 6], [1, 2, 5], [2, 6, 5], [0, 4, 7], [0, 7, 3],
    ];
    m
}

#[test]
fn cube_center_weights_follow_symmetry() {
    let cage = tetrahedral_cube();
    assert!(cage.is_closed_manifold());
    let w = mvc_weights(&Vec3::zeros(), &cage).unwrap().weights;
    let (a, b) = (w[0], w[1]);
    for j in [2, 5, 7] {
        assert!((w[j] - a).abs() < 1e-12, "{w:?}");
    }
    for j in [3, 4, 6] {
        assert!((w[j] - b).abs() < 1e-12, "{w:?}");
    }
    let mean = w.iter().sum::<f64>() / 8.0;
    assert!((mean - 0.125).abs() < 1e-12);
}

#[test]
fn vertex_snap() {
    let cube = CageMesh::cube();
    let w = mvc_weights(&cube.vertices[6], &cube).unwrap();
    for (j, v) in w.weights.iter().enumerate() {
        assert_eq!(*v, if j == 6 { 1.0 } else { 0.0 });
    }
}

#[test]
fn tet_weights_are_barycentric() {
    let cage = tet();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let mut b = [rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0)];
        let s: f64 = b.iter().sum();
        b.iter_mut().for_each(|v| *v /= s);
        let x = cage.vertices.iter().zip(&b).map(|(v, w)| v * *w).sum::<Vec3>();
        // oracle: solve [v_j; 1] lambda = [x; 1]
        let mut a = Matrix4::zeros();
        for (j, v) in cage.vertices.iter().enumerate() {
            a[(0, j)] = v.x;
            a[(1, j)] = v.y;
            a[(2, j)] = v.z;
            a[(3, j)] = 1.0;
        }
        let lambda = a.lu().solve(&Vector4::new(x.x, x.y, x.z, 1.0)).unwrap();
        let w = mvc_weights(&x, &cage).unwrap();
        for j in 0..4 {
            assert!((w.weights[j] - lambda[j]).abs() < 1e-9, "{:?} vs {lambda}", w.weights);
        }
    }
}

#[test]
fn on_face_point_uses_face_barycentrics() {
    let cage = CageMesh::cube();
    let x = Vec3::new(0.2, -0.3, 1.0);
    let w = mvc_weights(&x, &cage).unwrap();
    assert!((w.sum() - 1.0).abs() < 1e-12);
    let rep = apply_row(&w.weights, &cage.vertices);
    assert!((rep - x).norm() < 1e-12);
    // only the four top vertices may carry weight
    for j in 0..4 {
        assert_eq!(w.weights[j], 0.0);
    }
}

#[test]
fn reproduction_translation_affine() {
    let cage = CageMesh::icosphere(1.0, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = nalgebra::Matrix3::new(1.1, 0.2, -0.1, 0.05, 0.9, 0.3, -0.2, 0.1, 1.3);
    let t = Vec3::new(0.3, -2.0, 5.0);
    let moved = cage.translated(&t);
    let warped = cage.affine(&a, &Vec3::zeros());
    let bbox = cage.bbox_diagonal();
    for _ in 0..200 {
        let x = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let w = mvc_weights(&x, &cage).unwrap();
        assert!((w.sum() - 1.0).abs() < 1e-9);
        assert!(w.weights.iter().all(|&v| v >= -1e-9));
        assert!((mvc_apply(&w, &cage).unwrap() - x).norm() < 1e-7 * bbox);
        assert!((mvc_apply(&w, &moved).unwrap() - (x + t)).norm() < 1e-12);
        assert!((mvc_apply(&w, &warped).unwrap() - a * x).norm() < 1e-6 * bbox);
    }
}

#[test]
fn concave_cage_reproduces_and_goes_negative() {
    let cage = l_prism();
    let x = Vec3::new(0.2, 1.9, 0.5);
    let w = mvc_weights(&x, &cage).unwrap();
    assert!((w.sum() - 1.0).abs() < 1e-9);
    assert!((mvc_apply(&w, &cage).unwrap() - x).norm() < 1e-7 * cage.bbox_diagonal());
    assert!(w.weights.iter().any(|&v| v < -1e-6), "{:?}", w.weights);
}

#[test]
fn batch_matches_scalar_bitwise() {
    let cage = CageMesh::icosphere(1.0, 1);
    let pts: Vec<Vec3> = (0..50).map(|i| Vec3::new(0.01 * i as f64, -0.3, 0.2)).collect();
    let m = mvc_weights_batch(&pts, &cage).unwrap();
    assert_eq!(m.rows, 50);
    for (i, p) in pts.iter().enumerate() {
        assert_eq!(m.row(i), mvc_weights(p, &cage).unwrap().weights.as_slice());
    }
    let empty = mvc_weights_batch(&[], &cage).unwrap();
    assert_eq!(empty.rows, 0);
    assert!(empty.data.is_empty());
}

#[test]
fn errors() {
    let mut open = CageMesh::cube();
    open.faces.pop();
    assert!(matches!(mvc_weights(&Vec3::zeros(), &open), Err(Error::OpenCage(_))));
    assert!(matches!(
        mvc_weights(&Vec3::new(f64::NAN, 0.0, 0.0), &CageMesh::cube()),
        Err(Error::NonFinite(_))
    ));
    let w = MvcWeights { weights: vec![1.0; 3] };
    assert!(matches!(mvc_apply(&w, &CageMesh::cube()), Err(Error::LengthMismatch { .. })));
}

#[test]
fn convex_gradient_is_regularizer_only() {
    let cage = CageMesh::cube();
    let reference: Vec<Vec3> = cage.vertices.iter().map(|v| v * 1.01).collect();
    let samples = vec![Vec3::new(0.1, 0.2, -0.3), Vec3::zeros()];
    let p = MvcLoss { mu: 100.0, rho: 0.5 };
    let e = mvc_weight_gradients(&samples, &cage, &reference, p).unwrap();
    for (j, g) in e.gradient.iter().enumerate() {
        assert!((g - 2.0 * 0.5 * (cage.vertices[j] - reference[j])).norm() < 1e-15);
    }
    let e = mvc_weight_gradients(&samples, &cage, &cage.vertices, p).unwrap();
    assert!(e.gradient.iter().all(|g| g.norm() == 0.0));
    assert_eq!(e.value, 0.0);
}

fn finite_difference(samples: &[Vec3], cage: &CageMesh, reference: &[Vec3], p: MvcLoss) -> Vec<Vec3> {
    let h = 1e-4 * cage.bbox_diagonal();
    let mut out = vec![Vec3::zeros(); cage.vertices.len()];
    for j in 0..cage.vertices.len() {
        for c in 0..3 {
            let mut plus = cage.clone();
            plus.vertices[j][c] += h;
            let mut minus = cage.clone();
            minus.vertices[j][c] -= h;
            out[j][c] = (mvc_loss(samples, &plus, reference, p).unwrap()
                - mvc_loss(samples, &minus, reference, p).unwrap())
                / (2.0 * h);
        }
    }
    out
}

#[test]
fn l_cage_gradient_matches_finite_differences() {
    let cage = l_prism();
    let reference: Vec<Vec3> = cage.vertices.iter().map(|v| v + Vec3::new(0.01, -0.02, 0.0)).collect();
    let samples = vec![Vec3::new(0.2, 1.9, 0.5), Vec3::new(0.5, 1.5, 0.3), Vec3::new(1.9, 0.15, 0.6)];
    let p = MvcLoss::default();
    let e = mvc_weight_gradients(&samples, &cage, &reference, p).unwrap();
    assert!(e.skipped.is_empty());
    let fd = finite_difference(&samples, &cage, &reference, p);
    let num: f64 = e.gradient.iter().zip(&fd).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
    let den: f64 = fd.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
    assert!(den > 0.0);
    assert!(num <= 1e-3 * den, "relative error {}", num / den);
}

#[test]
fn surface_sample_is_skipped() {
    let cage = l_prism();
    let samples = vec![Vec3::new(0.5, 0.5, 1.0), Vec3::new(0.9, 0.9, 0.5)];
    let e = mvc_weight_gradients(&samples, &cage, &cage.vertices, MvcLoss::default()).unwrap();
    assert_eq!(e.skipped, vec![0]);
    assert!(matches!(
        mvc_weight_gradients(&[], &cage, &cage.vertices, MvcLoss::default()),
        Err(Error::EmptySamples)
    ));
}

