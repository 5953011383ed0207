//! Covariance algebra: assembling Σ = R S Sᵀ Rᵀ from splat parameters and
//! refitting a rotation/scale pair from an arbitrary symmetric matrix.

use crate::error::{Error, Result};

use super::gaussian::{quaternion_from_matrix, Gaussian, Mat3, Vec3};

/// Symmetric positive semi-definite 3×3 covariance in world units squared.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Covariance3(pub Mat3);

impl Covariance3 {
    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Relative Frobenius distance `‖a − b‖ / max(‖a‖, ‖b‖)`.
    pub fn relative_distance(&self, other: &Covariance3) -> f64 {
        let scale = self.0.norm().max(other.0.norm());
        if scale == 0.0 {
            0.0
        } else {
            (self.0 - other.0).norm() / scale
        }
    }

    /// `T Σ Tᵀ`, symmetrized to remove round-off asymmetry.
    pub fn transformed(&self, t: &Mat3) -> Covariance3 {
        let m = t * self.0 * t.transpose();
        Covariance3(0.5 * (m + m.transpose()))
    }

    pub fn eigen(&self) -> SymEigen3 {
        sym_eigen3(&self.0)
    }
}

/// Σ = R S Sᵀ Rᵀ with S = diag(exp(log_scale)).
pub fn covariance_of(g: &Gaussian) -> Covariance3 {
    let r = g.rotation_matrix();
    let s2 = g.log_scale.map(|s| (2.0 * s).exp());
    let m = r * Mat3::from_diagonal(&s2) * r.transpose();
    Covariance3(0.5 * (m + m.transpose()))
}

/// Eigen-decomposition of a symmetric 3×3 matrix.
///
/// `values` are sorted in descending order and `vectors` holds the matching
/// unit eigenvectors as columns, forming a right-handed basis.
#[derive(Clone, Copy, Debug)]
pub struct SymEigen3 {
    pub values: Vec3,
    pub vectors: Mat3,
}

/// Cyclic Jacobi iteration. Converges quadratically and keeps full relative
/// accuracy for the small eigenvalues of well-scaled matrices.
pub fn sym_eigen3(m: &Mat3) -> SymEigen3 {
    let mut a = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off == 0.0 || off <= 1e-36 * diag {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = if theta.abs() > 1e150 {
                0.5 / theta
            } else {
                theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
            };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            a[p][p] -= t * apq;
            a[q][q] += t * apq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            let r = 3 - p - q;
            let arp = a[r][p];
            let arq = a[r][q];
            a[r][p] = c * arp - s * arq;
            a[p][r] = a[r][p];
            a[r][q] = s * arp + c * arq;
            a[q][r] = a[r][q];
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = Vec3::new(a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]);
    let mut vectors = Mat3::zeros();
    for (col, &src) in order.iter().enumerate() {
        for row in 0..3 {
            vectors[(row, col)] = v[row][src];
        }
    }
    if vectors.determinant() < 0.0 {
        vectors.set_column(2, &(-vectors.column(2)));
    }
    SymEigen3 { values, vectors }
}

fn check_finite(m: &Mat3) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("covariance"))
    }
}

fn clamp_floor(trace: f64) -> f64 {
    (1e-12 * trace).max(f64::MIN_POSITIVE)
}

/// Recovers a (w, x, y, z) rotation and log-scales from a covariance.
///
/// Eigenvalues come out descending; the rotation is right-handed. Eigenvalues
/// below `1e-12 · trace` are clamped before the square root.
pub fn refit_rotation_scale(sigma: &Covariance3) -> Result<([f64; 4], Vec3)> {
    check_finite(&sigma.0)?;
    let eig = sigma.eigen();
    let floor = clamp_floor(sigma.trace());
    let log_scale = eig.values.map(|l| 0.5 * l.max(floor).ln());
    Ok((quaternion_from_matrix(&eig.vectors), log_scale))
}

/// Like [`refit_rotation_scale`], but permutes and signs the eigenvectors to
/// best match the columns of `reference`, so that a covariance that barely
/// changed keeps its original axis labelling.
pub fn refit_aligned(sigma: &Covariance3, reference: &Mat3) -> Result<([f64; 4], Vec3)> {
    check_finite(&sigma.0)?;
    let eig = sigma.eigen();
    let floor = clamp_floor(sigma.trace());

    let mut refs = [Vec3::zeros(); 3];
    for (i, r) in refs.iter_mut().enumerate() {
        let c = reference.column(i).into_owned();
        let n = c.norm();
        *r = if n > 0.0 { c / n } else { Vec3::zeros() };
    }

    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut best = PERMS[0];
    let mut best_score = f64::NEG_INFINITY;
    for perm in PERMS {
        let score: f64 = (0..3)
            .map(|i| eig.vectors.column(perm[i]).dot(&refs[i]).abs())
            .sum();
        if score > best_score + 1e-12 {
            best_score = score;
            best = perm;
        }
    }

    let mut axes = Mat3::zeros();
    let mut values = Vec3::zeros();
    let mut dots = [0.0f64; 3];
    for i in 0..3 {
        let mut col = eig.vectors.column(best[i]).into_owned();
        let d = col.dot(&refs[i]);
        if d < 0.0 {
            col = -col;
        }
        dots[i] = d.abs();
        axes.set_column(i, &col);
        values[i] = eig.values[best[i]];
    }
    if axes.determinant() < 0.0 {
        let weakest = (0..3)
            .min_by(|&a, &b| dots[a].total_cmp(&dots[b]))
            .unwrap_or(2);
        axes.set_column(weakest, &(-axes.column(weakest)));
    }
    let log_scale = values.map(|l| 0.5 * l.max(floor).ln());
    Ok((quaternion_from_matrix(&axes), log_scale))
}

/// Rebuilds Σ from a raw quaternion and log-scales.
pub fn rebuild(rotation: [f64; 4], log_scale: Vec3) -> Covariance3 {
    covariance_of(&Gaussian::new(Vec3::zeros(), rotation, log_scale, 0.0))
}
