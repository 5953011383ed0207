//! Tiny dense convex QPs in three variables.

use nalgebra::{DMatrix, DVector};

use crate::model::{Mat3, Vec3};

/// Half-space `n·x ≥ d`.
#[derive(Clone, Copy, Debug)]
pub struct HalfSpace {
    pub n: Vec3,
    pub d: f64,
}

impl HalfSpace {
    pub fn slack(&self, x: &Vec3) -> f64 {
        self.n.dot(x) - self.d
    }
}

/// Minimizer of `xᵀAx + 2bᵀx` on the plane set `W` (as equalities), with
/// Lagrange multipliers of the inequality reading.
fn equality_solve(a: &Mat3, b: &Vec3, cons: &[HalfSpace], w: &[usize]) -> Option<(Vec3, Vec<f64>)> {
    let m = w.len();
    let k = 3 + m;
    let mut kkt = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for r in 0..3 {
        for c in 0..3 {
            kkt[(r, c)] = 2.0 * a[(r, c)];
        }
        rhs[r] = -2.0 * b[r];
    }
    for (s, &ci) in w.iter().enumerate() {
        for c in 0..3 {
            kkt[(3 + s, c)] = cons[ci].n[c];
            kkt[(c, 3 + s)] = -cons[ci].n[c];
        }
        rhs[3 + s] = cons[ci].d;
    }
    let sol = kkt.lu().solve(&rhs)?;
    let x = Vec3::new(sol[0], sol[1], sol[2]);
    if !x.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some((x, (0..m).map(|s| sol[3 + s]).collect()))
}

/// Dual active-set solve of `min xᵀAx + 2bᵀx` subject to `cons`, for
/// positive definite `A`. Starts from the unconstrained optimum, adds the
/// most violated constraint and drops negative multipliers until the point
/// is feasible within `tol`. Returns `None` when no such point is found.
pub fn solve(a: &Mat3, b: &Vec3, cons: &[HalfSpace], tol: f64) -> Option<Vec3> {
    let mut w: Vec<usize> = Vec::new();
    for _ in 0..4 * cons.len() + 8 {
        let (x, lambda) = equality_solve(a, b, cons, &w)?;
        if let Some((k, &l)) = lambda.iter().enumerate().min_by(|p, q| p.1.total_cmp(q.1)) {
            if l < -1e-12 {
                w.remove(k);
                continue;
            }
        }
        let worst = cons
            .iter()
            .enumerate()
            .filter(|(i, _)| !w.contains(i))
            .map(|(i, h)| (i, h.slack(&x)))
            .min_by(|p, q| p.1.total_cmp(&q.1));
        match worst {
            Some((i, s)) if s < -tol => {
                if w.len() == 3 {
                    return None;
                }
                w.push(i);
            }
            _ => return Some(x),
        }
    }
    None
}
