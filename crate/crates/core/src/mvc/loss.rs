//! Negative-weight penalty over a sample set and its gradient with respect
//! to the cage vertices.

use crate::error::{Error, Result};
use crate::model::{CageMesh, Vec3};
use crate::par;

use super::dual::{Dual, Scalar};
use super::{tri_term, Branch, MvcCage, TriTerm};

/// Penalty weights: `mu` scales the squared negative weights, `rho` the
/// squared displacement from the reference vertices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MvcLoss {
    pub mu: f64,
    pub rho: f64,
}

impl Default for MvcLoss {
    fn default() -> Self {
        Self { mu: 100.0, rho: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MvcLossEval {
    pub value: f64,
    pub gradient: Vec<Vec3>,
    /// Samples that landed on a cage vertex or face; excluded from both the
    /// value and the gradient.
    pub skipped: Vec<usize>,
}

const CHUNK: usize = 8;

struct SampleTerm {
    value: f64,
    skipped: bool,
    grad: Option<Vec<Vec3>>,
}

fn sample_term(mc: &MvcCage<'_>, x: &Vec3, scale: f64, want_grad: bool, phi: &mut [f64], scratch: &mut Vec<(f64, [f64; 3])>) -> SampleTerm {
    let (total, branch) = mc.raw_into(x, phi, scratch);
    if branch != Branch::Interior {
        return SampleTerm { value: 0.0, skipped: true, grad: None };
    }
    let value: f64 = phi.iter().map(|&p| p.min(0.0).powi(2)).sum::<f64>() * scale;
    if !want_grad || value == 0.0 {
        return SampleTerm { value, skipped: false, grad: None };
    }
    // dL/dphi_j, then through the normalization phi = w / W
    let g: Vec<f64> = phi.iter().map(|&p| 2.0 * scale * p.min(0.0)).collect();
    let gbar: f64 = g.iter().zip(phi.iter()).map(|(a, b)| a * b).sum();
    let a: Vec<f64> = g.iter().map(|gj| (gj - gbar) / total).collect();

    let cage = mc.cage;
    let mut grad = vec![Vec3::zeros(); cage.vertices.len()];
    for f in &cage.faces {
        let mut d = [Dual::cst(0.0); 3];
        let mut u = [[Dual::cst(0.0); 3]; 3];
        for k in 0..3 {
            let p = cage.vertices[f[k]];
            let r = [
                Dual::var(p.x - x.x, 3 * k),
                Dual::var(p.y - x.y, 3 * k + 1),
                Dual::var(p.z - x.z, 3 * k + 2),
            ];
            d[k] = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            u[k] = [r[0] / d[k], r[1] / d[k], r[2] / d[k]];
        }
        if let TriTerm::Weights(w) = tri_term(d, u) {
            for k in 0..3 {
                let ak = a[f[k]];
                for (vk, vert) in f.iter().enumerate() {
                    for c in 0..3 {
                        grad[*vert][c] += ak * w[k].d[3 * vk + c];
                    }
                }
            }
        }
    }
    SampleTerm { value, skipped: false, grad: Some(grad) }
}

fn evaluate(samples: &[Vec3], cage: &CageMesh, reference: &[Vec3], params: MvcLoss, want_grad: bool) -> Result<MvcLossEval> {
    let mc = MvcCage::new(cage)?;
    let n = cage.vertices.len();
    if reference.len() != n {
        return Err(Error::LengthMismatch { weights: reference.len(), vertices: n });
    }
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let scale = params.mu / (n as f64 * samples.len() as f64);
    let chunks = samples.len().div_ceil(CHUNK);
    // fixed chunking keeps the reduction order independent of the thread count
    let partial = par::map_range(chunks, |c| {
        let mut phi = vec![0.0; n];
        let mut scratch = Vec::with_capacity(n);
        let mut value = 0.0;
        let mut grad: Option<Vec<Vec3>> = None;
        let mut skipped = Vec::new();
        for i in c * CHUNK..((c + 1) * CHUNK).min(samples.len()) {
            let t = sample_term(&mc, &samples[i], scale, want_grad, &mut phi, &mut scratch);
            value += t.value;
            if t.skipped {
                skipped.push(i);
            }
            if let Some(g) = t.grad {
                match &mut grad {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    None => grad = Some(g),
                }
            }
        }
        (value, grad, skipped)
    });

    let mut value = 0.0;
    let mut gradient = vec![Vec3::zeros(); n];
    let mut skipped = Vec::new();
    for (v, g, s) in partial {
        value += v;
        if let Some(g) = g {
            gradient.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        skipped.extend(s);
    }
    for (j, (v, v0)) in cage.vertices.iter().zip(reference).enumerate() {
        let delta = v - v0;
        value += params.rho * delta.norm_squared();
        if want_grad {
            gradient[j] += 2.0 * params.rho * delta;
        }
    }
    Ok(MvcLossEval { value, gradient, skipped })
}

/// Loss value only (gradient left at zero except for the regularizer).
pub fn mvc_loss(samples: &[Vec3], cage: &CageMesh, reference: &[Vec3], params: MvcLoss) -> Result<f64> {
    evaluate(samples, cage, reference, params, false).map(|e| e.value)
}

/// Loss value and its gradient with respect to every cage vertex.
pub fn mvc_weight_gradients(samples: &[Vec3], cage: &CageMesh, reference: &[Vec3], params: MvcLoss) -> Result<MvcLossEval> {
    evaluate(samples, cage, reference, params, true)
}
