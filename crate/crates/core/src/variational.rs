//! Legendre transform and Lagrangian action.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;

const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendrePoint {
    /// `L(q, v)`.
    pub value: f64,
    /// The fiber point with `∂H/∂p(q, p*) = v`.
    pub momentum: DVector<f64>,
    pub iterations: usize,
}

/// `L(q, v) = max_p (p·v − H(q, p))`, by damped Newton on
/// `∂H/∂p(q, p) = v` started at `p = 0`.
///
/// Convexity is only checked along the Newton path (Cholesky of the fiber
/// Hessian at each iterate); superlinearity is assumed.
pub fn legendre(h: &dyn Hamiltonian, q: &DVector<f64>, v: &DVector<f64>) -> Result<LegendrePoint> {
    let d = h.dim();
    if q.len() != d || v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: q.len().min(v.len()) });
    }
    // Minimizing Φ(p) = H(q, p) − p·v; L = −min Φ.
    let phi = |p: &DVector<f64>| h.energy(q, p) - p.dot(v);
    let tol = 1e-13 * v.norm().max(1.0);
    let mut p = DVector::zeros(d);
    let mut g = h.grad_p(q, &p) - v;
    for it in 0..MAX_ITERATIONS {
        if g.norm() <= tol {
            return Ok(LegendrePoint { value: -phi(&p), momentum: p, iterations: it });
        }
        let chol = h.hess_pp(q, &p).cholesky().ok_or(Error::NotConvex)?;
        let dir = -chol.solve(&g);
        let f0 = phi(&p);
        let slope = g.dot(&dir);
        let mut lambda = 1.0;
        let mut next = &p + &dir;
        let g_full = h.grad_p(q, &next) - v;
        // Near the optimum Φ differences drown in rounding, so a full step
        // that shrinks the gradient is always accepted.
        if g_full.norm() >= g.norm() {
            // Armijo backtracking.
            while phi(&next) > f0 + 1e-4 * lambda * slope && lambda > 1e-10 {
                lambda *= 0.5;
                next = &p + &dir * lambda;
            }
        }
        p = next;
        g = h.grad_p(q, &p) - v;
    }
    if g.norm() <= tol {
        return Ok(LegendrePoint { value: -phi(&p), momentum: p, iterations: MAX_ITERATIONS });
    }
    Err(Error::NewtonFailure {
        iterations: MAX_ITERATIONS,
        residual: g.norm(),
        iterate: p.iter().copied().collect(),
    })
}

/// `∫ L(γ(s), γ̇(s)) ds` along a curve given by `(t, q)` samples in lifted
/// coordinates: composite midpoint rule with finite-difference velocities.
pub fn action(h: &dyn Hamiltonian, curve: &[(f64, DVector<f64>)]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: curve.len() });
    }
    let mut total = 0.0;
    for w in curve.windows(2) {
        let (t0, q0) = (&w[0].0, &w[0].1);
        let (t1, q1) = (&w[1].0, &w[1].1);
        let dt = t1 - t0;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("curve times must increase".into()));
        }
        if q0.len() != h.dim() || q1.len() != h.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), got: q0.len() });
        }
        let mid = (q0 + q1) * 0.5;
        let vel = (q1 - q0) / dt;
        total += legendre(h, &mid, &vel)?.value * dt;
    }
    Ok(total)
}
