//! Tonelli Hamiltonians on `T*T^d`.
//!
//! Evaluators take lifted coordinates `q ∈ R^d`; every Hamiltonian here is
//! 1-periodic in each `q_i`. The sign convention is `X_H = (∂H/∂p, −∂H/∂q)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::{PhasePoint, TangentVector};

pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;
    fn name(&self) -> String;

    fn energy(&self, q: &DVector<f64>, p: &DVector<f64>) -> f64;
    fn grad_q(&self, q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64>;
    fn grad_p(&self, q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64>;
    /// `∂²H/∂p²`.
    fn hess_pp(&self, q: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64>;
    /// `∂²H/∂q_i∂p_j` at `(i, j)`.
    fn hess_qp(&self, q: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64>;
    /// `∂²H/∂q²`.
    fn hess_qq(&self, q: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64>;

    /// `H = T(p) + V(q)`; enables the splitting integrator.
    fn is_separable(&self) -> bool {
        false
    }

    /// Closed-form flow, when known. Input and output are lifted.
    fn exact_flow(&self, _x: &PhasePoint, _t: f64) -> Option<PhasePoint> {
        None
    }

    /// Closed-form `Dφ_t(x)`, when known.
    fn exact_jacobian(&self, _x: &PhasePoint, _t: f64) -> Option<DMatrix<f64>> {
        None
    }
}

/// Full `2d × 2d` Hessian in `(q, p)` ordering.
pub fn full_hessian(h: &dyn Hamiltonian, q: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
    let d = h.dim();
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    let qp = h.hess_qp(q, p);
    m.view_mut((0, 0), (d, d)).copy_from(&h.hess_qq(q, p));
    m.view_mut((0, d), (d, d)).copy_from(&qp);
    m.view_mut((d, 0), (d, d)).copy_from(&qp.transpose());
    m.view_mut((d, d), (d, d)).copy_from(&h.hess_pp(q, p));
    m
}

/// Linearization of `X_H`: `δẋ = J Hess H δx` with `J = [[0, I], [−I, 0]]`.
pub fn linearized_field(h: &dyn Hamiltonian, q: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
    let d = h.dim();
    let hess = full_hessian(h, q, p);
    let mut a = DMatrix::zeros(2 * d, 2 * d);
    a.rows_mut(0, d).copy_from(&hess.rows(d, d));
    a.rows_mut(d, d).copy_from(&(-hess.rows(0, d)));
    a
}

/// The Hamiltonian vector field `X_H(x) = (∂H/∂p, −∂H/∂q)`.
pub fn vector_field(h: &dyn Hamiltonian, x: &PhasePoint) -> Result<TangentVector> {
    if x.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: x.dim() });
    }
    let v = TangentVector { dq: h.grad_p(&x.q, &x.p), dp: -h.grad_q(&x.q, &x.p) };
    if !v.is_finite() {
        return Err(Error::Evaluator(format!("{} at q = {:?}", h.name(), x.q.as_slice())));
    }
    Ok(v)
}

/// Kinetic part of a mechanical Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kinetic {
    /// `½|p|²`.
    Quadratic,
    /// `½|p|² + (c/4)|p|⁴`, `c ≥ 0`.
    Quartic { c: f64 },
}

/// Potential part of a mechanical Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    Zero,
    /// `amplitude · cos(2π · frequency · q_axis)`.
    Cosine { axis: usize, frequency: f64, amplitude: f64 },
}

/// `H(q, p) = T(p) + V(q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanical {
    pub d: usize,
    pub kinetic: Kinetic,
    pub potential: Potential,
}

impl Mechanical {
    /// Geodesic flow of the flat metric, `H = ½|p|²`.
    pub fn flat(d: usize) -> Self {
        Self { d, kinetic: Kinetic::Quadratic, potential: Potential::Zero }
    }

    /// `H = ½|p|² + a cos(2π k q_axis)`.
    pub fn cosine(d: usize, axis: usize, frequency: f64, amplitude: f64) -> Self {
        Self {
            d,
            kinetic: Kinetic::Quadratic,
            potential: Potential::Cosine { axis, frequency, amplitude },
        }
    }

    /// One degree of freedom, `H = ½p² + cos(2πq)`.
    pub fn pendulum() -> Self {
        Self::cosine(1, 0, 1.0, 1.0)
    }

    pub fn potential(&self, q: &DVector<f64>) -> f64 {
        match self.potential {
            Potential::Zero => 0.0,
            Potential::Cosine { axis, frequency, amplitude } => {
                amplitude * (2.0 * PI * frequency * q[axis]).cos()
            }
        }
    }

    /// `V''` along the active axis (zero for the free potential).
    pub fn potential_second_derivative(&self, q: &DVector<f64>) -> f64 {
        match self.potential {
            Potential::Zero => 0.0,
            Potential::Cosine { axis, frequency, amplitude } => {
                let w = 2.0 * PI * frequency;
                -amplitude * w * w * (w * q[axis]).cos()
            }
        }
    }
}

impl Hamiltonian for Mechanical {
    fn dim(&self) -> usize {
        self.d
    }

    fn name(&self) -> String {
        match (self.kinetic, self.potential) {
            (Kinetic::Quadratic, Potential::Zero) => format!("flat-{}", self.d),
            _ => format!("mechanical-{}", self.d),
        }
    }

    fn energy(&self, q: &DVector<f64>, p: &DVector<f64>) -> f64 {
        let p2 = p.norm_squared();
        let t = match self.kinetic {
            Kinetic::Quadratic => 0.5 * p2,
            Kinetic::Quartic { c } => 0.5 * p2 + 0.25 * c * p2 * p2,
        };
        t + self.potential(q)
    }

    fn grad_q(&self, q: &DVector<f64>, _p: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.d);
        if let Potential::Cosine { axis, frequency, amplitude } = self.potential {
            let w = 2.0 * PI * frequency;
            g[axis] = -amplitude * w * (w * q[axis]).sin();
        }
        g
    }

    fn grad_p(&self, _q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        match self.kinetic {
            Kinetic::Quadratic => p.clone(),
            Kinetic::Quartic { c } => p * (1.0 + c * p.norm_squared()),
        }
    }

    fn hess_pp(&self, _q: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        match self.kinetic {
            Kinetic::Quadratic => DMatrix::identity(self.d, self.d),
            Kinetic::Quartic { c } => {
                DMatrix::identity(self.d, self.d) * (1.0 + c * p.norm_squared())
                    + p * p.transpose() * (2.0 * c)
            }
        }
    }

    fn hess_qp(&self, _q: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.d, self.d)
    }

    fn hess_qq(&self, q: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.d, self.d);
        if let Potential::Cosine { axis, .. } = self.potential {
            m[(axis, axis)] = self.potential_second_derivative(q);
        }
        m
    }

    fn is_separable(&self) -> bool {
        true
    }

    fn exact_flow(&self, x: &PhasePoint, t: f64) -> Option<PhasePoint> {
        if self.potential != Potential::Zero {
            return None;
        }
        let v = self.grad_p(&x.q, &x.p);
        Some(PhasePoint::lifted(&x.q + v * t, x.p.clone()))
    }

    fn exact_jacobian(&self, x: &PhasePoint, t: f64) -> Option<DMatrix<f64>> {
        if self.potential != Potential::Zero {
            return None;
        }
        let d = self.d;
        let mut j = DMatrix::identity(2 * d, 2 * d);
        j.view_mut((0, d), (d, d)).copy_from(&(self.hess_pp(&x.q, &x.p) * t));
        Some(j)
    }
}

/// The non-constant function `ψ(θ) = a · sin(2πnθ) / (2πn)` used by
/// [`Herman`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineProfile {
    pub amplitude: f64,
    pub frequency: u32,
}

impl Default for SineProfile {
    fn default() -> Self {
        Self { amplitude: 1.0, frequency: 1 }
    }
}

impl SineProfile {
    fn w(&self) -> f64 {
        2.0 * PI * f64::from(self.frequency)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.w() * t).sin() / self.w()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.amplitude * (self.w() * t).cos()
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        -self.amplitude * self.w() * (self.w() * t).sin()
    }
}

/// `H(θ, r) = ½(r₁ − ψ(θ₂))² + ½r₂²` on `T*T²`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Herman {
    pub psi: SineProfile,
}

impl Hamiltonian for Herman {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> String {
        "herman".into()
    }

    fn energy(&self, q: &DVector<f64>, p: &DVector<f64>) -> f64 {
        let u = p[0] - self.psi.value(q[1]);
        0.5 * (u * u + p[1] * p[1])
    }

    fn grad_q(&self, q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let u = p[0] - self.psi.value(q[1]);
        DVector::from_vec(vec![0.0, -self.psi.derivative(q[1]) * u])
    }

    fn grad_p(&self, q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![p[0] - self.psi.value(q[1]), p[1]])
    }

    fn hess_pp(&self, _q: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }

    fn hess_qp(&self, q: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(2, 2);
        m[(1, 0)] = -self.psi.derivative(q[1]);
        m
    }

    fn hess_qq(&self, q: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        let u = p[0] - self.psi.value(q[1]);
        let dpsi = self.psi.derivative(q[1]);
        let mut m = DMatrix::zeros(2, 2);
        m[(1, 1)] = dpsi * dpsi - self.psi.second_derivative(q[1]) * u;
        m
    }
}

/// Outcome of [`validate_tonelli`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TonelliCheck {
    pub samples: usize,
    /// Points where the Cholesky factorization of `∂²H/∂p²` failed.
    pub convexity_failures: usize,
    /// Largest relative mismatch between analytic and central-difference
    /// gradients.
    pub gradient_error: f64,
    /// Largest relative mismatch between analytic and central-difference
    /// Hessian blocks.
    pub hessian_error: f64,
}

impl TonelliCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.convexity_failures == 0 && self.gradient_error <= tol && self.hessian_error <= tol
    }
}

/// Checks fiber convexity and the consistency of the supplied derivatives
/// against central differences of `H` on random points with `|p_i| ≤ p_max`.
pub fn validate_tonelli<R: Rng>(
    h: &dyn Hamiltonian,
    samples: usize,
    p_max: f64,
    rng: &mut R,
) -> TonelliCheck {
    let d = h.dim();
    let step = 1e-5;
    let mut convexity_failures = 0;
    let mut gradient_error: f64 = 0.0;
    let mut hessian_error: f64 = 0.0;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    for _ in 0..samples {
        let q = DVector::from_fn(d, |_, _| rng.random::<f64>());
        let p = DVector::from_fn(d, |_, _| p_max * (2.0 * rng.random::<f64>() - 1.0));
        if h.hess_pp(&q, &p).cholesky().is_none() {
            convexity_failures += 1;
        }
        let gq = h.grad_q(&q, &p);
        let gp = h.grad_p(&q, &p);
        let hqq = h.hess_qq(&q, &p);
        let hqp = h.hess_qp(&q, &p);
        let hpp = h.hess_pp(&q, &p);
        for i in 0..d {
            let mut e = DVector::zeros(d);
            e[i] = step;
            let fd_q = (h.energy(&(&q + &e), &p) - h.energy(&(&q - &e), &p)) / (2.0 * step);
            let fd_p = (h.energy(&q, &(&p + &e)) - h.energy(&q, &(&p - &e))) / (2.0 * step);
            gradient_error = gradient_error.max(rel(gq[i], fd_q)).max(rel(gp[i], fd_p));
            let dgq_dq = (h.grad_q(&(&q + &e), &p) - h.grad_q(&(&q - &e), &p)) / (2.0 * step);
            let dgp_dq = (h.grad_p(&(&q + &e), &p) - h.grad_p(&(&q - &e), &p)) / (2.0 * step);
            let dgp_dp = (h.grad_p(&q, &(&p + &e)) - h.grad_p(&q, &(&p - &e))) / (2.0 * step);
            for j in 0..d {
                hessian_error = hessian_error
                    .max(rel(hqq[(i, j)], dgq_dq[j]))
                    .max(rel(hqp[(i, j)], dgp_dq[j]))
                    .max(rel(hpp[(i, j)], dgp_dp[j]));
            }
        }
    }
    TonelliCheck { samples, convexity_failures, gradient_error, hessian_error }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(q: &[f64], p: &[f64]) -> PhasePoint {
        PhasePoint::from_slices(q, p).unwrap()
    }

    #[test]
    fn flat_field_is_momentum() {
        let h = Mechanical::flat(3);
        let x = pt(&[0.1, 0.2, 0.3], &[1.0, -2.0, 0.5]);
        let v = vector_field(&h, &x).unwrap();
        assert_eq!(v.dq, x.p);
        assert_eq!(v.dp, DVector::zeros(3));
    }

    #[test]
    fn cosine_fixture_field() {
        let h = Mechanical::cosine(3, 2, 2.0, 1.0);
        let t3 = 0.137;
        let x = pt(&[0.4, 0.9, t3], &[0.3, 0.2, -0.1]);
        let v = vector_field(&h, &x).unwrap();
        assert_eq!(v.dq, x.p);
        let expected = 4.0 * PI * (4.0 * PI * t3).sin();
        assert!(v.dp[0] == 0.0 && v.dp[1] == 0.0);
        assert!((v.dp[2] - expected).abs() < 1e-12);
    }

    #[test]
    fn herman_field_vanishes_on_torus() {
        let h = Herman::default();
        for &(a, b) in &[(0.0, 0.0), (0.3, 0.17), (0.9, 0.61)] {
            let x = pt(&[a, b], &[h.psi.value(b), 0.0]);
            let v = vector_field(&h, &x).unwrap();
            assert!(v.norm() < 1e-15);
        }
    }

    #[test]
    fn builtins_are_tonelli_with_consistent_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let hs: Vec<Box<dyn Hamiltonian>> = vec![
            Box::new(Mechanical::flat(3)),
            Box::new(Mechanical::pendulum()),
            Box::new(Mechanical::cosine(3, 2, 2.0, 1.0)),
            Box::new(Mechanical {
                d: 2,
                kinetic: Kinetic::Quartic { c: 0.5 },
                potential: Potential::Cosine { axis: 1, frequency: 1.0, amplitude: 0.3 },
            }),
            Box::new(Herman::default()),
        ];
        for h in &hs {
            let check = validate_tonelli(h.as_ref(), 50, 2.0, &mut rng);
            assert!(check.passed(1e-5), "{}: {check:?}", h.name());
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let h = Mechanical::flat(2);
        assert!(matches!(
            vector_field(&h, &pt(&[0.0], &[0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
