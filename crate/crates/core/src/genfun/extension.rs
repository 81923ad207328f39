//! The extension `F(q, p) = (Q, P)` defined implicitly by
//! `Q − q = ∂𝒜/∂P(q, P)` and `p − P = ∂𝒜/∂q(q, P)`, where
//! `𝒜(q, p) = χ(‖p‖)(A(q, p) − q·p)` and `χ` cuts off between `‖p‖ = ½`
//! and `‖p‖ = 1`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{smoothstep, smoothstep_derivative, BaseMap, GeneratingFunction};
use crate::error::{Error, Result};
use crate::symplectic::symplectic_defect;

/// Step for the solver's Newton Jacobian.
const NEWTON_FD: f64 = 1e-7;
/// Step for the Jacobian of `F` in the symplecticity check.
const JACOBIAN_FD: f64 = 1e-5;
/// Extra fixed-point sweeps after convergence while the residual keeps
/// halving.
const POLISH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub newton_after: usize,
    /// Admissible `sup ‖Df̃ − I‖`.
    pub contraction_bound: f64,
    /// `χ = 1` below this radius.
    pub cutoff_inner: f64,
    /// `χ = 0` above this radius.
    pub cutoff_outer: f64,
    /// Grid points per axis for the closeness measurement.
    pub closeness_samples: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            newton_after: 20,
            contraction_bound: 0.1,
            cutoff_inner: 0.5,
            cutoff_outer: 1.0,
            closeness_samples: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionPoint {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    pub iterations: usize,
    /// `‖P + ∂𝒜/∂q(q, P) − p‖` at the returned `P`.
    pub residual: f64,
    pub newton: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionMap {
    pub generating: GeneratingFunction,
    pub options: SolverOptions,
    pub closeness: super::Closeness,
}

impl ExtensionMap {
    pub fn new(generating: GeneratingFunction, options: SolverOptions) -> Result<Self> {
        let positive = [options.tol, options.contraction_bound, options.cutoff_inner];
        if positive.iter().any(|v| !(*v > 0.0)) || options.cutoff_outer <= options.cutoff_inner || options.max_iter == 0 {
            return Err(Error::InvalidArgument("solver options must be positive with inner < outer cutoff".into()));
        }
        let closeness = generating.base.closeness(options.closeness_samples);
        if !(closeness.jacobian <= options.contraction_bound) {
            return Err(Error::NonContraction { distance: closeness.jacobian, bound: options.contraction_bound });
        }
        Ok(Self { generating, options, closeness })
    }

    pub fn dim(&self) -> usize {
        self.generating.dim()
    }

    /// `(χ(r), χ′(r))`.
    fn cutoff(&self, r: f64) -> (f64, f64) {
        let (a, b) = (self.options.cutoff_inner, self.options.cutoff_outer);
        if r <= a {
            (1.0, 0.0)
        } else if r >= b {
            (0.0, 0.0)
        } else {
            let s = (r - a) / (b - a);
            (1.0 - smoothstep(s), -smoothstep_derivative(s) / (b - a))
        }
    }

    /// `𝒜(q, p)`.
    pub fn eval(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<f64> {
        let (chi, _) = self.cutoff(p.norm());
        if chi == 0.0 {
            return Ok(0.0);
        }
        Ok(chi * (self.generating.eval_a(q, p)? - q.dot(p)))
    }

    /// `(∂𝒜/∂q, ∂𝒜/∂p)`.
    pub fn grad(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let d = self.dim();
        let r = p.norm();
        let (chi, dchi) = self.cutoff(r);
        if chi == 0.0 {
            return Ok((DVector::zeros(d), DVector::zeros(d)));
        }
        let (gq, gp) = self.generating.grad_a(q, p)?;
        let dq = (gq - p) * chi;
        let mut dp = (gp - q) * chi;
        if dchi != 0.0 {
            let a = self.generating.eval_a(q, p)? - q.dot(p);
            dp += p * (dchi * a / r);
        }
        Ok((dq, dp))
    }

    fn residual_map(&self, q: &DVector<f64>, p: &DVector<f64>, big_p: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(big_p + self.grad(q, big_p)?.0 - p)
    }

    /// `F(q, p)`: fixed-point iteration `P ← p − ∂𝒜/∂q(q, P)`, Newton once
    /// `newton_after` sweeps have not converged, then `Q = q + ∂𝒜/∂P(q, P)`.
    pub fn solve(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<ExtensionPoint> {
        let d = self.dim();
        for n in [q.len(), p.len()] {
            if n != d {
                return Err(Error::DimensionMismatch { expected: d, got: n });
            }
        }
        let opts = &self.options;
        let mut big_p = p.clone();
        let mut newton = false;
        let mut iterations = 0;
        let mut g = self.residual_map(q, p, &big_p)?;
        let mut residual = g.norm();
        while residual > opts.tol {
            if iterations >= opts.max_iter {
                return Err(Error::NewtonFailure {
                    iterations,
                    residual,
                    iterate: big_p.iter().copied().collect(),
                });
            }
            iterations += 1;
            if iterations > opts.newton_after {
                newton = true;
                let jac = self.residual_jacobian(q, p, &big_p)?;
                let step = jac.lu().solve(&g).ok_or(Error::NewtonFailure {
                    iterations,
                    residual,
                    iterate: big_p.iter().copied().collect(),
                })?;
                big_p -= step;
            } else {
                big_p -= &g;
            }
            g = self.residual_map(q, p, &big_p)?;
            residual = g.norm();
        }
        for _ in 0..POLISH {
            if residual == 0.0 {
                break;
            }
            let next = &big_p - &g;
            let g_next = self.residual_map(q, p, &next)?;
            if g_next.norm() > 0.5 * residual {
                break;
            }
            big_p = next;
            g = g_next;
            residual = g.norm();
        }
        let big_q = q + self.grad(q, &big_p)?.1;
        Ok(ExtensionPoint { q: big_q, p: big_p, iterations, residual, newton })
    }

    fn residual_jacobian(&self, q: &DVector<f64>, p: &DVector<f64>, big_p: &DVector<f64>) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut jac = DMatrix::zeros(d, d);
        for k in 0..d {
            let mut a = big_p.clone();
            let mut b = big_p.clone();
            a[k] += NEWTON_FD;
            b[k] -= NEWTON_FD;
            let col = (self.residual_map(q, p, &a)? - self.residual_map(q, p, &b)?) / (2.0 * NEWTON_FD);
            jac.set_column(k, &col);
        }
        Ok(jac)
    }

    /// `DF(q, p)` by central differences of [`solve`](Self::solve).
    pub fn jacobian(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut jac = DMatrix::zeros(2 * d, 2 * d);
        for k in 0..2 * d {
            let mut qa = q.clone();
            let mut pa = p.clone();
            let mut qb = q.clone();
            let mut pb = p.clone();
            if k < d {
                qa[k] += JACOBIAN_FD;
                qb[k] -= JACOBIAN_FD;
            } else {
                pa[k - d] += JACOBIAN_FD;
                pb[k - d] -= JACOBIAN_FD;
            }
            let a = self.solve(&qa, &pa)?;
            let b = self.solve(&qb, &pb)?;
            let mut col = DVector::zeros(2 * d);
            col.rows_mut(0, d).copy_from(&((a.q - b.q) / (2.0 * JACOBIAN_FD)));
            col.rows_mut(d, d).copy_from(&((a.p - b.p) / (2.0 * JACOBIAN_FD)));
            jac.set_column(k, &col);
        }
        Ok(jac)
    }
}

/// `max ‖J_Fᵀ Ω J_F − Ω‖_F` over the samples.
pub fn symplecticity_residual(ext: &ExtensionMap, samples: &[(DVector<f64>, DVector<f64>)]) -> Result<f64> {
    samples
        .par_iter()
        .map(|(q, p)| ext.jacobian(q, p).map(|j| symplectic_defect(&j)))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Splits the time-one map of an isotopy `t ↦ f_t` (with `f_0 = id`) into
/// factors `f_{k/n} ∘ f_{(k−1)/n}⁻¹`, doubling `n` up to `n_max` until every
/// factor satisfies `sup ‖Df̃ − I‖ ≤ bound`.
pub fn factor_near_identity(
    isotopy: &dyn Fn(f64) -> BaseMap,
    n: usize,
    bound: f64,
    n_max: usize,
) -> Result<Vec<BaseMap>> {
    if n == 0 || !(bound > 0.0) {
        return Err(Error::InvalidArgument("factor count and bound must be positive".into()));
    }
    let start = isotopy(0.0);
    start.validate()?;
    if start.closeness(4).displacement > 1e-12 {
        return Err(Error::InvalidArgument("isotopy must start at the identity".into()));
    }
    let d = start.dim();
    let mut n = n;
    while n <= n_max {
        let factors: Vec<BaseMap> = (1..=n)
            .map(|k| {
                let next = isotopy(k as f64 / n as f64);
                if k == 1 {
                    next
                } else {
                    BaseMap::Factor { next: Box::new(next), prev: Box::new(isotopy((k - 1) as f64 / n as f64)) }
                }
            })
            .collect();
        let mut worst = 0.0f64;
        for f in &factors {
            f.validate()?;
            if let BaseMap::Factor { prev, .. } = f {
                prev.inverse(&DVector::from_element(d, 0.5))?;
            }
            worst = worst.max(f.closeness(8).jacobian);
        }
        if !worst.is_finite() {
            return Err(Error::NewtonFailure { iterations: 0, residual: worst, iterate: Vec::new() });
        }
        if worst <= bound {
            return Ok(factors);
        }
        n *= 2;
    }
    Err(Error::FactorBoundUnreachable { bound, n_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::DEFAULT_ORDER;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn ext(base: BaseMap) -> ExtensionMap {
        ExtensionMap::new(GeneratingFunction::new(base, DEFAULT_ORDER).unwrap(), SolverOptions::default()).unwrap()
    }

    #[test]
    fn identity_extension_is_identity() {
        let e = ext(BaseMap::identity(2));
        for (q, p) in [(v(&[0.2, 0.9]), v(&[0.1, -0.3])), (v(&[0.0, 0.5]), v(&[0.6, 0.6]))] {
            let x = e.solve(&q, &p).unwrap();
            assert!((x.q - &q).norm() < 1e-14 && (x.p - &p).norm() < 1e-14);
        }
        let s = symplecticity_residual(&e, &[(v(&[0.3, 0.4]), v(&[0.2, 0.1]))]).unwrap();
        assert!(s <= 1e-9);
    }

    #[test]
    fn translation_extension_is_a_shift() {
        let c = [0.03, -0.07];
        let e = ext(BaseMap::translation(&c));
        let (q, p) = (v(&[0.4, 0.1]), v(&[-0.3, 0.25]));
        let x = e.solve(&q, &p).unwrap();
        assert!((x.q - (&q + v(&c))).norm() < 1e-12);
        assert!((x.p - &p).norm() < 1e-12);
        assert!(symplecticity_residual(&e, &[(q, p)]).unwrap() <= 1e-8);
    }

    #[test]
    fn zero_section_is_mapped_by_f() {
        let base = BaseMap::sine(0.05, 2);
        let e = ext(base.clone());
        for q in [v(&[0.0, 0.0]), v(&[0.37, 0.91]), v(&[-0.2, 1.3])] {
            let x = e.solve(&q, &DVector::zeros(2)).unwrap();
            assert!((x.q - base.eval(&q)).norm() < 1e-10);
            assert!(x.p.norm() < 1e-10);
        }
    }

    #[test]
    fn sine_extension_is_symplectic() {
        let e = ext(BaseMap::sine(0.05, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<_> = (0..20)
            .map(|_| {
                let q = v(&[rng.random::<f64>(), rng.random::<f64>()]);
                let p = v(&[rng.random_range(-0.35..0.35), rng.random_range(-0.35..0.35)]);
                (q, p)
            })
            .collect();
        let r = symplecticity_residual(&e, &samples).unwrap();
        assert!(r <= 1e-5, "{r}");
        let far = e.solve(&v(&[0.3, 0.3]), &v(&[1.0, 0.5])).unwrap();
        assert!((far.q - v(&[0.3, 0.3])).norm() == 0.0);
    }

    #[test]
    fn newton_fallback_converges() {
        let gf = GeneratingFunction::new(BaseMap::sine(0.08, 2), DEFAULT_ORDER).unwrap();
        let opts = SolverOptions { newton_after: 1, ..SolverOptions::default() };
        let e = ExtensionMap::new(gf, opts).unwrap();
        let x = e.solve(&v(&[0.15, 0.6]), &v(&[0.3, -0.2])).unwrap();
        assert!(x.newton && x.residual <= 1e-10);
    }

    #[test]
    fn far_maps_are_refused_and_factored() {
        let gf = GeneratingFunction::new(BaseMap::sine(0.3, 2), DEFAULT_ORDER).unwrap();
        assert!(matches!(ExtensionMap::new(gf, SolverOptions::default()), Err(Error::NonContraction { .. })));
        // The last of eight factors peaks at 0.0375 / (1 − 0.2625) at y = ½.
        let isotopy = |t: f64| BaseMap::sine(0.3 * t, 2);
        let eight = factor_near_identity(&isotopy, 8, 0.1, 64).unwrap();
        assert_eq!(eight.len(), 8);
        let worst = eight.iter().map(|f| f.closeness(8).jacobian).fold(0.0, f64::max);
        assert!((worst - 0.0375 / 0.7375).abs() < 1e-12, "{worst}");
        let factors = factor_near_identity(&isotopy, 8, 0.05, 64).unwrap();
        assert_eq!(factors.len(), 16);
        assert!(factors.iter().all(|f| f.closeness(8).jacobian <= 0.05));
        // Extensions of the factors compose to f on the zero section.
        let exts: Vec<ExtensionMap> = factors.into_iter().map(ext).collect();
        let q0 = v(&[0.27, 0.64]);
        let mut x = (q0.clone(), DVector::zeros(2));
        for e in &exts {
            let y = e.solve(&x.0, &x.1).unwrap();
            x = (y.q, y.p);
        }
        assert!((x.0 - BaseMap::sine(0.3, 2).eval(&q0)).norm() < 1e-10);
        assert!(x.1.norm() < 1e-10);
    }

    #[test]
    fn translation_factors_are_even_steps() {
        let c = [0.4, -0.2];
        let factors = factor_near_identity(&|t| BaseMap::translation(&[c[0] * t, c[1] * t]), 4, 0.05, 4).unwrap();
        let q = v(&[0.1, 0.2]);
        for f in &factors {
            assert!((f.eval(&q) - &q - v(&[0.1, -0.05])).norm() < 1e-14);
        }
    }

    #[test]
    fn unreachable_bound_is_reported() {
        assert!(matches!(
            factor_near_identity(&|t| BaseMap::sine(0.3 * t, 1), 1, 0.05, 4),
            Err(Error::FactorBoundUnreachable { n_max: 4, .. })
        ));
    }
}
