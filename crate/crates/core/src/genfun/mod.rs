//! Symplectic extension of a near-identity diffeomorphism of the zero
//! section through a mollified generating function.
//!
//! With `F_p(q) = f̃(q)·p` and the product mollifier `η_t(u) = ∏ α(u_i/t)/|t|`,
//!
//! ```text
//! A(q, p) = (η_{‖p‖} * F_p)(q) = ∫ η(v) f̃(q − ‖p‖v)·p dv,   A(q, 0) = 0.
//! ```
//!
//! The substituted integral is evaluated with a fixed tensor rule on
//! `[−1, 1]^d`. Its nodes are symmetric, so odd moments of `η` vanish exactly
//! and the discrete `A` depends on `‖p‖` only through even powers. The
//! gradient is the exact gradient of the discrete `A`, which makes the
//! extension symplectic up to solver error.

mod basemap;
mod extension;

pub use basemap::{BaseMap, Closeness};
pub use extension::{
    factor_near_identity, symplecticity_residual, ExtensionMap, ExtensionPoint, SolverOptions,
};

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes per axis in the default tensor rule.
pub const DEFAULT_ORDER: usize = 24;
/// Smallest accepted order (two nodes per panel).
pub const MIN_ORDER: usize = 6;
const PANELS: usize = 3;

/// `S(s) = 10s³ − 15s⁴ + 6s⁵`, a C² step from 0 to 1 on `[0, 1]`.
fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

fn smoothstep_derivative(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    30.0 * s * s * (1.0 - s) * (1.0 - s)
}

/// Even bump `α`: constant on `[−c₀, c₀]`, C² quintic taper to zero at `±1`,
/// unit integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    pub plateau: f64,
    pub dim: usize,
    scale: f64,
}

impl Mollifier {
    pub fn new(plateau: f64, dim: usize) -> Result<Self> {
        if !(plateau > 0.0 && plateau < 1.0) || dim == 0 {
            return Err(Error::InvalidArgument("plateau must lie in (0, 1) and dimension be positive".into()));
        }
        let raw = Self { plateau, dim, scale: 1.0 };
        let rule = panel_rule(plateau, DEFAULT_ORDER / PANELS);
        let mass: f64 = rule.iter().map(|(x, w)| w * raw.alpha(*x)).sum();
        Ok(Self { scale: 1.0 / mass, ..raw })
    }

    pub fn default_for(dim: usize) -> Self {
        Self::new(0.25, dim).expect("default plateau is valid")
    }

    pub fn alpha(&self, t: f64) -> f64 {
        let a = t.abs();
        if a >= 1.0 {
            0.0
        } else if a <= self.plateau {
            self.scale
        } else {
            self.scale * (1.0 - smoothstep((a - self.plateau) / (1.0 - self.plateau)))
        }
    }

    pub fn alpha_derivative(&self, t: f64) -> f64 {
        let a = t.abs();
        if a >= 1.0 || a <= self.plateau {
            return 0.0;
        }
        let w = 1.0 - self.plateau;
        -t.signum() * self.scale * smoothstep_derivative((a - self.plateau) / w) / w
    }

    /// `η(v) = ∏ α(v_i)`.
    pub fn eta(&self, v: &[f64]) -> f64 {
        v.iter().map(|&x| self.alpha(x)).product()
    }

    /// `∂η/∂v_i`.
    pub fn eta_partial(&self, v: &[f64], i: usize) -> f64 {
        v.iter()
            .enumerate()
            .map(|(j, &x)| if j == i { self.alpha_derivative(x) } else { self.alpha(x) })
            .product()
    }

    /// `η_t(u) = t^{-d} η(u/t)`.
    pub fn eta_scaled(&self, u: &[f64], t: f64) -> f64 {
        let s: Vec<f64> = u.iter().map(|x| x / t).collect();
        self.eta(&s) / t.abs().powi(u.len() as i32)
    }
}

/// One-dimensional composite rule on `[−1, 1]` split at `±c₀`.
fn panel_rule(plateau: f64, per_panel: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(NonZeroUsize::new(per_panel.max(1)).expect("positive"));
    let panels = [(-1.0, -plateau), (-plateau, plateau), (plateau, 1.0)];
    let mut out = Vec::with_capacity(PANELS * per_panel);
    for (a, b) in panels {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in gl.nodes().zip(gl.weights()) {
            out.push((mid + half * x, half * w));
        }
    }
    out
}

/// Tensor rule on `[−1, 1]^d` with the mollifier folded into the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRule {
    /// Flattened `d`-vectors.
    pub nodes: Vec<f64>,
    /// `w_k η(v_k)`.
    pub eta_weights: Vec<f64>,
    /// `w_k ∂η/∂v_i(v_k)`, `d` per node.
    pub grad_weights: Vec<f64>,
    pub dim: usize,
}

impl TensorRule {
    pub fn new(mollifier: &Mollifier, order: usize) -> Result<Self> {
        if order < MIN_ORDER {
            return Err(Error::QuadratureOrder { order, min: MIN_ORDER });
        }
        if !order.is_multiple_of(PANELS) {
            return Err(Error::InvalidArgument(format!("quadrature order {order} is not a multiple of {PANELS}")));
        }
        let d = mollifier.dim;
        let axis = panel_rule(mollifier.plateau, order / PANELS);
        let n = axis.len();
        let total = n.pow(d as u32);
        let mut nodes = Vec::with_capacity(total * d);
        let mut eta_weights = Vec::with_capacity(total);
        let mut grad_weights = Vec::with_capacity(total * d);
        let mut v = vec![0.0; d];
        for mut idx in 0..total {
            let mut w = 1.0;
            for a in (0..d).rev() {
                let (x, wa) = axis[idx % n];
                v[a] = x;
                w *= wa;
                idx /= n;
            }
            nodes.extend_from_slice(&v);
            eta_weights.push(w * mollifier.eta(&v));
            for i in 0..d {
                grad_weights.push(w * mollifier.eta_partial(&v, i));
            }
        }
        Ok(Self { nodes, eta_weights, grad_weights, dim: d })
    }

    pub fn len(&self) -> usize {
        self.eta_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta_weights.is_empty()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }
}

/// Quadrature moments of the mollifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentReport {
    /// `|∫η − 1|`.
    pub mass_error: f64,
    /// `max_i |∫η v_i|`.
    pub first_moment: f64,
    /// `max_{i,j} |∫∂_iη v_j + δ_ij|`.
    pub derivative_moment_error: f64,
}

pub fn mollifier_moments(rule: &TensorRule) -> MomentReport {
    let d = rule.dim;
    let mut mass = 0.0;
    let mut first = vec![0.0; d];
    let mut deriv = vec![0.0; d * d];
    for k in 0..rule.len() {
        let v = rule.node(k);
        mass += rule.eta_weights[k];
        for i in 0..d {
            first[i] += rule.eta_weights[k] * v[i];
            for j in 0..d {
                deriv[i * d + j] += rule.grad_weights[k * d + i] * v[j];
            }
        }
    }
    let derivative_moment_error = (0..d * d)
        .map(|ij| (deriv[ij] + if ij / d == ij % d { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    MomentReport {
        mass_error: (mass - 1.0).abs(),
        first_moment: first.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        derivative_moment_error,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingFunction {
    pub base: BaseMap,
    pub mollifier: Mollifier,
    pub order: usize,
    rule: TensorRule,
}

impl GeneratingFunction {
    pub fn new(base: BaseMap, order: usize) -> Result<Self> {
        base.validate()?;
        let mollifier = Mollifier::default_for(base.dim());
        Self::with_mollifier(base, mollifier, order)
    }

    pub fn with_mollifier(base: BaseMap, mollifier: Mollifier, order: usize) -> Result<Self> {
        base.validate()?;
        if mollifier.dim != base.dim() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: mollifier.dim });
        }
        let rule = TensorRule::new(&mollifier, order)?;
        Ok(Self { base, mollifier, order, rule })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn rule(&self) -> &TensorRule {
        &self.rule
    }

    fn check(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<()> {
        let d = self.dim();
        for n in [q.len(), p.len()] {
            if n != d {
                return Err(Error::DimensionMismatch { expected: d, got: n });
            }
        }
        Ok(())
    }

    /// `A(q, p)`.
    pub fn eval_a(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<f64> {
        self.check(q, p)?;
        let r = p.norm();
        if r == 0.0 {
            return Ok(0.0);
        }
        let d = self.dim();
        let (mut x, mut f, mut df) = (vec![0.0; d], vec![0.0; d], vec![0.0; d * d]);
        let mut sum = 0.0;
        for k in 0..self.rule.len() {
            let v = self.rule.node(k);
            for i in 0..d {
                x[i] = q[i] - r * v[i];
            }
            self.base.eval_into(&x, &mut f, &mut df);
            sum += self.rule.eta_weights[k] * (0..d).map(|i| f[i] * p[i]).sum::<f64>();
        }
        finite(sum, "A")
    }

    /// `(∂A/∂q, ∂A/∂p)`; `(0, f̃(q))` at `p = 0`.
    pub fn grad_a(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check(q, p)?;
        let d = self.dim();
        let r = p.norm();
        if r == 0.0 {
            return Ok((DVector::zeros(d), self.base.eval(q)));
        }
        let (mut x, mut f, mut df) = (vec![0.0; d], vec![0.0; d], vec![0.0; d * d]);
        let mut dq = DVector::<f64>::zeros(d);
        let mut dp = DVector::<f64>::zeros(d);
        for k in 0..self.rule.len() {
            let w = self.rule.eta_weights[k];
            let v = self.rule.node(k);
            for i in 0..d {
                x[i] = q[i] - r * v[i];
            }
            self.base.eval_into(&x, &mut f, &mut df);
            // (Df̃ v)·p and Df̃ᵀp.
            let mut radial = 0.0;
            for i in 0..d {
                let row = &df[i * d..(i + 1) * d];
                radial += p[i] * (0..d).map(|j| row[j] * v[j]).sum::<f64>();
                for j in 0..d {
                    dq[j] += w * row[j] * p[i];
                }
            }
            for i in 0..d {
                dp[i] += w * (f[i] - p[i] / r * radial);
            }
        }
        if dq.iter().chain(dp.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Evaluator("grad A".into()));
        }
        Ok((dq, dp))
    }

    /// Second derivatives at the zero section: the mixed block
    /// `M[j][i] = ∂²A/∂p_j∂q_i = ∂f̃_j/∂q_i = Df̃(q)`, then `∂²A/∂p²` and
    /// `∂²A/∂q²`, both zero.
    pub fn hessian_at_zero_section(&self, q: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let d = self.dim();
        (self.base.jacobian(q), DMatrix::zeros(d, d), DMatrix::zeros(d, d))
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluator(what.into()))
    }
}

/// Largest deviations of the zero-section derivative identities from
/// finite-difference oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroSectionReport {
    /// `∂A/∂q(q, 0) = 0`.
    pub grad_q: f64,
    /// `∂A/∂p(q, 0) = f̃(q)`.
    pub grad_p: f64,
    /// `∂²A/∂p_i∂p_j(q, 0) = 0`.
    pub hess_pp: f64,
    /// `∂²A/∂q_j²(q, 0) = 0`.
    pub hess_qq: f64,
    /// `∂²A/∂p_j∂q_i(q, 0) = ∂f̃_j/∂q_i(q)`.
    pub mixed: f64,
}

impl ZeroSectionReport {
    pub fn max(&self) -> f64 {
        [self.grad_q, self.grad_p, self.hess_pp, self.hess_qq, self.mixed].into_iter().fold(0.0, f64::max)
    }
}

/// Unit directions for radial limits: the `±e_i` and normalized diagonals,
/// `count` in total.
pub fn radial_directions(d: usize, count: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut k = 0usize;
    while out.len() < count {
        let mut v = DVector::zeros(d);
        if k < 2 * d {
            v[k / 2] = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        } else {
            // Sign patterns of the diagonals, skipping the all-zero code.
            let code = k - 2 * d + 1;
            for i in 0..d {
                v[i] = if (code >> i) & 1 == 1 { -1.0 } else { 1.0 };
            }
            v /= v.norm();
        }
        out.push(v);
        k += 1;
    }
    out
}

/// Checks the zero-section identities at `q` against central differences of
/// `A` and `∇A` taken off the zero section along `directions`, step `h`.
pub fn zero_section_identities(
    gf: &GeneratingFunction,
    q: &DVector<f64>,
    directions: &[DVector<f64>],
    h: f64,
) -> Result<ZeroSectionReport> {
    let d = gf.dim();
    let zero = DVector::zeros(d);
    let f = gf.base.eval(q);
    let (mixed, _, _) = gf.hessian_at_zero_section(q);
    let mut rep = ZeroSectionReport { grad_q: 0.0, grad_p: 0.0, hess_pp: 0.0, hess_qq: 0.0, mixed: 0.0 };

    // ∂A/∂p(q,0): differences of A through p = 0.
    for j in 0..d {
        let mut e = zero.clone();
        e[j] = h;
        let fd = (gf.eval_a(q, &e)? - gf.eval_a(q, &(-&e))?) / (2.0 * h);
        rep.grad_p = rep.grad_p.max((fd - f[j]).abs());
    }
    for u in directions {
        let p = u * h;
        // ∂A/∂q along the ray p = h u, from differences of A in q.
        for i in 0..d {
            let mut a = q.clone();
            let mut b = q.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (gf.eval_a(&a, &p)? - gf.eval_a(&b, &p)?) / (2.0 * h);
            rep.grad_q = rep.grad_q.max(fd.abs());
        }
        let (gq_plus, gp_plus) = gf.grad_a(q, &p)?;
        let (gq_minus, gp_minus) = gf.grad_a(q, &(-&p))?;
        // ∂²A/∂p∂p applied to u, and the mixed block applied to u.
        let pp = (gp_plus - gp_minus) / (2.0 * h);
        rep.hess_pp = rep.hess_pp.max(pp.amax());
        let qp = (gq_plus - &gq_minus) / (2.0 * h);
        rep.mixed = rep.mixed.max((qp - mixed.tr_mul(u)).amax());
        // ∂²A/∂q_j² on the ray.
        for j in 0..d {
            let mut a = q.clone();
            let mut b = q.clone();
            a[j] += h;
            b[j] -= h;
            let fd = (gf.grad_a(&a, &p)?.0[j] - gf.grad_a(&b, &p)?.0[j]) / (2.0 * h);
            rep.hess_qq = rep.hess_qq.max(fd.abs());
        }
    }
    Ok(rep)
}
