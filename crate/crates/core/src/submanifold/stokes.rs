//! Quadrature of `ω` over sampled 2-parameter surfaces.

use serde::{Deserialize, Serialize};

use super::displacement;
use crate::symplectic::{omega, PhasePoint, TangentVector};

/// Surface `σ(s, t)` in lifted coordinates.
pub trait ParamSurface: Sync {
    fn eval(&self, s: f64, t: f64) -> PhasePoint;
}

impl<F: Fn(f64, f64) -> PhasePoint + Sync> ParamSurface for F {
    fn eval(&self, s: f64, t: f64) -> PhasePoint {
        self(s, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesDomain {
    pub s: (f64, f64),
    pub t: (f64, f64),
    /// Both parameters periodic over their ranges.
    pub closed: bool,
}

impl StokesDomain {
    pub fn unit_torus() -> Self {
        Self { s: (0.0, 1.0), t: (0.0, 1.0), closed: true }
    }
}

/// `∫∫ ω(∂_s σ, ∂_t σ) ds dt` by the trapezoid rule on an `n_s × n_t` grid
/// (periodic when the domain is closed), with central-difference partials.
pub fn stokes_check(surface: &dyn ParamSurface, domain: StokesDomain, res: (usize, usize)) -> f64 {
    let h = 1e-5;
    let (ns, nt) = (res.0.max(1), res.1.max(1));
    let (ls, lt) = (domain.s.1 - domain.s.0, domain.t.1 - domain.t.0);
    let (ps, pt) = if domain.closed { (ns, nt) } else { (ns + 1, nt + 1) };
    let weight = |i: usize, n: usize| -> f64 {
        if !domain.closed && (i == 0 || i == n) { 0.5 } else { 1.0 }
    };
    let partial = |a: &PhasePoint, b: &PhasePoint| TangentVector::from_vector(&(displacement(a, b) / (2.0 * h)));
    let mut total = 0.0;
    for i in 0..ps {
        let s = domain.s.0 + ls * i as f64 / ns as f64;
        for j in 0..pt {
            let t = domain.t.0 + lt * j as f64 / nt as f64;
            let ds = partial(&surface.eval(s - h, t), &surface.eval(s + h, t));
            let dt = partial(&surface.eval(s, t - h), &surface.eval(s, t + h));
            let w = omega(&ds, &dt).expect("surface dimension is constant");
            total += w * weight(i, ns) * weight(j, nt);
        }
    }
    total * (ls / ns as f64) * (lt / nt as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use std::f64::consts::PI;

    fn pt(q: [f64; 3], p: [f64; 3]) -> PhasePoint {
        PhasePoint::lifted(DVector::from_row_slice(&q), DVector::from_row_slice(&p))
    }

    #[test]
    fn zero_section_torus() {
        let surf = |s: f64, t: f64| pt([s, t, 0.0], [0.0; 3]);
        assert_eq!(stokes_check(&surf, StokesDomain::unit_torus(), (16, 16)), 0.0);
    }

    #[test]
    fn closed_surface_in_exact_setting() {
        let surf = |s: f64, t: f64| pt([s, t, 0.0], [(2.0 * PI * s).cos(), (2.0 * PI * t).sin(), 0.0]);
        assert!(stokes_check(&surf, StokesDomain::unit_torus(), (128, 128)).abs() < 1e-6);
        // A twisted closed surface with non-vanishing integrand.
        let twisted = |s: f64, t: f64| pt([s, 0.0, 0.0], [(2.0 * PI * t).sin() + 0.3 * (2.0 * PI * s).cos(), 0.0, 0.0]);
        assert!(stokes_check(&twisted, StokesDomain::unit_torus(), (64, 64)).abs() < 1e-9);
    }

    #[test]
    fn open_patch_is_a_negative_control() {
        let surf = |s: f64, t: f64| pt([s, 0.0, 0.0], [(2.0 * PI * t).sin(), 0.0, 0.0]);
        let dom = StokesDomain { s: (0.0, 1.0), t: (0.0, 0.25), closed: false };
        assert!((stokes_check(&surf, dom, (128, 128)) - 1.0).abs() < 1e-4);
    }
}
