//! Conjugate-point detection along an orbit.
//!
//! The vertical `V(x₀)` is pushed forward by the tangent flow as a `2d × d`
//! frame `W(t)`. A conjugate time is a `t > 0` where `W(t)` meets the
//! vertical, i.e. where the `δq` block `A(t)` of `W(t)` is singular. The frame
//! is re-orthonormalized after every sample with an upper-triangular factor
//! of positive diagonal, which preserves the sign of `det A`. The tracked
//! quantity is the scale-free overlap `det A / √det(WᵀW)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::integrate::{advance, FlowOptions, State};
use crate::symplectic::{PhasePoint, SubspaceFrame};

/// `|overlap|` below this at a local minimum without a sign change is a
/// grazing candidate.
pub const GRAZING_TOL: f64 = 1e-10;

/// Bisection stops when the bracket is below `dt × BISECTION_FRACTION`.
pub const BISECTION_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugateReport {
    pub window: (f64, f64),
    /// Times where the overlap changes sign, refined by bisection.
    pub zeros: Vec<f64>,
    /// Sub-tolerance minima of `|overlap|` without a sign change.
    pub grazing: Vec<f64>,
    /// Sampled `(t, overlap)`.
    pub determinant_trace: Vec<(f64, f64)>,
}

impl ConjugateReport {
    pub fn is_conjugate_free(&self) -> bool {
        self.zeros.is_empty() && self.grazing.is_empty()
    }
}

fn vertical_frame(d: usize) -> DMatrix<f64> {
    SubspaceFrame::vertical(d).matrix().clone()
}

/// Scale-free vertical overlap of a frame.
pub fn overlap(w: &DMatrix<f64>) -> f64 {
    let d = w.ncols();
    let a = w.rows(0, d).determinant();
    let gram = (w.transpose() * w).determinant();
    if gram <= 0.0 {
        return 0.0;
    }
    a / gram.sqrt()
}

/// Replaces `W` by `W R⁻¹` with `R` upper triangular, positive diagonal.
fn renormalize(w: &mut DMatrix<f64>, t: f64) -> Result<()> {
    let qr = w.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for i in 0..r.nrows() {
        let rii = r[(i, i)];
        if !(rii.abs() > 1e-300) || !rii.is_finite() {
            return Err(Error::FrameDegenerate { t });
        }
        if rii < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    *w = q;
    Ok(())
}

struct Sample {
    t: f64,
    state: State,
    value: f64,
}

fn advance_frame(
    h: &dyn Hamiltonian,
    from: &Sample,
    tau: f64,
    opts: &FlowOptions,
) -> Result<Sample> {
    let mut s = from.state.clone();
    advance(h, &mut s, tau, opts)?;
    let t = from.t + tau;
    let cols = s.cols.as_mut().expect("frame tracked");
    renormalize(cols, t)?;
    let value = overlap(cols);
    Ok(Sample { t, state: s, value })
}

/// Scans `[dt, T]` (or `[T, −dt]` for negative `T`) for conjugate times.
pub fn conjugate_scan(
    h: &dyn Hamiltonian,
    x0: &PhasePoint,
    horizon: f64,
    dt: f64,
    opts: &FlowOptions,
) -> Result<ConjugateReport> {
    if x0.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: x0.dim() });
    }
    if horizon == 0.0 || !horizon.is_finite() {
        return Err(Error::InvalidArgument("scan horizon must be nonzero".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("scan step must be positive".into()));
    }
    let dir = horizon.signum();
    let n = (horizon.abs() / dt).ceil() as usize;
    let dt = horizon.abs() / n as f64;
    let opts = FlowOptions { step: opts.step.min(dt), energy_tol: None, ..opts.clone() };
    let d = h.dim();
    let start = Sample { t: 0.0, state: State::new(x0, Some(vertical_frame(d))), value: 0.0 };

    let mut report = ConjugateReport {
        window: if dir > 0.0 { (0.0, horizon) } else { (horizon, 0.0) },
        zeros: Vec::new(),
        grazing: Vec::new(),
        determinant_trace: Vec::with_capacity(n),
    };
    let mut prev = advance_frame(h, &start, dir * dt, &opts)?;
    report.determinant_trace.push((prev.t, prev.value));
    let mut before_prev: Option<Sample> = None;
    for _ in 1..n {
        let cur = advance_frame(h, &prev, dir * dt, &opts)?;
        report.determinant_trace.push((cur.t, cur.value));
        if prev.value != 0.0 && cur.value.signum() != prev.value.signum() {
            report.zeros.push(bisect(h, &prev, dir * dt, &opts, dt * BISECTION_FRACTION)?);
        } else if let Some(bp) = &before_prev {
            let m = prev.value.abs();
            if m < bp.value.abs() && m < cur.value.abs() && bp.value.signum() == cur.value.signum()
            {
                if let Some(tg) = refine_minimum(h, bp, 2.0 * dir * dt, &opts)? {
                    report.grazing.push(tg);
                }
            }
        }
        before_prev = Some(prev);
        prev = cur;
    }
    Ok(report)
}

fn bisect(h: &dyn Hamiltonian, left: &Sample, span: f64, opts: &FlowOptions, tol: f64) -> Result<f64> {
    let s0 = left.value.signum();
    let (mut lo, mut hi) = (0.0, span);
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        let m = advance_frame(h, left, mid, opts)?;
        if m.value.signum() == s0 && m.value != 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(left.t + 0.5 * (lo + hi))
}

/// Golden-section search for the minimum of `|overlap|` on `[0, span]` from
/// `left`; returns its time when the minimum is below [`GRAZING_TOL`].
fn refine_minimum(
    h: &dyn Hamiltonian,
    left: &Sample,
    span: f64,
    opts: &FlowOptions,
) -> Result<Option<f64>> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |tau: f64| advance_frame(h, left, tau, opts).map(|s| s.value.abs());
    let (mut a, mut b) = (0.0, span);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (f(c)?, f(e)?);
    for _ in 0..60 {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e)?;
        }
        if (b - a).abs() < 1e-12 * span.abs().max(1.0) {
            break;
        }
    }
    let (tau, val) = if fc < fe { (c, fc) } else { (e, fe) };
    Ok((val < GRAZING_TOL).then_some(left.t + tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Mechanical;

    #[test]
    fn flat_flow_has_no_conjugate_points() {
        let h = Mechanical::flat(3);
        let x0 = PhasePoint::from_slices(&[0.1, 0.2, 0.3], &[1.0, 0.0, 0.0]).unwrap();
        let r = conjugate_scan(&h, &x0, 100.0, 0.1, &FlowOptions::default()).unwrap();
        assert!(r.is_conjugate_free());
        // t³ / (1 + t²)^{3/2} for the flat frame [tI; I].
        for &(t, v) in r.determinant_trace.iter().step_by(97) {
            assert!((v - t.powi(3) / (1.0 + t * t).powf(1.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn linearized_pendulum_conjugate_at_half_period() {
        // Small libration around the stable equilibrium q = ½: the
        // linearization has frequency 2π, so the first conjugate time is
        // close to ½.
        let h = Mechanical::pendulum();
        let x0 = PhasePoint::from_slices(&[0.5 + 1e-6], &[0.0]).unwrap();
        let r = conjugate_scan(&h, &x0, 1.2, 0.01, &FlowOptions::default()).unwrap();
        assert_eq!(r.zeros.len(), 2);
        assert!((r.zeros[0] - 0.5).abs() < 1e-4);
        assert!((r.zeros[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn isotropic_double_crossing_is_grazing() {
        // Two decoupled identical oscillators: det A = sin²(2πt)/(2π)², which
        // touches zero at t = ½ without changing sign.
        struct Iso;
        impl Hamiltonian for Iso {
            fn dim(&self) -> usize {
                2
            }
            fn name(&self) -> String {
                "iso".into()
            }
            fn energy(&self, q: &nalgebra::DVector<f64>, p: &nalgebra::DVector<f64>) -> f64 {
                let w = 2.0 * std::f64::consts::PI;
                0.5 * p.norm_squared() + 0.5 * w * w * q.norm_squared()
            }
            fn grad_q(&self, q: &nalgebra::DVector<f64>, _: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
                q * (4.0 * std::f64::consts::PI.powi(2))
            }
            fn grad_p(&self, _: &nalgebra::DVector<f64>, p: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
                p.clone()
            }
            fn hess_pp(&self, _: &nalgebra::DVector<f64>, _: &nalgebra::DVector<f64>) -> DMatrix<f64> {
                DMatrix::identity(2, 2)
            }
            fn hess_qp(&self, _: &nalgebra::DVector<f64>, _: &nalgebra::DVector<f64>) -> DMatrix<f64> {
                DMatrix::zeros(2, 2)
            }
            fn hess_qq(&self, _: &nalgebra::DVector<f64>, _: &nalgebra::DVector<f64>) -> DMatrix<f64> {
                DMatrix::identity(2, 2) * (4.0 * std::f64::consts::PI.powi(2))
            }
            fn is_separable(&self) -> bool {
                true
            }
        }
        let x0 = PhasePoint::from_slices(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        let r = conjugate_scan(&Iso, &x0, 0.8, 0.01, &FlowOptions::default()).unwrap();
        assert!(r.zeros.is_empty());
        assert_eq!(r.grazing.len(), 1);
        assert!((r.grazing[0] - 0.5).abs() < 1e-6);
        assert!(!r.is_conjugate_free());
    }

    #[test]
    fn backward_scan_on_flat() {
        let h = Mechanical::flat(2);
        let x0 = PhasePoint::from_slices(&[0.1, 0.2], &[1.0, 0.5]).unwrap();
        let r = conjugate_scan(&h, &x0, -10.0, 0.5, &FlowOptions::default()).unwrap();
        assert!(r.is_conjugate_free());
        assert_eq!(r.window, (-10.0, 0.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        let h = Mechanical::flat(1);
        let x0 = PhasePoint::from_slices(&[0.0], &[0.0]).unwrap();
        assert!(conjugate_scan(&h, &x0, 0.0, 0.1, &FlowOptions::default()).is_err());
        assert!(conjugate_scan(&h, &x0, 1.0, 0.0, &FlowOptions::default()).is_err());
    }
}
