//! Green bundles and the finite-horizon boundedness probe.
//!
//! `G_-(x)` is the limit of `Dφ_{-T}(V(φ_T x))` as `T → +∞` and `G_+(x)` the
//! limit of `Dφ_T(V(φ_{-T} x))`. With this orientation a tangent vector whose
//! forward images stay bounded lies in `G_-` (and backward-bounded vectors in
//! `G_+`), which is what the stable/unstable eigenvectors of a hyperbolic
//! fixed point check.
//!
//! For `J = Dφ_T(x) = [[A, B], [C, D]]` symplectic, `J⁻¹(0, I)ᵀ = (−Bᵀ, Aᵀ)`,
//! so the pulled-back vertical is the graph of `S = −Aᵀ B⁻ᵀ`. Only the
//! forward (or backward) Jacobian from `x` is needed, which is extended
//! incrementally across the horizon list.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conjugate::conjugate_scan;
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::integrate::{advance, FlowOptions, State};
use crate::symplectic::{vertical_angle, PhasePoint, SubspaceFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    fn direction(self) -> f64 {
        match self {
            Side::Minus => 1.0,
            Side::Plus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenBundleEstimate {
    pub side: Side,
    /// `S` with the bundle equal to `{(dq, S dq)}`, symmetrized.
    pub symmetric_matrix: DMatrix<f64>,
    pub horizon: f64,
    /// Spectral norm `‖S_{T_k} − S_{T_{k−1}}‖` for the last two horizons (∞
    /// with one).
    pub residual: f64,
    /// `‖S − Sᵀ‖` before symmetrization.
    pub symmetry_error: f64,
    pub vertical_angle: f64,
    /// `(T, S_T)` for every horizon.
    pub history: Vec<(f64, DMatrix<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenOptions {
    pub flow: FlowOptions,
    /// Run a coarse conjugate scan over the largest horizon first.
    pub check_conjugate: bool,
    /// Minimum vertical angle for a pulled-back vertical to count as a graph.
    pub angle_tol: f64,
}

impl Default for GreenOptions {
    fn default() -> Self {
        Self { flow: FlowOptions::default(), check_conjugate: true, angle_tol: 1e-8 }
    }
}

/// `{1, 2, 4, …, 2¹⁴}`.
pub fn default_horizons() -> Vec<f64> {
    (0..=14).map(|k| f64::from(1u32 << k)).collect()
}

/// Graph matrix of the vertical pulled back by `J⁻¹`.
fn pulled_back_vertical(j: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let a = j.view((0, 0), (d, d));
    let b = j.view((0, d), (d, d));
    let inv = b.transpose().lu().try_inverse().ok_or(Error::NotAGraph { angle: 0.0 })?;
    Ok(-(a.transpose() * inv))
}

/// Estimates `G_-` or `G_+` at `x0` over an increasing list of positive
/// horizons.
pub fn green_bundle(
    h: &dyn Hamiltonian,
    x0: &PhasePoint,
    side: Side,
    horizons: &[f64],
    opts: &GreenOptions,
) -> Result<GreenBundleEstimate> {
    let d = h.dim();
    if x0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.dim() });
    }
    if horizons.is_empty()
        || horizons[0] <= 0.0
        || horizons.windows(2).any(|w| w[1] <= w[0])
        || !horizons.iter().all(|t| t.is_finite())
    {
        return Err(Error::InvalidArgument("horizons must be positive and increasing".into()));
    }
    let dir = side.direction();
    let t_max = *horizons.last().unwrap();
    if opts.check_conjugate {
        let dt = (t_max / 2000.0).min(0.05);
        let scan = conjugate_scan(h, x0, dir * t_max, dt, &opts.flow)?;
        // A conjugate time means the pushed vertical meets the vertical.
        if !scan.is_conjugate_free() {
            return Err(Error::NotAGraph { angle: 0.0 });
        }
    }
    let flow_opts = FlowOptions { energy_tol: None, ..opts.flow.clone() };
    let mut state = State::new(x0, Some(DMatrix::identity(2 * d, 2 * d)));
    let mut t_now = 0.0;
    let mut history: Vec<(f64, DMatrix<f64>)> = Vec::with_capacity(horizons.len());
    for &t in horizons {
        advance(h, &mut state, dir * (t - t_now), &flow_opts)?;
        t_now = t;
        let j = state.cols.as_ref().expect("jacobian tracked");
        let s = pulled_back_vertical(j, d)?;
        let angle = vertical_angle(&SubspaceFrame::graph(&s)?);
        if angle < opts.angle_tol {
            return Err(Error::NotAGraph { angle });
        }
        history.push((t, s));
    }
    let (horizon, s) = history.last().cloned().unwrap();
    let residual = match history.len() {
        1 => f64::INFINITY,
        n => (&history[n - 1].1 - &history[n - 2].1).singular_values().max(),
    };
    let symmetry_error = (&s - s.transpose()).norm();
    let sym = (&s + s.transpose()) * 0.5;
    let angle = vertical_angle(&SubspaceFrame::graph(&sym)?);
    Ok(GreenBundleEstimate {
        side,
        symmetric_matrix: sym,
        horizon,
        residual,
        symmetry_error,
        vertical_angle: angle,
        history,
    })
}

/// `(min_t ‖Dφ_t v‖, min_t ‖Dφ_{−t} v‖)` over the sampled horizons.
pub fn boundedness_probe(
    h: &dyn Hamiltonian,
    x0: &PhasePoint,
    v: &DVector<f64>,
    horizons: &[f64],
    opts: &FlowOptions,
) -> Result<(f64, f64)> {
    let d = h.dim();
    if v.len() != 2 * d {
        return Err(Error::DimensionMismatch { expected: 2 * d, got: v.len() });
    }
    if x0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.dim() });
    }
    let mut sorted: Vec<f64> = horizons.iter().map(|t| t.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let opts = FlowOptions { energy_tol: None, ..opts.clone() };
    let probe = |dir: f64| -> Result<f64> {
        let mut s = State::new(x0, Some(DMatrix::from_column_slice(2 * d, 1, v.as_slice())));
        let mut t_now = 0.0;
        let mut best = f64::INFINITY;
        for &t in &sorted {
            advance(h, &mut s, dir * (t - t_now), &opts)?;
            t_now = t;
            best = best.min(s.cols.as_ref().unwrap().norm());
        }
        Ok(best)
    };
    Ok((probe(1.0)?, probe(-1.0)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Mechanical;
    use std::f64::consts::PI;

    #[test]
    fn flat_green_bundles_approach_horizontal() {
        let h = Mechanical::flat(2);
        let x0 = PhasePoint::from_slices(&[0.3, 0.1], &[0.4, -0.2]).unwrap();
        let hs = default_horizons();
        for side in [Side::Minus, Side::Plus] {
            let g = green_bundle(&h, &x0, side, &hs, &GreenOptions::default()).unwrap();
            let sign = if side == Side::Minus { -1.0 } else { 1.0 };
            let mut last = f64::INFINITY;
            for (t, s) in &g.history {
                let expect = DMatrix::<f64>::identity(2, 2) * (sign / t);
                assert!((s - expect).norm() < 1e-14);
                assert!(s.amax() < last);
                last = s.amax();
            }
            assert_eq!(g.symmetry_error, 0.0);
            // Spectral norm of (2⁻¹³ − 2⁻¹⁴) I.
            assert!((g.residual - 1.0 / 16384.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hyperbolic_point_slopes() {
        // V″(0) = −4π² for cos(2πq): stable slope −2π, unstable +2π.
        let h = Mechanical::pendulum();
        let x0 = PhasePoint::from_slices(&[0.0], &[0.0]).unwrap();
        let hs = [1.0, 2.0, 4.0, 8.0];
        let opts = GreenOptions { flow: FlowOptions::integrated(), ..Default::default() };
        let gm = green_bundle(&h, &x0, Side::Minus, &hs, &opts).unwrap();
        let gp = green_bundle(&h, &x0, Side::Plus, &hs, &opts).unwrap();
        assert!((gm.symmetric_matrix[(0, 0)] + 2.0 * PI).abs() < 1e-8);
        assert!((gp.symmetric_matrix[(0, 0)] - 2.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn forward_bounded_vector_lies_in_minus_bundle() {
        let h = Mechanical::pendulum();
        let x0 = PhasePoint::from_slices(&[0.0], &[0.0]).unwrap();
        let stable = DVector::from_vec(vec![1.0, -2.0 * PI]);
        let unstable = DVector::from_vec(vec![1.0, 2.0 * PI]);
        // Rounding leaks into the unstable mode at rate e^{2πt}, so keep t small.
        let hs = [0.5, 1.0];
        let (fwd, _) = boundedness_probe(&h, &x0, &stable, &hs, &FlowOptions::integrated()).unwrap();
        let (fwd_u, bwd_u) =
            boundedness_probe(&h, &x0, &unstable, &hs, &FlowOptions::integrated()).unwrap();
        let decay = (-2.0 * PI).exp() * stable.norm();
        assert!((fwd - decay).abs() < 1e-6 * stable.norm());
        assert!(fwd_u > 1e2 && bwd_u < 0.02);
        let opts = GreenOptions { flow: FlowOptions::integrated(), ..Default::default() };
        let gm = green_bundle(&h, &x0, Side::Minus, &[4.0, 8.0], &opts).unwrap();
        let slope = stable[1] / stable[0];
        assert!((gm.symmetric_matrix[(0, 0)] - slope).abs() < 1e-8);
    }

    #[test]
    fn flat_probe_closed_forms() {
        let h = Mechanical::flat(2);
        let x0 = PhasePoint::from_slices(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let hs = [0.5, 1.0, 10.0];
        let horiz = DVector::from_vec(vec![0.6, 0.8, 0.0, 0.0]);
        let (f, b) = boundedness_probe(&h, &x0, &horiz, &hs, &FlowOptions::default()).unwrap();
        assert!((f - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        let vert = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let (f, _) = boundedness_probe(&h, &x0, &vert, &hs, &FlowOptions::default()).unwrap();
        assert!((f - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn p1_frame_images() {
        use crate::submanifold::{ParamSubmanifold, PropP1Torus};
        let m = PropP1Torus::default();
        let th = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let x0 = m.embed(&th);
        let jac = m.jacobian(&th);
        let hs = [1.0, 5.0, 20.0];
        let opts = FlowOptions::default();
        for i in 0..2 {
            let e = jac.column(i).into_owned();
            let (f, b) = boundedness_probe(&Mechanical::flat(3), &x0, &e, &hs, &opts).unwrap();
            assert!((f - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        }
        // Dφ_t e₃ = (e₃_q + t e₃_p, e₃_p): affine in t, so unbounded.
        let e3 = jac.column(2).into_owned();
        let (f, b) = boundedness_probe(&Mechanical::flat(3), &x0, &e3, &hs, &opts).unwrap();
        let dp = e3.rows(3, 3).into_owned();
        let at = |t: f64| (e3.rows(0, 3) + &dp * t).norm().hypot(dp.norm());
        assert!((f - at(1.0)).abs() < 1e-12);
        assert!((b - at(-1.0)).abs() < 1e-12);
    }

    #[test]
    fn conjugate_orbit_is_rejected() {
        // Libration around q = ½ has conjugate points every half unit.
        let h = Mechanical::pendulum();
        let x0 = PhasePoint::from_slices(&[0.5], &[0.0]).unwrap();
        let r = green_bundle(&h, &x0, Side::Minus, &[1.0, 2.0], &GreenOptions::default());
        assert!(matches!(r, Err(Error::NotAGraph { .. })));
    }

    #[test]
    fn horizons_validated() {
        let h = Mechanical::flat(1);
        let x0 = PhasePoint::from_slices(&[0.0], &[0.0]).unwrap();
        let o = GreenOptions::default();
        assert!(green_bundle(&h, &x0, Side::Minus, &[], &o).is_err());
        assert!(green_bundle(&h, &x0, Side::Minus, &[2.0, 1.0], &o).is_err());
    }
}
