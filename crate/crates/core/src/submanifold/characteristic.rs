//! Characteristic direction field `X ∈ ker ω|T𝓛` and its flow.
//!
//! `X` is normalized in the flat product metric on `T^d × R^d`. The flow is
//! integrated in parameter space: the kernel coefficients `c` satisfy
//! `Dj(θ) c = X(j(θ))`, so `θ̇ = c(θ)` stays on the manifold by construction.

use std::collections::VecDeque;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::{displacement, param_delta, Grid, ParamSubmanifold, Projector};
use crate::error::{Error, Result};
use crate::symplectic::{kernel, restricted_form, PhasePoint, SubspaceFrame, TangentVector, RANK_TOL};

/// Dj condition number beyond which the pullback is refused.
const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicField {
    pub grid: Grid,
    /// Unit `X` at each grid point.
    pub vectors: Vec<TangentVector>,
    /// Parameter velocities `c` with `Dj c = X`.
    pub coefficients: Vec<DVector<f64>>,
    /// Largest angle between `X` at adjacent grid points after alignment.
    pub max_neighbor_angle: f64,
}

/// Unit kernel direction at `θ` as `(c, X)`, sign unspecified.
fn kernel_direction(m: &dyn ParamSubmanifold, theta: &DVector<f64>, index: usize) -> Result<(DVector<f64>, DVector<f64>)> {
    let jac = m.jacobian(theta);
    let frame = SubspaceFrame::new(jac.clone()).map_err(|_| Error::ImmersionFailure { index })?;
    let ker = kernel(&restricted_form(&frame), RANK_TOL);
    if ker.dim != 1 {
        return Err(Error::KernelDimension { expected: 1, found: ker.dim, index });
    }
    let c = ker.basis.column(0).into_owned();
    let x = &jac * &c;
    let n = x.norm();
    Ok((c / n, x / n))
}

/// Sign convention at the root: first significant coefficient positive.
fn canonical_sign(c: &DVector<f64>) -> f64 {
    c.iter().find(|v| v.abs() > 1e-8).map_or(1.0, |v| v.signum())
}

/// Unit characteristic field on a grid, oriented by breadth-first sign
/// propagation from grid point 0.
pub fn characteristic_field(m: &dyn ParamSubmanifold, grid: &Grid) -> Result<CharacteristicField> {
    if grid.dim() != m.param_dim() {
        return Err(Error::DimensionMismatch { expected: m.param_dim(), got: grid.dim() });
    }
    let raw: Vec<(DVector<f64>, DVector<f64>)> = (0..grid.len())
        .into_par_iter()
        .map(|i| kernel_direction(m, &grid.theta(i), i))
        .collect::<Result<_>>()?;
    let n = grid.len();
    let mut sign = vec![0.0f64; n];
    sign[0] = canonical_sign(&raw[0].0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let xi = &raw[i].1 * sign[i];
        for axis in 0..grid.dim() {
            for j in neighbors(grid, i, axis) {
                if sign[j] == 0.0 {
                    sign[j] = if raw[j].1.dot(&xi) < 0.0 { -1.0 } else { 1.0 };
                    queue.push_back(j);
                }
            }
        }
    }
    let mut max_angle = 0.0f64;
    for i in 0..n {
        for axis in 0..grid.dim() {
            let j = grid.step(i, axis);
            if i == j {
                continue;
            }
            let cos = (raw[i].1.dot(&raw[j].1) * sign[i] * sign[j]).clamp(-1.0, 1.0);
            if cos < 0.0 {
                return Err(Error::NonOrientable { index: i });
            }
            max_angle = max_angle.max(cos.acos());
        }
    }
    let (coefficients, vectors) = raw
        .into_iter()
        .zip(&sign)
        .map(|((c, x), &s)| (c * s, TangentVector::from_vector(&(x * s))))
        .unzip();
    Ok(CharacteristicField { grid: grid.clone(), vectors, coefficients, max_neighbor_angle: max_angle })
}

fn neighbors(grid: &Grid, i: usize, axis: usize) -> [usize; 2] {
    let mut mi = grid.multi_index(i);
    let n = grid.shape[axis];
    let fwd = grid.step(i, axis);
    mi[axis] = (mi[axis] + n - 1) % n;
    [fwd, grid.flat_index(&mi)]
}

impl CharacteristicField {
    /// Kernel coefficients at an arbitrary `θ`, oriented like the nearest
    /// grid sample.
    pub fn oriented_at(&self, m: &dyn ParamSubmanifold, theta: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let reference = self.vectors[self.grid.nearest(theta)].to_vector();
        let (c, x) = kernel_direction(m, theta, usize::MAX)?;
        Ok(if x.dot(&reference) < 0.0 { (-c, -x) } else { (c, x) })
    }
}

/// Sampled parameter-space curve in lifted coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowCurve {
    pub times: Vec<f64>,
    pub thetas: Vec<DVector<f64>>,
}

impl FlowCurve {
    pub fn endpoint(&self) -> &DVector<f64> {
        self.thetas.last().expect("curve has its start point")
    }
}

fn pullback(
    m: &dyn ParamSubmanifold,
    theta: &DVector<f64>,
    reference: &DVector<f64>,
    speed: f64,
) -> Result<DVector<f64>> {
    let jac = m.jacobian(theta);
    let sv = jac.singular_values();
    let cond = sv.max() / sv.min();
    if !(cond < MAX_CONDITION) {
        return Err(Error::IllConditioned { cond });
    }
    let (c, x) = kernel_direction(m, theta, usize::MAX)?;
    let s = if x.dot(reference) < 0.0 { -speed } else { speed };
    Ok(c * s)
}

fn rk4(
    m: &dyn ParamSubmanifold,
    theta: &DVector<f64>,
    h: f64,
    speed: f64,
    reference: &mut DVector<f64>,
) -> Result<DVector<f64>> {
    let k1 = pullback(m, theta, reference, speed)?;
    let k2 = pullback(m, &(theta + &k1 * (0.5 * h)), reference, speed)?;
    let k3 = pullback(m, &(theta + &k2 * (0.5 * h)), reference, speed)?;
    let k4 = pullback(m, &(theta + &k3 * h), reference, speed)?;
    let next = theta + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    *reference = m.jacobian(&next) * pullback(m, &next, reference, 1.0)?;
    Ok(next)
}

/// Integrates `θ̇ = speed · c(θ)` from `θ0` for time `t` with RK4 steps of at
/// most `step`, recording every step.
pub fn characteristic_flow(
    m: &dyn ParamSubmanifold,
    field: &CharacteristicField,
    theta0: &DVector<f64>,
    t: f64,
    step: f64,
    speed: f64,
) -> Result<FlowCurve> {
    if theta0.len() != m.param_dim() {
        return Err(Error::DimensionMismatch { expected: m.param_dim(), got: theta0.len() });
    }
    if !(step > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument("flow step must be positive and horizon finite".into()));
    }
    let n = (t.abs() / step).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let (_, mut reference) = field.oriented_at(m, theta0)?;
    let mut theta = theta0.clone();
    let mut curve = FlowCurve { times: Vec::with_capacity(n + 1), thetas: Vec::with_capacity(n + 1) };
    curve.times.push(0.0);
    curve.thetas.push(theta.clone());
    for k in 1..=n {
        theta = rk4(m, &theta, h, speed, &mut reference)?;
        curve.times.push(h * k as f64);
        curve.thetas.push(theta.clone());
    }
    Ok(curve)
}

/// Fraction of the `res × res` cells of the `(axes.0, axes.1)` parameter
/// 2-torus visited by a curve.
pub fn leaf_fill_ratio(curve: &FlowCurve, axes: (usize, usize), res: usize) -> f64 {
    let mut seen = vec![false; res * res];
    for th in &curve.thetas {
        let a = ((th[axes.0].rem_euclid(1.0) * res as f64) as usize).min(res - 1);
        let b = ((th[axes.1].rem_euclid(1.0) * res as f64) as usize).min(res - 1);
        seen[a * res + b] = true;
    }
    seen.iter().filter(|&&s| s).count() as f64 / (res * res) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodReport {
    pub start: DVector<f64>,
    pub period: f64,
    pub closure_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodScanOptions {
    pub horizon: f64,
    pub step: f64,
    pub speed: f64,
    pub loop_tol: f64,
}

impl Default for PeriodScanOptions {
    fn default() -> Self {
        Self { horizon: 100.0, step: 0.01, speed: 1.0, loop_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodScan {
    pub reports: Vec<PeriodReport>,
    /// Seeds (by index) without a detected return.
    pub failures: Vec<(usize, Error)>,
    pub min_period: Option<f64>,
    pub max_period: Option<f64>,
}

/// First return of the characteristic flow to each seed, in parameter
/// space.
pub fn period_scan(
    m: &dyn ParamSubmanifold,
    field: &CharacteristicField,
    seeds: &[DVector<f64>],
    opts: &PeriodScanOptions,
) -> PeriodScan {
    let results: Vec<Result<PeriodReport>> =
        seeds.par_iter().map(|s| first_return(m, field, s, opts)).collect();
    let mut scan = PeriodScan { reports: Vec::new(), failures: Vec::new(), min_period: None, max_period: None };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(rep) => scan.reports.push(rep),
            Err(e) => scan.failures.push((i, e)),
        }
    }
    let periods = scan.reports.iter().map(|r| r.period);
    scan.min_period = periods.clone().reduce(f64::min);
    scan.max_period = periods.reduce(f64::max);
    scan
}

fn first_return(
    m: &dyn ParamSubmanifold,
    field: &CharacteristicField,
    seed: &DVector<f64>,
    opts: &PeriodScanOptions,
) -> Result<PeriodReport> {
    let curve = characteristic_flow(m, field, seed, opts.horizon, opts.step, opts.speed)?;
    let dist: Vec<f64> = curve.thetas.iter().map(|th| param_delta(seed, th).norm()).collect();
    let h = curve.times[1];
    let near = 2.0 * h * opts.speed.abs();
    let mut left_start = false;
    for k in 1..dist.len() - 1 {
        if dist[k] > 2.0 * near {
            left_start = true;
        }
        if !left_start || dist[k] > near || dist[k] > dist[k - 1] || dist[k] > dist[k + 1] {
            continue;
        }
        let base = &curve.thetas[k - 1];
        let at = |tau: f64| -> Result<f64> {
            let end = characteristic_flow(m, field, base, tau, h / 4.0, opts.speed)?;
            Ok(param_delta(seed, end.endpoint()).norm())
        };
        let (tau, err) = golden_min(at, 0.0, 2.0 * h)?;
        if err < opts.loop_tol {
            return Ok(PeriodReport { start: seed.clone(), period: curve.times[k - 1] + tau, closure_error: err });
        }
    }
    Err(Error::NoReturn { horizon: opts.horizon })
}

fn golden_min(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (f(c)?, f(e)?);
    for _ in 0..80 {
        if (b - a).abs() < 1e-14 {
            break;
        }
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
    }
    Ok(if fc < fe { (c, fc) } else { (e, fe) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocycleFactor {
    pub lambda: f64,
    /// `‖Df X − λ X∘f‖`.
    pub residual: f64,
    /// Parameter of `f(j(θ))`.
    pub image_theta: DVector<f64>,
}

/// `λ` in `Df X(x) = λ X(f(x))` at `x = j(θ)`, for a map `f` preserving the
/// submanifold. `Df X` is a central difference along `X`.
pub fn cocycle_factor(
    f: &dyn Fn(&PhasePoint) -> Result<PhasePoint>,
    m: &dyn ParamSubmanifold,
    field: &CharacteristicField,
    theta: &DVector<f64>,
    tol: f64,
) -> Result<CocycleFactor> {
    let h = 1e-6;
    let (_, x_vec) = field.oriented_at(m, theta)?;
    let x = m.embed(theta);
    let d = m.phase_dim();
    let shifted = |s: f64| {
        PhasePoint::lifted(
            &x.q + x_vec.rows(0, d) * s,
            &x.p + x_vec.rows(d, d) * s,
        )
    };
    let y = f(&x)?;
    let (image_theta, dist) = Projector::new(m).project(&y.clone().normalized())?;
    if dist > 1e-6 {
        return Err(Error::RefinementDiverged { residual: dist });
    }
    let (_, x_img) = field.oriented_at(m, &image_theta)?;
    let dfx = displacement(&f(&shifted(-h))?, &f(&shifted(h))?) / (2.0 * h);
    let lambda = dfx.dot(&x_img);
    let residual = (&dfx - &x_img * lambda).norm();
    if residual > tol {
        return Err(Error::NonCollinear { residual });
    }
    Ok(CocycleFactor { lambda, residual, image_theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Mechanical;
    use crate::integrate::{flow_point, FlowOptions};
    use crate::submanifold::{PropP1Torus, ZeroSection};
    use std::f64::consts::PI;

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn p1_field_matches_closed_form() {
        let m = PropP1Torus::default();
        let f = characteristic_field(&m, &Grid::uniform(3, 16)).unwrap();
        for (i, x) in f.vectors.iter().enumerate() {
            let th = f.grid.theta(i);
            let a = 2.0 * PI * th[2];
            let expect = dv(&[a.cos(), a.sin(), 0.0, 0.0, 0.0, 0.0]);
            assert!((x.to_vector() - expect).norm() < 1e-12);
        }
        assert!(f.max_neighbor_angle < PI / 6.0);
    }

    #[test]
    fn lagrangian_manifold_has_no_line_field() {
        let r = characteristic_field(&ZeroSection { d: 2 }, &Grid::uniform(2, 4));
        assert!(matches!(r, Err(Error::KernelDimension { found: 2, .. })));
    }

    #[test]
    fn flow_closes_on_rational_leaves() {
        let m = PropP1Torus::default();
        let f = characteristic_field(&m, &Grid::uniform(3, 8)).unwrap();
        let c = characteristic_flow(&m, &f, &dv(&[0.0, 0.0, 0.0]), 1.0, 0.01, 1.0).unwrap();
        assert!((c.endpoint() - dv(&[1.0, 0.0, 0.0])).norm() < 1e-12);
        let seeds = [dv(&[0.0, 0.0, 0.125]), dv(&[0.3, 0.6, 0.125])];
        let s = period_scan(&m, &f, &seeds, &PeriodScanOptions { horizon: 3.0, ..Default::default() });
        assert!(s.failures.is_empty());
        for r in &s.reports {
            assert!((r.period - 2f64.sqrt()).abs() < 1e-8);
            assert!(r.closure_error < 1e-8);
        }
    }

    #[test]
    fn doubled_speed_halves_the_period() {
        let m = PropP1Torus::default();
        let f = characteristic_field(&m, &Grid::uniform(3, 8)).unwrap();
        let seeds = [dv(&[0.2, 0.1, 0.0])];
        let opts = PeriodScanOptions { horizon: 3.0, speed: 2.0, ..Default::default() };
        let s = period_scan(&m, &f, &seeds, &opts);
        assert!((s.min_period.unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn irrational_leaf_does_not_return() {
        let m = PropP1Torus::default();
        let f = characteristic_field(&m, &Grid::uniform(3, 8)).unwrap();
        let s = period_scan(&m, &f, &[dv(&[0.0, 0.0, 0.1])], &PeriodScanOptions { horizon: 20.0, ..Default::default() });
        assert!(s.reports.is_empty());
        assert!(matches!(s.failures[0].1, Error::NoReturn { .. }));
    }

    #[test]
    fn cocycle_factor_examples() {
        let m = PropP1Torus::default();
        let field = characteristic_field(&m, &Grid::uniform(3, 8)).unwrap();
        let th = dv(&[0.1, 0.2, 0.3]);
        let h = Mechanical::flat(3);
        let flow = |x: &PhasePoint| flow_point(&h, x, 2.5, &FlowOptions::default());
        let c = cocycle_factor(&flow, &m, &field, &th, 1e-6).unwrap();
        assert!((c.lambda - 1.0).abs() < 1e-8);
        let shift = |x: &PhasePoint| Ok(PhasePoint::lifted(&x.q + dv(&[0.37, 0.0, 0.0]), x.p.clone()));
        let c = cocycle_factor(&shift, &m, &field, &th, 1e-9).unwrap();
        assert!((c.lambda - 1.0).abs() < 1e-9 && c.residual < 1e-9);

        let z = ZeroSection { d: 1 };
        let zf = characteristic_field(&z, &Grid::uniform(1, 8)).unwrap();
        let id = |x: &PhasePoint| Ok(x.clone());
        let c = cocycle_factor(&id, &z, &zf, &dv(&[0.4]), 1e-9).unwrap();
        assert!((c.lambda - 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_symplectic_map_breaks_collinearity() {
        // Shearing θ₁ by θ₃ preserves the torus but not ω.
        let m = PropP1Torus::default();
        let field = characteristic_field(&m, &Grid::uniform(3, 8)).unwrap();
        let shear = |x: &PhasePoint| {
            let mut q = x.q.clone();
            q[2] += 0.3 * x.q[0];
            Ok(PhasePoint::lifted(q, {
                let a = 2.0 * PI * (x.q[2] + 0.3 * x.q[0]);
                dv(&[a.cos(), a.sin(), 0.0])
            }))
        };
        let r = cocycle_factor(&shear, &m, &field, &dv(&[0.1, 0.2, 0.3]), 1e-6);
        assert!(matches!(r, Err(Error::NonCollinear { .. })));
    }
}
