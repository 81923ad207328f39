//! Flow and tangent-flow integration.
//!
//! Separable Hamiltonians use Störmer–Verlet (kick–drift–kick), optionally
//! composed into the 4th- or 6th-order symmetric schemes of Yoshida;
//! everything else uses classical RK4. The variational equation
//! `δẋ = J Hess H(φ_t x) δx` is advanced by the same scheme on the augmented
//! state, so the discrete tangent map is the exact derivative of the discrete
//! flow map (and is symplectic for the splitting schemes).

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{linearized_field, Hamiltonian};
use crate::symplectic::{symplectic_defect, PhasePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Splitting for separable `H`, RK4 otherwise.
    Auto,
    Verlet,
    Yoshida4,
    Yoshida6,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub step: f64,
    pub scheme: Scheme,
    /// Use the Hamiltonian's closed-form flow when it has one.
    pub use_exact: bool,
    /// Maximum `|H(x_t) − H(x_0)|` tolerated before failing.
    pub energy_tol: Option<f64>,
    pub max_horizon: f64,
    /// Record a sample every this many steps (the endpoint is always kept).
    pub record_every: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            scheme: Scheme::Auto,
            use_exact: true,
            energy_tol: Some(1e-6),
            max_horizon: 1e6,
            record_every: 1,
        }
    }
}

impl FlowOptions {
    pub fn integrated() -> Self {
        Self { use_exact: false, ..Self::default() }
    }
}

const MIN_STEP: f64 = 1e-12;

fn yoshida4() -> Vec<f64> {
    let c = 2f64.powf(1.0 / 3.0);
    let w1 = 1.0 / (2.0 - c);
    let w0 = -c / (2.0 - c);
    vec![w1, w0, w1]
}

fn yoshida6() -> Vec<f64> {
    let w1 = -1.177_679_984_178_87;
    let w2 = 0.235_573_213_359_357;
    let w3 = 0.784_513_610_477_560;
    let w0 = 1.0 - 2.0 * (w1 + w2 + w3);
    vec![w3, w2, w1, w0, w1, w2, w3]
}

/// Resolves `Auto` for a given Hamiltonian.
pub fn effective_scheme(h: &dyn Hamiltonian, scheme: Scheme) -> Scheme {
    match scheme {
        Scheme::Auto if h.is_separable() => Scheme::Yoshida4,
        Scheme::Auto => Scheme::Rk4,
        s => s,
    }
}

/// Phase state plus optional tangent columns (`2d × m`), in lifted
/// coordinates.
#[derive(Debug, Clone)]
pub struct State {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    pub cols: Option<DMatrix<f64>>,
}

impl State {
    pub fn new(x: &PhasePoint, cols: Option<DMatrix<f64>>) -> Self {
        Self { q: x.q.clone(), p: x.p.clone(), cols }
    }

    pub fn point(&self) -> PhasePoint {
        PhasePoint::lifted(self.q.clone(), self.p.clone())
    }

    fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|v| v.is_finite())
            && self.cols.as_ref().is_none_or(|c| c.iter().all(|v| v.is_finite()))
    }
}

fn verlet_step(h: &dyn Hamiltonian, s: &mut State, dt: f64) {
    let d = h.dim();
    let half = 0.5 * dt;
    let kick = |s: &mut State, tau: f64| {
        let g = h.grad_q(&s.q, &s.p);
        s.p.axpy(-tau, &g, 1.0);
        if let Some(c) = s.cols.as_mut() {
            let vqq = h.hess_qq(&s.q, &s.p);
            let dq = c.rows(0, d).into_owned();
            let upd = vqq * dq * tau;
            let mut dp = c.rows_mut(d, d);
            dp -= upd;
        }
    };
    kick(s, half);
    let v = h.grad_p(&s.q, &s.p);
    s.q.axpy(dt, &v, 1.0);
    if let Some(c) = s.cols.as_mut() {
        let tpp = h.hess_pp(&s.q, &s.p);
        let dp = c.rows(d, d).into_owned();
        let upd = tpp * dp * dt;
        let mut dq = c.rows_mut(0, d);
        dq += upd;
    }
    kick(s, half);
}

fn rk4_step(h: &dyn Hamiltonian, s: &mut State, dt: f64) {
    let deriv = |q: &DVector<f64>, p: &DVector<f64>, c: Option<&DMatrix<f64>>| {
        let dq = h.grad_p(q, p);
        let dp = -h.grad_q(q, p);
        let dc = c.map(|c| linearized_field(h, q, p) * c);
        (dq, dp, dc)
    };
    let (k1q, k1p, k1c) = deriv(&s.q, &s.p, s.cols.as_ref());
    let add = |c: Option<&DMatrix<f64>>, k: &Option<DMatrix<f64>>, a: f64| match (c, k) {
        (Some(c), Some(k)) => Some(c + k * a),
        _ => None,
    };
    let (k2q, k2p, k2c) = deriv(
        &(&s.q + &k1q * (0.5 * dt)),
        &(&s.p + &k1p * (0.5 * dt)),
        add(s.cols.as_ref(), &k1c, 0.5 * dt).as_ref(),
    );
    let (k3q, k3p, k3c) = deriv(
        &(&s.q + &k2q * (0.5 * dt)),
        &(&s.p + &k2p * (0.5 * dt)),
        add(s.cols.as_ref(), &k2c, 0.5 * dt).as_ref(),
    );
    let (k4q, k4p, k4c) = deriv(
        &(&s.q + &k3q * dt),
        &(&s.p + &k3p * dt),
        add(s.cols.as_ref(), &k3c, dt).as_ref(),
    );
    let w = dt / 6.0;
    s.q += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * w;
    s.p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * w;
    if let (Some(c), Some(k1), Some(k2), Some(k3), Some(k4)) = (s.cols.as_mut(), k1c, k2c, k3c, k4c)
    {
        *c += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * w;
    }
}

/// One step of the given scheme (already resolved, not `Auto`).
pub fn step(h: &dyn Hamiltonian, scheme: Scheme, s: &mut State, dt: f64) {
    match scheme {
        Scheme::Verlet => verlet_step(h, s, dt),
        Scheme::Yoshida4 => yoshida4().into_iter().for_each(|w| verlet_step(h, s, w * dt)),
        Scheme::Yoshida6 => yoshida6().into_iter().for_each(|w| verlet_step(h, s, w * dt)),
        Scheme::Rk4 | Scheme::Auto => rk4_step(h, s, dt),
    }
}

fn check_request(h: &dyn Hamiltonian, x0: &PhasePoint, t: f64, opts: &FlowOptions) -> Result<()> {
    if x0.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: x0.dim() });
    }
    if !t.is_finite() || t.abs() > opts.max_horizon {
        return Err(Error::InvalidArgument(format!(
            "horizon {t} outside [-{0}, {0}]",
            opts.max_horizon
        )));
    }
    if !(opts.step >= MIN_STEP) {
        return Err(Error::StepUnderflow { step: opts.step, t: 0.0 });
    }
    Ok(())
}

/// Advances `state` by time `t` without recording; the workhorse behind
/// every other routine here. Returns the number of steps taken.
pub fn advance(
    h: &dyn Hamiltonian,
    state: &mut State,
    t: f64,
    opts: &FlowOptions,
) -> Result<usize> {
    if t == 0.0 {
        return Ok(0);
    }
    if opts.use_exact {
        let x = state.point();
        if let Some(y) = h.exact_flow(&x, t) {
            if let Some(c) = state.cols.as_mut() {
                let Some(j) = h.exact_jacobian(&x, t) else {
                    return advance(h, state, t, &FlowOptions { use_exact: false, ..opts.clone() });
                };
                *c = j * &*c;
            }
            state.q = y.q;
            state.p = y.p;
            return Ok(1);
        }
    }
    let n = (t.abs() / opts.step).ceil().max(1.0) as usize;
    let dt = t / n as f64;
    if dt.abs() < MIN_STEP {
        return Err(Error::StepUnderflow { step: dt, t });
    }
    let scheme = effective_scheme(h, opts.scheme);
    for _ in 0..n {
        step(h, scheme, state, dt);
    }
    if !state.is_finite() {
        return Err(Error::Evaluator(format!("{} diverged before t = {t}", h.name())));
    }
    Ok(n)
}

/// Lifted endpoint `φ_t(x)`.
pub fn flow_point(h: &dyn Hamiltonian, x: &PhasePoint, t: f64, opts: &FlowOptions) -> Result<PhasePoint> {
    check_request(h, x, t, opts)?;
    let mut s = State::new(x, None);
    advance(h, &mut s, t, opts)?;
    Ok(s.point())
}

/// Lifted endpoint and `Dφ_t(x)`.
pub fn flow_with_jacobian(
    h: &dyn Hamiltonian,
    x: &PhasePoint,
    t: f64,
    opts: &FlowOptions,
) -> Result<(PhasePoint, DMatrix<f64>)> {
    check_request(h, x, t, opts)?;
    let d = h.dim();
    let mut s = State::new(x, Some(DMatrix::identity(2 * d, 2 * d)));
    advance(h, &mut s, t, opts)?;
    let j = s.cols.take().expect("tangent columns present");
    Ok((s.point(), j))
}

/// A sampled orbit. `times` run from 0 towards `t` (decreasing when `t < 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub energy: Vec<f64>,
}

impl Trajectory {
    pub fn endpoint(&self) -> &PhasePoint {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    /// CSV with columns `t, q1..qd, p1..pd, H`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = self.states.first().map_or(0, PhasePoint::dim);
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("q{i}")));
        header.extend((1..=d).map(|i| format!("p{i}")));
        header.push("H".into());
        wtr.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        for ((t, x), e) in self.times.iter().zip(&self.states).zip(&self.energy) {
            let mut row = vec![format!("{t:.17e}")];
            row.extend(x.q.iter().map(|v| format!("{v:.17e}")));
            row.extend(x.p.iter().map(|v| format!("{v:.17e}")));
            row.push(format!("{e:.17e}"));
            wtr.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentTrajectory {
    pub base: Trajectory,
    pub jacobians: Vec<DMatrix<f64>>,
}

impl TangentTrajectory {
    pub fn max_symplectic_defect(&self) -> f64 {
        self.jacobians.iter().map(symplectic_defect).fold(0.0, f64::max)
    }
}

fn run(
    h: &dyn Hamiltonian,
    x0: &PhasePoint,
    t: f64,
    opts: &FlowOptions,
    tangent: bool,
) -> Result<(Trajectory, Vec<DMatrix<f64>>)> {
    check_request(h, x0, t, opts)?;
    let d = h.dim();
    let e0 = h.energy(&x0.q, &x0.p);
    let mut state = State::new(x0, tangent.then(|| DMatrix::identity(2 * d, 2 * d)));
    let mut traj = Trajectory { times: vec![0.0], states: vec![x0.clone().normalized()], energy: vec![e0] };
    let mut jacs = if tangent { vec![DMatrix::identity(2 * d, 2 * d)] } else { Vec::new() };
    if t == 0.0 {
        return Ok((traj, jacs));
    }
    let n = (t.abs() / opts.step).ceil().max(1.0) as usize;
    let dt = t / n as f64;
    let every = opts.record_every.max(1);
    let exact = opts.use_exact && h.exact_flow(x0, 0.0).is_some();
    let scheme = effective_scheme(h, opts.scheme);
    for k in 1..=n {
        let tk = dt * k as f64;
        if exact {
            state = State::new(x0, tangent.then(|| DMatrix::identity(2 * d, 2 * d)));
            advance(h, &mut state, tk, opts)?;
        } else {
            step(h, scheme, &mut state, dt);
        }
        if k % every == 0 || k == n {
            if !state.is_finite() {
                return Err(Error::Evaluator(format!("{} diverged at t = {tk}", h.name())));
            }
            let e = h.energy(&state.q, &state.p);
            if let Some(tol) = opts.energy_tol {
                if (e - e0).abs() > tol {
                    return Err(Error::EnergyDrift { drift: (e - e0).abs(), tol });
                }
            }
            traj.times.push(tk);
            traj.states.push(state.point().normalized());
            traj.energy.push(e);
            if let Some(c) = state.cols.as_ref() {
                jacs.push(c.clone());
            }
        }
    }
    Ok((traj, jacs))
}

/// Sampled orbit of `x0` up to time `t`.
pub fn flow(h: &dyn Hamiltonian, x0: &PhasePoint, t: f64, opts: &FlowOptions) -> Result<Trajectory> {
    run(h, x0, t, opts, false).map(|(tr, _)| tr)
}

/// Sampled orbit together with `Dφ_t(x0)` at each sample.
pub fn tangent_flow(
    h: &dyn Hamiltonian,
    x0: &PhasePoint,
    t: f64,
    opts: &FlowOptions,
) -> Result<TangentTrajectory> {
    run(h, x0, t, opts, true).map(|(base, jacobians)| TangentTrajectory { base, jacobians })
}
