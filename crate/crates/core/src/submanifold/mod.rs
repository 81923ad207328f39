//! Parametrized submanifolds `j: T^k → T*T^d` and their pointwise analysis.
//!
//! Embeddings return lifted points that depend continuously on `θ ∈ R^k`, so
//! finite differences and winding counts never see a wrap.

mod characteristic;
mod embeddings;
mod section;
mod stokes;
mod topology;

pub use characteristic::{
    characteristic_field, characteristic_flow, cocycle_factor, leaf_fill_ratio, period_scan,
    CharacteristicField, CocycleFactor, FlowCurve, PeriodReport, PeriodScan, PeriodScanOptions,
};
pub use embeddings::{Eta, HermanTorus, PropP1Torus, SeparatrixTorus, ZeroSection};
pub use section::{section_from_average, ConstantField, ParamField, SectionField};
pub use stokes::{stokes_check, ParamSurface, StokesDomain};
pub use topology::{graph_test, homotopy_degree, GraphWitness, GraphVerdict};

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::integrate::{advance, FlowOptions, State};
use crate::symplectic::{
    kernel, lagrangian_defect, raw_form_defect, restricted_form, wrap_centered, PhasePoint,
    SubspaceFrame, RANK_TOL,
};

/// Central-difference step for embeddings without an analytic Jacobian.
pub const FD_STEP: f64 = 1e-5;

pub trait ParamSubmanifold: Send + Sync {
    fn name(&self) -> String;
    fn param_dim(&self) -> usize;
    fn phase_dim(&self) -> usize;
    /// Lifted image `j(θ)`.
    fn embed(&self, theta: &DVector<f64>) -> PhasePoint;
    /// `2d × k` matrix `Dj(θ)`; central differences unless overridden.
    fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        fd_jacobian(self, theta)
    }
}

pub fn fd_jacobian<M: ParamSubmanifold + ?Sized>(m: &M, theta: &DVector<f64>) -> DMatrix<f64> {
    let k = m.param_dim();
    let d = m.phase_dim();
    let mut jac = DMatrix::zeros(2 * d, k);
    for i in 0..k {
        let mut a = theta.clone();
        let mut b = theta.clone();
        a[i] += FD_STEP;
        b[i] -= FD_STEP;
        let col = (m.embed(&a).to_vector() - m.embed(&b).to_vector()) / (2.0 * FD_STEP);
        jac.set_column(i, &col);
    }
    jac
}

/// Tangent frame `Dj(θ)`, failing where `j` is not an immersion.
pub fn tangent_frame(m: &dyn ParamSubmanifold, theta: &DVector<f64>) -> Result<SubspaceFrame> {
    SubspaceFrame::new(m.jacobian(theta))
}

/// Phase-space displacement from `a` to `b` with the torus part in
/// `[−½, ½)`.
pub fn displacement(a: &PhasePoint, b: &PhasePoint) -> DVector<f64> {
    a.displacement_to(b).to_vector()
}

/// Flat distance on `T^d × R^d`.
pub fn phase_distance(a: &PhasePoint, b: &PhasePoint) -> f64 {
    displacement(a, b).norm()
}

/// Uniform periodic grid `θ_i = i / n` per axis, row-major with the last
/// axis fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Grid {
    pub shape: Vec<usize>,
}

impl Grid {
    pub fn new(shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidArgument("grid needs a positive count per axis".into()));
        }
        Ok(Self { shape })
    }

    pub fn uniform(k: usize, n: usize) -> Self {
        Self { shape: vec![n; k] }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = idx % self.shape[a];
            idx /= self.shape[a];
        }
        out
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i % n)
    }

    pub fn theta(&self, idx: usize) -> DVector<f64> {
        let mi = self.multi_index(idx);
        DVector::from_iterator(self.dim(), mi.iter().zip(&self.shape).map(|(&i, &n)| i as f64 / n as f64))
    }

    /// Index of the next point along `axis`, wrapping.
    pub fn step(&self, idx: usize, axis: usize) -> usize {
        let mut mi = self.multi_index(idx);
        mi[axis] = (mi[axis] + 1) % self.shape[axis];
        self.flat_index(&mi)
    }

    /// Index of the grid point nearest to `θ` (mod 1).
    pub fn nearest(&self, theta: &DVector<f64>) -> usize {
        let mi: Vec<usize> = theta
            .iter()
            .zip(&self.shape)
            .map(|(&t, &n)| ((t.rem_euclid(1.0) * n as f64).round() as usize) % n)
            .collect();
        self.flat_index(&mi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePoint {
    pub theta: DVector<f64>,
    pub point: PhasePoint,
    pub form: DMatrix<f64>,
    pub kernel_dim: usize,
    /// Frame-independent defect; `NaN` when `k ≠ d`.
    pub defect: f64,
    /// Largest `|ω(∂_i j, ∂_j j)|`.
    pub raw_defect: f64,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleReport {
    pub grid: Grid,
    pub points: Vec<SamplePoint>,
    /// Kernel dimension → number of grid points.
    pub histogram: BTreeMap<usize, usize>,
    pub rank_constant: bool,
}

impl SampleReport {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let k = self.grid.dim();
        let mut header: Vec<String> = (1..=k).map(|i| format!("theta{i}")).collect();
        header.extend(["kernel_dim", "defect", "raw_defect"].map(String::from));
        wr.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        for p in &self.points {
            let mut row: Vec<String> = p.theta.iter().map(|v| v.to_string()).collect();
            row.push(p.kernel_dim.to_string());
            row.push(p.defect.to_string());
            row.push(p.raw_defect.to_string());
            wr.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Pointwise rank analysis of `ω|T𝓛` over a grid.
pub fn sample(m: &dyn ParamSubmanifold, grid: &Grid) -> Result<SampleReport> {
    if grid.dim() != m.param_dim() {
        return Err(Error::DimensionMismatch { expected: m.param_dim(), got: grid.dim() });
    }
    let points: Vec<SamplePoint> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let theta = grid.theta(idx);
            let frame = tangent_frame(m, &theta).map_err(|_| Error::ImmersionFailure { index: idx })?;
            let form = restricted_form(&frame);
            let ker = kernel(&form, RANK_TOL);
            let defect = lagrangian_defect(&frame).unwrap_or(f64::NAN);
            Ok(SamplePoint {
                point: m.embed(&theta).normalized(),
                theta,
                raw_defect: raw_form_defect(&frame),
                form: form.entries,
                kernel_dim: ker.dim,
                defect,
                warnings: ker.warnings.len(),
            })
        })
        .collect::<Result<_>>()?;
    let mut histogram = BTreeMap::new();
    for p in &points {
        *histogram.entry(p.kernel_dim).or_insert(0) += 1;
    }
    let rank_constant = histogram.len() == 1;
    Ok(SampleReport { grid: grid.clone(), points, histogram, rank_constant })
}

/// Nearest-point projection onto a submanifold: brute-force search over a
/// coarse grid, then Gauss–Newton on the parameters.
pub struct Projector<'a> {
    m: &'a dyn ParamSubmanifold,
    seeds: Vec<(DVector<f64>, PhasePoint)>,
    pub max_iterations: usize,
    pub tol: f64,
}

impl<'a> Projector<'a> {
    /// Coarse grid of 16 points per axis.
    pub fn new(m: &'a dyn ParamSubmanifold) -> Self {
        Self::with_resolution(m, 16)
    }

    pub fn with_resolution(m: &'a dyn ParamSubmanifold, n: usize) -> Self {
        let grid = Grid::uniform(m.param_dim(), n);
        let seeds = (0..grid.len())
            .map(|i| {
                let th = grid.theta(i);
                let x = m.embed(&th);
                (th, x)
            })
            .collect();
        Self { m, seeds, max_iterations: 20, tol: 1e-10 }
    }

    /// `(θ*, distance)` with `j(θ*)` nearest to `x`.
    pub fn project(&self, x: &PhasePoint) -> Result<(DVector<f64>, f64)> {
        let (mut theta, mut best) = self
            .seeds
            .iter()
            .map(|(th, y)| (th, phase_distance(y, x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(th, dist)| (th.clone(), dist))
            .expect("non-empty seed grid");
        for _ in 0..self.max_iterations {
            let r = displacement(&self.m.embed(&theta), x);
            let jac = self.m.jacobian(&theta);
            let svd = jac.svd(true, true);
            let Ok(step) = svd.solve(&r, 1e-12) else { break };
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda > 1e-4 {
                let cand = &theta + &step * lambda;
                let dist = phase_distance(&self.m.embed(&cand), x);
                if dist <= best {
                    theta = cand;
                    best = dist;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted || step.norm() * lambda < self.tol {
                break;
            }
        }
        if !best.is_finite() {
            return Err(Error::RefinementDiverged { residual: best });
        }
        Ok((theta.map(|t| t.rem_euclid(1.0)), best))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub max_deviation: f64,
    /// `(grid index, t)` where the maximum was attained.
    pub worst: (usize, f64),
    pub points: usize,
}

/// Sup over grid points and times of the distance from `φ_t(j(θ))` to the
/// submanifold.
pub fn invariance_check(
    h: &dyn Hamiltonian,
    m: &dyn ParamSubmanifold,
    grid: &Grid,
    t_list: &[f64],
    opts: &FlowOptions,
) -> Result<InvarianceReport> {
    if h.dim() != m.phase_dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: m.phase_dim() });
    }
    let mut times: Vec<f64> = t_list.to_vec();
    times.sort_by(f64::total_cmp);
    let proj = Projector::new(m);
    let opts = FlowOptions { energy_tol: None, ..opts.clone() };
    let per_point: Vec<(usize, f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let x0 = m.embed(&grid.theta(idx));
            let mut state = State::new(&x0, None);
            let mut t_now = 0.0;
            let mut worst = (0.0, 0.0);
            for &t in &times {
                if opts.use_exact && h.exact_flow(&x0, 0.0).is_some() {
                    state = State::new(&x0, None);
                    advance(h, &mut state, t, &opts)?;
                } else {
                    advance(h, &mut state, t - t_now, &opts)?;
                }
                t_now = t;
                let (_, dist) = proj.project(&state.point().normalized())?;
                if dist > worst.0 {
                    worst = (dist, t);
                }
            }
            Ok((idx, worst.0, worst.1))
        })
        .collect::<Result<_>>()?;
    let (idx, dev, t) = per_point
        .into_iter()
        .fold((0, 0.0, 0.0), |acc, p| if p.1 > acc.1 { p } else { acc });
    Ok(InvarianceReport { max_deviation: dev, worst: (idx, t), points: grid.len() })
}

/// Largest ratio `d(φ_t x, φ_t y) / d(x, y)` over random nearby pairs on the
/// submanifold. A finite-horizon diagnostic.
pub fn lipschitz_sample(
    h: &dyn Hamiltonian,
    m: &dyn ParamSubmanifold,
    t: f64,
    pair_count: usize,
    seed: u64,
    opts: &FlowOptions,
) -> Result<f64> {
    if h.dim() != m.phase_dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: m.phase_dim() });
    }
    let k = m.param_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(DVector<f64>, DVector<f64>)> = (0..pair_count)
        .map(|_| {
            let a = DVector::from_fn(k, |_, _| rng.random::<f64>());
            let dir = unit_direction(&mut rng, k);
            let b = &a + dir * 1e-4;
            (a, b)
        })
        .collect();
    let opts = FlowOptions { energy_tol: None, ..opts.clone() };
    let ratios: Vec<f64> = pairs
        .par_iter()
        .map(|(a, b)| {
            let (xa, xb) = (m.embed(a), m.embed(b));
            let before = phase_distance(&xa, &xb);
            let mut sa = State::new(&xa, None);
            let mut sb = State::new(&xb, None);
            advance(h, &mut sa, t, &opts)?;
            advance(h, &mut sb, t, &opts)?;
            Ok(phase_distance(&sa.point(), &sb.point()) / before)
        })
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

fn unit_direction<R: Rng>(rng: &mut R, k: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(k, |_, _| 2.0 * rng.random::<f64>() - 1.0);
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Lifted difference `b − a` of torus parameters, in `[−½, ½)` per axis.
pub(crate) fn param_delta(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    (b - a).map(wrap_centered)
}
