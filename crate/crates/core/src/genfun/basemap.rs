//! Lifts `f̃: R^d → R^d` of torus maps isotopic to the identity.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INVERSE_TOL: f64 = 1e-14;
const INVERSE_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseMap {
    Identity { d: usize },
    Translation { c: Vec<f64> },
    /// `q_i ↦ q_i + ε sin(2πq_i)/(2π)` componentwise.
    Sine { epsilon: f64, d: usize },
    /// `q ↦ Mq + c`; equivariant only when `M − I` is integral.
    Affine { m: Vec<Vec<f64>>, c: Vec<f64> },
    /// Periodic displacement `f̃(q) − q` sampled on a uniform grid, row-major
    /// with the last axis fastest, interpolated by tensor Catmull–Rom splines.
    Tabulated { shape: Vec<usize>, displacement: Vec<Vec<f64>> },
    /// `next ∘ prev⁻¹`, the inverse by Newton.
    Factor { next: Box<BaseMap>, prev: Box<BaseMap> },
}

/// Sampled distance to the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Closeness {
    /// `sup ‖f̃(q) − q‖`.
    pub displacement: f64,
    /// `sup ‖Df̃(q) − I‖₂`.
    pub jacobian: f64,
}

impl BaseMap {
    pub fn identity(d: usize) -> Self {
        BaseMap::Identity { d }
    }

    pub fn translation(c: &[f64]) -> Self {
        BaseMap::Translation { c: c.to_vec() }
    }

    pub fn sine(epsilon: f64, d: usize) -> Self {
        BaseMap::Sine { epsilon, d }
    }

    pub fn affine(m: &DMatrix<f64>, c: &[f64]) -> Self {
        let rows = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        BaseMap::Affine { m: rows, c: c.to_vec() }
    }

    /// Samples the displacement of `map` on an `n^d` grid.
    pub fn tabulate(map: &BaseMap, n: usize) -> Result<Self> {
        let d = map.dim();
        if n < 4 {
            return Err(Error::InvalidArgument("tabulated maps need at least 4 nodes per axis".into()));
        }
        let total = n.pow(d as u32);
        let displacement = (0..total)
            .map(|idx| {
                let q = grid_point(idx, &vec![n; d]);
                (map.eval(&q) - &q).iter().copied().collect()
            })
            .collect();
        Ok(BaseMap::Tabulated { shape: vec![n; d], displacement })
    }

    pub fn dim(&self) -> usize {
        match self {
            BaseMap::Identity { d } | BaseMap::Sine { d, .. } => *d,
            BaseMap::Translation { c } | BaseMap::Affine { c, .. } => c.len(),
            BaseMap::Tabulated { shape, .. } => shape.len(),
            BaseMap::Factor { next, .. } => next.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaseMap::Identity { d } | BaseMap::Sine { d, .. } if *d == 0 => {
                Err(Error::InvalidArgument("base map dimension must be positive".into()))
            }
            BaseMap::Translation { c } if c.is_empty() => {
                Err(Error::InvalidArgument("translation needs a non-empty vector".into()))
            }
            BaseMap::Affine { m, c } => {
                if c.is_empty() || m.len() != c.len() || m.iter().any(|r| r.len() != c.len()) {
                    return Err(Error::InvalidArgument("affine map needs a square matrix matching c".into()));
                }
                Ok(())
            }
            BaseMap::Tabulated { shape, displacement } => {
                let d = shape.len();
                if d == 0 || shape.iter().any(|&n| n < 4) {
                    return Err(Error::InvalidArgument("tabulated maps need at least 4 nodes per axis".into()));
                }
                let total: usize = shape.iter().product();
                if displacement.len() != total || displacement.iter().any(|v| v.len() != d) {
                    return Err(Error::InvalidArgument(format!(
                        "tabulated map expects {total} displacement vectors of length {d}"
                    )));
                }
                Ok(())
            }
            BaseMap::Factor { next, prev } => {
                next.validate()?;
                prev.validate()?;
                if next.dim() != prev.dim() {
                    return Err(Error::DimensionMismatch { expected: next.dim(), got: prev.dim() });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, q: &DVector<f64>) -> DVector<f64> {
        self.eval_with_jacobian(q).0
    }

    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.eval_with_jacobian(q).1
    }

    /// `(f̃(q), Df̃(q))`. A factor whose inverse fails returns NaN.
    pub fn eval_with_jacobian(&self, q: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let d = q.len();
        match self {
            BaseMap::Identity { .. } => (q.clone(), DMatrix::identity(d, d)),
            BaseMap::Translation { c } => (q + DVector::from_column_slice(c), DMatrix::identity(d, d)),
            BaseMap::Sine { epsilon, .. } => {
                let f = q.map(|x| x + epsilon * (2.0 * PI * x).sin() / (2.0 * PI));
                let df = DMatrix::from_diagonal(&q.map(|x| 1.0 + epsilon * (2.0 * PI * x).cos()));
                (f, df)
            }
            BaseMap::Affine { m, c } => {
                let mm = DMatrix::from_fn(d, d, |i, j| m[i][j]);
                (&mm * q + DVector::from_column_slice(c), mm)
            }
            BaseMap::Tabulated { shape, displacement } => catmull_rom(shape, displacement, q),
            BaseMap::Factor { next, prev } => match prev.inverse(q) {
                Ok(y) => {
                    let (f, dn) = next.eval_with_jacobian(&y);
                    let dp = prev.jacobian(&y);
                    match dp.lu().solve(&DMatrix::identity(d, d)) {
                        Some(inv) => (f, dn * inv),
                        None => nan(d),
                    }
                }
                Err(_) => nan(d),
            },
        }
    }

    /// Writes `f̃(x)` into `f` and `Df̃(x)` (row-major) into `df` without
    /// allocating for the closed-form variants.
    pub(crate) fn eval_into(&self, x: &[f64], f: &mut [f64], df: &mut [f64]) {
        let d = x.len();
        match self {
            BaseMap::Identity { .. } | BaseMap::Translation { .. } | BaseMap::Sine { .. } => {
                df.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..d {
                    let (fi, dfi) = match self {
                        BaseMap::Translation { c } => (x[i] + c[i], 1.0),
                        BaseMap::Sine { epsilon, .. } => {
                            let (s, c) = (2.0 * PI * x[i]).sin_cos();
                            (x[i] + epsilon * s / (2.0 * PI), 1.0 + epsilon * c)
                        }
                        _ => (x[i], 1.0),
                    };
                    f[i] = fi;
                    df[i * d + i] = dfi;
                }
            }
            BaseMap::Affine { m, c } => {
                for i in 0..d {
                    f[i] = c[i] + (0..d).map(|j| m[i][j] * x[j]).sum::<f64>();
                    for j in 0..d {
                        df[i * d + j] = m[i][j];
                    }
                }
            }
            _ => {
                let (fv, dfv) = self.eval_with_jacobian(&DVector::from_column_slice(x));
                f.copy_from_slice(fv.as_slice());
                for i in 0..d {
                    for j in 0..d {
                        df[i * d + j] = dfv[(i, j)];
                    }
                }
            }
        }
    }

    /// `f̃⁻¹(q)` by Newton from `q − (f̃(q) − q)`.
    pub fn inverse(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            BaseMap::Identity { .. } => return Ok(q.clone()),
            BaseMap::Translation { c } => return Ok(q - DVector::from_column_slice(c)),
            _ => {}
        }
        let mut y = q * 2.0 - self.eval(q);
        let mut residual = f64::INFINITY;
        for _ in 0..INVERSE_MAX_ITER {
            let (f, df) = self.eval_with_jacobian(&y);
            let r = f - q;
            residual = r.norm();
            if !residual.is_finite() {
                break;
            }
            if residual <= INVERSE_TOL * (1.0 + q.norm()) {
                return Ok(y);
            }
            let Some(step) = df.lu().solve(&r) else { break };
            y -= step;
        }
        Err(Error::NewtonFailure { iterations: INVERSE_MAX_ITER, residual, iterate: y.iter().copied().collect() })
    }

    /// Sup distances to the identity over an `n^d` grid of the unit cube.
    pub fn closeness(&self, n: usize) -> Closeness {
        let d = self.dim();
        let shape = vec![n.max(1); d];
        let total: usize = shape.iter().product();
        let mut out = Closeness { displacement: 0.0, jacobian: 0.0 };
        for idx in 0..total {
            let q = grid_point(idx, &shape);
            let (f, df) = self.eval_with_jacobian(&q);
            let diff = df - DMatrix::identity(d, d);
            let jd = if diff.iter().all(|v| v.is_finite()) { diff.singular_values().max() } else { f64::INFINITY };
            out.displacement = out.displacement.max((f - &q).norm());
            out.jacobian = out.jacobian.max(jd);
        }
        out
    }

    /// Largest `‖f̃(q + e_i) − f̃(q) − e_i‖` over an `n^d` grid and unit
    /// vectors `e_i`.
    pub fn equivariance_defect(&self, n: usize) -> f64 {
        let d = self.dim();
        let shape = vec![n.max(1); d];
        let total: usize = shape.iter().product();
        let mut worst = 0.0f64;
        for idx in 0..total {
            let q = grid_point(idx, &shape);
            let f = self.eval(&q);
            for i in 0..d {
                let mut qs = q.clone();
                qs[i] += 1.0;
                let mut diff = self.eval(&qs) - &f;
                diff[i] -= 1.0;
                worst = worst.max(diff.norm());
            }
        }
        worst
    }
}

fn nan(d: usize) -> (DVector<f64>, DMatrix<f64>) {
    (DVector::from_element(d, f64::NAN), DMatrix::from_element(d, d, f64::NAN))
}

/// Point `idx` of the uniform grid on `[0,1)^d`, last axis fastest.
pub(crate) fn grid_point(mut idx: usize, shape: &[usize]) -> DVector<f64> {
    let mut q = DVector::zeros(shape.len());
    for a in (0..shape.len()).rev() {
        q[a] = (idx % shape[a]) as f64 / shape[a] as f64;
        idx /= shape[a];
    }
    q
}

/// Catmull–Rom weights for nodes `i−1 … i+2` at fraction `t`, and their
/// `t`-derivatives.
fn cr_weights(t: f64) -> ([f64; 4], [f64; 4]) {
    let (t2, t3) = (t * t, t * t * t);
    (
        [
            0.5 * (-t + 2.0 * t2 - t3),
            0.5 * (2.0 - 5.0 * t2 + 3.0 * t3),
            0.5 * (t + 4.0 * t2 - 3.0 * t3),
            0.5 * (-t2 + t3),
        ],
        [
            0.5 * (-1.0 + 4.0 * t - 3.0 * t2),
            0.5 * (-10.0 * t + 9.0 * t2),
            0.5 * (1.0 + 8.0 * t - 9.0 * t2),
            0.5 * (-2.0 * t + 3.0 * t2),
        ],
    )
}

fn catmull_rom(shape: &[usize], values: &[Vec<f64>], q: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let d = shape.len();
    let mut base = vec![0i64; d];
    let mut w = vec![[0.0; 4]; d];
    let mut dw = vec![[0.0; 4]; d];
    for a in 0..d {
        let x = q[a] * shape[a] as f64;
        let i = x.floor();
        base[a] = i as i64 - 1;
        let (wa, da) = cr_weights(x - i);
        w[a] = wa;
        dw[a] = da.map(|v| v * shape[a] as f64);
    }
    let mut f = q.clone();
    let mut df = DMatrix::identity(d, d);
    for corner in 0..4usize.pow(d as u32) {
        let mut c = corner;
        let mut flat = 0usize;
        let mut offs = vec![0usize; d];
        for a in (0..d).rev() {
            offs[a] = c % 4;
            c /= 4;
        }
        for a in 0..d {
            let n = shape[a] as i64;
            flat = flat * shape[a] + (base[a] + offs[a] as i64).rem_euclid(n) as usize;
        }
        let weight: f64 = (0..d).map(|a| w[a][offs[a]]).product();
        let u = &values[flat];
        for i in 0..d {
            f[i] += weight * u[i];
        }
        for k in 0..d {
            let dk: f64 = (0..d).map(|a| if a == k { dw[a][offs[a]] } else { w[a][offs[a]] }).product();
            for i in 0..d {
                df[(i, k)] += dk * u[i];
            }
        }
    }
    (f, df)
}
