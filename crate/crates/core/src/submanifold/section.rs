//! Global section of a periodic flow on `T³` from the orbit average
//! `u(x) = ∫₀¹ ⟨φ̃_t(x), e₁⟩ dt`.
//!
//! When every orbit returns after time 1 with class `k`, `u(x + m) = u(x) + m₁`
//! and `du·X = k₁`, so the level sets `u ∈ Z` are transverse sections.

use std::collections::{HashMap, HashSet};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::Grid;
use crate::error::{Error, Result};

/// Vector field on the parameter torus `T^k`.
pub trait ParamField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, theta: &DVector<f64>) -> DVector<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantField(pub DVector<f64>);

impl ParamField for ConstantField {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn eval(&self, _theta: &DVector<f64>) -> DVector<f64> {
        self.0.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionField {
    pub grid: Grid,
    pub u: Vec<f64>,
    /// Common integer displacement `φ̃₁(x) − x`.
    pub return_class: Vec<i64>,
    /// Mesh of `{u ∈ Z}`, vertices mod 1.
    pub vertices: Vec<DVector<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub euler_characteristic: i64,
    /// Smallest `du·X` over the grid.
    pub min_du_x: f64,
}

/// Time-1 lifted endpoint and `∫₀¹ φ̃_t(x)₁ dt`: RK4 at half steps, Simpson
/// over each full step.
fn average(field: &dyn ParamField, theta: &DVector<f64>, steps: usize) -> (DVector<f64>, f64) {
    let h = 0.5 / steps as f64;
    let rk4 = |x: &DVector<f64>| {
        let k1 = field.eval(x);
        let k2 = field.eval(&(x + &k1 * (0.5 * h)));
        let k3 = field.eval(&(x + &k2 * (0.5 * h)));
        let k4 = field.eval(&(x + &k3 * h));
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    };
    let mut x = theta.clone();
    let mut integral = 0.0;
    for _ in 0..steps {
        let mid = rk4(&x);
        let next = rk4(&mid);
        integral += h / 3.0 * (x[0] + 4.0 * mid[0] + next[0]);
        x = next;
    }
    (x, integral)
}

/// `u` on the grid plus the level-set mesh of `{u ∈ Z}`.
pub fn section_from_average(field: &dyn ParamField, grid: &Grid, steps: usize) -> Result<SectionField> {
    if field.dim() != 3 || grid.dim() != 3 {
        return Err(Error::InvalidArgument("section extraction needs a field on T³".into()));
    }
    let steps = steps.max(1);
    let evals: Vec<(DVector<f64>, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let th = grid.theta(i);
            let (end, u) = average(field, &th, steps);
            (end - th, u)
        })
        .collect();
    let class: Vec<i64> = evals[0].0.iter().map(|v| v.round() as i64).collect();
    for (disp, _) in &evals {
        let defect = disp
            .iter()
            .zip(&class)
            .map(|(v, &k)| (v - k as f64).abs())
            .fold(0.0, f64::max);
        if defect > 1e-8 {
            return Err(Error::NonPeriodic { defect });
        }
    }
    if class[0] == 0 {
        return Err(Error::NonPeriodic { defect: 0.0 });
    }
    let u: Vec<f64> = evals.iter().map(|e| e.1).collect();
    let h = 1e-4;
    let min_du_x = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let th = grid.theta(i);
            let x = field.eval(&th);
            let (_, up) = average(field, &(&th + &x * h), steps);
            let (_, um) = average(field, &(&th - &x * h), steps);
            (up - um) / (2.0 * h)
        })
        .reduce(|| f64::INFINITY, f64::min);
    let (vertices, triangles) = march(grid, &u, class[0]);
    let euler_characteristic = euler(vertices.len(), &triangles);
    Ok(SectionField { grid: grid.clone(), u, return_class: class, vertices, triangles, euler_characteristic, min_du_x })
}

/// Decomposition of the unit cube into six tetrahedra around the 0–7
/// diagonal; corners indexed by bits (axis 0 = bit 0).
const TETS: [[usize; 4]; 6] =
    [[0, 1, 3, 7], [0, 3, 2, 7], [0, 2, 6, 7], [0, 6, 4, 7], [0, 4, 5, 7], [0, 5, 1, 7]];

type EdgeKey = (usize, usize, i64, i64);

fn march(grid: &Grid, u: &[f64], k1: i64) -> (Vec<DVector<f64>>, Vec<[usize; 3]>) {
    let mut vertices: Vec<DVector<f64>> = Vec::new();
    let mut by_edge: HashMap<EdgeKey, usize> = HashMap::new();
    let mut by_pos: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut triangles = Vec::new();
    let mut seen: HashSet<[usize; 3]> = HashSet::new();
    let n = grid.len();
    for base in 0..n {
        let mi = grid.multi_index(base);
        let mut gidx = [0usize; 8];
        let mut val = [0.0f64; 8];
        let mut off = [0i64; 8];
        let mut pos = [[0.0f64; 3]; 8];
        for c in 0..8 {
            let mut m = mi.clone();
            for a in 0..3 {
                if c >> a & 1 == 1 {
                    m[a] += 1;
                }
                pos[c][a] = m[a] as f64 / grid.shape[a] as f64;
            }
            // Wrapping past the end of axis 0 adds k₁ to the lift of u.
            off[c] = (m[0] / grid.shape[0]) as i64 * k1;
            gidx[c] = grid.flat_index(&m);
            val[c] = u[gidx[c]] + off[c] as f64;
        }
        let lo = val.iter().cloned().fold(f64::INFINITY, f64::min).ceil() as i64;
        let hi = val.iter().cloned().fold(f64::NEG_INFINITY, f64::max).floor() as i64;
        for level in lo..=hi {
            let lf = level as f64;
            for tet in TETS {
                let above: Vec<usize> = tet.iter().copied().filter(|&c| val[c] > lf).collect();
                let below: Vec<usize> = tet.iter().copied().filter(|&c| val[c] <= lf).collect();
                let mut vid = |a: usize, b: usize| -> usize {
                    let (a, b) = if gidx[a] <= gidx[b] { (a, b) } else { (b, a) };
                    let key = (gidx[a], gidx[b], off[b] - off[a], level - off[a]);
                    if let Some(&id) = by_edge.get(&key) {
                        return id;
                    }
                    let t = (lf - val[a]) / (val[b] - val[a]);
                    let p = DVector::from_fn(3, |i, _| (pos[a][i] + t * (pos[b][i] - pos[a][i])).rem_euclid(1.0));
                    let rounded: Vec<i64> = p.iter().map(|v| ((v * 1e10).round() as i64).rem_euclid(10_000_000_000)).collect();
                    let id = *by_pos.entry(rounded).or_insert_with(|| {
                        vertices.push(p);
                        vertices.len() - 1
                    });
                    by_edge.insert(key, id);
                    id
                };
                let mut push = |t: [usize; 3]| {
                    let mut key = t;
                    key.sort_unstable();
                    if key[0] != key[1] && key[1] != key[2] && seen.insert(key) {
                        triangles.push(t);
                    }
                };
                match (above.len(), below.len()) {
                    (1, 3) => {
                        let a = above[0];
                        push([vid(a, below[0]), vid(a, below[1]), vid(a, below[2])]);
                    }
                    (3, 1) => {
                        let b = below[0];
                        push([vid(b, above[0]), vid(b, above[1]), vid(b, above[2])]);
                    }
                    (2, 2) => {
                        let (a0, a1, b0, b1) = (above[0], above[1], below[0], below[1]);
                        let q = [vid(a0, b0), vid(a0, b1), vid(a1, b1), vid(a1, b0)];
                        push([q[0], q[1], q[2]]);
                        push([q[0], q[2], q[3]]);
                    }
                    _ => {}
                }
            }
        }
    }
    (vertices, triangles)
}

fn euler(v: usize, triangles: &[[usize; 3]]) -> i64 {
    let mut edges = HashSet::new();
    for t in triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    v as i64 - edges.len() as i64 + triangles.len() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_field_gives_shifted_first_coordinate() {
        let f = ConstantField(DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let g = Grid::uniform(3, 7);
        let s = section_from_average(&f, &g, 16).unwrap();
        for (i, &u) in s.u.iter().enumerate() {
            assert!((u - g.theta(i)[0] - 0.5).abs() < 1e-14);
        }
        assert_eq!(s.return_class, vec![1, 0, 0]);
        assert!(s.vertices.iter().all(|v| (v[0] - 0.5).abs() < 1e-12));
        assert_eq!(s.euler_characteristic, 0);
        assert!((s.min_du_x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn integer_slope_field() {
        let f = ConstantField(DVector::from_vec(vec![1.0, 2.0, 0.0]));
        let s = section_from_average(&f, &Grid::uniform(3, 7), 16).unwrap();
        assert_eq!(s.return_class, vec![1, 2, 0]);
        assert!(s.min_du_x > 0.0);
        assert_eq!(s.euler_characteristic, 0);
        assert!(!s.triangles.is_empty());
    }

    #[test]
    fn non_closing_field_is_rejected() {
        let f = ConstantField(DVector::from_vec(vec![1.0, 2f64.sqrt(), 0.0]));
        assert!(matches!(
            section_from_average(&f, &Grid::uniform(3, 4), 8),
            Err(Error::NonPeriodic { .. })
        ));
    }
}
