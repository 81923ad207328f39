//! Graph and homotopy-class tests for the base projection `π∘j`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{param_delta, Grid, ParamSubmanifold};
use crate::error::{Error, Result};
use crate::symplectic::{torus_distance, wrap_centered};

/// Two distinct parameters with the same base point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphWitness {
    pub theta_a: DVector<f64>,
    pub theta_b: DVector<f64>,
    /// Shared base point, mod 1.
    pub base: DVector<f64>,
    /// `‖p(θ_a) − p(θ_b)‖`.
    pub fiber_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphVerdict {
    pub is_graph: bool,
    pub witness: Option<GraphWitness>,
    /// Adjacent grid parameters across which `det D(π∘j)` changes sign.
    pub fold: Option<(DVector<f64>, DVector<f64>)>,
    pub min_abs_det: f64,
}

fn base_jacobian(m: &dyn ParamSubmanifold, theta: &DVector<f64>) -> DMatrix<f64> {
    let d = m.phase_dim();
    m.jacobian(theta).rows(0, d).into_owned()
}

fn base_point(m: &dyn ParamSubmanifold, theta: &DVector<f64>) -> DVector<f64> {
    m.embed(theta).q.map(|v| v.rem_euclid(1.0))
}

/// Tests whether `π∘j` is a diffeomorphism: no sign change or zero of
/// `det D(π∘j)` on the grid, and no two distinct parameters over the same
/// base point (bucketed candidates refined by Newton).
pub fn graph_test(m: &dyn ParamSubmanifold, grid: &Grid) -> Result<GraphVerdict> {
    let d = m.phase_dim();
    if m.param_dim() != d || grid.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: m.param_dim() });
    }
    let n = grid.len();
    let thetas: Vec<DVector<f64>> = (0..n).map(|i| grid.theta(i)).collect();
    let bases: Vec<DVector<f64>> = thetas.iter().map(|t| base_point(m, t)).collect();
    let dets: Vec<f64> = thetas.iter().map(|t| base_jacobian(m, t).determinant()).collect();
    let min_abs_det = dets.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));

    let mut fold = None;
    'outer: for i in 0..n {
        for axis in 0..d {
            let j = grid.step(i, axis);
            if dets[i] * dets[j] <= 0.0 {
                fold = Some((thetas[i].clone(), thetas[j].clone()));
                break 'outer;
            }
        }
    }

    let res = *grid.shape.iter().max().unwrap();
    let cell = |b: &DVector<f64>| -> Vec<i64> {
        b.iter().map(|v| ((v * res as f64).floor() as i64).rem_euclid(res as i64)).collect()
    };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, b) in bases.iter().enumerate() {
        buckets.entry(cell(b)).or_default().push(i);
    }
    // Parameters closer than this are treated as the same sheet.
    let min_sep = 2.5 / res as f64;
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|mut c| {
            (0..d)
                .map(|_| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    o
                })
                .collect()
        })
        .collect();
    let mut best: Option<(usize, usize, f64, f64)> = None;
    for (i, b) in bases.iter().enumerate() {
        let home = cell(b);
        for off in &offsets {
            let key: Vec<i64> =
                home.iter().zip(off).map(|(h, o)| (h + o).rem_euclid(res as i64)).collect();
            let Some(list) = buckets.get(&key) else { continue };
            for &j in list {
                if j <= i || param_delta(&thetas[i], &thetas[j]).norm() < min_sep {
                    continue;
                }
                let dist = torus_distance(b, &bases[j]);
                let gap = (m.embed(&thetas[i]).p - m.embed(&thetas[j]).p).norm();
                let better = match best {
                    None => true,
                    Some((_, _, bd, bg)) => dist < bd - 1e-14 || (dist <= bd + 1e-14 && gap > bg),
                };
                if better {
                    best = Some((i, j, dist, gap));
                }
            }
        }
    }
    let witness = match best {
        Some((i, j, _, _)) => refine_witness(m, &thetas[i], &thetas[j], min_sep / 2.0),
        None => None,
    };
    let is_graph = witness.is_none() && fold.is_none() && min_abs_det > 1e-12;
    Ok(GraphVerdict { is_graph, witness, fold, min_abs_det })
}

/// Newton on `θ_b` for `π j(θ_b) = π j(θ_a)` mod 1.
fn refine_witness(
    m: &dyn ParamSubmanifold,
    theta_a: &DVector<f64>,
    start: &DVector<f64>,
    min_sep: f64,
) -> Option<GraphWitness> {
    let target = base_point(m, theta_a);
    let mut tb = start.clone();
    for _ in 0..30 {
        let r = (base_point(m, &tb) - &target).map(wrap_centered);
        if r.norm() < 1e-13 {
            break;
        }
        let step = base_jacobian(m, &tb).lu().solve(&r)?;
        tb -= step;
    }
    let r = (base_point(m, &tb) - &target).map(wrap_centered);
    if r.norm() > 1e-10 || param_delta(theta_a, &tb).norm() < min_sep {
        return None;
    }
    let fiber_gap = (m.embed(theta_a).p - m.embed(&tb).p).norm();
    Some(GraphWitness {
        theta_a: theta_a.clone(),
        theta_b: tb.map(|v| v.rem_euclid(1.0)),
        base: target,
        fiber_gap,
    })
}

/// Winding matrix `W[i][k]`: turns of base coordinate `i` along the `k`-th
/// parameter circle through `θ = 0`.
pub fn homotopy_degree(m: &dyn ParamSubmanifold, grid: &Grid) -> Result<Vec<Vec<i64>>> {
    let k = m.param_dim();
    let d = m.phase_dim();
    if grid.dim() != k {
        return Err(Error::DimensionMismatch { expected: k, got: grid.dim() });
    }
    let mut w = vec![vec![0i64; k]; d];
    for axis in 0..k {
        let n = grid.shape[axis];
        let mut total = DVector::<f64>::zeros(d);
        let mut prev = m.embed(&DVector::zeros(k)).q;
        for s in 1..=n {
            let mut th = DVector::zeros(k);
            th[axis] = s as f64 / n as f64;
            let q = m.embed(&th).q;
            for i in 0..d {
                let inc = wrap_centered(q[i] - prev[i]);
                if inc.abs() >= 0.25 {
                    return Err(Error::WindingAmbiguous { increment: inc });
                }
                total[i] += inc;
            }
            prev = q;
        }
        for i in 0..d {
            w[i][axis] = total[i].round() as i64;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submanifold::{Eta, HermanTorus, PropP1Torus, SeparatrixTorus, ZeroSection};

    fn identity(k: usize) -> Vec<Vec<i64>> {
        (0..k).map(|i| (0..k).map(|j| i64::from(i == j)).collect()).collect()
    }

    #[test]
    fn original_torus_is_a_graph() {
        let g = Grid::uniform(3, 12);
        let v = graph_test(&PropP1Torus::default(), &g).unwrap();
        assert!(v.is_graph && v.witness.is_none() && v.fold.is_none());
        assert_eq!(homotopy_degree(&PropP1Torus::default(), &g).unwrap(), identity(3));
        assert!(graph_test(&HermanTorus::default(), &Grid::uniform(2, 12)).unwrap().is_graph);
        assert!(graph_test(&ZeroSection { d: 2 }, &Grid::uniform(2, 12)).unwrap().is_graph);
    }

    #[test]
    fn folded_eta_is_not_a_graph() {
        let m = PropP1Torus { eta: Eta::folded() };
        let g = Grid::uniform(3, 16);
        let v = graph_test(&m, &g).unwrap();
        assert!(!v.is_graph);
        let w = v.witness.unwrap();
        let (a, b) = (w.theta_a[2], w.theta_b[2]);
        assert!((Eta::folded().value(a) - Eta::folded().value(b)).abs() < 1e-10);
        assert!(w.fiber_gap > 0.0);
        assert_eq!(homotopy_degree(&m, &g).unwrap(), identity(3));
    }

    #[test]
    fn degree_zero_eta_loses_a_winding() {
        let m = PropP1Torus { eta: Eta::degree_zero() };
        let w = homotopy_degree(&m, &Grid::uniform(3, 16)).unwrap();
        assert_eq!(w[2][2], 0);
        assert_eq!((w[0][0], w[1][1]), (1, 1));
    }

    #[test]
    fn separatrix_witness_is_the_branch_pair() {
        let v = graph_test(&SeparatrixTorus, &Grid::uniform(3, 16)).unwrap();
        assert!(!v.is_graph);
        let w = v.witness.unwrap();
        let (sa, sb) = (w.theta_a[2], w.theta_b[2]);
        assert!((sa + sb - 1.0).abs() < 1e-10 || (sa - sb).abs() > 0.1);
        assert!((SeparatrixTorus::tri(sa) - SeparatrixTorus::tri(sb)).abs() < 1e-10);
        assert!(w.fiber_gap > 1.0);
    }

    #[test]
    fn coarse_grid_is_ambiguous() {
        let m = PropP1Torus { eta: Eta::DegreeOne { s: -0.5 } };
        assert!(matches!(
            homotopy_degree(&m, &Grid::uniform(3, 3)),
            Err(Error::WindingAmbiguous { .. })
        ));
    }
}
