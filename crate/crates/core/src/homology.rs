//! Iteration of an `SL(2, Z)` action on `H₁(T²)` and the bounded/unbounded
//! dichotomy for the classes `Aⁿ v₀`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every bounded orbit of `SL(2, Z)` on `Z²` is periodic with period 1, 2,
/// 3, 4 or 6: finite-order elements have those orders, and otherwise only
/// eigenvectors of `±1` are bounded.
pub const DECISION_STEPS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyAction {
    pub a: [[i64; 2]; 2],
    pub v0: [i64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitClass {
    FiniteOrbit,
    ParabolicGrowth,
    HyperbolicGrowth,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomologyOrbit {
    /// `v₀, A v₀, …` up to `n_max` or the first overflow.
    pub sequence: Vec<[i128; 2]>,
    pub classification: OrbitClass,
    /// Orbit period when bounded.
    pub period: Option<usize>,
    /// Projective limit direction `(cos 2πα, sin 2πα)` with `α ∈ [0, ½)`.
    pub limit_direction: Option<f64>,
    /// Accumulation angles `α` and `α + ½` of the normalized iterates.
    pub accumulation: Option<[f64; 2]>,
    /// `‖Aⁿ v₀‖ / ‖Aⁿ⁻¹ v₀‖` at the last iterate. Unlike `‖Aⁿ v₀‖^{1/n}` it
    /// carries no `c^{1/n}` bias from the unstable component of `v₀`.
    pub growth_rate: Option<f64>,
    /// The sequence stopped early on overflow after the decision.
    pub truncated: bool,
}

impl HomologyAction {
    pub fn new(a: [[i64; 2]; 2], v0: [i64; 2]) -> Result<Self> {
        let h = Self { a, v0 };
        let det = h.det();
        if det != 1 {
            return Err(Error::NotUnimodular { det });
        }
        Ok(h)
    }

    pub fn det(&self) -> i128 {
        let a = self.a.map(|r| r.map(i128::from));
        a[0][0] * a[1][1] - a[0][1] * a[1][0]
    }

    pub fn trace(&self) -> i128 {
        i128::from(self.a[0][0]) + i128::from(self.a[1][1])
    }

    fn apply(&self, v: [i128; 2]) -> Option<[i128; 2]> {
        let a = self.a.map(|r| r.map(i128::from));
        let x = a[0][0].checked_mul(v[0])?.checked_add(a[0][1].checked_mul(v[1])?)?;
        let y = a[1][0].checked_mul(v[0])?.checked_add(a[1][1].checked_mul(v[1])?)?;
        Some([x, y])
    }
}

/// Iterates `v ↦ A v` exactly. An orbit that revisits a value is bounded;
/// one that has not after [`DECISION_STEPS`] never will, and is classified by
/// `|tr A|`.
pub fn homology_iterate(h: &HomologyAction, n_max: usize) -> Result<HomologyOrbit> {
    if h.det() != 1 {
        return Err(Error::NotUnimodular { det: h.det() });
    }
    let start = h.v0.map(i128::from);
    let mut sequence = vec![start];
    let mut seen = HashMap::from([(start, 0usize)]);
    let mut period = None;
    let mut truncated = false;
    let steps = n_max.max(DECISION_STEPS);
    let mut v = start;
    for n in 1..=steps {
        let Some(next) = h.apply(v) else {
            if n <= DECISION_STEPS && period.is_none() {
                return Err(Error::Overflow { steps: n - 1 });
            }
            truncated = true;
            break;
        };
        v = next;
        if period.is_none() {
            if let Some(&first) = seen.get(&v) {
                period = Some(n - first);
            } else if n <= DECISION_STEPS {
                seen.insert(v, n);
            }
        }
        if n <= n_max {
            sequence.push(v);
        }
        if n >= n_max && (period.is_some() || n >= DECISION_STEPS) {
            break;
        }
    }
    let classification = match period {
        Some(_) => OrbitClass::FiniteOrbit,
        None if h.trace().abs() == 2 => OrbitClass::ParabolicGrowth,
        None => OrbitClass::HyperbolicGrowth,
    };
    let (limit_direction, accumulation, growth_rate) = match period {
        Some(_) => (None, None, None),
        None => {
            let last = *sequence.last().expect("non-empty");
            let n = sequence.len() - 1;
            let (x, y) = (last[0] as f64, last[1] as f64);
            let alpha = (y.atan2(x) / std::f64::consts::TAU).rem_euclid(0.5);
            let rate = (n > 0).then(|| {
                let prev = sequence[n - 1];
                x.hypot(y) / (prev[0] as f64).hypot(prev[1] as f64)
            });
            (Some(alpha), Some([alpha, alpha + 0.5]), rate)
        }
    };
    Ok(HomologyOrbit { sequence, classification, period, limit_direction, accumulation, growth_rate, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_is_a_fixed_point() {
        let o = homology_iterate(&HomologyAction::new([[1, 0], [0, 1]], [1, 0]).unwrap(), 5).unwrap();
        assert_eq!(o.classification, OrbitClass::FiniteOrbit);
        assert_eq!(o.period, Some(1));
        assert!(o.sequence.iter().all(|v| *v == [1, 0]));
    }

    #[test]
    fn parabolic_fixes_its_eigenvector() {
        let h = HomologyAction::new([[1, 1], [0, 1]], [1, 0]).unwrap();
        assert_eq!(homology_iterate(&h, 10).unwrap().classification, OrbitClass::FiniteOrbit);
        let h = HomologyAction::new([[1, 1], [0, 1]], [0, 1]).unwrap();
        let o = homology_iterate(&h, 30).unwrap();
        assert_eq!(o.classification, OrbitClass::ParabolicGrowth);
        assert_eq!(o.sequence[30], [30, 1]);
        assert!(o.limit_direction.unwrap().abs() < 0.011);
    }

    #[test]
    fn hyperbolic_growth_and_direction() {
        let h = HomologyAction::new([[2, 1], [1, 1]], [1, 0]).unwrap();
        let o = homology_iterate(&h, 40).unwrap();
        assert_eq!(o.classification, OrbitClass::HyperbolicGrowth);
        let lambda = (3.0 + 5f64.sqrt()) / 2.0;
        // Unstable eigenvector (1, λ − 2) of [[2,1],[1,1]].
        let alpha = (lambda - 2.0).atan() / std::f64::consts::TAU;
        assert!((o.limit_direction.unwrap() - alpha).abs() < 1e-12);
        assert!((o.growth_rate.unwrap() / lambda - 1.0).abs() < 1e-12);
        let acc = o.accumulation.unwrap();
        assert_eq!(acc[1] - acc[0], 0.5);
    }

    #[test]
    fn finite_order_elements_cycle() {
        let o = homology_iterate(&HomologyAction::new([[0, -1], [1, 1]], [1, 0]).unwrap(), 20).unwrap();
        assert_eq!(o.period, Some(6));
        let o = homology_iterate(&HomologyAction::new([[0, -1], [1, 0]], [3, -2]).unwrap(), 20).unwrap();
        assert_eq!(o.period, Some(4));
    }

    #[test]
    fn overflow_is_reported() {
        let big = HomologyAction::new([[1_000_001, 1_000_000], [1, 1]], [1, 0]).unwrap();
        let o = homology_iterate(&big, 100).unwrap();
        assert!(o.truncated);
        assert_eq!(o.classification, OrbitClass::HyperbolicGrowth);
        let huge = HomologyAction { a: [[i64::MAX, 1], [i64::MAX - 1, 1]], v0: [i64::MAX, 1] };
        assert!(matches!(homology_iterate(&huge, 100), Err(Error::Overflow { .. })));
    }

    #[test]
    fn non_unimodular_is_rejected() {
        assert!(matches!(HomologyAction::new([[2, 0], [0, 1]], [1, 0]), Err(Error::NotUnimodular { det: 2 })));
    }

    /// Closed-form classification from the trace and the eigenvectors of ±1.
    fn oracle(a: [[i64; 2]; 2], v: [i64; 2]) -> OrbitClass {
        let tr = (a[0][0] + a[1][1]).abs();
        if tr < 2 {
            return OrbitClass::FiniteOrbit;
        }
        if tr > 2 {
            return OrbitClass::HyperbolicGrowth;
        }
        let s = (a[0][0] + a[1][1]).signum();
        let av = [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]];
        if av == [s * v[0], s * v[1]] {
            OrbitClass::FiniteOrbit
        } else {
            OrbitClass::ParabolicGrowth
        }
    }

    #[test]
    fn random_words_match_the_trace_oracle() {
        let gens = [[[1, 1], [0, 1]], [[1, 0], [1, 1]], [[1, -1], [0, 1]], [[1, 0], [-1, 1]]];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let mut a = [[1i64, 0], [0, 1]];
            for _ in 0..rng.random_range(0..8) {
                let g: [[i64; 2]; 2] = gens[rng.random_range(0..4)];
                a = [
                    [a[0][0] * g[0][0] + a[0][1] * g[1][0], a[0][0] * g[0][1] + a[0][1] * g[1][1]],
                    [a[1][0] * g[0][0] + a[1][1] * g[1][0], a[1][0] * g[0][1] + a[1][1] * g[1][1]],
                ];
            }
            let h = HomologyAction::new(a, [1, 0]).unwrap();
            assert_eq!(homology_iterate(&h, 20).unwrap().classification, oracle(a, [1, 0]), "{a:?}");
        }
    }
}
