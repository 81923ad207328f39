use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ParamSubmanifold;
use crate::hamiltonian::SineProfile;
use crate::symplectic::PhasePoint;

/// Circle map `η: T → T` used for the third base coordinate of the P1 torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Eta {
    Identity,
    /// `θ + (sin 2πθ + s sin 4πθ)/2π`: degree 1, folds when `η′` changes sign.
    DegreeOne { s: f64 },
    /// `a sin 2πθ`: degree 0.
    DegreeZero { amplitude: f64 },
}

impl Eta {
    /// Fold at `θ = ½` with `η′(½) = −1`.
    pub fn folded() -> Self {
        Eta::DegreeOne { s: -0.5 }
    }

    pub fn degree_zero() -> Self {
        Eta::DegreeZero { amplitude: 1.0 / (4.0 * PI) }
    }

    pub fn degree(&self) -> i64 {
        match self {
            Eta::Identity | Eta::DegreeOne { .. } => 1,
            Eta::DegreeZero { .. } => 0,
        }
    }

    /// Lifted value.
    pub fn value(&self, t: f64) -> f64 {
        let w = 2.0 * PI;
        match *self {
            Eta::Identity => t,
            Eta::DegreeOne { s } => t + ((w * t).sin() + s * (2.0 * w * t).sin()) / w,
            Eta::DegreeZero { amplitude } => amplitude * (w * t).sin(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let w = 2.0 * PI;
        match *self {
            Eta::Identity => 1.0,
            Eta::DegreeOne { s } => 1.0 + (w * t).cos() + 2.0 * s * (2.0 * w * t).cos(),
            Eta::DegreeZero { amplitude } => amplitude * w * (w * t).cos(),
        }
    }
}

/// `j(θ) = (θ₁, θ₂, η(θ₃); cos 2πθ₃, sin 2πθ₃, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropP1Torus {
    pub eta: Eta,
}

impl Default for PropP1Torus {
    fn default() -> Self {
        Self { eta: Eta::Identity }
    }
}

impl ParamSubmanifold for PropP1Torus {
    fn name(&self) -> String {
        match self.eta {
            Eta::Identity => "prop-p1-torus".into(),
            Eta::DegreeOne { .. } => "p1-eta-degree-1".into(),
            Eta::DegreeZero { .. } => "p1-eta-degree-0".into(),
        }
    }

    fn param_dim(&self) -> usize {
        3
    }

    fn phase_dim(&self) -> usize {
        3
    }

    fn embed(&self, th: &DVector<f64>) -> PhasePoint {
        let a = 2.0 * PI * th[2];
        PhasePoint::lifted(
            DVector::from_vec(vec![th[0], th[1], self.eta.value(th[2])]),
            DVector::from_vec(vec![a.cos(), a.sin(), 0.0]),
        )
    }

    fn jacobian(&self, th: &DVector<f64>) -> DMatrix<f64> {
        let a = 2.0 * PI * th[2];
        let mut m = DMatrix::zeros(6, 3);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1.0;
        m[(2, 2)] = self.eta.derivative(th[2]);
        m[(3, 2)] = -2.0 * PI * a.sin();
        m[(4, 2)] = 2.0 * PI * a.cos();
        m
    }
}

/// `{p = 0}` in `T*T^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroSection {
    pub d: usize,
}

impl ParamSubmanifold for ZeroSection {
    fn name(&self) -> String {
        "zero-section".into()
    }

    fn param_dim(&self) -> usize {
        self.d
    }

    fn phase_dim(&self) -> usize {
        self.d
    }

    fn embed(&self, th: &DVector<f64>) -> PhasePoint {
        PhasePoint::lifted(th.clone(), DVector::zeros(self.d))
    }

    fn jacobian(&self, _th: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(2 * self.d, self.d);
        m.view_mut((0, 0), (self.d, self.d)).fill_with_identity();
        m
    }
}

/// `j(θ) = (θ₁, θ₂; ψ(θ₂), 0)`, the energy-zero torus of the Herman
/// Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HermanTorus {
    pub psi: SineProfile,
}

impl ParamSubmanifold for HermanTorus {
    fn name(&self) -> String {
        "herman-torus".into()
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn phase_dim(&self) -> usize {
        2
    }

    fn embed(&self, th: &DVector<f64>) -> PhasePoint {
        PhasePoint::lifted(th.clone(), DVector::from_vec(vec![self.psi.value(th[1]), 0.0]))
    }

    fn jacobian(&self, th: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(4, 2);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1.0;
        m[(2, 1)] = self.psi.derivative(th[1]);
        m
    }
}

/// Separatrix torus of `½|r|² + cos 4πθ₃`: the closed curve
/// `r₃ = ±2|sin 2πθ₃|`, `θ₃ ∈ [0, ½]`, times `T²`, with `r₁ = r₂ = 0`.
///
/// The curve is parametrized by `σ ∈ T`: the upper branch is traversed for
/// `σ ∈ [0, ½]` and the lower one backwards for `σ ∈ [½, 1]`, so
/// `θ₃ = tri(σ)` and `r₃ = 2 sin 2πσ`. Corners sit at `σ ∈ {0, ½}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SeparatrixTorus;

impl SeparatrixTorus {
    pub fn tri(s: f64) -> f64 {
        let s = s.rem_euclid(1.0);
        if s <= 0.5 { s } else { 1.0 - s }
    }

    fn tri_slope(s: f64) -> f64 {
        let s = s.rem_euclid(1.0);
        if s == 0.0 || s == 0.5 {
            0.0
        } else if s < 0.5 {
            1.0
        } else {
            -1.0
        }
    }
}

impl ParamSubmanifold for SeparatrixTorus {
    fn name(&self) -> String {
        "separatrix-torus".into()
    }

    fn param_dim(&self) -> usize {
        3
    }

    fn phase_dim(&self) -> usize {
        3
    }

    fn embed(&self, th: &DVector<f64>) -> PhasePoint {
        PhasePoint::lifted(
            DVector::from_vec(vec![th[0], th[1], Self::tri(th[2])]),
            DVector::from_vec(vec![0.0, 0.0, 2.0 * (2.0 * PI * th[2]).sin()]),
        )
    }

    fn jacobian(&self, th: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(6, 3);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1.0;
        m[(2, 2)] = Self::tri_slope(th[2]);
        m[(5, 2)] = 4.0 * PI * (2.0 * PI * th[2]).cos();
        m
    }
}
