//! Named example systems with their expected properties.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::genfun::BaseMap;
use crate::hamiltonian::{Hamiltonian, Herman, Mechanical};
use crate::submanifold::{Eta, HermanTorus, ParamSubmanifold, PropP1Torus, SeparatrixTorus, ZeroSection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelExpectation {
    Constant(usize),
    NonConstant,
}

/// `None` marks a property the example makes no claim about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ExpectedProperties {
    pub invariant: Option<bool>,
    pub lagrangian: Option<bool>,
    pub graph: Option<bool>,
    pub conjugate_free: Option<bool>,
    pub kernel_dim: Option<KernelExpectation>,
    pub homotopic_to_zero_section: Option<bool>,
    /// Every point of the submanifold is an equilibrium.
    pub stationary: Option<bool>,
}

pub struct Fixture {
    pub name: &'static str,
    pub hamiltonian: Box<dyn Hamiltonian>,
    pub manifold: Box<dyn ParamSubmanifold>,
    /// The Hamiltonian flow is available in closed form.
    pub analytic_flow: bool,
    pub expected: ExpectedProperties,
    /// Why each asserted property holds, keyed by property name.
    pub rationale: Vec<(&'static str, &'static str)>,
    /// Default times for the invariance check.
    pub invariance_horizons: Vec<f64>,
    /// Default conjugate-scan horizon.
    pub conjugate_horizon: f64,
    /// Default integration step.
    pub flow_step: f64,
}

impl std::fmt::Debug for Fixture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fixture")
            .field("name", &self.name)
            .field("hamiltonian", &self.hamiltonian.name())
            .field("manifold", &self.manifold.name())
            .field("expected", &self.expected)
            .finish()
    }
}

pub const FIXTURE_NAMES: [&str; 6] =
    ["prop-p1-torus", "eta-degree-one", "eta-degree-zero", "zero-section", "herman", "separatrix"];

fn unit_times(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64).collect()
}

fn flat_torus(name: &'static str, eta: Eta) -> Fixture {
    let (graph, homotopic, shape) = match eta {
        Eta::Identity => (true, true, "the base projection is the identity of T³"),
        Eta::DegreeOne { .. } => (false, true, "η has degree 1 but η′ vanishes, so the projection folds"),
        Eta::DegreeZero { .. } => (false, false, "η has degree 0, so the projection misses most fibres"),
    };
    Fixture {
        name,
        hamiltonian: Box::new(Mechanical::flat(3)),
        manifold: Box::new(PropP1Torus { eta }),
        analytic_flow: true,
        expected: ExpectedProperties {
            invariant: Some(true),
            lagrangian: Some(false),
            graph: Some(graph),
            conjugate_free: Some(true),
            kernel_dim: Some(KernelExpectation::Constant(1)),
            homotopic_to_zero_section: Some(homotopic),
            stationary: None,
        },
        rationale: vec![
            ("invariant", "the flat flow translates θ₁, θ₂ by t(cos 2πθ₃, sin 2πθ₃) and fixes the rest"),
            ("lagrangian", "ω(∂₂j, ∂₃j) = 2π cos 2πθ₃ η′(θ₃)... nonzero on an open set"),
            ("graph", shape),
            ("conjugate_free", "orbits of the flat geodesic flow have no conjugate points"),
            ("kernel_dim", "ω restricted to the tangent space has rank 2 on a 3-manifold"),
            ("homotopic_to_zero_section", shape),
        ],
        invariance_horizons: unit_times(10),
        conjugate_horizon: 100.0,
        flow_step: 1e-3,
    }
}

/// Builds a named fixture.
pub fn fixture(name: &str) -> Result<Fixture> {
    Ok(match name {
        "prop-p1-torus" => flat_torus("prop-p1-torus", Eta::Identity),
        "eta-degree-one" => flat_torus("eta-degree-one", Eta::folded()),
        "eta-degree-zero" => flat_torus("eta-degree-zero", Eta::degree_zero()),
        "zero-section" => Fixture {
            name: "zero-section",
            hamiltonian: Box::new(Mechanical::flat(3)),
            manifold: Box::new(ZeroSection { d: 3 }),
            analytic_flow: true,
            expected: ExpectedProperties {
                invariant: Some(true),
                lagrangian: Some(true),
                graph: Some(true),
                conjugate_free: Some(true),
                kernel_dim: Some(KernelExpectation::Constant(3)),
                homotopic_to_zero_section: Some(true),
                stationary: Some(true),
            },
            rationale: vec![
                ("invariant", "p = 0 points are equilibria of the flat flow"),
                ("lagrangian", "ω vanishes on {p = 0}"),
                ("graph", "graph of the zero form"),
                ("conjugate_free", "orbits of the flat geodesic flow have no conjugate points"),
                ("kernel_dim", "Lagrangian, so the kernel is the whole tangent space"),
                ("homotopic_to_zero_section", "it is the zero section"),
                ("stationary", "X_H = (p, 0) vanishes at p = 0"),
            ],
            invariance_horizons: unit_times(10),
            conjugate_horizon: 100.0,
            flow_step: 1e-3,
        },
        "herman" => Fixture {
            name: "herman",
            hamiltonian: Box::new(Herman::default()),
            manifold: Box::new(HermanTorus::default()),
            analytic_flow: false,
            expected: ExpectedProperties {
                invariant: Some(true),
                lagrangian: Some(false),
                graph: Some(true),
                conjugate_free: None,
                kernel_dim: Some(KernelExpectation::NonConstant),
                homotopic_to_zero_section: Some(true),
                stationary: Some(true),
            },
            rationale: vec![
                ("invariant", "r₁ = ψ(θ₂), r₂ = 0 makes both partial derivatives of H vanish"),
                ("lagrangian", "ω(∂₁j, ∂₂j) = −ψ′(θ₂), nonzero since ψ is not constant"),
                ("graph", "graph of the one-form ψ(θ₂) dθ₁"),
                ("kernel_dim", "the kernel is everything where ψ′ = 0 and trivial elsewhere"),
                ("homotopic_to_zero_section", "a graph over the base"),
                ("stationary", "the restricted dynamics is the identity"),
            ],
            invariance_horizons: unit_times(10),
            conjugate_horizon: 10.0,
            flow_step: 1e-3,
        },
        "separatrix" => Fixture {
            name: "separatrix",
            hamiltonian: Box::new(Mechanical::cosine(3, 2, 2.0, 1.0)),
            manifold: Box::new(SeparatrixTorus),
            analytic_flow: false,
            expected: ExpectedProperties {
                invariant: Some(true),
                lagrangian: Some(true),
                graph: Some(false),
                conjugate_free: Some(true),
                kernel_dim: Some(KernelExpectation::Constant(3)),
                homotopic_to_zero_section: Some(false),
                stationary: None,
            },
            rationale: vec![
                ("invariant", "both branches lie on the energy level H = 1 of the θ₃ pendulum"),
                ("lagrangian", "a product of two zero-section circles with a curve in the (θ₃, r₃) plane"),
                ("graph", "two branches ±√2√(1 − cos 4πθ₃) over each base point"),
                ("conjugate_free", "separatrix orbits of the pendulum factor minimize action"),
                ("kernel_dim", "Lagrangian away from the corners of the parametrization"),
                ("homotopic_to_zero_section", "θ₃ runs over [0, ½] and back, winding zero times"),
            ],
            // Errors grow like e^{4πt} along the separatrix, so only short
            // horizons and fine steps are meaningful for an integrated flow.
            invariance_horizons: vec![0.25, 0.5, 0.75, 1.0],
            conjugate_horizon: 2.0,
            flow_step: 2.5e-4,
        },
        other => return Err(Error::UnknownFixture(other.to_string())),
    })
}

/// Parses `identity`, `translation(c₁, …)`, `sine(ε)` or `sine-ε`, with
/// dimension `d` where the name does not fix it.
pub fn named_basemap(spec: &str, d: usize) -> Result<BaseMap> {
    let s = spec.trim();
    let (name, args) = match (s.find('('), s.strip_suffix(')')) {
        (Some(i), Some(body)) => (&s[..i], Some(&body[i + 1..])),
        _ => match s.split_once('-') {
            Some((n, a)) if !n.is_empty() => (n, Some(a)),
            _ => (s, None),
        },
    };
    let nums: Vec<f64> = match args {
        Some(a) if !a.trim().is_empty() => a
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| Error::UnknownBaseMap(spec.to_string())))
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    let map = match (name.trim(), nums.len()) {
        ("identity", 0) => BaseMap::identity(d),
        ("translation", 0) => BaseMap::translation(&vec![0.1; d]),
        ("translation", 1) => BaseMap::translation(&vec![nums[0]; d]),
        ("translation", _) => BaseMap::translation(&nums),
        ("sine", 0) => BaseMap::sine(0.05, d),
        ("sine", 1) => BaseMap::sine(nums[0], d),
        _ => return Err(Error::UnknownBaseMap(spec.to_string())),
    };
    map.validate()?;
    Ok(map)
}
