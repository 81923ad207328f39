//! TOML run configuration.
//!
//! Every section and key is optional; missing values take the defaults
//! below. The only environment input is `INVTORI_OUTPUT_DIR`, which replaces
//! `run.output_dir`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genfun::{BaseMap, SolverOptions, DEFAULT_ORDER};
use crate::green::Side;
use crate::integrate::Scheme;

pub const OUTPUT_DIR_ENV: &str = "INVTORI_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Analyze,
    Flow,
    Green,
    Conjugate,
    Characteristic,
    Extend,
    Homology,
}

impl Operation {
    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Analyze => "analyze",
            Operation::Flow => "flow",
            Operation::Green => "green",
            Operation::Conjugate => "conjugate",
            Operation::Characteristic => "characteristic",
            Operation::Extend => "extend",
            Operation::Homology => "homology",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub operation: Operation,
    /// Fixture name, or base map name for `extend`.
    pub target: String,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            operation: Operation::Analyze,
            target: "prop-p1-torus".into(),
            seed: 0,
            output_dir: PathBuf::from("invtori-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Points per axis for rank, kernel and stationarity sampling.
    pub analysis: usize,
    /// Points per axis for the graph test.
    pub graph: usize,
    /// Points per axis for the invariance check.
    pub invariance: usize,
    /// Points per axis for winding numbers.
    pub winding: usize,
    /// Points per axis for the characteristic field.
    pub characteristic: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { analysis: 16, graph: 16, invariance: 6, winding: 32, characteristic: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub invariance: f64,
    /// `‖X_H‖` below which a point counts as an equilibrium.
    pub stationary: f64,
    pub energy: f64,
    /// Convergence residual of Green bundle estimates.
    pub green: f64,
    /// Finite-difference checks of the zero-section identities.
    pub identities: f64,
    pub zero_section: f64,
    pub symplectic: f64,
    /// Agreement with closed-form extensions.
    pub closed_form: f64,
    /// Relative error of homology growth rates.
    pub growth: f64,
    pub direction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            invariance: 1e-6,
            stationary: 1e-12,
            energy: 1e-6,
            green: 1e-6,
            identities: 1e-4,
            zero_section: 1e-10,
            symplectic: 1e-5,
            closed_form: 1e-8,
            growth: 0.01,
            direction: 1e-6,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let all = [
            ("invariance", self.invariance),
            ("stationary", self.stationary),
            ("energy", self.energy),
            ("green", self.green),
            ("identities", self.identities),
            ("zero_section", self.zero_section),
            ("symplectic", self.symplectic),
            ("closed_form", self.closed_form),
            ("growth", self.growth),
            ("direction", self.direction),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("tolerances.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Empty lists and absent values fall back to the fixture's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Horizons {
    pub invariance: Vec<f64>,
    pub conjugate: Option<f64>,
    /// Sampling interval of conjugate scans.
    pub conjugate_step: f64,
    /// Orbits sampled for the conjugate-free check.
    pub conjugate_orbits: usize,
    pub green: Vec<f64>,
    pub lipschitz: Option<f64>,
    pub lipschitz_pairs: usize,
}

impl Default for Horizons {
    fn default() -> Self {
        Self {
            invariance: Vec::new(),
            conjugate: None,
            conjugate_step: 0.05,
            conjugate_orbits: 10,
            green: Vec::new(),
            lipschitz: None,
            lipschitz_pairs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    /// Integration step; defaults to the fixture's.
    pub step: Option<f64>,
    pub scheme: Scheme,
    pub use_exact: bool,
    /// Samples kept in trajectory output (every n-th step).
    pub record_every: usize,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self { step: None, scheme: Scheme::Auto, use_exact: true, record_every: 10 }
    }
}

/// Starting data for single-orbit operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Points {
    /// Phase point `(q, p)`; defaults to the fixture's embedding of `theta0`.
    pub x0: Vec<f64>,
    /// Parameter on the fixture's submanifold.
    pub theta0: Vec<f64>,
    /// Horizon for `flow` and `characteristic`.
    pub t: f64,
    pub side: Side,
}

impl Default for Points {
    fn default() -> Self {
        Self { x0: Vec::new(), theta0: Vec::new(), t: 10.0, side: Side::Minus }
    }
}

/// Either a name such as `sine-0.05` or an explicit map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseMapSpec {
    Named(String),
    Explicit(BaseMap),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtendSection {
    /// Overrides `run.target` when present.
    pub basemap: Option<BaseMapSpec>,
    pub dim: usize,
    pub order: usize,
    /// Random samples with `‖p‖ ≤ sample_radius` for the symplecticity check.
    pub samples: usize,
    pub sample_radius: f64,
    /// Base points for the zero-section identities.
    pub identity_points: usize,
    pub fd_step: f64,
    pub solver: SolverOptions,
}

impl Default for ExtendSection {
    fn default() -> Self {
        Self {
            basemap: None,
            dim: 2,
            order: DEFAULT_ORDER,
            samples: 100,
            sample_radius: 0.5,
            identity_points: 5,
            fd_step: 1e-5,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomologySection {
    pub matrix: [[i64; 2]; 2],
    pub v0: [i64; 2],
    pub n: usize,
}

impl Default for HomologySection {
    fn default() -> Self {
        Self { matrix: [[2, 1], [1, 1]], v0: [1, 0], n: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub grid: GridSection,
    pub tolerances: Tolerances,
    pub horizons: Horizons,
    pub flow: FlowSection,
    pub points: Points,
    pub extend: ExtendSection,
    pub homology: HomologySection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies `INVTORI_OUTPUT_DIR` if set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.run.output_dir = PathBuf::from(dir);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        let g = &self.grid;
        for (name, n) in [
            ("analysis", g.analysis),
            ("graph", g.graph),
            ("invariance", g.invariance),
            ("winding", g.winding),
            ("characteristic", g.characteristic),
        ] {
            if n < 2 {
                return Err(Error::Config(format!("grid.{name} must be at least 2")));
            }
        }
        if self.flow.step.is_some_and(|h| !(h > 0.0)) || self.flow.record_every == 0 {
            return Err(Error::Config("flow.step must be positive and flow.record_every nonzero".into()));
        }
        let h = &self.horizons;
        if !(h.conjugate_step > 0.0) || h.conjugate.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("conjugate horizon and step must be positive".into()));
        }
        if h.invariance.iter().chain(&h.green).any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Config("horizons must be positive".into()));
        }
        if !self.points.t.is_finite() {
            return Err(Error::Config("points.t must be finite".into()));
        }
        let e = &self.extend;
        if e.dim == 0 || e.samples == 0 || !(e.sample_radius > 0.0) || !(e.fd_step > 0.0) {
            return Err(Error::Config("extend.dim, samples, sample_radius and fd_step must be positive".into()));
        }
        Ok(())
    }

    pub fn basemap(&self) -> Result<BaseMap> {
        match &self.extend.basemap {
            Some(BaseMapSpec::Explicit(m)) => {
                m.validate()?;
                Ok(m.clone())
            }
            Some(BaseMapSpec::Named(s)) => crate::fixtures::named_basemap(s, self.extend.dim),
            None => crate::fixtures::named_basemap(&self.run.target, self.extend.dim),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.run.operation = Operation::Extend;
        cfg.extend.basemap = Some(BaseMapSpec::Explicit(BaseMap::translation(&[0.1, 0.2])));
        cfg.horizons.conjugate = Some(5.0);
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::from_toml(
            r#"
            [run]
            operation = "homology"
            seed = 9
            [homology]
            matrix = [[1, 1], [0, 1]]
            v0 = [0, 1]
            [extend]
            basemap = "sine-0.05"
            [flow]
            scheme = "yoshida6"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.run.operation, Operation::Homology);
        assert_eq!(cfg.homology.matrix, [[1, 1], [0, 1]]);
        assert_eq!(cfg.flow.scheme, Scheme::Yoshida6);
        assert_eq!(cfg.basemap().unwrap(), BaseMap::sine(0.05, 2));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(matches!(RunConfig::from_toml("[tolerances]\ninvariance = 0.0"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[run]\noperation = \"dance\""), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[grid]\nbogus = 3"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[horizons]\ngreen = [-1.0]"), Err(Error::Config(_))));
    }
}
