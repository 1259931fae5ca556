use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use siteprep::lattice::{Boundary, ModelSpec};
use siteprep::overlap::{Engine, PadKind};
use siteprep::stateprep::OracleMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    pub prep: Option<PrepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_sites: usize,
    pub spacing: f64,
    pub bare_mass: f64,
    pub coupling_sq: f64,
    #[serde(default = "one")]
    pub wilson_r: f64,
    #[serde(default = "one_usize")]
    pub flavors: usize,
    #[serde(default = "dirichlet")]
    pub boundary: Boundary,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn dirichlet() -> Boundary {
    Boundary::Dirichlet
}

impl ModelSection {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            n_sites: self.n_sites,
            spacing: self.spacing,
            bare_mass: self.bare_mass,
            coupling_sq: self.coupling_sq,
            wilson_r: self.wilson_r,
            flavors: self.flavors,
            boundary: self.boundary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub engine: Engine,
    pub epsilon_goal: f64,
    pub max_bond: usize,
    /// Largest qubit count handed to dense diagonalization.
    pub dense_cap: usize,
    pub seed: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            engine: Engine::Dmrg,
            epsilon_goal: 1e-8,
            max_bond: 64,
            dense_cap: siteprep::exact::DENSE_CAP,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Correlator fit window `[lo, hi]` in length units; the default is
    /// `[3a, L/4]`.
    pub fit_window: Option<[f64; 2]>,
    pub pad: PadKind,
    /// Inclusive size range `[first, last]`.
    pub sizes: Option<[usize; 2]>,
    /// `(m0, g0^2)` points for correlate and overlap; defaults to the model
    /// point for overlap and a 3 x 5 grid for correlate.
    pub grid: Option<Vec<[f64; 2]>>,
    pub models: Vec<String>,
    /// Mass gap for the energy-fit tolerance; defaults to `1/χ` from the
    /// correlation fit of the model point.
    pub gap: Option<f64>,
    /// Energy table to fit instead of the solve outputs.
    pub energies: Option<PathBuf>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            fit_window: None,
            pad: PadKind::Uniform,
            sizes: None,
            grid: None,
            models: vec!["linear".into(), "casimir".into()],
            gap: None,
            energies: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepSection {
    pub n0: usize,
    pub n_final: usize,
    pub eps: f64,
    pub oracle: OracleMode,
    #[serde(default = "eta_floor")]
    pub eta_floor: f64,
    #[serde(default = "gap_fraction")]
    pub gap_fraction: f64,
}

fn eta_floor() -> f64 {
    siteprep::stateprep::PrepOptions::default().eta_floor
}

fn gap_fraction() -> f64 {
    siteprep::stateprep::PrepOptions::default().gap_fraction
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec!["csv".into()],
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let spec = self.model.spec();
        spec.validate().map_err(|e| format!("[model] {e}"))?;
        if !(self.solver.epsilon_goal > 0.0) {
            return Err("[solver] epsilon_goal must be positive".into());
        }
        if self.solver.max_bond == 0 {
            return Err("[solver] max_bond must be positive".into());
        }
        if let Some([a, b]) = self.analysis.sizes {
            if a < 2 || b < a {
                return Err(format!("[analysis] sizes [{a}, {b}] must satisfy 2 <= first <= last"));
            }
        }
        if let Some([lo, hi]) = self.analysis.fit_window {
            if !(lo > 0.0 && hi > lo) {
                return Err(format!("[analysis] fit_window [{lo}, {hi}] must satisfy 0 < lo < hi"));
            }
        }
        for m in &self.analysis.models {
            m.parse::<siteprep::observables::EnergyModel>()
                .map_err(|e| format!("[analysis] models: {e}"))?;
        }
        if let Some(g) = self.analysis.gap {
            if !(g > 0.0) {
                return Err("[analysis] gap must be positive".into());
            }
        }
        if self.output.formats.iter().any(|f| f != "csv") {
            return Err("[output] formats: only \"csv\" is supported".into());
        }
        if let Some(p) = &self.prep {
            if p.n0 < 2 || p.n_final < p.n0 {
                return Err(format!("[prep] need 2 <= n0 <= n_final, got {} and {}", p.n0, p.n_final));
            }
            if !(p.eps > 0.0 && p.eps < 1.0) {
                return Err("[prep] eps must lie in (0, 1)".into());
            }
        }
        Ok(())
    }

    /// Canonical serialization; the manifest hash is taken over it.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sizes(&self) -> (usize, usize) {
        self.analysis.sizes.map(|[a, b]| (a, b)).unwrap_or((2, self.model.n_sites))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
n_sites = 4
spacing = 0.02
bare_mass = 0.2
coupling_sq = 1.5
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.solver.engine, Engine::Dmrg);
        assert_eq!(c.model.flavors, 1);
        assert_eq!(c.sizes(), (2, 4));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::parse(&format!("{MINIMAL}bogus = 1\n")).unwrap_err();
        assert!(err.contains("bogus"), "{err}");
        let err = ExperimentConfig::parse(&format!("{MINIMAL}[solver]\nengine = \"dense\"\nwarp = 2\n")).unwrap_err();
        assert!(err.contains("warp"), "{err}");
    }

    #[test]
    fn canonical_roundtrips() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.canonical()).unwrap(), c);
    }
}
