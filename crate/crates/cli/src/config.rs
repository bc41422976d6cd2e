//! Run configuration: a TOML file whose every section and key is optional.

use std::path::Path;

use rtmap_core::precise::{bits_lost_per_step, FRACTION_BITS};
use rtmap_core::verify::SweepConfig;
use rtmap_core::{Error, MapKind, ModelParams};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub base: BaseSection,
    pub blending: BlendingSection,
    pub ifs: IfsSection,
    pub surgery: SurgerySection,
    pub verification: VerificationSection,
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub map: MapKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseSection {
    pub degree: u64,
    /// Forces the power `N` instead of the smallest covering one.
    pub n_override: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendingSection {
    /// `[center, half_width]` per base coordinate.
    pub u: Vec<[f64; 2]>,
    pub v: Vec<[f64; 2]>,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IfsSection {
    pub beta: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurgerySection {
    pub r: f64,
    pub theta: f64,
    pub delta: f64,
    pub s_chart_coords: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationSection {
    /// Transitivity grid side.
    pub grid_k: usize,
    /// Unstable-coverage grid side.
    pub coverage_grid_k: usize,
    pub horizon: usize,
    pub samples_per_cell: usize,
    pub max_iters: usize,
    /// Landing tolerance of stable witnesses.
    pub tol: f64,
    pub seed: u64,
    pub witness_boxes: usize,
    pub ball_radius: f64,
    pub critical_resolution: f64,
    pub orbit_steps: usize,
    pub orbit_start: Vec<f64>,
    pub cantor_depth: usize,
    pub fiber_scan_cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub trials: usize,
    pub eta: f64,
    pub seed: u64,
    pub bump_count: usize,
    pub transitivity_trials: usize,
    pub grid_k: usize,
    pub horizon: usize,
    pub samples_per_cell: usize,
    pub norm_samples: usize,
}

impl Default for BaseSection {
    fn default() -> Self {
        let m = ModelParams::default();
        Self {
            degree: m.degree,
            n_override: m.power,
        }
    }
}

impl Default for BlendingSection {
    fn default() -> Self {
        let m = ModelParams::default();
        Self {
            u: m.u.iter().map(|&(c, w)| [c, w]).collect(),
            v: m.v.iter().map(|&(c, w)| [c, w]).collect(),
            epsilon: m.epsilon,
        }
    }
}

impl Default for IfsSection {
    fn default() -> Self {
        let m = ModelParams::default();
        Self {
            beta: m.beta,
            alpha: m.alpha,
        }
    }
}

impl Default for SurgerySection {
    fn default() -> Self {
        let m = ModelParams::default();
        Self {
            r: m.r,
            theta: m.theta,
            delta: m.delta,
            s_chart_coords: m.s_chart,
        }
    }
}

impl Default for VerificationSection {
    fn default() -> Self {
        Self {
            grid_k: 64,
            coverage_grid_k: 100,
            horizon: 40,
            samples_per_cell: 25,
            max_iters: 40,
            tol: 1e-6,
            seed: 0,
            witness_boxes: 10,
            ball_radius: 0.05,
            critical_resolution: 0.004,
            orbit_steps: 80,
            orbit_start: vec![0.3, 0.7],
            cantor_depth: 4,
            fiber_scan_cells: 1000,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        let s = SweepConfig::default();
        Self {
            trials: s.trials,
            eta: s.eta,
            seed: s.seed,
            bump_count: s.bump_count,
            transitivity_trials: s.transitivity_trials,
            grid_k: s.grid_k,
            horizon: s.horizon,
            samples_per_cell: s.samples_per_cell,
            norm_samples: s.norm_samples,
        }
    }
}

/// Problems that map to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError(e.to_string())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            degree: self.base.degree,
            power: self.base.n_override,
            u: self.blending.u.iter().map(|a| (a[0], a[1])).collect(),
            v: self.blending.v.iter().map(|a| (a[0], a[1])).collect(),
            epsilon: self.blending.epsilon,
            beta: self.ifs.beta,
            alpha: self.ifs.alpha,
            r: self.surgery.r,
            theta: self.surgery.theta,
            delta: self.surgery.delta,
            s_chart: self.surgery.s_chart_coords.clone(),
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        let s = &self.sweep;
        SweepConfig {
            trials: s.trials,
            eta: s.eta,
            seed: s.seed,
            bump_count: s.bump_count,
            transitivity_trials: s.transitivity_trials,
            grid_k: s.grid_k,
            horizon: s.horizon,
            samples_per_cell: s.samples_per_cell,
            norm_samples: s.norm_samples,
        }
    }

    pub fn override_seed(&mut self, seed: u64) {
        self.verification.seed = seed;
        self.sweep.seed = seed;
    }

    /// Every construction inequality is checked by building the maps; the
    /// surgery is validated even when the run uses the skew or product map.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let params = self.model_params();
        let base = params.base()?;
        params.pair()?;
        if base.dim() == 1 {
            params.singular()?;
        } else if self.model.map == MapKind::Singular {
            return Err(ConfigError(
                "the singular map needs a circle base (one arc in U and V)".into(),
            ));
        }

        let v = &self.verification;
        let budget = FRACTION_BITS - 64;
        let lost = bits_lost_per_step(base.multiplier());
        for (name, steps) in [
            ("verification.horizon", v.horizon),
            ("verification.max_iters", v.max_iters),
            ("verification.orbit_steps", v.orbit_steps),
            ("sweep.horizon", self.sweep.horizon),
        ] {
            if steps as u32 * lost > budget {
                return Err(ConfigError(format!(
                    "{name} = {steps} exceeds the extended-precision budget of {} steps",
                    budget / lost.max(1)
                )));
            }
        }
        let positive = [
            ("verification.grid_k", v.grid_k),
            ("verification.coverage_grid_k", v.coverage_grid_k),
            ("verification.samples_per_cell", v.samples_per_cell),
            ("verification.fiber_scan_cells", v.fiber_scan_cells),
            ("sweep.grid_k", self.sweep.grid_k),
            ("sweep.samples_per_cell", self.sweep.samples_per_cell),
            ("sweep.norm_samples", self.sweep.norm_samples),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(ConfigError(format!("{name} must be positive")));
            }
        }
        if v.coverage_grid_k < 2 {
            return Err(ConfigError("verification.coverage_grid_k must be at least 2".into()));
        }
        if !(v.tol > 0.0) || !(v.ball_radius > 0.0 && v.ball_radius < 0.5) {
            return Err(ConfigError(
                "verification.tol must be positive and 0 < ball_radius < 1/2".into(),
            ));
        }
        if !(v.critical_resolution > 0.0) {
            return Err(ConfigError("verification.critical_resolution must be positive".into()));
        }
        if v.orbit_start.len() != base.dim() + 1 {
            return Err(ConfigError(format!(
                "verification.orbit_start needs {} coordinates",
                base.dim() + 1
            )));
        }
        if !(0.0..0.5).contains(&self.sweep.eta) {
            return Err(ConfigError(format!(
                "sweep.eta must lie in [0, 1/2), got {}",
                self.sweep.eta
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_default_config_matches_the_built_in_defaults() {
        let text = include_str!("../../../configs/default.toml");
        assert_eq!(RunConfig::parse(text).unwrap(), RunConfig::default());
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.model_params(), ModelParams::default());
        assert_eq!(cfg.sweep_config(), SweepConfig::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = RunConfig::parse("[surgery]\nr = 0.13\n[model]\nmap = \"skew\"\n").unwrap();
        assert_eq!(cfg.surgery.r, 0.13);
        assert_eq!(cfg.surgery.theta, SurgerySection::default().theta);
        assert_eq!(cfg.model.map, MapKind::Skew);
    }

    #[test]
    fn delta_chain_is_named() {
        let err = RunConfig::parse("[surgery]\ndelta = 0.08\ntheta = 0.03\n").unwrap_err();
        assert!(err.0.contains("0<δ<2θ"), "{err}");
    }

    #[test]
    fn overlapping_blocks_are_named() {
        let err = RunConfig::parse("[blending]\nu = [[0.0, 0.02]]\nv = [[0.05, 0.02]]\n").unwrap_err();
        assert!(err.0.contains("U_ε ∩ V_ε = ∅"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[surgery]\nradius = 0.1\n").is_err());
        assert!(RunConfig::parse("this is not toml").is_err());
    }

    #[test]
    fn precision_budget_is_enforced() {
        let err = RunConfig::parse("[verification]\nhorizon = 200\n").unwrap_err();
        assert!(err.0.contains("budget"), "{err}");
    }
}
