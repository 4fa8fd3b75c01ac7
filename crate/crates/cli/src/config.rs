//! Run configuration read from JSON. Every section has defaults except the model.

use layerstab::dynamics::{EvolveOptions, NonlinearOptions};
use layerstab::energy::{GronwallOptions, LinearizedAuditOptions};
use layerstab::evans::{EvansOptions, WindingOptions};
use layerstab::model::{FlowCase, ModelSpec, SamplingSpec};
use layerstab::sweep::{SweepGrid, SweepOptions};
use serde::Deserialize;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub region: RegionConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub energy: EnergyConfig,
    pub sweep: Option<SweepConfig>,
    /// Output directory; `--out` overrides it.
    pub out: Option<String>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileMethod {
    Shooting,
    /// Closed-form transverse layer; isentropic outflow only.
    Explicit,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub nodes: usize,
    pub x_max: Option<f64>,
    pub method: ProfileMethod,
    /// Wall values of the imposed `W` components for tabulated systems.
    pub wall_w: Option<Vec<f64>>,
    /// Overrides the classification of the wall.
    pub case: Option<FlowCase>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self { nodes: 400, x_max: None, method: ProfileMethod::Shooting, wall_w: None, case: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionConfig {
    pub xi_grid: Vec<f64>,
    pub radius: f64,
    pub origin_ball: f64,
    pub margin_tol: f64,
    /// `Re lambda` of the line sampled by `evans-map`.
    pub map_re: f64,
    pub map_samples: usize,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self { xi_grid: vec![0.0, 0.5, 1.0], radius: 10.0, origin_ball: 1e-3, margin_tol: 1e-8, map_re: 0.1, map_samples: 41 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub winding: WindingOptions,
    pub evans: EvansOptions,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub xi_grid: Vec<f64>,
    pub x_max: f64,
    pub nodes: usize,
    /// Size of the random initial perturbation.
    pub amplitude: f64,
    pub evolve: EvolveOptions,
    /// One-dimensional nonlinear run; skipped when absent.
    pub nonlinear: Option<NonlinearOptions>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            xi_grid: vec![0.5],
            x_max: 30.0,
            nodes: 601,
            amplitude: 1e-3,
            evolve: EvolveOptions { dt: 0.02, t_end: 20.0, output_every: 10, ..EvolveOptions::default() },
            nonlinear: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub xi_grid: Vec<f64>,
    pub x_max: f64,
    pub nodes: usize,
    pub order: usize,
    pub c_star: f64,
    pub evolve: EvolveOptions,
    pub gronwall: GronwallOptions,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        let base = LinearizedAuditOptions::default();
        Self {
            xi_grid: vec![0.0, 0.5],
            x_max: 20.0,
            nodes: 201,
            order: base.order,
            c_star: base.c_star,
            evolve: base.evolve,
            gronwall: base.gronwall,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: SweepGrid,
    #[serde(default)]
    pub options: SweepOptions,
}

fn positive(field: &str, value: f64) -> Result<(), CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field}: must be positive, got {value}")))
    }
}

fn at_least(field: &str, value: usize, min: usize) -> Result<(), CliError> {
    if value >= min {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field}: must be at least {min}, got {value}")))
    }
}

fn check_evolve(prefix: &str, e: &EvolveOptions) -> Result<(), CliError> {
    positive(&format!("{prefix}.dt"), e.dt)?;
    positive(&format!("{prefix}.t_end"), e.t_end)?;
    positive(&format!("{prefix}.blowup_factor"), e.blowup_factor)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            // serde_json already appends the line and column
            let path = e.path().to_string();
            let at = if path == "." { String::new() } else { format!("{path}: ") };
            CliError::Config(format!("{at}{}", e.inner()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let r = &self.region;
        positive("region.radius", r.radius)?;
        positive("region.origin_ball", r.origin_ball)?;
        positive("region.margin_tol", r.margin_tol)?;
        if r.origin_ball >= r.radius {
            return Err(CliError::Config("region.origin_ball: must be smaller than region.radius".into()));
        }
        at_least("region.map_samples", r.map_samples, 2)?;
        at_least("profile.nodes", self.profile.nodes, 8)?;
        if let Some(x) = self.profile.x_max {
            positive("profile.x_max", x)?;
        }
        let t = &self.tolerances;
        positive("tolerances.winding.zero_threshold", t.winding.zero_threshold)?;
        at_least("tolerances.winding.initial_samples", t.winding.initial_samples, 8)?;
        positive("tolerances.evans.frame_tol", t.evans.frame_tol)?;
        positive("tolerances.evans.safety", t.evans.safety)?;
        positive("tolerances.evans.kato_step", t.evans.kato_step)?;
        let s = &self.simulate;
        positive("simulate.x_max", s.x_max)?;
        at_least("simulate.nodes", s.nodes, 5)?;
        positive("simulate.amplitude", s.amplitude)?;
        check_evolve("simulate.evolve", &s.evolve)?;
        if let Some(nl) = &s.nonlinear {
            positive("simulate.nonlinear.cfl", nl.cfl)?;
            positive("simulate.nonlinear.t_end", nl.t_end)?;
            positive("simulate.nonlinear.x_max", nl.x_max)?;
            at_least("simulate.nonlinear.cells", nl.cells, 4)?;
        }
        let e = &self.energy;
        positive("energy.x_max", e.x_max)?;
        at_least("energy.nodes", e.nodes, 8)?;
        positive("energy.c_star", e.c_star)?;
        positive("energy.gronwall.c_max", e.gronwall.c_max)?;
        check_evolve("energy.evolve", &e.evolve)?;
        if let Some(sw) = &self.sweep {
            let o = &sw.options;
            positive("sweep.options.radius", o.radius)?;
            positive("sweep.options.origin_ball", o.origin_ball)?;
            positive("sweep.options.margin_tol", o.margin_tol)?;
            positive("sweep.options.decay_lengths", o.decay_lengths)?;
            at_least("sweep.options.profile_nodes", o.profile_nodes, 8)?;
        }
        if let Some(0) = self.threads {
            return Err(CliError::Config("threads: must be at least 1".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<&ModelSpec, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::Config("model: missing field".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"model": {"model": "isentropic2d", "params": {"rho0": 1, "V": -0.1, "u_inf": 0.01, "mu": 0.1}}}"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.region.xi_grid, vec![0.0, 0.5, 1.0]);
        assert_eq!(c.profile.method, ProfileMethod::Shooting);
        assert!(c.sweep.is_none());
    }

    #[test]
    fn type_errors_carry_the_field_path() {
        let text = r#"{"region": {"radius": "big"}}"#;
        let CliError::Config(msg) = RunConfig::parse(text).unwrap_err() else { panic!() };
        assert!(msg.starts_with("region.radius:"), "{msg}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let CliError::Config(msg) = RunConfig::parse(r#"{"regoin": {}}"#).unwrap_err() else { panic!() };
        assert!(msg.contains("regoin"), "{msg}");
    }

    #[test]
    fn nonpositive_tolerances_are_rejected() {
        let text = r#"{"tolerances": {"winding": {"zero_threshold": 0}}}"#;
        let CliError::Config(msg) = RunConfig::parse(text).unwrap_err() else { panic!() };
        assert!(msg.starts_with("tolerances.winding.zero_threshold"), "{msg}");
    }

    #[test]
    fn syntax_errors_report_a_location() {
        let CliError::Config(msg) = RunConfig::parse("{\n  \"model\": ,\n}").unwrap_err() else { panic!() };
        assert!(msg.contains("line 2"), "{msg}");
    }
}
