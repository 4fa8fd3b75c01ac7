//! JSON description of a system: `{"model": ..., "params": {...}}`.

use super::{
    build_isentropic_2d, ConstantCoefficientSystem, EndState, IsentropicParams, ModelError, SystemDefinition,
    TabulatedParams,
};
use crate::linalg::RVector;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params")]
pub enum ModelSpec {
    #[serde(rename = "isentropic2d")]
    Isentropic2d(IsentropicParams),
    #[serde(rename = "custom-tabulated")]
    CustomTabulated(TabulatedParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    #[serde(default = "default_directions")]
    pub directions: usize,
    /// Extra states (conserved variables) audited besides the end and wall states.
    #[serde(default)]
    pub states: Vec<Vec<f64>>,
}

fn default_directions() -> usize {
    128
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self { directions: default_directions(), states: Vec::new() }
    }
}

#[derive(Clone)]
pub struct BuiltModel {
    pub system: Arc<dyn SystemDefinition>,
    pub end_state: EndState,
    /// Conserved state at the wall used for classification.
    pub wall_state: RVector,
    pub isentropic: Option<IsentropicParams>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<BuiltModel, ModelError> {
        match self {
            ModelSpec::Isentropic2d(p) => {
                let sys = build_isentropic_2d(*p)?;
                let end_state = sys.end_state();
                let wall_state = sys.from_w(&p.wall_w());
                Ok(BuiltModel { system: Arc::new(sys), end_state, wall_state, isentropic: Some(*p) })
            }
            ModelSpec::CustomTabulated(p) => {
                let sys = ConstantCoefficientSystem::from_params(p)?;
                let u_plus = RVector::from_vec(p.end_state.clone());
                let end_state = EndState::new(&sys, u_plus.clone());
                let wall_state = p.wall_state.clone().map(RVector::from_vec).unwrap_or(u_plus);
                Ok(BuiltModel { system: Arc::new(sys), end_state, wall_state, isentropic: None })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_isentropic() {
        let text = r#"{"model": "isentropic2d", "params": {"rho0": 1, "V": -0.1, "u_inf": 1, "mu": 0.1, "gamma": 2}}"#;
        let spec: ModelSpec = serde_json::from_str(text).unwrap();
        let built = spec.build().unwrap();
        assert_eq!(built.system.size(), 3);
        assert_eq!(built.end_state.u_plus[2], -0.1);
    }

    #[test]
    fn rejects_excess_second_viscosity() {
        let text = r#"{"model": "isentropic2d", "params": {"rho0": 1, "V": -0.1, "u_inf": 1, "mu": 0.1, "eta": 0.15}}"#;
        let spec: ModelSpec = serde_json::from_str(text).unwrap();
        match spec.build() {
            Err(ModelError::InvalidParameter { field, .. }) => assert_eq!(field, "params.eta"),
            other => panic!("unexpected {:?}", other.err()),
        }
    }

    #[test]
    fn parses_tabulated() {
        let text = r#"{"model": "custom-tabulated", "params": {"d": 1, "n": 2, "r": 1,
            "a": [[[0, 1], [1, 0]]], "b": [[[[0, 0], [0, 1]]]], "end_state": [0, 0]}}"#;
        let spec: ModelSpec = serde_json::from_str(text).unwrap();
        let built = spec.build().unwrap();
        assert_eq!(built.system.parabolic_rank(), 1);
    }
}
