//! Scenario files: a JSON document with an environment block, solver
//! options and output options. Unknown keys are rejected by name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ModelError;
use crate::grid::DEFAULT_GRID_POINTS;
use crate::model::{CostFamily, CostModel, Environment, PiecewiseLinearCurve};
use crate::solver::SolverOptions;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: cannot read: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostFamilyTag {
    Uniform,
    Power,
    PiecewiseLinearDensity,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    /// `[θ, density]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_knots: Option<Vec<[f64; 2]>>,
}

impl CostParams {
    fn is_empty(&self) -> bool {
        self.exponent.is_none() && self.density_knots.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentBlock {
    pub theta_low: f64,
    pub theta_high: f64,
    pub cost_family: CostFamilyTag,
    #[serde(default, skip_serializing_if = "CostParams::is_empty")]
    pub cost_params: CostParams,
    /// `[price, quantity]` pairs.
    pub conjectured_demand_knots: Vec<[f64; 2]>,
    pub lowest_demand_knots: Vec<[f64; 2]>,
    #[serde(default)]
    pub extra_demand_knots: Vec<Vec<[f64; 2]>>,
    pub quantity_cap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_constraint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_iterative: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SolverBlock {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn options(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            tol_constraint: self.tol_constraint.unwrap_or(d.tol_constraint),
            tol_objective: self.tol_objective.unwrap_or(d.tol_objective),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            force_iterative: self.force_iterative.unwrap_or(d.force_iterative),
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbose: Option<bool>,
    /// Figure ids to emit on `solve`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub figures: Vec<u8>,
}

impl OutputBlock {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub environment: EnvironmentBlock,
    #[serde(default, skip_serializing_if = "SolverBlock::is_empty")]
    pub solver: SolverBlock,
    #[serde(default, skip_serializing_if = "OutputBlock::is_empty")]
    pub output: OutputBlock,
}

fn knots(raw: &[[f64; 2]]) -> Vec<(f64, f64)> {
    raw.iter().map(|k| (k[0], k[1])).collect()
}

fn raw_knots(curve: &PiecewiseLinearCurve) -> Vec<[f64; 2]> {
    curve.knots().iter().map(|&(x, y)| [x, y]).collect()
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// A scenario describing `env` with default solver and output blocks.
    pub fn from_environment(env: &Environment) -> Self {
        let cost = env.cost();
        let (cost_family, cost_params) = match cost.family() {
            CostFamily::Uniform => (CostFamilyTag::Uniform, CostParams::default()),
            CostFamily::Power { exponent } => (
                CostFamilyTag::Power,
                CostParams {
                    exponent: Some(*exponent),
                    density_knots: None,
                },
            ),
            CostFamily::PiecewiseLinearDensity { knots } => (
                CostFamilyTag::PiecewiseLinearDensity,
                CostParams {
                    exponent: None,
                    density_knots: Some(knots.iter().map(|&(x, y)| [x, y]).collect()),
                },
            ),
        };
        let grid_points = (env.grid_points() != DEFAULT_GRID_POINTS).then_some(env.grid_points());
        Self {
            name: None,
            environment: EnvironmentBlock {
                theta_low: cost.low(),
                theta_high: cost.high(),
                cost_family,
                cost_params,
                conjectured_demand_knots: raw_knots(env.conjectured()),
                lowest_demand_knots: raw_knots(env.lowest()),
                extra_demand_knots: env.extras().iter().map(raw_knots).collect(),
                quantity_cap: env.quantity_cap(),
                grid_points,
            },
            solver: SolverBlock::default(),
            output: OutputBlock::default(),
        }
    }

    /// Builds the environment; `grid_points` overrides the file.
    pub fn environment(&self, grid_points: Option<usize>) -> Result<Environment, ScenarioError> {
        let e = &self.environment;
        let family = match e.cost_family {
            CostFamilyTag::Uniform => CostFamily::Uniform,
            CostFamilyTag::Power => CostFamily::Power {
                exponent: e.cost_params.exponent.ok_or_else(|| {
                    ModelError::InvalidCost("power family needs cost_params.exponent".into())
                })?,
            },
            CostFamilyTag::PiecewiseLinearDensity => CostFamily::PiecewiseLinearDensity {
                knots: knots(e.cost_params.density_knots.as_deref().ok_or_else(|| {
                    ModelError::InvalidCost(
                        "piecewise_linear_density family needs cost_params.density_knots".into(),
                    )
                })?),
            },
        };
        let cost = CostModel::new(e.theta_low, e.theta_high, family)?;
        let extras = e
            .extra_demand_knots
            .iter()
            .map(|k| PiecewiseLinearCurve::new(knots(k)))
            .collect::<Result<Vec<_>, _>>()?;
        let env = Environment::new(
            cost,
            PiecewiseLinearCurve::new(knots(&e.conjectured_demand_knots))?,
            PiecewiseLinearCurve::new(knots(&e.lowest_demand_knots))?,
            extras,
            e.quantity_cap,
        )?;
        let points = grid_points.or(e.grid_points).unwrap_or(DEFAULT_GRID_POINTS);
        if points < 3 {
            return Err(ModelError::InvalidEnvironment(format!(
                "grid_points must be at least 3, got {points}"
            ))
            .into());
        }
        Ok(env.with_grid_points(points))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    #[test]
    fn fixtures_round_trip() {
        for env in [fixtures::s1(), fixtures::s2(), fixtures::s3()] {
            let file = ScenarioFile::from_environment(&env);
            let text = file.to_json();
            let back = ScenarioFile::from_json(&text).unwrap();
            assert_eq!(back, file);
            assert_eq!(back.to_json(), text);
            let rebuilt = back.environment(None).unwrap();
            assert_eq!(rebuilt.lowest(), env.lowest());
            assert_eq!(rebuilt.conjectured(), env.conjectured());
            assert_eq!(rebuilt.grid_points(), env.grid_points());
        }
    }

    #[test]
    fn awkward_floats_survive() {
        let mut file = ScenarioFile::from_environment(&fixtures::s2());
        file.environment.quantity_cap = 0.1 + 0.2;
        file.environment.cost_family = CostFamilyTag::Power;
        file.environment.cost_params.exponent = Some(1.0 / 3.0);
        let back = ScenarioFile::from_json(&file.to_json()).unwrap();
        assert_eq!(
            back.environment.quantity_cap.to_bits(),
            (0.1f64 + 0.2).to_bits()
        );
        assert_eq!(back, file);
    }

    #[test]
    fn unknown_keys_are_named() {
        let mut v: serde_json::Value =
            serde_json::from_str(&ScenarioFile::from_environment(&fixtures::s1()).to_json())
                .unwrap();
        v["environment"]["theta_lo"] = 1.0.into();
        let err = ScenarioFile::from_json(&v.to_string())
            .unwrap_err()
            .to_string();
        assert!(err.contains("theta_lo"), "{err}");
        v["environment"].as_object_mut().unwrap().remove("theta_lo");
        v["solver"] = serde_json::json!({"max_iter": 5});
        let err = ScenarioFile::from_json(&v.to_string())
            .unwrap_err()
            .to_string();
        assert!(err.contains("max_iter"), "{err}");
    }

    #[test]
    fn parse_errors_carry_position() {
        match ScenarioFile::from_json("{\n  \"environment\": [1,\n}") {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_family_parameters() {
        let mut file = ScenarioFile::from_environment(&fixtures::s1());
        file.environment.cost_family = CostFamilyTag::Power;
        assert!(matches!(
            file.environment(None),
            Err(ScenarioError::Model(_))
        ));
    }

    #[test]
    fn solver_block_defaults() {
        let b = SolverBlock {
            max_iters: Some(10),
            ..Default::default()
        };
        let o = b.options();
        assert_eq!(o.max_iters, 10);
        assert_eq!(o.tol_constraint, SolverOptions::default().tol_constraint);
    }
}
