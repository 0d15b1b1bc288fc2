//! Scenario files: a single versioned JSON document describing the space,
//! the total payoff, the agents, the endowments, and the task to run.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use riskshare_core::agent::{Agent, RiskAttitude};
use riskshare_core::space::{FiniteProbSpace, RandomVariable};
use riskshare_core::utility::{Curvature, UtilityFunction};
use riskshare_core::weighting::WeightingFunction;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub space: Option<SpaceSpec>,
    /// Explicit payoff per atom; generators imply one when omitted.
    #[serde(default)]
    pub payoff: Option<Vec<f64>>,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub endowments: Option<EndowmentSpec>,
    pub task: TaskSpec,
}

fn default_schema_version() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceSpec {
    /// Explicit atom probabilities.
    Atoms { probabilities: Vec<f64> },
    /// `m` equiprobable atoms carrying the midpoint discretization of the
    /// uniform distribution on `[lo, hi]` as the implied payoff.
    UniformGrid {
        m: usize,
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    /// Two atoms: payoff `a` with probability `p`, payoff `b` otherwise.
    TwoPoint { a: f64, b: f64, p: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub utility: UtilityFunction,
    #[serde(default)]
    pub weighting: Option<WeightingFunction>,
    pub attitude: RiskAttitude,
    /// Curvature tag of the utility; inferred from the attitude when omitted.
    #[serde(default)]
    pub curvature: Option<Curvature>,
}

impl AgentSpec {
    pub fn build(&self) -> Agent {
        let curvature = self.curvature.unwrap_or(match self.attitude {
            RiskAttitude::RiskSeeking => Curvature::StrictlyConvex,
            RiskAttitude::RiskAverse => Curvature::StrictlyConcave,
            RiskAttitude::Other => Curvature::None,
        });
        Agent {
            utility: self.utility.clone(),
            weighting: self.weighting.clone().unwrap_or(WeightingFunction::Identity),
            attitude: self.attitude,
            curvature,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EndowmentSpec {
    /// Agent-major payoff vectors summing to the total.
    Explicit { values: Vec<Vec<f64>> },
    /// Fixed fractions of the total payoff.
    Proportional { theta: Vec<f64> },
    /// Equal fractions.
    Equal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    /// Improve the endowment allocation to a winner-take-all one.
    Improve,
    /// Pareto certificate for an allocation (the endowments by default).
    Pareto {
        #[serde(default)]
        allocation: Option<Vec<Vec<f64>>>,
    },
    /// Frontier trace over a weight grid.
    Upf {
        #[serde(default)]
        lambda_grid: Option<usize>,
        #[serde(default)]
        lambdas: Option<Vec<Vec<f64>>>,
        /// Keep only points dominating the endowment utilities.
        #[serde(default)]
        individually_rational: bool,
    },
    /// Construct and verify a competitive equilibrium.
    Equilibrium {
        #[serde(default = "default_method")]
        method: String,
        #[serde(default = "default_iters")]
        max_iters: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    /// Dominance analysis for homogeneous weighted agents.
    Rdu {
        analysis: RduAnalysis,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        theta_margin: Option<f64>,
        #[serde(default)]
        x_search_range: Option<(f64, f64)>,
        #[serde(default)]
        safe_level: Option<f64>,
        #[serde(default)]
        epsilon_grid: Option<Vec<f64>>,
    },
    /// Re-derive the worked reference values by name.
    Reproduce { name: String },
}

fn default_method() -> String {
    "auto".into()
}

fn default_iters() -> usize {
    200
}

fn default_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RduAnalysis {
    Dominance,
    Threshold,
    Perturbation,
}

/// Fully resolved scenario: the space, payoff, agents, and endowments built
/// and validated.
#[derive(Debug)]
pub struct ResolvedScenario {
    pub config: ScenarioConfig,
    pub space: Arc<FiniteProbSpace>,
    pub payoff: RandomVariable,
    pub agents: Vec<Agent>,
    pub endowments: Vec<RandomVariable>,
}

#[derive(Debug)]
pub struct ValidationErrors(pub Vec<String>);

impl std::fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ValidationErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ValidationErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
    let config: ScenarioConfig = serde_json::from_str(&text).map_err(|e| {
        ValidationErrors(vec![format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        )])
    })?;
    if config.schema_version != 1 {
        return Err(ValidationErrors(vec![format!(
            "unsupported schema_version {} (this build reads version 1)",
            config.schema_version
        )]));
    }
    Ok(config)
}

/// Builds the space, payoff, agents, and endowments, collecting every
/// validation error rather than stopping at the first.
pub fn resolve(config: ScenarioConfig) -> Result<ResolvedScenario, ValidationErrors> {
    let mut errors = Vec::new();
    if matches!(config.task, TaskSpec::Reproduce { .. }) {
        // Reproductions carry their own built-in inputs.
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let payoff = RandomVariable::constant(Arc::clone(&sp), 1.0);
        return Ok(ResolvedScenario {
            config,
            space: sp,
            payoff,
            agents: Vec::new(),
            endowments: Vec::new(),
        });
    }
    let (space, implied_payoff) = match &config.space {
        None => {
            errors.push("field `space`: required for this task".into());
            (FiniteProbSpace::new(vec![1.0]).unwrap(), None)
        }
        Some(SpaceSpec::Atoms { probabilities }) => {
            match FiniteProbSpace::new(probabilities.clone()) {
                Ok(sp) => (sp, None),
                Err(e) => {
                    errors.push(format!("field `space.probabilities`: {e}"));
                    (FiniteProbSpace::new(vec![1.0]).unwrap(), None)
                }
            }
        }
        Some(SpaceSpec::UniformGrid { m, lo, hi }) => {
            if *m < 1 || hi <= lo {
                errors.push("field `space.uniform_grid`: need m >= 1 and hi > lo".into());
                (FiniteProbSpace::new(vec![1.0]).unwrap(), None)
            } else {
                let sp = FiniteProbSpace::uniform(*m);
                let values: Vec<f64> = (0..*m)
                    .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / *m as f64)
                    .collect();
                (sp, Some(values))
            }
        }
        Some(SpaceSpec::TwoPoint { a, b, p }) => {
            if !(0.0 < *p && *p < 1.0) {
                errors.push("field `space.two_point.p`: must lie strictly between 0 and 1".into());
                (FiniteProbSpace::new(vec![1.0]).unwrap(), None)
            } else {
                match FiniteProbSpace::new(vec![*p, 1.0 - *p]) {
                    Ok(sp) => (sp, Some(vec![*a, *b])),
                    Err(e) => {
                        errors.push(format!("field `space.two_point`: {e}"));
                        (FiniteProbSpace::new(vec![1.0]).unwrap(), None)
                    }
                }
            }
        }
    };
    let payoff_values = match (&config.payoff, implied_payoff) {
        (Some(v), _) => v.clone(),
        (None, Some(v)) => v,
        (None, None) => {
            errors.push("field `payoff`: required when the space is given by atoms".into());
            vec![0.0; space.len()]
        }
    };
    let payoff = match RandomVariable::new(Arc::clone(&space), payoff_values) {
        Ok(p) => p,
        Err(e) => {
            errors.push(format!("field `payoff`: {e}"));
            RandomVariable::constant(Arc::clone(&space), 0.0)
        }
    };
    if config.agents.is_empty() {
        errors.push("field `agents`: at least one agent required".into());
    }
    let agents: Vec<Agent> = config.agents.iter().map(AgentSpec::build).collect();
    let working_max = payoff.max().max(1.0);
    for (i, a) in agents.iter().enumerate() {
        if let Err(e) = a.validate(working_max) {
            errors.push(format!("field `agents[{i}]`: {e}"));
        }
    }
    let n = agents.len().max(1);
    let endowments: Vec<RandomVariable> = match &config.endowments {
        None | Some(EndowmentSpec::Equal) => (0..n)
            .map(|_| payoff.map(|v| v / n as f64))
            .collect(),
        Some(EndowmentSpec::Proportional { theta }) => {
            if theta.len() != n {
                errors.push(format!(
                    "field `endowments.theta`: {} entries for {n} agents",
                    theta.len()
                ));
            }
            let sum: f64 = theta.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                errors.push(format!(
                    "field `endowments.theta`: sums to {sum}, expected 1"
                ));
            }
            theta
                .iter()
                .map(|&t| payoff.map(|v| t * v))
                .chain(std::iter::repeat_with(|| payoff.map(|_| 0.0)))
                .take(n)
                .collect()
        }
        Some(EndowmentSpec::Explicit { values }) => {
            if values.len() != n {
                errors.push(format!(
                    "field `endowments.values`: {} rows for {n} agents",
                    values.len()
                ));
            }
            let mut out = Vec::with_capacity(n);
            for (i, row) in values.iter().enumerate() {
                match RandomVariable::new(Arc::clone(&space), row.clone()) {
                    Ok(rv) => out.push(rv),
                    Err(e) => errors.push(format!("field `endowments.values[{i}]`: {e}")),
                }
            }
            // Componentwise sum must match the payoff.
            if out.len() == n {
                for s in 0..space.len() {
                    let sum: f64 = out.iter().map(|e| e.values[s]).sum();
                    if (sum - payoff.values[s]).abs() > 1e-9 * (1.0 + payoff.values[s].abs()) {
                        errors.push(format!(
                            "field `endowments.values`: atom {s} sums to {sum}, payoff is {}",
                            payoff.values[s]
                        ));
                        break;
                    }
                }
            }
            while out.len() < n {
                out.push(payoff.map(|_| 0.0));
            }
            out
        }
    };
    if errors.is_empty() {
        Ok(ResolvedScenario { config, space, payoff, agents, endowments })
    } else {
        Err(ValidationErrors(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let json = r#"{
            "space": {"atoms": {"probabilities": [0.5, 0.5]}},
            "payoff": [1.0, 2.0],
            "agents": [{"utility": {"family": "power", "alpha": 2.0}, "attitude": "risk_seeking"}],
            "task": {"kind": "improve"}
        }"#;
        let config: ScenarioConfig = serde_json::from_str(json).unwrap();
        assert_eq!(config.schema_version, 1);
        assert_eq!(config.seed, 0);
        let resolved = resolve(config).unwrap();
        assert_eq!(resolved.agents.len(), 1);
        assert_eq!(resolved.endowments.len(), 1);
    }

    #[test]
    fn bad_theta_names_the_field() {
        let json = r#"{
            "space": {"atoms": {"probabilities": [0.5, 0.5]}},
            "payoff": [1.0, 2.0],
            "agents": [
                {"utility": {"family": "power", "alpha": 2.0}, "attitude": "risk_seeking"},
                {"utility": {"family": "power", "alpha": 3.0}, "attitude": "risk_seeking"}
            ],
            "endowments": {"kind": "proportional", "theta": [0.5, 0.4]},
            "task": {"kind": "equilibrium"}
        }"#;
        let config: ScenarioConfig = serde_json::from_str(json).unwrap();
        let err = resolve(config).unwrap_err();
        assert!(err.0.iter().any(|e| e.contains("endowments.theta")), "{err}");
    }

    #[test]
    fn unknown_family_is_a_parse_error() {
        let json = r#"{
            "space": {"atoms": {"probabilities": [1.0]}},
            "payoff": [1.0],
            "agents": [{"utility": {"family": "cubic_spline"}, "attitude": "risk_seeking"}],
            "task": {"kind": "improve"}
        }"#;
        assert!(serde_json::from_str::<ScenarioConfig>(json).is_err());
    }
}
