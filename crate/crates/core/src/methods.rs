//! Runtime-selectable equilibrium methods: each construction sits behind a
//! common trait and is registered by name. Callers pick a method by name or
//! ask for `auto`, which takes the first applicable entry in registration
//! order.

use crate::agent::{Agent, RiskAttitude};
use crate::equilibrium::{
    fixed_point_search, homogeneous_equilibrium, rdu_constant_equilibrium, two_agent_equilibrium,
    two_point_instance, two_point_mixed_equilibrium, verify_equilibrium, EquilibriumOutcome,
};
use crate::error::{Error, Result};
use crate::space::RandomVariable;
use crate::tol;

/// Inputs common to every equilibrium method.
#[derive(Debug, Clone)]
pub struct EquilibriumProblem {
    pub agents: Vec<Agent>,
    pub total: RandomVariable,
    pub endowments: Vec<RandomVariable>,
    pub max_iters: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl EquilibriumProblem {
    pub fn new(agents: Vec<Agent>, total: RandomVariable, endowments: Vec<RandomVariable>) -> Self {
        Self { agents, total, endowments, max_iters: 200, tolerance: 1e-6, seed: 0 }
    }
}

/// An equilibrium construction selectable at runtime.
pub trait EquilibriumMethod: Send + Sync {
    fn name(&self) -> &'static str;
    /// Cheap applicability screen; `Err` carries the reason.
    fn applicable(&self, problem: &EquilibriumProblem) -> std::result::Result<(), String>;
    fn solve(&self, problem: &EquilibriumProblem) -> Result<EquilibriumOutcome>;
}

struct Homogeneous;

impl EquilibriumMethod for Homogeneous {
    fn name(&self) -> &'static str {
        "homogeneous"
    }

    fn applicable(&self, p: &EquilibriumProblem) -> std::result::Result<(), String> {
        if p.agents.is_empty() {
            return Err("no agents".into());
        }
        for a in &p.agents {
            if !a.is_eu() || a.attitude != RiskAttitude::RiskSeeking {
                return Err("needs strictly risk-seeking expected-utility agents".into());
            }
            if a.utility != p.agents[0].utility {
                return Err("agents are not homogeneous".into());
            }
        }
        Ok(())
    }

    fn solve(&self, p: &EquilibriumProblem) -> Result<EquilibriumOutcome> {
        homogeneous_equilibrium(&p.agents, &p.total, &p.endowments)
    }
}

struct TwoAgent;

impl EquilibriumMethod for TwoAgent {
    fn name(&self) -> &'static str {
        "two_agent"
    }

    fn applicable(&self, p: &EquilibriumProblem) -> std::result::Result<(), String> {
        if p.agents.len() != 2 {
            return Err("needs exactly two agents".into());
        }
        for a in &p.agents {
            if !a.is_eu() || a.attitude != RiskAttitude::RiskSeeking {
                return Err("needs strictly risk-seeking expected-utility agents".into());
            }
        }
        Ok(())
    }

    fn solve(&self, p: &EquilibriumProblem) -> Result<EquilibriumOutcome> {
        two_agent_equilibrium(&p.agents, &p.total, &p.endowments)
    }
}

struct FixedPoint;

impl EquilibriumMethod for FixedPoint {
    fn name(&self) -> &'static str {
        "fixed_point"
    }

    fn applicable(&self, p: &EquilibriumProblem) -> std::result::Result<(), String> {
        for a in &p.agents {
            if !a.is_eu() || a.attitude != RiskAttitude::RiskSeeking {
                return Err("needs strictly risk-seeking expected-utility agents".into());
            }
        }
        Ok(())
    }

    fn solve(&self, p: &EquilibriumProblem) -> Result<EquilibriumOutcome> {
        fixed_point_search(&p.agents, &p.total, &p.endowments, p.max_iters, p.tolerance, p.seed)
    }
}

struct TwoPointMixed;

impl TwoPointMixed {
    fn split_values(p: &EquilibriumProblem) -> std::result::Result<(f64, f64, f64), String> {
        let dist = p.total.distribution();
        if dist.len() != 2 {
            return Err(format!("total payoff takes {} values, needs exactly 2", dist.len()));
        }
        let (a, pa) = dist[0];
        let (b, _) = dist[1];
        if a <= 0.0 {
            return Err("the low payoff value must be positive".into());
        }
        Ok((a, b, pa))
    }
}

impl EquilibriumMethod for TwoPointMixed {
    fn name(&self) -> &'static str {
        "two_point_mixed"
    }

    fn applicable(&self, p: &EquilibriumProblem) -> std::result::Result<(), String> {
        Self::split_values(p)?;
        let seekers = p.agents.iter().filter(|a| a.attitude == RiskAttitude::RiskSeeking).count();
        let averse = p.agents.iter().filter(|a| a.attitude == RiskAttitude::RiskAverse).count();
        if seekers == 0 || averse == 0 || seekers + averse != p.agents.len() {
            return Err("needs a full split into risk-seeking and risk-averse agents".into());
        }
        if p.agents.iter().any(|a| !a.is_eu()) {
            return Err("needs expected-utility agents".into());
        }
        Ok(())
    }

    fn solve(&self, p: &EquilibriumProblem) -> Result<EquilibriumOutcome> {
        let (a, b, p_low) =
            Self::split_values(p).map_err(Error::Precondition)?;
        let seekers: Vec<Agent> = p
            .agents
            .iter()
            .filter(|ag| ag.attitude == RiskAttitude::RiskSeeking)
            .cloned()
            .collect();
        let averse: Vec<Agent> = p
            .agents
            .iter()
            .filter(|ag| ag.attitude == RiskAttitude::RiskAverse)
            .cloned()
            .collect();
        let report = two_point_mixed_equilibrium(a, b, &seekers, &averse)?;
        let (r, l) = report.ratio_interval.ok_or_else(|| {
            Error::Precondition(format!(
                "no two-level price supports the candidate: needs alpha/beta in [{:.6}, {:.6}]",
                report.r_bound, report.l_bound
            ))
        })?;
        // Middle of the admissible ratio interval, scaled to integrate to 1.
        let ratio = 0.5 * (r + l);
        let beta = 1.0 / (ratio * p_low + (1.0 - p_low));
        let alpha = ratio * beta;
        let (allocation, price, endowments, agents) =
            two_point_instance(a, b, p_low, &seekers, &averse, &report.a_shares, alpha, beta)?;
        let space = allocation.space.clone();
        let cert = verify_equilibrium(&allocation, &price, &endowments, &agents)?;
        Ok(EquilibriumOutcome {
            method: "two_point_mixed".into(),
            space,
            allocation,
            price,
            endowments,
            theta: None,
            lambda: None,
            residual: None,
            certificate: Some(cert),
            notes: vec![format!(
                "price ratio interval [{:.9}, {:.9}], instantiated at {:.9}",
                r, l, ratio
            )],
        })
    }
}

struct RduConstant;

impl EquilibriumMethod for RduConstant {
    fn name(&self) -> &'static str {
        "rdu_constant"
    }

    fn applicable(&self, p: &EquilibriumProblem) -> std::result::Result<(), String> {
        if p.agents.is_empty() {
            return Err("no agents".into());
        }
        if p.agents.iter().any(|a| a.is_eu()) {
            return Err("needs weighted (rank-dependent) agents".into());
        }
        for a in &p.agents[1..] {
            if a.utility != p.agents[0].utility || a.weighting != p.agents[0].weighting {
                return Err("agents are not homogeneous".into());
            }
        }
        let dist = p.total.distribution();
        if dist.len() != 1 {
            return Err("total payoff must be constant".into());
        }
        Ok(())
    }

    fn solve(&self, p: &EquilibriumProblem) -> Result<EquilibriumOutcome> {
        let x_const = p.total.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        rdu_constant_equilibrium(&p.agents[0], p.agents.len(), x_const, &p.endowments)
    }
}

/// All registered methods, in `auto` priority order.
pub fn registry() -> Vec<Box<dyn EquilibriumMethod>> {
    vec![
        Box::new(Homogeneous),
        Box::new(TwoAgent),
        Box::new(FixedPoint),
        Box::new(TwoPointMixed),
        Box::new(RduConstant),
    ]
}

pub fn method_names() -> Vec<&'static str> {
    registry().iter().map(|m| m.name()).collect()
}

/// Solves with the named method, or with the first applicable one under
/// `auto`. Unknown names and inapplicable methods produce validation errors
/// carrying the reasons.
pub fn solve_by_name(name: &str, problem: &EquilibriumProblem) -> Result<EquilibriumOutcome> {
    let methods = registry();
    if name == "auto" {
        let mut reasons = Vec::new();
        for m in &methods {
            match m.applicable(problem) {
                Ok(()) => return m.solve(problem),
                Err(why) => reasons.push(format!("{}: {}", m.name(), why)),
            }
        }
        return Err(Error::Precondition(format!(
            "no registered method applies: {}",
            reasons.join("; ")
        )));
    }
    match methods.iter().find(|m| m.name() == name) {
        Some(m) => {
            m.applicable(problem).map_err(Error::Precondition)?;
            m.solve(problem)
        }
        None => Err(Error::Validation(format!(
            "unknown equilibrium method '{name}'; known: {}",
            method_names().join(", ")
        ))),
    }
}

/// Consistency check used by certificates: total endowment must match the
/// declared total payoff.
pub fn check_endowments_sum(problem: &EquilibriumProblem) -> Result<()> {
    let m = problem.total.len();
    let scale = 1.0 + problem.total.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for s in 0..m {
        let sum: f64 = problem.endowments.iter().map(|e| e.values[s]).sum();
        if (sum - problem.total.values[s]).abs() > tol::MASS * scale {
            return Err(Error::Validation(format!(
                "endowments sum to {sum} on atom {s}, total payoff is {}",
                problem.total.values[s]
            )));
        }
    }
    Ok(())
}
