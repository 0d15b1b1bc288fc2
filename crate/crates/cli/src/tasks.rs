//! Task dispatch: each scenario task maps onto engine operations and fills a
//! report document.

use anyhow::{anyhow, Context, Result};

use riskshare_core::agent::{rdu_utility, Agent};
use riskshare_core::dependence::{check_dependence, DependenceMode};
use riskshare_core::improve::{counter_monotonic_improve, shifted_improve};
use riskshare_core::lambda_opt::{
    individually_rational_filter, pareto_check_rs, upf_trace, ParetoViolation,
};
use riskshare_core::methods::{solve_by_name, EquilibriumProblem};
use riskshare_core::oracle::{brute_force_pareto_probe, vertex_individual_opt};
use riskshare_core::rdu::{
    epsilon_perturbation, find_y0, jackpot_vs_proportional, perturbation_limit_slope,
    rdu_sum_optimal_value, DominanceVerdict, RduScenario,
};
use riskshare_core::space::{Allocation, RandomVariable};
use riskshare_core::utility::Curvature;

use crate::report::{flag, num, text, CertificateReport, ReportDocument, Table};
use crate::reproduce;
use crate::scenario::{RduAnalysis, ResolvedScenario, TaskSpec};

/// Process exit semantics: 0 clean, 2 validation failure, 3 a requested
/// certificate or reproduction came back invalid.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INVALID_CERTIFICATE: i32 = 3;

pub struct RunOutcome {
    pub report: ReportDocument,
    pub exit_code: i32,
}

pub fn run_scenario(resolved: &ResolvedScenario, with_oracle: bool) -> Result<RunOutcome> {
    let seed = resolved.config.seed;
    let scenario_echo = serde_json::to_value(&resolved.config)?;
    let mut report = ReportDocument::new(scenario_echo, seed);
    let started = std::time::Instant::now();
    let exit_code = match &resolved.config.task {
        TaskSpec::Improve => run_improve(resolved, &mut report)?,
        TaskSpec::Pareto { allocation } => run_pareto(resolved, allocation.as_deref(), &mut report)?,
        TaskSpec::Upf { lambda_grid, lambdas, individually_rational } => run_upf(
            resolved,
            *lambda_grid,
            lambdas.as_deref(),
            *individually_rational,
            &mut report,
        )?,
        TaskSpec::Equilibrium { method, max_iters, tol } => run_equilibrium(
            resolved,
            method,
            *max_iters,
            *tol,
            seed,
            with_oracle,
            &mut report,
        )?,
        TaskSpec::Rdu { analysis, n, theta_margin, x_search_range, safe_level, epsilon_grid } => {
            run_rdu(
                resolved,
                *analysis,
                *n,
                *theta_margin,
                *x_search_range,
                *safe_level,
                epsilon_grid.as_deref(),
                &mut report,
            )?
        }
        TaskSpec::Reproduce { name } => reproduce::run(name, &mut report)?,
    };
    if with_oracle {
        maybe_pareto_probe(resolved, &mut report, seed);
    }
    report.warn_on_heuristics();
    report.timing_ms = started.elapsed().as_millis();
    Ok(RunOutcome { report, exit_code })
}

fn endowment_allocation(resolved: &ResolvedScenario) -> Result<Allocation> {
    Allocation::new(
        resolved.space.clone(),
        resolved.endowments.iter().map(|e| e.values.clone()).collect(),
        &resolved.payoff,
    )
    .map_err(|e| anyhow!("endowments do not form an allocation: {e}"))
}

fn run_improve(resolved: &ResolvedScenario, report: &mut ReportDocument) -> Result<i32> {
    let alloc = endowment_allocation(resolved)?;
    let nonneg = alloc
        .components
        .iter()
        .all(|c| c.iter().all(|&v| v >= -1e-12));
    if nonneg {
        let res = counter_monotonic_improve(&alloc)?;
        let mut owners = Table::new("jackpot_atoms", &["atom", "parent", "probability", "owner", "payoff"]);
        let links = res.space.parent_links().unwrap_or(&[]);
        let lifted = resolved.payoff.lift_to(&res.space)?;
        for s in 0..res.space.len() {
            owners.push(vec![
                num(s as f64),
                num(links.get(s).copied().unwrap_or(s) as f64),
                num(res.space.prob(s)),
                num(res.partition.owner[s] as f64),
                num(lifted.values[s]),
            ]);
        }
        report.tables.push(owners);
        let mut probs = Table::new("win_probabilities", &["agent", "probability"]);
        for i in 0..alloc.n_agents() {
            probs.push(vec![num(i as f64), num(res.partition.owner_prob(i))]);
        }
        report.tables.push(probs);
        let mut order = Table::new("convex_order", &["agent", "holds", "strict"]);
        for i in 0..alloc.n_agents() {
            let v = riskshare_core::order::convex_order_leq(
                &alloc.component(i),
                &res.jackpot.component(i),
            );
            order.push(vec![num(i as f64), flag(v.holds), flag(v.strict)]);
        }
        report.tables.push(order);
    } else {
        let out = shifted_improve(&alloc)?;
        let cm = check_dependence(&out, DependenceMode::CounterMonotonic);
        let mut t = Table::new("shifted_improvement", &["agent", "atom", "payoff"]);
        for (i, c) in out.components.iter().enumerate() {
            for (s, &v) in c.iter().enumerate() {
                t.push(vec![num(i as f64), num(s as f64), num(v)]);
            }
        }
        report.tables.push(t);
        let mut s = Table::new("structure", &["counter_monotonic"]);
        s.push(vec![flag(cm.holds)]);
        report.tables.push(s);
    }
    Ok(EXIT_OK)
}

fn run_pareto(
    resolved: &ResolvedScenario,
    allocation: Option<&[Vec<f64>]>,
    report: &mut ReportDocument,
) -> Result<i32> {
    let alloc = match allocation {
        Some(values) => Allocation::new(
            resolved.space.clone(),
            values.to_vec(),
            &resolved.payoff,
        )?,
        None => endowment_allocation(resolved)?,
    };
    let verdict = pareto_check_rs(&alloc, &resolved.agents)?;
    let mut t = Table::new("pareto", &["optimal", "witness_lambda", "violation"]);
    t.push(vec![
        flag(verdict.optimal),
        match &verdict.witness_lambda {
            Some(l) => serde_json::to_value(l)?,
            None => serde_json::Value::Null,
        },
        match &verdict.violation {
            Some(ParetoViolation::NotJackpot(_)) => text("not_jackpot"),
            Some(ParetoViolation::InfeasibleCycle(c)) => text(format!("infeasible_cycle {c:?}")),
            None => serde_json::Value::Null,
        },
    ]);
    report.tables.push(t);
    // A requested optimality certificate that comes back negative is a
    // failed certificate for exit purposes.
    Ok(if verdict.optimal { EXIT_OK } else { EXIT_INVALID_CERTIFICATE })
}

fn run_upf(
    resolved: &ResolvedScenario,
    lambda_grid: Option<usize>,
    lambdas: Option<&[Vec<f64>]>,
    individually_rational: bool,
    report: &mut ReportDocument,
) -> Result<i32> {
    let n = resolved.agents.len();
    let grid: Vec<Vec<f64>> = match (lambdas, lambda_grid) {
        (Some(explicit), _) => {
            for (k, l) in explicit.iter().enumerate() {
                riskshare_core::lambda_opt::NegishiWeights::new(l.clone())
                    .map_err(|e| anyhow!("lambdas[{k}]: {e}"))?;
                if l.len() != n {
                    return Err(anyhow!("lambdas[{k}]: {} weights for {n} agents", l.len()));
                }
            }
            explicit.to_vec()
        }
        (None, count) => {
            let k = count.unwrap_or(51).max(2);
            if n != 2 {
                return Err(anyhow!(
                    "a lambda count only generates two-agent grids; pass `lambdas` for {n} agents"
                ));
            }
            (0..k)
                .map(|i| {
                    let t = i as f64 / (k - 1) as f64;
                    vec![1.0 - t, t]
                })
                .collect()
        }
    };
    let mut trace = upf_trace(&resolved.agents, &resolved.payoff, &grid)?;
    if individually_rational {
        let mut endowment_utilities = Vec::with_capacity(n);
        for (i, a) in resolved.agents.iter().enumerate() {
            endowment_utilities.push(rdu_utility(a, &resolved.endowments[i].map(|v| v.max(0.0)))?);
        }
        trace = individually_rational_filter(&trace, &endowment_utilities);
    }
    let mut cols: Vec<String> = (0..n).map(|i| format!("lambda_{}", i + 1)).collect();
    cols.extend((0..n).map(|i| format!("utility_{}", i + 1)));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new("upf", &col_refs);
    for (lambda, utils) in &trace {
        let mut row: Vec<serde_json::Value> = lambda.iter().map(|&l| num(l)).collect();
        row.extend(utils.iter().map(|&u| num(u)));
        t.push(row);
    }
    report.tables.push(t);
    Ok(EXIT_OK)
}

fn run_equilibrium(
    resolved: &ResolvedScenario,
    method: &str,
    max_iters: usize,
    tol: f64,
    seed: u64,
    with_oracle: bool,
    report: &mut ReportDocument,
) -> Result<i32> {
    let mut problem = EquilibriumProblem::new(
        resolved.agents.clone(),
        resolved.payoff.clone(),
        resolved.endowments.clone(),
    );
    problem.max_iters = max_iters;
    problem.tolerance = tol;
    problem.seed = seed;
    riskshare_core::methods::check_endowments_sum(&problem)?;
    let out = solve_by_name(method, &problem).context("equilibrium construction failed")?;

    let mut summary = Table::new("equilibrium", &["method", "atoms", "theta", "lambda", "residual"]);
    summary.push(vec![
        text(out.method.clone()),
        num(out.space.len() as f64),
        out.theta.as_ref().map(|t| serde_json::to_value(t).unwrap()).unwrap_or(serde_json::Value::Null),
        out.lambda.as_ref().map(|l| serde_json::to_value(l).unwrap()).unwrap_or(serde_json::Value::Null),
        out.residual.map(num).unwrap_or(serde_json::Value::Null),
    ]);
    report.tables.push(summary);

    let mut alloc_table = Table::new("allocation", &["atom", "probability", "density", "payoff", "agent", "share"]);
    let total = out.allocation.total();
    for s in 0..out.space.len() {
        for (i, c) in out.allocation.components.iter().enumerate() {
            if c[s].abs() > 1e-15 {
                alloc_table.push(vec![
                    num(s as f64),
                    num(out.space.prob(s)),
                    num(out.price.density[s]),
                    num(total.values[s]),
                    num(i as f64),
                    num(c[s]),
                ]);
            }
        }
    }
    report.tables.push(alloc_table);

    let valid = match &out.certificate {
        Some(cert) => {
            report.certificates.push(CertificateReport::from_certificate(
                &out.method,
                cert,
                out.residual,
                &out.notes,
            ));
            report.warnings.extend(cert.warnings.iter().cloned());
            cert.valid
        }
        None => {
            report.warnings.push(format!(
                "no certificate produced (residual {:?} above tolerance {tol:.1e})",
                out.residual
            ));
            false
        }
    };

    if with_oracle {
        let mut t = Table::new(
            "oracle_individual_optima",
            &["agent", "achieved", "oracle_best", "gap"],
        );
        for (i, agent) in resolved.agents.iter().enumerate() {
            if !agent.is_eu()
                || !matches!(agent.curvature, Curvature::StrictlyConvex | Curvature::RatioIncreasing)
                || out.space.len() > 18
            {
                continue;
            }
            let budget = out.price.price_of(&out.endowments[i])?;
            let rep = vertex_individual_opt(agent, &total, &out.price.as_rv(), budget)?;
            let achieved = rdu_utility(agent, &out.allocation.component(i).map(|v| v.max(0.0)))?;
            t.push(vec![
                num(i as f64),
                num(achieved),
                num(rep.best_value),
                num(rep.best_value - achieved),
            ]);
        }
        if !t.rows.is_empty() {
            report.tables.push(t);
        }
    }
    Ok(if valid { EXIT_OK } else { EXIT_INVALID_CERTIFICATE })
}

#[allow(clippy::too_many_arguments)]
fn run_rdu(
    resolved: &ResolvedScenario,
    analysis: RduAnalysis,
    n: Option<usize>,
    theta_margin: Option<f64>,
    x_search_range: Option<(f64, f64)>,
    safe_level: Option<f64>,
    epsilon_grid: Option<&[f64]>,
    report: &mut ReportDocument,
) -> Result<i32> {
    let n = n.unwrap_or(resolved.agents.len());
    let agent: Agent = resolved
        .agents
        .first()
        .cloned()
        .ok_or_else(|| anyhow!("the weighted analysis needs at least one agent"))?;
    for (i, other) in resolved.agents.iter().enumerate().skip(1) {
        if other.utility != agent.utility || other.weighting != agent.weighting {
            return Err(anyhow!("agent {i} differs; the weighted analysis is for homogeneous groups"));
        }
    }
    let scenario = RduScenario::new(n, agent.clone(), resolved.payoff.clone(), 8192)?;
    report.warnings.extend(scenario.audit_messages.iter().cloned());
    match analysis {
        RduAnalysis::Dominance => {
            let rep = jackpot_vs_proportional(&scenario)?;
            report.warnings.extend(rep.warnings.iter().cloned());
            let mut t = Table::new(
                "dominance",
                &["jackpot_utility", "proportional_utility", "verdict", "margin"],
            );
            t.push(vec![
                num(rep.jackpot_utility),
                num(rep.proportional_utility),
                text(match rep.verdict {
                    DominanceVerdict::JackpotStrictlyDominates => "jackpot_strictly_dominates",
                    DominanceVerdict::ProportionalStrictlyDominates => {
                        "proportional_strictly_dominates"
                    }
                    DominanceVerdict::Incomparable => "incomparable",
                }),
                num(rep.margin),
            ]);
            report.tables.push(t);
            if scenario.payoff.max() <= scenario.x0 {
                let mut s = Table::new("sum_optimal", &["value"]);
                s.push(vec![num(rdu_sum_optimal_value(&scenario)?)]);
                report.tables.push(s);
            }
        }
        RduAnalysis::Threshold => {
            let range = x_search_range.unwrap_or((1e-2, 1e6));
            let rep = find_y0(&scenario, theta_margin.unwrap_or(1e-3), range)?;
            let mut t = Table::new("threshold", &["y0", "theta", "sup_ratio", "w_at_1_over_n", "tech_con_satisfied"]);
            t.push(vec![
                rep.y0.map(num).unwrap_or(serde_json::Value::Null),
                num(rep.theta),
                num(rep.tech_con.sup_ratio_estimate),
                num(rep.tech_con.w_at_1_over_n),
                flag(rep.tech_con.satisfied),
            ]);
            report.tables.push(t);
            // Plot-ready sweep: utility gap of the fair lottery over
            // proportional sharing as the payoff level scales.
            let mut sweep = Table::new("dominance_sweep", &["x", "utility_gap"]);
            let (lo, hi) = range;
            let points = 65;
            for k in 0..=points {
                let x = lo * (hi / lo).powf(k as f64 / points as f64);
                let level = RandomVariable::constant(resolved.space.clone(), x);
                let scen = RduScenario::new(n, agent.clone(), level, 2048)?;
                let dom = jackpot_vs_proportional(&scen)?;
                sweep.push(vec![num(x), num(dom.jackpot_utility - dom.proportional_utility)]);
            }
            report.tables.push(sweep);
        }
        RduAnalysis::Perturbation => {
            let y = safe_level.unwrap_or_else(|| resolved.payoff.max() / n as f64);
            let slope = perturbation_limit_slope(y, &scenario)?;
            let mut head = Table::new("perturbation_slope", &["safe_level", "closed_form_slope"]);
            head.push(vec![num(y), num(slope)]);
            report.tables.push(head);
            let default_grid: Vec<f64> =
                (0..=32).map(|k| y * 0.5 * k as f64 / 32.0).collect();
            let grid = epsilon_grid.map(<[f64]>::to_vec).unwrap_or(default_grid);
            let mut t = Table::new("perturbation", &["epsilon", "utility_gap"]);
            let base = agent.utility.eval(y)?;
            for &eps in &grid {
                let rep = epsilon_perturbation(y, &scenario, eps)?;
                t.push(vec![num(eps), num(rep.utility - base)]);
            }
            report.tables.push(t);
        }
    }
    Ok(EXIT_OK)
}

/// Attaches a search-based optimality probe on small improve and Pareto
/// runs; sizes beyond the probe budget are skipped with a warning.
fn maybe_pareto_probe(resolved: &ResolvedScenario, report: &mut ReportDocument, seed: u64) {
    if !matches!(resolved.config.task, TaskSpec::Improve | TaskSpec::Pareto { .. }) {
        return;
    }
    let alloc = match endowment_allocation(resolved) {
        Ok(a) => a,
        Err(_) => return,
    };
    match brute_force_pareto_probe(&alloc, &resolved.agents, 11, 200, seed) {
        Ok(rep) => {
            let mut t = Table::new("oracle_pareto_probe", &["dominator_found", "resolution"]);
            t.push(vec![flag(rep.witness.is_some()), num(rep.resolution)]);
            report.tables.push(t);
        }
        Err(e) => {
            report.warnings.push(format!("oracle probe skipped: {e}"));
        }
    }
}
