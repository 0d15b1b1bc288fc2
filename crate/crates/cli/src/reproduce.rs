//! Built-in reproductions of the worked reference values, runnable by name:
//! each recomputes the quantities from scratch and reports computed versus
//! reference with a pass flag per row.

use std::sync::Arc;

use anyhow::{anyhow, Result};

use riskshare_core::agent::Agent;
use riskshare_core::dependence::{counter_monotonic_representation, CmRepOutcome};
use riskshare_core::equilibrium::{two_point_mixed_equilibrium, verify_equilibrium, PriceMeasure};
use riskshare_core::improve::counter_monotonic_improve;
use riskshare_core::lambda_opt::{mixed_lambda_optimal, mixed_split_threshold, rs_lambda_optimal};
use riskshare_core::rdu::{jackpot_vs_proportional, DominanceVerdict, RduScenario};
use riskshare_core::space::{Allocation, FiniteProbSpace, RandomVariable};
use riskshare_core::utility::{Curvature, UtilityFunction};
use riskshare_core::weighting::{check_cavexity, concave_envelope, WeightingFunction};

use crate::report::{flag, num, text, ReportDocument, Table};
use crate::tasks::{EXIT_INVALID_CERTIFICATE, EXIT_OK};

struct Row {
    quantity: &'static str,
    computed: f64,
    reference: f64,
    tolerance: f64,
}

impl Row {
    fn pass(&self) -> bool {
        (self.computed - self.reference).abs() <= self.tolerance
    }
}

pub const NAMES: &[&str] = &[
    "example_1",
    "example_2",
    "example_3a",
    "example_3b",
    "example_4",
    "example_5",
    "example_s1",
    "figure_2",
];

pub fn run(name: &str, report: &mut ReportDocument) -> Result<i32> {
    let rows = match name {
        "example_1" => example_1()?,
        "example_2" => example_2()?,
        "example_3a" => example_3a()?,
        "example_3b" => example_3b()?,
        "example_4" => example_4()?,
        "example_5" => example_5()?,
        "example_s1" => example_s1()?,
        "figure_2" => figure_2()?,
        other => {
            return Err(anyhow!(
                "unknown reproduction '{other}'; known: {}",
                NAMES.join(", ")
            ))
        }
    };
    let mut t = Table::new(
        "reproduction",
        &["quantity", "computed", "reference", "abs_error", "tolerance", "pass"],
    );
    let mut all_pass = true;
    for r in &rows {
        all_pass &= r.pass();
        t.push(vec![
            text(r.quantity),
            num(r.computed),
            num(r.reference),
            num((r.computed - r.reference).abs()),
            num(r.tolerance),
            flag(r.pass()),
        ]);
    }
    report.tables.push(t);
    Ok(if all_pass { EXIT_OK } else { EXIT_INVALID_CERTIFICATE })
}

fn convex_power(alpha: f64, coeff: f64) -> Agent {
    Agent::eu(UtilityFunction::Power { alpha, coeff }, Curvature::StrictlyConvex)
}

/// Constant total wealth split equally among four strict risk seekers: the
/// fair lottery wins each agent probability 1/n.
fn example_1() -> Result<Vec<Row>> {
    let n = 4;
    let sp = FiniteProbSpace::new(vec![1.0])?;
    let alloc = Allocation::from_components(sp, vec![vec![1.0 / n as f64]; n])?;
    let res = counter_monotonic_improve(&alloc)?;
    let mut rows = Vec::new();
    for i in 0..n {
        rows.push(Row {
            quantity: Box::leak(format!("win_probability_agent_{}", i + 1).into_boxed_str()),
            computed: res.partition.owner_prob(i),
            reference: 0.25,
            tolerance: 1e-12,
        });
    }
    Ok(rows)
}

/// Four equiprobable states, three agents each holding 3 on an own state
/// plus 1 on the shared one: no counter-monotonic form exists on that space,
/// and the cut extension wins each agent probability 1/3.
fn example_2() -> Result<Vec<Row>> {
    let sp = FiniteProbSpace::uniform(4);
    let alloc = Allocation::from_components(
        sp,
        vec![
            vec![3.0, 0.0, 0.0, 1.0],
            vec![0.0, 3.0, 0.0, 1.0],
            vec![0.0, 0.0, 3.0, 1.0],
        ],
    )?;
    let none = matches!(counter_monotonic_representation(&alloc), CmRepOutcome::None);
    let res = counter_monotonic_improve(&alloc)?;
    let mut rows = vec![Row {
        quantity: "representation_absent_unextended",
        computed: f64::from(none),
        reference: 1.0,
        tolerance: 0.0,
    }];
    for i in 0..3 {
        rows.push(Row {
            quantity: Box::leak(format!("win_probability_agent_{}", i + 1).into_boxed_str()),
            computed: res.partition.owner_prob(i),
            reference: 1.0 / 3.0,
            tolerance: 1e-12,
        });
    }
    Ok(rows)
}

fn mixed_agents() -> Vec<Agent> {
    vec![
        Agent::eu(UtilityFunction::Quadratic { a: 3.0, b: 1.0 }, Curvature::StrictlyConvex),
        Agent::eu(UtilityFunction::CappedQuadratic { a: 5.0, t: 1.0 }, Curvature::StrictlyConcave),
    ]
}

/// Seeking-leaning weights: the group split is all-or-nothing with switch
/// point 5/9.
fn example_3a() -> Result<Vec<Row>> {
    let agents = mixed_agents();
    let threshold = mixed_split_threshold(&[1.25, 1.0], &[0], &[1], &agents, 0.05, 1.8)?
        .ok_or_else(|| anyhow!("no switch point found"))?;
    Ok(vec![Row {
        quantity: "split_threshold",
        computed: threshold,
        reference: 5.0 / 9.0,
        tolerance: 1e-6,
    }])
}

/// Averse-leaning weights at total 2: the groups take 1/2 and 3/2.
fn example_3b() -> Result<Vec<Row>> {
    let agents = mixed_agents();
    let sp = FiniteProbSpace::new(vec![1.0])?;
    let x = RandomVariable::new(sp, vec![2.0])?;
    let res = mixed_lambda_optimal(&[1.0, 2.0], &[0], &[1], &agents, &x, 4096, 80)?;
    Ok(vec![
        Row {
            quantity: "seeking_share_at_2",
            computed: res.split[0].1,
            reference: 0.5,
            tolerance: 1e-6,
        },
        Row {
            quantity: "averse_share_at_2",
            computed: 2.0 - res.split[0].1,
            reference: 1.5,
            tolerance: 1e-6,
        },
    ])
}

/// Two-point payoff (1/2, 3/2): the supporting price-tilt interval is
/// [1/9, 1/8], from the bounds R = 7/9 and L = 4/5.
fn example_4() -> Result<Vec<Row>> {
    let agents = mixed_agents();
    let seekers = vec![agents[0].clone()];
    let averse = vec![agents[1].clone()];
    let rep = two_point_mixed_equilibrium(0.5, 1.5, &seekers, &averse)?;
    let sp = FiniteProbSpace::uniform(2);
    let x = RandomVariable::new(Arc::clone(&sp), vec![0.5, 1.5])?;
    let alloc = Allocation::new(Arc::clone(&sp), vec![vec![0.0, 1.5], vec![0.5, 0.0]], &x)?;
    let endowments = vec![alloc.component(0), alloc.component(1)];
    let verdict = |eps: f64| -> Result<bool> {
        let price = PriceMeasure::new(Arc::clone(&sp), vec![1.0 - eps, 1.0 + eps])?;
        Ok(verify_equilibrium(&alloc, &price, &endowments, &agents)?.valid)
    };
    Ok(vec![
        Row { quantity: "l_bound", computed: rep.l_bound, reference: 0.8, tolerance: 1e-12 },
        Row { quantity: "r_bound", computed: rep.r_bound, reference: 7.0 / 9.0, tolerance: 1e-12 },
        Row {
            quantity: "accepts_tilt_1_over_9",
            computed: f64::from(verdict(1.0 / 9.0)?),
            reference: 1.0,
            tolerance: 0.0,
        },
        Row {
            quantity: "accepts_tilt_1_over_8",
            computed: f64::from(verdict(1.0 / 8.0)?),
            reference: 1.0,
            tolerance: 0.0,
        },
        Row {
            quantity: "rejects_tilt_0_20",
            computed: f64::from(verdict(0.20)?),
            reference: 0.0,
            tolerance: 0.0,
        },
    ])
}

/// Satiating utility with a large constant payoff: proportional sharing
/// strictly beats every lottery.
fn example_5() -> Result<Vec<Row>> {
    let agent = Agent::rdu(
        UtilityFunction::Satiation { x0: 1.0, y0: 2.0 },
        WeightingFunction::Tk { gamma: 0.71 },
    );
    let n = 8;
    let sp = FiniteProbSpace::new(vec![1.0])?;
    let x = RandomVariable::constant(sp, 2.0 * n as f64);
    let scenario = RduScenario::new(n, agent, x, 4096)?;
    let rep = jackpot_vs_proportional(&scenario)?;
    Ok(vec![
        Row {
            quantity: "proportional_strictly_dominates",
            computed: f64::from(rep.verdict == DominanceVerdict::ProportionalStrictlyDominates),
            reference: 1.0,
            tolerance: 0.0,
        },
        Row {
            quantity: "dominance_margin_positive",
            computed: f64::from(rep.margin > 0.0),
            reference: 1.0,
            tolerance: 0.0,
        },
    ])
}

/// Equal-weight winner-take-all on the discretized uniform payoff with
/// utilities 3x^2 and 4x^3: agent utilities 27/64 and 175/256.
fn example_s1() -> Result<Vec<Row>> {
    let m = 10_000;
    let sp = FiniteProbSpace::uniform(m);
    let values: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) / m as f64).collect();
    let x = RandomVariable::new(sp, values)?;
    let agents = vec![convex_power(2.0, 3.0), convex_power(3.0, 4.0)];
    let (alloc, _) = rs_lambda_optimal(&[0.5, 0.5], &agents, &x)?;
    let mut utilities = [0.0f64; 2];
    for i in 0..2 {
        utilities[i] = alloc.components[i]
            .iter()
            .zip(x.space.probs())
            .map(|(&v, &p)| p * agents[i].utility.eval(v).unwrap())
            .sum();
    }
    Ok(vec![
        Row {
            quantity: "utility_agent_1",
            computed: utilities[0],
            reference: 27.0 / 64.0,
            tolerance: 1e-3,
        },
        Row {
            quantity: "utility_agent_2",
            computed: utilities[1],
            reference: 175.0 / 256.0,
            tolerance: 1e-3,
        },
    ])
}

/// Inverse-S weighting at the standard parameter: envelope coincidence bound
/// 0.133 and curvature inflection 0.452.
fn figure_2() -> Result<Vec<Row>> {
    let w = WeightingFunction::Tk { gamma: 0.71 };
    let env = concave_envelope(&w, 10_000)?;
    let p = check_cavexity(&w, 10_000)?.ok_or_else(|| anyhow!("not concave-then-convex"))?;
    Ok(vec![
        Row { quantity: "beta_w", computed: env.beta_w, reference: 0.133, tolerance: 2e-3 },
        Row { quantity: "inflection", computed: p, reference: 0.452, tolerance: 5e-3 },
    ])
}
