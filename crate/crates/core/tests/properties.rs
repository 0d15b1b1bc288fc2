//! Randomized law checks: Choquet-integral algebra, convex-order semantics,
//! improvement invariants, and solver optimality against sampled feasible
//! allocations.

use std::sync::Arc;

use proptest::prelude::*;

use riskshare_core::agent::{choquet, rdu_utility, Agent};
use riskshare_core::dependence::{check_dependence, DependenceMode};
use riskshare_core::improve::counter_monotonic_improve;
use riskshare_core::lambda_opt::rs_lambda_optimal;
use riskshare_core::order::{convex_order_leq, stop_loss};
use riskshare_core::space::{
    conditional_mean_by_parent, expectation, extend_with_independent_categorical, Allocation,
    FiniteProbSpace, RandomVariable,
};
use riskshare_core::utility::{Curvature, UtilityFunction};
use riskshare_core::weighting::WeightingFunction;

fn arb_space(max_atoms: usize) -> impl Strategy<Value = Arc<FiniteProbSpace>> {
    prop::collection::vec(0.05..1.0f64, 1..=max_atoms).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        FiniteProbSpace::new(raw.iter().map(|w| w / total).collect()).unwrap()
    })
}

fn arb_rv(max_atoms: usize) -> impl Strategy<Value = RandomVariable> {
    (arb_space(max_atoms), prop::collection::vec(0.0..10.0f64, max_atoms)).prop_map(
        |(sp, vals)| {
            let n = sp.len();
            RandomVariable::new(sp, vals[..n].to_vec()).unwrap()
        },
    )
}

fn arb_alloc(max_atoms: usize, max_agents: usize) -> impl Strategy<Value = Allocation> {
    (
        arb_space(max_atoms),
        1..=max_agents,
        prop::collection::vec(0.0..5.0f64, max_atoms * max_agents),
    )
        .prop_map(|(sp, n, vals)| {
            let m = sp.len();
            let comps: Vec<Vec<f64>> =
                (0..n).map(|i| vals[i * m..(i + 1) * m].to_vec()).collect();
            Allocation::from_components(sp, comps).unwrap()
        })
}

/// Collapses a variable toward its mean by replacing the values on a block
/// of atoms with their conditional mean: the collapse precedes the original
/// in convex order.
fn mean_collapse(x: &RandomVariable, block: usize) -> RandomVariable {
    let m = x.len();
    let block = block.max(1).min(m);
    let mut values = x.values.clone();
    let mut mass = 0.0;
    let mut mean = 0.0;
    for s in 0..block {
        mass += x.space.prob(s);
        mean += x.space.prob(s) * x.values[s];
    }
    if mass > 0.0 {
        for v in values.iter_mut().take(block) {
            *v = mean / mass;
        }
    }
    RandomVariable::new(x.space.clone(), values).unwrap()
}

/// Piecewise-linear convex function as a maximum of affine pieces.
fn convex_pieces(lines: &[(f64, f64)]) -> impl Fn(f64) -> f64 + '_ {
    move |x| {
        lines
            .iter()
            .map(|(a, b)| a * x + b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

proptest! {
    #[test]
    fn choquet_monotone(y in arb_rv(6), bump in prop::collection::vec(0.0..2.0f64, 6)) {
        let w = WeightingFunction::Tk { gamma: 0.71 };
        let z = RandomVariable::new(
            y.space.clone(),
            y.values.iter().zip(&bump).map(|(&v, &b)| v + b).collect(),
        ).unwrap();
        let cy = choquet(&y, &w).unwrap();
        let cz = choquet(&z, &w).unwrap();
        prop_assert!(cy <= cz + 1e-10);
    }

    #[test]
    fn choquet_positively_homogeneous(y in arb_rv(6), c in 0.0..4.0f64) {
        let w = WeightingFunction::Tk { gamma: 0.71 };
        let scaled = y.map(|v| c * v);
        let lhs = choquet(&scaled, &w).unwrap();
        let rhs = c * choquet(&y, &w).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn choquet_comonotonic_additive(z in arb_rv(6), k1 in 0.1..3.0f64, k2 in 0.1..3.0f64) {
        // Increasing transforms of a common variable are comonotonic.
        let w = WeightingFunction::Tk { gamma: 0.71 };
        let y1 = z.map(|v| k1 * v);
        let y2 = z.map(|v| k2 * v * v);
        let pair = Allocation::from_components(
            z.space.clone(),
            vec![y1.values.clone(), y2.values.clone()],
        ).unwrap();
        prop_assert!(check_dependence(&pair, DependenceMode::Comonotonic).holds);
        let sum = RandomVariable::new(
            z.space.clone(),
            y1.values.iter().zip(&y2.values).map(|(a, b)| a + b).collect(),
        ).unwrap();
        let lhs = choquet(&sum, &w).unwrap();
        let rhs = choquet(&y1, &w).unwrap() + choquet(&y2, &w).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn choquet_identity_is_expectation(y in arb_rv(6)) {
        let c = choquet(&y, &WeightingFunction::Identity).unwrap();
        let e = expectation(&y, None).unwrap();
        prop_assert!((c - e).abs() <= 1e-12 * (1.0 + e.abs()));
    }

    #[test]
    fn convex_order_respects_convex_test_functions(
        y in arb_rv(6),
        block in 1usize..6,
        lines in prop::collection::vec((-3.0..3.0f64, -5.0..5.0f64), 1..5),
    ) {
        let x = mean_collapse(&y, block);
        let verdict = convex_order_leq(&x, &y);
        prop_assert!(verdict.holds);
        let phi = convex_pieces(&lines);
        let ex: f64 = x.values.iter().zip(x.space.probs()).map(|(&v, &p)| p * phi(v)).sum();
        let ey: f64 = y.values.iter().zip(y.space.probs()).map(|(&v, &p)| p * phi(v)).sum();
        prop_assert!(ex <= ey + 1e-9 * (1.0 + ey.abs()));
    }

    #[test]
    fn convex_order_transitive_on_collapse_chain(z in arb_rv(6), b1 in 1usize..6, b2 in 1usize..6) {
        let y = mean_collapse(&z, b1);
        let x = mean_collapse(&y, b2);
        prop_assert!(convex_order_leq(&x, &y).holds);
        prop_assert!(convex_order_leq(&y, &z).holds);
        prop_assert!(convex_order_leq(&x, &z).holds);
    }

    #[test]
    fn stop_loss_decreasing_in_threshold(x in arb_rv(6), t in -5.0..15.0f64) {
        prop_assert!(stop_loss(&x, t) >= stop_loss(&x, t + 0.5) - 1e-12);
    }

    #[test]
    fn risk_seeking_under_concave_weighting(y in arb_rv(6), block in 1usize..6) {
        // The concave weighting makes the preference increase along convex
        // order: the collapse is never strictly preferred.
        let w = WeightingFunction::Power { gamma: 0.5 };
        let x = mean_collapse(&y, block);
        let cx = choquet(&x, &w).unwrap();
        let cy = choquet(&y, &w).unwrap();
        prop_assert!(cx <= cy + 1e-10 * (1.0 + cy.abs()));
    }

    #[test]
    fn improvement_invariants(alloc in arb_alloc(6, 4)) {
        let res = counter_monotonic_improve(&alloc).unwrap();
        // Jackpot structure.
        prop_assert!(check_dependence(&res.jackpot, DependenceMode::Jackpot).holds);
        prop_assert!(check_dependence(&res.jackpot, DependenceMode::CounterMonotonic).holds);
        // Total mass preserved by the extension.
        let mass: f64 = res.space.probs().iter().sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12);
        // Conditional means reproduce the inputs; convex order holds.
        for i in 0..alloc.n_agents() {
            let yi = res.jackpot.component(i);
            let means = conditional_mean_by_parent(&yi, &alloc.space).unwrap();
            for s in 0..alloc.space.len() {
                prop_assert!((means[s] - alloc.components[i][s]).abs() <= 1e-10);
            }
            let v = convex_order_leq(&alloc.component(i), &yi);
            prop_assert!(v.holds);
            // A convex expected-utility agent weakly prefers the output.
            let agent = Agent::eu(
                UtilityFunction::Power { alpha: 2.0, coeff: 1.0 },
                Curvature::StrictlyConvex,
            );
            let before = rdu_utility(&agent, &alloc.component(i)).unwrap();
            let after = rdu_utility(&agent, &yi).unwrap();
            prop_assert!(after >= before - 1e-9 * (1.0 + before.abs()));
        }
    }

    #[test]
    fn winner_take_all_beats_sampled_allocations(
        x in arb_rv(4),
        splits in prop::collection::vec(0.0..1.0f64, 4),
    ) {
        let agents = vec![
            Agent::eu(UtilityFunction::Power { alpha: 2.0, coeff: 1.0 }, Curvature::StrictlyConvex),
            Agent::eu(UtilityFunction::Power { alpha: 3.0, coeff: 1.0 }, Curvature::StrictlyConvex),
        ];
        let lambda = [0.5, 0.5];
        let (_, value) = rs_lambda_optimal(&lambda, &agents, &x).unwrap();
        // Any proportional split is weakly worse.
        let m = x.len();
        let comp0: Vec<f64> = (0..m).map(|s| x.values[s] * splits[s % splits.len()]).collect();
        let comp1: Vec<f64> = (0..m).map(|s| x.values[s] - comp0[s]).collect();
        let mut sampled = 0.0;
        for (i, comp) in [comp0, comp1].iter().enumerate() {
            let rv = RandomVariable::new(x.space.clone(), comp.clone()).unwrap();
            sampled += lambda[i] * rdu_utility(&agents[i], &rv).unwrap();
        }
        prop_assert!(value >= sampled - 1e-9 * (1.0 + sampled.abs()));
    }

    #[test]
    fn jackpot_mixture_is_jackpot(x in arb_rv(4), alpha in 0.05..0.95f64, flip in any::<bool>()) {
        // Two winner-take-all allocations mixed through a fresh independent
        // binary event stay winner-take-all.
        let m = x.len();
        let owner_a: Vec<usize> = (0..m).map(|s| s % 2).collect();
        let owner_b: Vec<usize> = (0..m).map(|s| usize::from(flip) ^ ((s + 1) % 2)).collect();
        let (ext, part) = extend_with_independent_categorical(&x.space, &[alpha, 1.0 - alpha]).unwrap();
        let lifted = x.lift_to(&ext).unwrap();
        let links = ext.parent_links().unwrap();
        let mut comps = vec![vec![0.0; ext.len()]; 2];
        for c in 0..ext.len() {
            let base = links[c];
            let owner = if part.owner[c] == 0 { owner_a[base] } else { owner_b[base] };
            comps[owner][c] = lifted.values[c];
        }
        let mixed = Allocation::new(ext.clone(), comps, &lifted).unwrap();
        prop_assert!(check_dependence(&mixed, DependenceMode::Jackpot).holds);
    }
}
