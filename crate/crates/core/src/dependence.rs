//! Dependence-structure checks on allocations: comonotonic,
//! counter-monotonic, and jackpot form, plus the constructive
//! shift-and-partition representation of counter-monotonic vectors.

use serde::Serialize;

use crate::space::{Allocation, PartitionVector};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DependenceMode {
    Comonotonic,
    CounterMonotonic,
    Jackpot,
}

/// Check outcome with the first violating atom pair (or atom, for the
/// jackpot pointwise test).
#[derive(Debug, Clone, Serialize)]
pub struct DependenceVerdict {
    pub holds: bool,
    pub witness: Option<DependenceWitness>,
}

#[derive(Debug, Clone, Serialize)]
pub enum DependenceWitness {
    /// Component pair and atom pair where the product inequality fails.
    AtomPair { agents: (usize, usize), atoms: (usize, usize) },
    /// Atom where a component is negative or two components are positive.
    Atom { atom: usize },
}

/// Tests every component pair over all atom pairs for the product
/// inequality (negated for counter-monotonicity), or the pointwise
/// winner-take-all conditions for the jackpot form.
pub fn check_dependence(alloc: &Allocation, mode: DependenceMode) -> DependenceVerdict {
    match mode {
        DependenceMode::Jackpot => check_jackpot(alloc),
        DependenceMode::Comonotonic => check_pairwise(alloc, 1.0),
        DependenceMode::CounterMonotonic => check_pairwise(alloc, -1.0),
    }
}

fn check_jackpot(alloc: &Allocation) -> DependenceVerdict {
    for s in 0..alloc.space.len() {
        let mut positive = 0usize;
        for c in &alloc.components {
            if c[s] < -tol::NONNEG {
                return DependenceVerdict {
                    holds: false,
                    witness: Some(DependenceWitness::Atom { atom: s }),
                };
            }
            if c[s] > tol::NONNEG {
                positive += 1;
            }
        }
        if positive > 1 {
            return DependenceVerdict {
                holds: false,
                witness: Some(DependenceWitness::Atom { atom: s }),
            };
        }
    }
    DependenceVerdict { holds: true, witness: None }
}

fn check_pairwise(alloc: &Allocation, sign: f64) -> DependenceVerdict {
    let n = alloc.n_agents();
    let m = alloc.space.len();
    let scale = 1.0
        + alloc
            .components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let slack = tol::NONNEG * scale * scale;
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&alloc.components[i], &alloc.components[j]);
            for s in 0..m {
                for t in (s + 1)..m {
                    let prod = (a[s] - a[t]) * (b[s] - b[t]) * sign;
                    if prod < -slack {
                        return DependenceVerdict {
                            holds: false,
                            witness: Some(DependenceWitness::AtomPair {
                                agents: (i, j),
                                atoms: (s, t),
                            }),
                        };
                    }
                }
            }
        }
    }
    DependenceVerdict { holds: true, witness: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShiftForm {
    /// Shifts are essential infima; at most one component above its floor per atom.
    Lower,
    /// Shifts are essential suprema; at most one component below its cap per atom.
    Upper,
}

/// The shift-and-partition form of a counter-monotonic allocation:
/// `X_i = (X - m) * 1{owner = i} + m_i` with `m` the shift total.
#[derive(Debug, Clone, Serialize)]
pub struct CmRepresentation {
    pub shifts: Vec<f64>,
    pub partition: PartitionVector,
    pub form: ShiftForm,
}

#[derive(Debug, Clone, Serialize)]
pub enum CmRepOutcome {
    Found(CmRepresentation),
    /// The allocation admits no such form, hence is not counter-monotonic.
    None,
    /// Fewer than three non-degenerate components: the form is not unique
    /// and the pairwise check is the authority.
    DeferToPairwise,
}

/// Recovers the shift-and-partition form of a counter-monotonic allocation,
/// trying the infimum form first and the supremum form second, verifying the
/// reconstruction atomwise.
pub fn counter_monotonic_representation(alloc: &Allocation) -> CmRepOutcome {
    let non_degenerate = alloc
        .components
        .iter()
        .filter(|c| {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo > tol::MERGE
        })
        .count();
    if non_degenerate < 3 {
        return CmRepOutcome::DeferToPairwise;
    }
    for form in [ShiftForm::Lower, ShiftForm::Upper] {
        if let Some(rep) = try_form(alloc, form) {
            return CmRepOutcome::Found(rep);
        }
    }
    CmRepOutcome::None
}

fn try_form(alloc: &Allocation, form: ShiftForm) -> Option<CmRepresentation> {
    let m_atoms = alloc.space.len();
    let shifts: Vec<f64> = alloc
        .components
        .iter()
        .map(|c| match form {
            ShiftForm::Lower => c.iter().copied().fold(f64::INFINITY, f64::min),
            ShiftForm::Upper => c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    let scale = 1.0
        + alloc
            .components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol_rec = 1e-10 * scale;
    let mut owner = vec![0usize; m_atoms];
    for s in 0..m_atoms {
        let mut deviating: Option<usize> = None;
        for (i, c) in alloc.components.iter().enumerate() {
            let dev = match form {
                ShiftForm::Lower => c[s] - shifts[i] > tol_rec,
                ShiftForm::Upper => shifts[i] - c[s] > tol_rec,
            };
            if dev {
                if deviating.is_some() {
                    return None;
                }
                deviating = Some(i);
            }
        }
        owner[s] = deviating.unwrap_or(0);
    }
    // Verify the reconstruction X_i = (X - m) 1{owner=i} + m_i atomwise.
    let m: f64 = shifts.iter().sum();
    let total = alloc.total();
    for s in 0..m_atoms {
        for (i, c) in alloc.components.iter().enumerate() {
            let rebuilt = if owner[s] == i {
                total.values[s] - m + shifts[i]
            } else {
                shifts[i]
            };
            if (rebuilt - c[s]).abs() > tol_rec {
                return None;
            }
        }
    }
    let partition = PartitionVector::new(alloc.space.clone(), owner).ok()?;
    Some(CmRepresentation { shifts, partition, form })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Allocation, FiniteProbSpace};

    fn alloc(probs: Vec<f64>, comps: Vec<Vec<f64>>) -> Allocation {
        let sp = FiniteProbSpace::new(probs).unwrap();
        Allocation::from_components(sp, comps).unwrap()
    }

    #[test]
    fn half_half_is_comonotonic_not_jackpot() {
        let a = alloc(vec![0.5, 0.5], vec![vec![0.5, 1.0], vec![0.5, 1.0]]);
        assert!(check_dependence(&a, DependenceMode::Comonotonic).holds);
        assert!(!check_dependence(&a, DependenceMode::Jackpot).holds);
    }

    #[test]
    fn indicator_split_is_jackpot_and_counter_monotonic() {
        let a = alloc(vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert!(check_dependence(&a, DependenceMode::Jackpot).holds);
        assert!(check_dependence(&a, DependenceMode::CounterMonotonic).holds);
    }

    #[test]
    fn common_indicator_fails_counter_monotonic_with_witness() {
        let a = alloc(vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let v = check_dependence(&a, DependenceMode::CounterMonotonic);
        assert!(!v.holds);
        assert!(matches!(v.witness, Some(DependenceWitness::AtomPair { .. })));
    }

    #[test]
    fn jackpot_implies_counter_monotonic() {
        let a = alloc(
            vec![0.25, 0.25, 0.5],
            vec![vec![3.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]],
        );
        assert!(check_dependence(&a, DependenceMode::Jackpot).holds);
        assert!(check_dependence(&a, DependenceMode::CounterMonotonic).holds);
    }

    #[test]
    fn representation_of_jackpot_has_zero_shifts() {
        let a = alloc(
            vec![0.25, 0.25, 0.5],
            vec![vec![3.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]],
        );
        match counter_monotonic_representation(&a) {
            CmRepOutcome::Found(rep) => {
                assert_eq!(rep.form, ShiftForm::Lower);
                assert!(rep.shifts.iter().all(|&m| m.abs() < 1e-12));
                assert_eq!(rep.partition.owner, vec![0, 1, 2]);
            }
            other => panic!("expected representation, got {other:?}"),
        }
    }

    #[test]
    fn representation_recovers_constant_shifts() {
        let a = alloc(
            vec![0.25, 0.25, 0.5],
            vec![
                vec![3.0 + 1.0, 1.0, 1.0],
                vec![2.0, 1.0 + 2.0, 2.0],
                vec![-1.0, -1.0, 2.0 - 1.0],
            ],
        );
        match counter_monotonic_representation(&a) {
            CmRepOutcome::Found(rep) => {
                assert_eq!(rep.form, ShiftForm::Lower);
                assert!((rep.shifts[0] - 1.0).abs() < 1e-12);
                assert!((rep.shifts[1] - 2.0).abs() < 1e-12);
                assert!((rep.shifts[2] + 1.0).abs() < 1e-12);
            }
            other => panic!("expected representation, got {other:?}"),
        }
    }

    #[test]
    fn four_state_example_has_no_representation() {
        // Three agents on four equiprobable states, each holding 3 on an own
        // state plus 1 on the shared fourth state. Not counter-monotonic.
        let a = alloc(
            vec![0.25; 4],
            vec![
                vec![3.0, 0.0, 0.0, 1.0],
                vec![0.0, 3.0, 0.0, 1.0],
                vec![0.0, 0.0, 3.0, 1.0],
            ],
        );
        assert!(matches!(counter_monotonic_representation(&a), CmRepOutcome::None));
        assert!(!check_dependence(&a, DependenceMode::CounterMonotonic).holds);
    }

    #[test]
    fn two_agents_defer_to_pairwise() {
        let a = alloc(vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert!(matches!(
            counter_monotonic_representation(&a),
            CmRepOutcome::DeferToPairwise
        ));
    }
}
