//! Finite probability spaces, random variables, allocations, and the exact
//! randomization extensions that realize an independent uniform device by
//! atom splitting.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tol;

/// A finite probability space: strictly positive atom probabilities summing
/// to one, with optional parent links into the coarser space this one was
/// split from.
#[derive(Debug, Clone, Serialize)]
pub struct FiniteProbSpace {
    probs: Vec<f64>,
    /// `parent[child]` is the atom index in the space this one extends.
    parent: Option<Vec<usize>>,
}

impl FiniteProbSpace {
    pub fn new(probs: Vec<f64>) -> Result<Arc<Self>> {
        Self::with_parent(probs, None)
    }

    pub fn with_parent(probs: Vec<f64>, parent: Option<Vec<usize>>) -> Result<Arc<Self>> {
        if probs.is_empty() {
            return Err(Error::Validation("space must have at least one atom".into()));
        }
        if probs.iter().any(|&p| p.is_nan() || p <= 0.0 || !p.is_finite()) {
            return Err(Error::Validation(
                "atom probabilities must be strictly positive and finite".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > tol::MASS {
            return Err(Error::Validation(format!(
                "atom probabilities sum to {total}, expected 1 within {}",
                tol::MASS
            )));
        }
        if let Some(par) = &parent {
            if par.len() != probs.len() {
                return Err(Error::Validation("parent map must be total".into()));
            }
        }
        Ok(Arc::new(Self { probs, parent }))
    }

    /// Uniform space with `n` equiprobable atoms.
    pub fn uniform(n: usize) -> Arc<Self> {
        Self::new(vec![1.0 / n as f64; n]).expect("uniform space is valid")
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, atom: usize) -> f64 {
        self.probs[atom]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn parent_links(&self) -> Option<&[usize]> {
        self.parent.as_deref()
    }

    /// Structural identity: same atom count and probabilities. Two spaces
    /// built independently with the same atoms interoperate.
    pub fn same_as(&self, other: &Self) -> bool {
        std::ptr::eq(self, other)
            || (self.probs.len() == other.probs.len()
                && self
                    .probs
                    .iter()
                    .zip(&other.probs)
                    .all(|(a, b)| (a - b).abs() <= tol::MASS))
    }

    /// Checks that parent probabilities equal the sum of child probabilities.
    pub fn check_parent_mass(&self, parent_space: &FiniteProbSpace) -> Result<()> {
        let links = self.parent.as_ref().ok_or_else(|| {
            Error::Validation("space has no parent links".into())
        })?;
        let mut mass = vec![0.0; parent_space.len()];
        for (child, &p) in links.iter().enumerate() {
            if p >= parent_space.len() {
                return Err(Error::Validation(format!(
                    "parent link {p} out of range for child {child}"
                )));
            }
            mass[p] += self.probs[child];
        }
        for (atom, (&got, &want)) in mass.iter().zip(parent_space.probs()).enumerate() {
            if (got - want).abs() > tol::MASS {
                return Err(Error::Validation(format!(
                    "parent atom {atom} has mass {want} but children sum to {got}"
                )));
            }
        }
        Ok(())
    }
}

/// A real-valued random variable: one value per atom of its space.
#[derive(Debug, Clone, Serialize)]
pub struct RandomVariable {
    pub space: Arc<FiniteProbSpace>,
    pub values: Vec<f64>,
}

impl RandomVariable {
    pub fn new(space: Arc<FiniteProbSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Validation(format!(
                "value vector length {} does not match atom count {}",
                values.len(),
                space.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("values must be finite".into()));
        }
        Ok(Self { space, values })
    }

    pub fn constant(space: Arc<FiniteProbSpace>, value: f64) -> Self {
        let n = space.len();
        Self { space, values: vec![value; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pushes a value map through, staying on the same space.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            space: Arc::clone(&self.space),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Lifts this variable to a space extended from its own: each child atom
    /// inherits the value of its parent atom.
    pub fn lift_to(&self, extended: &Arc<FiniteProbSpace>) -> Result<Self> {
        let links = extended.parent_links().ok_or_else(|| {
            Error::SpaceMismatch("target space has no parent links".into())
        })?;
        if links.iter().any(|&p| p >= self.space.len()) {
            return Err(Error::SpaceMismatch(
                "parent links do not index this variable's space".into(),
            ));
        }
        let values = links.iter().map(|&p| self.values[p]).collect();
        RandomVariable::new(Arc::clone(extended), values)
    }

    /// Distribution support after merging values closer than [`tol::MERGE`]:
    /// sorted `(value, probability)` pairs.
    pub fn distribution(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = self
            .values
            .iter()
            .zip(self.space.probs())
            .map(|(&v, &p)| (v, p))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (v, p) in pairs {
            match merged.last_mut() {
                Some((mv, mp)) if (v - *mv).abs() <= tol::MERGE => *mp += p,
                _ => merged.push((v, p)),
            }
        }
        merged
    }
}

/// Expectation of `x`, under the physical measure or under a pricing density.
///
/// The density, when given, reweights each atom: the weight is
/// `probability * density`.
pub fn expectation(x: &RandomVariable, density: Option<&RandomVariable>) -> Result<f64> {
    if let Some(d) = density {
        if !x.space.same_as(&d.space) {
            return Err(Error::SpaceMismatch(
                "variable and density live on different spaces".into(),
            ));
        }
        Ok(x.values
            .iter()
            .zip(&d.values)
            .zip(x.space.probs())
            .map(|((&v, &q), &p)| v * q * p)
            .sum())
    } else {
        Ok(x.values
            .iter()
            .zip(x.space.probs())
            .map(|(&v, &p)| v * p)
            .sum())
    }
}

/// An allocation of a total payoff: one payoff vector per agent, summing
/// atomwise to the total.
#[derive(Debug, Clone, Serialize)]
pub struct Allocation {
    pub space: Arc<FiniteProbSpace>,
    /// Agent-major: `components[i]` is agent `i`'s payoff per atom.
    pub components: Vec<Vec<f64>>,
}

impl Allocation {
    /// Builds an allocation and checks the components sum to `total` atomwise.
    pub fn new(
        space: Arc<FiniteProbSpace>,
        components: Vec<Vec<f64>>,
        total: &RandomVariable,
    ) -> Result<Self> {
        if !space.same_as(&total.space) {
            return Err(Error::SpaceMismatch(
                "total payoff lives on a different space".into(),
            ));
        }
        if components.is_empty() {
            return Err(Error::Validation("allocation needs at least one agent".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if c.len() != space.len() {
                return Err(Error::Validation(format!(
                    "component {i} has length {}, expected {}",
                    c.len(),
                    space.len()
                )));
            }
        }
        let scale = 1.0 + total.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for s in 0..space.len() {
            let sum: f64 = components.iter().map(|c| c[s]).sum();
            if (sum - total.values[s]).abs() > tol::MASS * scale {
                return Err(Error::Validation(format!(
                    "components sum to {sum} on atom {s}, total payoff is {}",
                    total.values[s]
                )));
            }
        }
        Ok(Self { space, components })
    }

    /// Builds an allocation whose total is taken to be the componentwise sum.
    pub fn from_components(space: Arc<FiniteProbSpace>, components: Vec<Vec<f64>>) -> Result<Self> {
        let total = RandomVariable::new(
            Arc::clone(&space),
            (0..space.len())
                .map(|s| components.iter().map(|c| c[s]).sum())
                .collect(),
        )?;
        Self::new(space, components, &total)
    }

    pub fn n_agents(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> RandomVariable {
        RandomVariable {
            space: Arc::clone(&self.space),
            values: self.components[i].clone(),
        }
    }

    /// The total payoff this allocation distributes.
    pub fn total(&self) -> RandomVariable {
        RandomVariable {
            space: Arc::clone(&self.space),
            values: (0..self.space.len())
                .map(|s| self.components.iter().map(|c| c[s]).sum())
                .collect(),
        }
    }
}

/// An ordered partition of the atoms among agents: every atom owned by
/// exactly one agent.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionVector {
    pub space: Arc<FiniteProbSpace>,
    /// `owner[atom]` is the owning agent index.
    pub owner: Vec<usize>,
}

impl PartitionVector {
    pub fn new(space: Arc<FiniteProbSpace>, owner: Vec<usize>) -> Result<Self> {
        if owner.len() != space.len() {
            return Err(Error::Validation("owner map must cover every atom".into()));
        }
        Ok(Self { space, owner })
    }

    /// Probability that agent `i` owns the realized atom.
    pub fn owner_prob(&self, i: usize) -> f64 {
        self.owner
            .iter()
            .zip(self.space.probs())
            .filter(|(&o, _)| o == i)
            .map(|(_, &p)| p)
            .sum()
    }

    /// The indicator payoff vector of the partition for `n` agents.
    pub fn indicators(&self, n_agents: usize) -> Vec<RandomVariable> {
        (0..n_agents)
            .map(|i| RandomVariable {
                space: Arc::clone(&self.space),
                values: self.owner.iter().map(|&o| if o == i { 1.0 } else { 0.0 }).collect(),
            })
            .collect()
    }
}

/// Splits every atom at the given cut points of the unit interval, realizing
/// the event family `{Z_{i-1} <= U < Z_i}` for an independent uniform `U`
/// exactly, with no discretization error.
///
/// `cuts[atom]` must start at 0, end at 1, and be nondecreasing; interval
/// `i` (between consecutive cuts) becomes a child atom owned by agent `i`
/// with probability `parent_prob * width`. Zero-width intervals produce no
/// atom.
pub fn extend_with_uniform_cuts(
    space: &Arc<FiniteProbSpace>,
    cuts: &[Vec<f64>],
) -> Result<(Arc<FiniteProbSpace>, PartitionVector)> {
    if cuts.len() != space.len() {
        return Err(Error::Validation(format!(
            "need one cut list per atom: got {}, expected {}",
            cuts.len(),
            space.len()
        )));
    }
    let mut probs = Vec::new();
    let mut parent = Vec::new();
    let mut owner = Vec::new();
    for (atom, list) in cuts.iter().enumerate() {
        if list.len() < 2 {
            return Err(Error::Validation(format!(
                "cut list for atom {atom} needs at least two points"
            )));
        }
        if list[0].abs() > tol::MASS || (list[list.len() - 1] - 1.0).abs() > tol::MASS {
            return Err(Error::Validation(format!(
                "cut list for atom {atom} must span [0, 1]"
            )));
        }
        for w in list.windows(2) {
            if w[1] < w[0] - tol::MASS {
                return Err(Error::Validation(format!(
                    "cut list for atom {atom} is not nondecreasing"
                )));
            }
        }
        for (i, w) in list.windows(2).enumerate() {
            let width = (w[1] - w[0]).max(0.0);
            if width > 0.0 {
                probs.push(space.prob(atom) * width);
                parent.push(atom);
                owner.push(i);
            }
        }
    }
    let extended = FiniteProbSpace::with_parent(probs, Some(parent))?;
    let partition = PartitionVector::new(Arc::clone(&extended), owner)?;
    Ok((extended, partition))
}

/// Adjoins an independent categorical device with distribution `theta` on the
/// simplex: each atom splits into one child per agent with positive weight.
/// The resulting partition is independent of every variable on the base
/// space, and `P(owner = i) = theta[i]`.
pub fn extend_with_independent_categorical(
    space: &Arc<FiniteProbSpace>,
    theta: &[f64],
) -> Result<(Arc<FiniteProbSpace>, PartitionVector)> {
    if theta.is_empty() {
        return Err(Error::Validation("theta must be nonempty".into()));
    }
    if theta.iter().any(|&t| t < 0.0 || !t.is_finite()) {
        return Err(Error::Validation("theta components must be nonnegative".into()));
    }
    let total: f64 = theta.iter().sum();
    if (total - 1.0).abs() > tol::MASS {
        return Err(Error::Validation(format!(
            "theta sums to {total}, expected 1 within {}",
            tol::MASS
        )));
    }
    let mut cuts = Vec::with_capacity(space.len());
    let mut cum = Vec::with_capacity(theta.len() + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for (i, &t) in theta.iter().enumerate() {
        acc += t;
        cum.push(if i + 1 == theta.len() { 1.0 } else { acc });
    }
    for _ in 0..space.len() {
        cuts.push(cum.clone());
    }
    extend_with_uniform_cuts(space, &cuts)
}

/// Conditional expectation of a child-space variable given each parent atom.
pub fn conditional_mean_by_parent(
    x: &RandomVariable,
    parent_space: &FiniteProbSpace,
) -> Result<Vec<f64>> {
    let links = x.space.parent_links().ok_or_else(|| {
        Error::SpaceMismatch("variable's space has no parent links".into())
    })?;
    let mut num = vec![0.0; parent_space.len()];
    for (child, &p) in links.iter().enumerate() {
        num[p] += x.space.prob(child) * x.values[child];
    }
    Ok(num
        .iter()
        .zip(parent_space.probs())
        .map(|(&n, &p)| n / p)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_mass() {
        assert!(FiniteProbSpace::new(vec![0.5, 0.4]).is_err());
        assert!(FiniteProbSpace::new(vec![0.5, 0.0, 0.5]).is_err());
        assert!(FiniteProbSpace::new(vec![]).is_err());
    }

    #[test]
    fn expectation_under_density() {
        let sp = FiniteProbSpace::uniform(2);
        let x = RandomVariable::new(Arc::clone(&sp), vec![1.0, 2.0]).unwrap();
        assert!((expectation(&x, None).unwrap() - 1.5).abs() < 1e-15);
        let q = RandomVariable::new(Arc::clone(&sp), vec![2.0 / 3.0, 4.0 / 3.0]).unwrap();
        assert!((expectation(&x, Some(&q)).unwrap() - 5.0 / 3.0).abs() < 1e-12);
        let c = RandomVariable::constant(sp, 5.0);
        assert!((expectation(&c, None).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_cut_split_single_atom() {
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let (ext, part) = extend_with_uniform_cuts(&sp, &[vec![0.0, 0.5, 1.0]]).unwrap();
        assert_eq!(ext.len(), 2);
        assert!((ext.prob(0) - 0.5).abs() < 1e-15);
        assert!((ext.prob(1) - 0.5).abs() < 1e-15);
        assert_eq!(part.owner, vec![0, 1]);
        ext.check_parent_mass(&sp).unwrap();
    }

    #[test]
    fn uniform_cut_drops_zero_width() {
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let (ext, part) = extend_with_uniform_cuts(&sp, &[vec![0.0, 0.0, 1.0, 1.0]]).unwrap();
        assert_eq!(ext.len(), 1);
        assert_eq!(part.owner, vec![1]);
    }

    #[test]
    fn uniform_cut_rejects_bad_lists() {
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        assert!(extend_with_uniform_cuts(&sp, &[vec![0.0, 0.5]]).is_err());
        assert!(extend_with_uniform_cuts(&sp, &[vec![0.0, 0.7, 0.3, 1.0]]).is_err());
        assert!(extend_with_uniform_cuts(&sp, &[vec![0.1, 1.0]]).is_err());
    }

    #[test]
    fn example_space_thirds_extension() {
        // Four equiprobable states, each cut at thirds: twelve atoms of 1/12
        // and owner probabilities of 1/3 each.
        let sp = FiniteProbSpace::uniform(4);
        let cuts = vec![vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]; 4];
        let (ext, part) = extend_with_uniform_cuts(&sp, &cuts).unwrap();
        assert_eq!(ext.len(), 12);
        for s in 0..12 {
            assert!((ext.prob(s) - 1.0 / 12.0).abs() < 1e-15);
        }
        for i in 0..3 {
            assert!((part.owner_prob(i) - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn categorical_degenerate_component() {
        let sp = FiniteProbSpace::uniform(3);
        let (ext, part) = extend_with_independent_categorical(&sp, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(ext.len(), 3);
        assert!(part.owner.iter().all(|&o| o == 0));
    }

    #[test]
    fn categorical_empirical_mean() {
        let sp = FiniteProbSpace::uniform(2);
        let (ext, part) = extend_with_independent_categorical(&sp, &[0.3, 0.7]).unwrap();
        assert_eq!(ext.len(), 4);
        assert!((part.owner_prob(0) - 0.3).abs() < 1e-12);
        assert!((part.owner_prob(1) - 0.7).abs() < 1e-12);
        // Conditional owner distribution is identical across parents.
        let links = ext.parent_links().unwrap();
        for parent in 0..2 {
            let mut mass = [0.0; 2];
            for (c, &p) in links.iter().enumerate() {
                if p == parent {
                    mass[part.owner[c]] += ext.prob(c);
                }
            }
            let total = mass[0] + mass[1];
            assert!((mass[0] / total - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn categorical_rejects_off_simplex() {
        let sp = FiniteProbSpace::uniform(2);
        assert!(extend_with_independent_categorical(&sp, &[0.5, 0.4]).is_err());
        assert!(extend_with_independent_categorical(&sp, &[-0.1, 1.1]).is_err());
    }

    #[test]
    fn allocation_sum_enforced() {
        let sp = FiniteProbSpace::uniform(2);
        let x = RandomVariable::new(Arc::clone(&sp), vec![1.0, 2.0]).unwrap();
        let ok = Allocation::new(
            Arc::clone(&sp),
            vec![vec![0.5, 1.5], vec![0.5, 0.5]],
            &x,
        );
        assert!(ok.is_ok());
        let bad = Allocation::new(sp, vec![vec![0.5, 1.5], vec![0.5, 0.4]], &x);
        assert!(bad.is_err());
    }

    #[test]
    fn lift_preserves_parent_values() {
        let sp = FiniteProbSpace::uniform(2);
        let x = RandomVariable::new(Arc::clone(&sp), vec![3.0, 7.0]).unwrap();
        let (ext, _) = extend_with_independent_categorical(&sp, &[0.5, 0.5]).unwrap();
        let lifted = x.lift_to(&ext).unwrap();
        let means = conditional_mean_by_parent(&lifted, &sp).unwrap();
        assert!((means[0] - 3.0).abs() < 1e-15);
        assert!((means[1] - 7.0).abs() < 1e-15);
    }
}
