//! Compilers from a target child distribution to parent genomes, and the
//! oracles that measure the child distribution a set of parents induces.
//!
//! Every builder returns a [`ConstructionReport`] whose achieved
//! probabilities come from exact enumeration wherever it is feasible.

mod direct_nn;
mod gp;
mod lookup;
mod nn;
mod oracle;

use std::fmt::Write as _;

use crate::bits::BitVector;
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::metrics::max_pointwise_error;

pub use direct_nn::{build_direct_nn_parents, realized_truth_table, TruthTable, WeightedFunction};
pub use gp::{build_gp_crossover_parents, build_gp_mutation_parent};
pub use lookup::{build_lookup_parents, LookupGenome};
pub use nn::{
    build_nn_crossover_parents, build_nn_mutation_parent, build_nn_mutation_parent_with, design_nn_mutation, MutationMixture, NnMutationDesign,
};
pub use oracle::{
    exact_crossover_distribution, exact_mutation_distribution, sampled_child_distribution,
    MAX_DISAGREEMENTS,
};

/// Parent phenotypes a construction must reproduce exactly.
#[derive(Clone, Debug, PartialEq)]
pub enum ParentPhenotypes {
    Crossover(BitVector, BitVector),
    Mutation(BitVector),
}

/// A target distribution, a tolerance and the parent constraints.
#[derive(Clone, Debug)]
pub struct ApproxTarget {
    pub mu: DiscreteDistribution,
    pub epsilon: f64,
    pub parents: ParentPhenotypes,
    /// Replaces the width the construction derives from `epsilon`: the
    /// control length for crossover builders, the total control budget for
    /// the GP mutation builder and the first-layer width for the NN one.
    pub width: Option<usize>,
}

impl ApproxTarget {
    pub fn crossover(mu: DiscreteDistribution, epsilon: f64, y1: BitVector, y2: BitVector) -> Result<Self> {
        Self::new(mu, epsilon, ParentPhenotypes::Crossover(y1, y2))
    }

    pub fn mutation(mu: DiscreteDistribution, epsilon: f64, y: BitVector) -> Result<Self> {
        Self::new(mu, epsilon, ParentPhenotypes::Mutation(y))
    }

    fn new(mu: DiscreteDistribution, epsilon: f64, parents: ParentPhenotypes) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("ε = {epsilon} outside (0, 1)")));
        }
        let lens: Vec<usize> = match &parents {
            ParentPhenotypes::Crossover(a, b) => vec![a.len(), b.len()],
            ParentPhenotypes::Mutation(a) => vec![a.len()],
        };
        for l in lens {
            if l != mu.dim() {
                return Err(Error::LengthMismatch(l, mu.dim()));
            }
        }
        Ok(ApproxTarget {
            mu,
            epsilon,
            parents,
            width: None,
        })
    }

    pub fn with_width(mut self, width: usize) -> Self {
        self.width = Some(width);
        self
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub(crate) fn crossover_parents(&self) -> Result<(&BitVector, &BitVector)> {
        match &self.parents {
            ParentPhenotypes::Crossover(a, b) => Ok((a, b)),
            ParentPhenotypes::Mutation(_) => Err(Error::InvalidArgument(
                "crossover construction needs two parent phenotypes".into(),
            )),
        }
    }

    pub(crate) fn mutation_parent(&self) -> Result<&BitVector> {
        match &self.parents {
            ParentPhenotypes::Mutation(a) => Ok(a),
            ParentPhenotypes::Crossover(..) => Err(Error::InvalidArgument(
                "mutation construction needs one parent phenotype".into(),
            )),
        }
    }
}

/// One line of a report: a phenotype, its achieved and its target probability.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportLine {
    pub phenotype: BitVector,
    pub achieved: f64,
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstructionReport {
    /// Symbols in the parent genome, evolvable and frozen.
    pub genome_size: usize,
    /// Symbols the genetic operators act on.
    pub evolvable_size: usize,
    pub epsilon: f64,
    pub achieved_error: f64,
    /// Union of target and achieved supports.
    pub support: Vec<SupportLine>,
    /// True when the achieved probabilities were enumerated rather than
    /// predicted.
    pub exact: bool,
    /// Construction parameters worth printing (widths, gains, budgets).
    pub parameters: Vec<(String, String)>,
}

impl ConstructionReport {
    pub fn new(
        mu: &DiscreteDistribution,
        achieved: &DiscreteDistribution,
        epsilon: f64,
        genome_size: usize,
        evolvable_size: usize,
        exact: bool,
    ) -> Result<Self> {
        let achieved_error = max_pointwise_error(achieved, mu)?;
        let support = mu
            .union_support(achieved)
            .into_iter()
            .map(|y| SupportLine {
                phenotype: y.clone(),
                achieved: achieved.prob(y),
                target: mu.prob(y),
            })
            .collect();
        Ok(ConstructionReport {
            genome_size,
            evolvable_size,
            epsilon,
            achieved_error,
            support,
            exact,
            parameters: Vec::new(),
        })
    }

    pub fn with_parameter(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.push((key.to_string(), value.to_string()));
        self
    }

    pub fn parameter(&self, key: &str) -> Option<&str> {
        self.parameters
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// True when the achieved error is below ε.
    pub fn certified(&self) -> bool {
        self.achieved_error < self.epsilon
    }

    pub fn achieved(&self, y: &BitVector) -> f64 {
        self.support
            .iter()
            .find(|l| &l.phenotype == y)
            .map_or(0.0, |l| l.achieved)
    }

    /// Key-value text block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "genome_size = {}", self.genome_size);
        let _ = writeln!(out, "evolvable_size = {}", self.evolvable_size);
        let _ = writeln!(out, "epsilon = {}", self.epsilon);
        let _ = writeln!(out, "achieved_error = {}", self.achieved_error);
        let _ = writeln!(out, "certified = {}", self.certified());
        let _ = writeln!(out, "exact = {}", self.exact);
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "{k} = {v}");
        }
        for l in &self.support {
            let _ = writeln!(out, "p {} = {} (target {})", l.phenotype, l.achieved, l.target);
        }
        out
    }
}

/// `⌈lg(1/ε)⌉ + 2`: control bits for the crossover constructions.
pub fn crossover_width(epsilon: f64) -> usize {
    let lg = (1.0 / epsilon).log2();
    // absorb representation error when 1/ε is a power of two
    let c = (lg - 1e-9).ceil().max(0.0);
    c as usize + 2
}

/// Integer counts summing to `total` that stay as close as possible to the
/// real `quotas`: floors first, then units go to the largest deficits (or
/// leave the largest surpluses). Ties go to the lower index.
pub fn apportion(quotas: &[f64], total: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = quotas.iter().map(|&q| q.max(0.0).floor() as usize).collect();
    let mut sum: usize = counts.iter().sum();
    if quotas.is_empty() {
        return counts;
    }
    while sum < total {
        let i = argmax(quotas.iter().zip(&counts).map(|(&q, &c)| q - c as f64));
        counts[i] += 1;
        sum += 1;
    }
    while sum > total {
        let i = argmax(
            quotas
                .iter()
                .zip(&counts)
                .map(|(&q, &c)| if c > 0 { c as f64 - q } else { f64::NEG_INFINITY }),
        );
        counts[i] -= 1;
        sum -= 1;
    }
    counts
}

fn argmax(xs: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in xs.enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}

/// Counts for the support points of `mu` over `cells` equally likely cells,
/// given cells already committed to fixed phenotypes (the parents). The
/// fixed cells count toward a support point they coincide with.
pub(crate) fn apportion_cells(
    mu: &DiscreteDistribution,
    cells: usize,
    fixed: &[&BitVector],
) -> Vec<usize> {
    let free = cells - fixed.len();
    let quotas: Vec<f64> = mu
        .support()
        .iter()
        .map(|(y, p)| p * cells as f64 - fixed.iter().filter(|f| **f == y).count() as f64)
        .collect();
    apportion(&quotas, free)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bv;

    #[test]
    fn widths() {
        assert_eq!(crossover_width(0.05), 7);
        assert_eq!(crossover_width(0.1), 6);
        assert_eq!(crossover_width(0.2), 5);
        assert_eq!(crossover_width(0.025), 8);
        assert_eq!(crossover_width(0.25), 4);
    }

    #[test]
    fn apportion_matches_totals() {
        assert_eq!(apportion(&[20.0, 20.0], 40), [20, 20]);
        assert_eq!(apportion(&[1.5, 1.5, 1.0], 4), [2, 1, 1]);
        assert_eq!(apportion(&[16.0], 14), [14]);
        assert_eq!(apportion(&[4.0, 12.0], 14), [3, 11]);
        assert_eq!(apportion(&[-1.0, 3.0], 2), [0, 2]);
    }

    #[test]
    fn cells_respect_bound() {
        let mu = DiscreteDistribution::new(2, vec![(bv("01"), 0.25), (bv("10"), 0.75)]).unwrap();
        let (a, b) = (bv("00"), bv("11"));
        let c = apportion_cells(&mu, 16, &[&a, &b]);
        assert_eq!(c.iter().sum::<usize>(), 14);
        assert!((c[0] as f64 - 4.0).abs() <= 2.0 && (c[1] as f64 - 12.0).abs() <= 2.0);
    }
}
