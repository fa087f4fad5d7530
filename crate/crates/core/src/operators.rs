//! Simple genetic operators on flattened genomes.
//!
//! Frozen structure never enters the flattening, so children inherit it
//! unchanged from their parents.

use crate::error::{Error, Result};
use crate::genome::{Genome, Symbol};
use crate::nn::FeedForwardNet;
use crate::stream::SeededStream;

/// Default standard deviation of the single-weight Gaussian mutation.
pub const DEFAULT_SIGMA_MUT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OperatorKind {
    UniformCrossover,
    SinglePointBitFlip,
    GaussianSingleWeight { std: f64 },
}

impl OperatorKind {
    /// Number of parents the operator consumes.
    pub fn arity(self) -> usize {
        match self {
            OperatorKind::UniformCrossover => 2,
            _ => 1,
        }
    }

    /// Applies the operator to `parents`, which must number [`Self::arity`].
    pub fn apply<G: Genome>(self, parents: &[&G], rng: &mut SeededStream) -> Result<G> {
        if parents.len() != self.arity() {
            return Err(Error::InvalidArgument(format!(
                "{self:?} takes {} parents, got {}",
                self.arity(),
                parents.len()
            )));
        }
        match self {
            OperatorKind::UniformCrossover => uniform_crossover(parents[0], parents[1], rng),
            OperatorKind::SinglePointBitFlip => single_point(parents[0], rng, |s, _| s.flipped()),
            OperatorKind::GaussianSingleWeight { std } => {
                check_std(std)?;
                single_point(parents[0], rng, |s, r| s.perturbed(r.normal(std)))
            }
        }
    }
}

fn check_std(std: f64) -> Result<()> {
    if std >= 0.0 && std.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("σ_mut = {std} must be non-negative")))
    }
}

/// Each evolvable symbol copied from a uniformly chosen parent.
pub fn uniform_crossover<G: Genome>(x1: &G, x2: &G, rng: &mut SeededStream) -> Result<G> {
    if !x1.compatible(x2) {
        return Err(Error::Incompatible);
    }
    let (s1, s2) = (x1.symbols(), x2.symbols());
    let child: Vec<G::Symbol> = s1
        .iter()
        .zip(&s2)
        .map(|(&a, &b)| if rng.coin() { a } else { b })
        .collect();
    x1.with_symbols(&child)
}

fn single_point<G: Genome>(
    x: &G,
    rng: &mut SeededStream,
    alter: impl FnOnce(G::Symbol, &mut SeededStream) -> Option<G::Symbol>,
) -> Result<G> {
    let mut s = x.symbols();
    if s.is_empty() {
        return Err(Error::EmptyGenome);
    }
    let i = rng.below(s.len());
    s[i] = alter(s[i], rng).ok_or_else(|| {
        Error::NotApplicable("operator does not match the genome's symbol type".into())
    })?;
    x.with_symbols(&s)
}

/// Copy of `x` with one uniformly chosen evolvable bit flipped.
pub fn single_point_bitflip<G: Genome<Symbol = bool>>(x: &G, rng: &mut SeededStream) -> Result<G> {
    single_point(x, rng, |s, _| s.flipped())
}

/// Draws the position and noise of one Gaussian single-weight mutation over
/// `count` evolvable parameters.
pub fn draw_gaussian_mutation(count: usize, std: f64, rng: &mut SeededStream) -> Result<(usize, f64)> {
    check_std(std)?;
    if count == 0 {
        return Err(Error::EmptyGenome);
    }
    let i = rng.below(count);
    Ok((i, rng.normal(std)))
}

/// Copy of `net` with `N(0, σ_mut²)` noise added to one evolvable parameter.
pub fn gaussian_single_weight(
    net: &FeedForwardNet,
    std: f64,
    rng: &mut SeededStream,
) -> Result<FeedForwardNet> {
    let (i, delta) = draw_gaussian_mutation(net.layout().len(), std, rng)?;
    let p = net.layout().params()[i];
    let mut child = net.clone();
    child.set_param(p, net.param(p) + delta);
    Ok(child)
}
