//! Exact and Monte Carlo child-distribution oracles.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bits::BitVector;
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::operators::OperatorKind;
use crate::stream::SeededStream;

/// Largest number of disagreeing positions enumerated exactly.
pub const MAX_DISAGREEMENTS: usize = 24;

const CHUNK_BITS: usize = 12;

type Counts = BTreeMap<BitVector, u64>;

fn merge(mut a: Counts, b: Counts) -> Counts {
    for (k, v) in b {
        *a.entry(k).or_default() += v;
    }
    a
}

fn dim_of(counts: &Counts) -> usize {
    counts.keys().next().map_or(0, BitVector::len)
}

/// Child distribution of uniform crossover between `x1` and `x2`, by
/// enumerating every assignment of the positions where they disagree.
///
/// Each of the `2^D` children has weight `2^{−D}`; the counts are merged in
/// a fixed order, so the result does not depend on the worker count.
pub fn exact_crossover_distribution<G, E>(x1: &G, x2: &G, encode: E) -> Result<DiscreteDistribution>
where
    G: Genome,
    E: Fn(&G) -> Result<BitVector> + Sync,
{
    if !x1.compatible(x2) {
        return Err(Error::Incompatible);
    }
    let (s1, s2) = (x1.symbols(), x2.symbols());
    let diff: Vec<usize> = (0..s1.len()).filter(|&i| s1[i] != s2[i]).collect();
    let d = diff.len();
    if d > MAX_DISAGREEMENTS {
        return Err(Error::TooManyDisagreements {
            found: d,
            limit: MAX_DISAGREEMENTS,
        });
    }
    let total: u64 = 1 << d;
    let chunk: u64 = 1 << CHUNK_BITS.min(d);
    let counts = (0..total / chunk)
        .into_par_iter()
        .map(|c| -> Result<Counts> {
            let mut counts = Counts::new();
            let mut child = s1.clone();
            for mask in c * chunk..(c + 1) * chunk {
                for (k, &pos) in diff.iter().enumerate() {
                    child[pos] = if mask >> k & 1 == 1 { s2[pos] } else { s1[pos] };
                }
                let y = encode(&x1.with_symbols(&child)?)?;
                *counts.entry(y).or_default() += 1;
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(Counts::new(), merge);
    DiscreteDistribution::from_counts(dim_of(&counts), &counts)
}

/// Child distribution of single-point bit-flip mutation, enumerating all
/// `T` flip positions with weight `1/T` each.
pub fn exact_mutation_distribution<G, E>(x: &G, encode: E) -> Result<DiscreteDistribution>
where
    G: Genome<Symbol = bool>,
    E: Fn(&G) -> Result<BitVector> + Sync,
{
    let symbols = x.symbols();
    if symbols.is_empty() {
        return Err(Error::EmptyGenome);
    }
    let block = 1024;
    let counts = (0..symbols.len().div_ceil(block))
        .into_par_iter()
        .map(|b| -> Result<Counts> {
            let mut counts = Counts::new();
            let mut s = symbols.clone();
            for i in b * block..((b + 1) * block).min(symbols.len()) {
                s[i] = !s[i];
                let y = encode(&x.with_symbols(&s)?)?;
                s[i] = !s[i];
                *counts.entry(y).or_default() += 1;
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(Counts::new(), merge);
    DiscreteDistribution::from_counts(dim_of(&counts), &counts)
}

/// Empirical child distribution over `samples` operator applications.
pub fn sampled_child_distribution<G, E>(
    parents: &[&G],
    operator: OperatorKind,
    samples: usize,
    rng: &mut SeededStream,
    encode: E,
) -> Result<DiscreteDistribution>
where
    G: Genome,
    E: Fn(&G) -> Result<BitVector>,
{
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample needed".into()));
    }
    let mut counts = Counts::new();
    for _ in 0..samples {
        let child = operator.apply(parents, rng)?;
        *counts.entry(encode(&child)?).or_default() += 1;
    }
    DiscreteDistribution::from_counts(dim_of(&counts), &counts)
}
