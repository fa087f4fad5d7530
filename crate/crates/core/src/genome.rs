//! The flattened view of a genotype that the genetic operators act on.

use std::fmt::Debug;

use crate::bits::BitVector;
use crate::error::{Error, Result};

/// One evolvable symbol of a flattened genome.
pub trait Symbol: Copy + PartialEq + Debug + Send + Sync {
    /// The value after a bit-flip mutation, if the symbol is binary.
    fn flipped(self) -> Option<Self>;
    /// The value after adding real-valued noise, if the symbol is real.
    fn perturbed(self, delta: f64) -> Option<Self>;
}

impl Symbol for bool {
    fn flipped(self) -> Option<Self> {
        Some(!self)
    }

    fn perturbed(self, _delta: f64) -> Option<Self> {
        None
    }
}

impl Symbol for f64 {
    fn flipped(self) -> Option<Self> {
        None
    }

    fn perturbed(self, delta: f64) -> Option<Self> {
        Some(self + delta)
    }
}

/// A genotype with a canonical flattening of its evolvable symbols.
///
/// Frozen structure is not part of the flattening; it is inherited intact by
/// every child, which is why crossover requires [`Genome::compatible`] parents.
pub trait Genome: Clone + Send + Sync {
    type Symbol: Symbol;

    fn symbols(&self) -> Vec<Self::Symbol>;

    /// A copy with the evolvable symbols replaced.
    fn with_symbols(&self, symbols: &[Self::Symbol]) -> Result<Self>;

    /// Same frozen structure and same evolvable layout.
    fn compatible(&self, other: &Self) -> bool;

    fn symbol_count(&self) -> usize {
        self.symbols().len()
    }
}

/// The direct encoding: the genome is the phenotype.
impl Genome for BitVector {
    type Symbol = bool;

    fn symbols(&self) -> Vec<bool> {
        self.to_bits()
    }

    fn with_symbols(&self, symbols: &[bool]) -> Result<Self> {
        if symbols.len() != self.len() {
            return Err(Error::LengthMismatch(symbols.len(), self.len()));
        }
        Ok(BitVector::from_bits(symbols))
    }

    fn compatible(&self, other: &Self) -> bool {
        self.len() == other.len()
    }

    fn symbol_count(&self) -> usize {
        self.len()
    }
}

/// Identity encoding for directly encoded bit vectors.
pub fn direct_encoding(x: &BitVector) -> Result<BitVector> {
    Ok(x.clone())
}
