//! Expressive genetic encodings and the evolutionary algorithms that use them.
//!
//! The crate provides three encodings of bit-vector phenotypes (direct, a
//! small sequential GP language and feed-forward sigmoid networks), the
//! simple genetic operators that act on their flattened genomes, compilers
//! that build parent genomes whose children follow a prescribed phenotype
//! distribution, and a (1+λ) evolutionary algorithm with the dynamic and
//! block-assembly benchmark problems.

pub mod bits;
pub mod constructions;
pub mod distribution;
pub mod engine;
pub mod error;
pub mod genome;
pub mod gp;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod operators;
pub mod problems;
pub mod stream;

pub use bits::{bv, BitVector};
pub use distribution::DiscreteDistribution;
pub use error::{Error, Result};
pub use genome::{direct_encoding, Genome, Symbol};
pub use gp::{GenomeLayout, GpProgram};
pub use nn::{nn_encode, FeedForwardNet};
pub use stream::SeededStream;
