//! An explicit lookup-table encoding `{0,1}^L → Y` and its crossover parents.

use std::sync::Arc;

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::genome::Genome;

use super::oracle::{exact_crossover_distribution, MAX_DISAGREEMENTS};
use super::{apportion_cells, ApproxTarget, ConstructionReport};

/// A genome `a ∈ {0,1}^L` decoded through a shared table of `2^L`
/// phenotypes. Only `a` evolves; the table is frozen and shared.
#[derive(Clone, Debug, PartialEq)]
pub struct LookupGenome {
    table: Arc<Vec<BitVector>>,
    key: BitVector,
}

impl LookupGenome {
    pub fn new(table: Arc<Vec<BitVector>>, key: BitVector) -> Result<Self> {
        if key.len() > 30 || table.len() != 1 << key.len() {
            return Err(Error::Dimension(format!(
                "table of {} entries for a {}-bit key",
                table.len(),
                key.len()
            )));
        }
        Ok(LookupGenome { table, key })
    }

    pub fn key(&self) -> &BitVector {
        &self.key
    }

    pub fn table(&self) -> &[BitVector] {
        &self.table
    }

    pub fn decode(&self) -> Result<BitVector> {
        Ok(self.table[self.key.as_integer()? as usize].clone())
    }
}

impl Genome for LookupGenome {
    type Symbol = bool;

    fn symbols(&self) -> Vec<bool> {
        self.key.to_bits()
    }

    fn with_symbols(&self, symbols: &[bool]) -> Result<Self> {
        if symbols.len() != self.key.len() {
            return Err(Error::LengthMismatch(symbols.len(), self.key.len()));
        }
        Ok(LookupGenome {
            table: Arc::clone(&self.table),
            key: BitVector::from_bits(symbols),
        })
    }

    fn compatible(&self, other: &Self) -> bool {
        self.key.len() == other.key.len()
            && (Arc::ptr_eq(&self.table, &other.table) || self.table == other.table)
    }
}

/// Parents `a = 0…0` and `a = 1…1` over a table whose first and last cells
/// hold the parent phenotypes and whose other cells are shared out among
/// the support points in proportion to their probabilities.
pub fn build_lookup_parents(
    target: &ApproxTarget,
    width: usize,
) -> Result<(LookupGenome, LookupGenome, ConstructionReport)> {
    let (y1, y2) = target.crossover_parents()?;
    let mu = &target.mu;
    if width == 0 || width > MAX_DISAGREEMENTS {
        return Err(Error::InvalidArgument(format!("table width {width} outside 1..=24")));
    }
    let cells = 1usize << width;
    if cells < mu.len() + 2 {
        return Err(Error::SupportTooLarge {
            support: mu.len(),
            width,
        });
    }
    let counts = apportion_cells(mu, cells, &[y1, y2]);
    let mut table = Vec::with_capacity(cells);
    table.push(y1.clone());
    for ((y, _), &c) in mu.support().iter().zip(&counts) {
        table.extend(std::iter::repeat_n(y.clone(), c));
    }
    table.push(y2.clone());
    let table = Arc::new(table);
    let p1 = LookupGenome::new(Arc::clone(&table), BitVector::zeros(width))?;
    let p2 = LookupGenome::new(table, BitVector::ones(width))?;
    let achieved = exact_crossover_distribution(&p1, &p2, LookupGenome::decode)?;
    let report = ConstructionReport::new(mu, &achieved, target.epsilon, cells * mu.dim() + width, width, true)?
        .with_parameter("L", width);
    Ok((p1, p2, report))
}
