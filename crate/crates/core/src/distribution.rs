//! Finite distributions over fixed-length bit vectors.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::bits::BitVector;
use crate::error::{Error, Result};

/// Tolerance on the total probability mass.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A probability distribution with finite support over `{0,1}^n`.
///
/// Support order is preserved as given; the constructions use it to order
/// their phenotype chains.
#[derive(Clone, Debug)]
pub struct DiscreteDistribution {
    dim: usize,
    support: Vec<(BitVector, f64)>,
    index: HashMap<BitVector, usize>,
}

impl DiscreteDistribution {
    pub fn new(dim: usize, support: Vec<(BitVector, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let mut index = HashMap::with_capacity(support.len());
        let mut total = 0.0;
        for (i, (y, p)) in support.iter().enumerate() {
            if y.len() != dim {
                return Err(Error::InvalidDistribution(format!(
                    "support point {y} has length {}, expected {dim}",
                    y.len()
                )));
            }
            if !(0.0..=1.0).contains(p) || p.is_nan() {
                return Err(Error::InvalidDistribution(format!(
                    "probability {p} of {y} outside [0, 1]"
                )));
            }
            if index.insert(y.clone(), i).is_some() {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate support point {y}"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(DiscreteDistribution {
            dim,
            support,
            index,
        })
    }

    pub fn point_mass(y: BitVector) -> Self {
        let dim = y.len();
        Self::new(dim, vec![(y, 1.0)]).expect("point mass is valid")
    }

    /// Normalized frequencies; support sorted by the vectors' total order.
    pub fn from_counts(dim: usize, counts: &BTreeMap<BitVector, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(Error::InvalidDistribution("no observations".into()));
        }
        let support = counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(y, &c)| (y.clone(), c as f64 / total as f64))
            .collect();
        Self::new(dim, support)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[(BitVector, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Probability of `y`; zero off the support.
    pub fn prob(&self, y: &BitVector) -> f64 {
        self.index.get(y).map_or(0.0, |&i| self.support[i].1)
    }

    /// Support points of both distributions, each once.
    pub fn union_support<'a>(&'a self, other: &'a Self) -> Vec<&'a BitVector> {
        let mut seen = std::collections::BTreeSet::new();
        self.support
            .iter()
            .chain(other.support.iter())
            .map(|(y, _)| y)
            .filter(|y| seen.insert(*y))
            .collect()
    }

    /// Parses the distribution file format: a header line `n m`, then `m`
    /// lines `<bits> <probability>`. Lines starting with `#` are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "missing header `n m`".into(),
        })?;
        let nums: Vec<&str> = header.split_whitespace().collect();
        let parse_count = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                line: hline,
                message: format!("`{s}` is not a count"),
            })
        };
        if nums.len() != 2 {
            return Err(Error::Parse {
                line: hline,
                message: "header must be `n m`".into(),
            });
        }
        let (dim, m) = (parse_count(nums[0])?, parse_count(nums[1])?);
        let mut support = Vec::with_capacity(m);
        for (line, l) in lines {
            let mut parts = l.split_whitespace();
            let (Some(bits), Some(prob), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line,
                    message: "expected `<bits> <probability>`".into(),
                });
            };
            let y: BitVector = bits.parse().map_err(|e: Error| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if y.len() != dim {
                return Err(Error::Parse {
                    line,
                    message: format!("bit string has length {}, expected {dim}", y.len()),
                });
            }
            let p: f64 = prob.parse().map_err(|_| Error::Parse {
                line,
                message: format!("`{prob}` is not a probability"),
            })?;
            support.push((y, p));
        }
        if support.len() != m {
            return Err(Error::Parse {
                line: hline,
                message: format!("header announces {m} points, found {}", support.len()),
            });
        }
        Self::new(dim, support)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.dim, self.support.len());
        for (y, p) in &self.support {
            let _ = writeln!(out, "{y} {p}");
        }
        out
    }
}

impl PartialEq for DiscreteDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self
                .union_support(other)
                .into_iter()
                .all(|y| self.prob(y) == other.prob(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bv;

    #[test]
    fn validates_mass() {
        assert!(DiscreteDistribution::new(2, vec![(bv("01"), 0.5), (bv("10"), 0.5)]).is_ok());
        let err = DiscreteDistribution::new(2, vec![(bv("01"), 0.5), (bv("10"), 0.4)]).unwrap_err();
        assert!(matches!(err, Error::InvalidDistribution(_)));
        // exactly within tolerance
        assert!(DiscreteDistribution::new(1, vec![(bv("1"), 1.0 + 5e-10)]).is_err());
        assert!(DiscreteDistribution::new(1, vec![(bv("1"), 1.0 - 5e-10)]).is_ok());
    }

    #[test]
    fn rejects_bad_support() {
        assert!(DiscreteDistribution::new(2, vec![]).is_err());
        assert!(DiscreteDistribution::new(2, vec![(bv("011"), 1.0)]).is_err());
        assert!(DiscreteDistribution::new(2, vec![(bv("01"), 0.5), (bv("01"), 0.5)]).is_err());
        assert!(DiscreteDistribution::new(2, vec![(bv("01"), -0.5), (bv("10"), 1.5)]).is_err());
    }

    #[test]
    fn parses_file_format() {
        let text = "# target\n4 2\n0101 0.25\n# comment\n1010 0.75\n";
        let d = DiscreteDistribution::parse(text).unwrap();
        assert_eq!(d.dim(), 4);
        assert_eq!(d.prob(&bv("1010")), 0.75);
        assert_eq!(d.prob(&bv("1111")), 0.0);
        assert_eq!(DiscreteDistribution::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = DiscreteDistribution::parse("4 2\n0101 0.5\n101 0.5\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 3,
                message: "bit string has length 3, expected 4".into()
            }
        );
        assert!(DiscreteDistribution::parse("4 3\n0101 0.5\n1010 0.5\n").is_err());
        // not renormalized
        assert!(DiscreteDistribution::parse("1 2\n0 0.5\n1 0.6\n").is_err());
    }
}
