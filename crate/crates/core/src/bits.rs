//! Fixed-length bit vectors.
//!
//! Index 0 is the leftmost bit and the most significant one when a vector is
//! read as a binary integer, so `[0,1,0] < [0,1,1]` holds. Bits are packed
//! into 64-bit words with bit `i` stored at word `i / 64`, position
//! `63 - i % 64`; comparing the word sequences as integers is therefore the
//! same as comparing the bit sequences lexicographically. Unused tail bits are
//! always zero.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

#[inline]
fn word_count(len: usize) -> usize {
    len.div_ceil(WORD)
}

#[inline]
fn mask(i: usize) -> u64 {
    1u64 << (WORD - 1 - i % WORD)
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; word_count(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = BitVector {
            len,
            words: vec![u64::MAX; word_count(len)],
        };
        v.clear_tail();
        v
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.words[i / WORD] |= mask(i);
            }
        }
        v
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            if f(i) {
                v.words[i / WORD] |= mask(i);
            }
        }
        v
    }

    /// The `len`-bit big-endian representation of `value`.
    ///
    /// Widths above 64 are zero-extended on the left.
    pub fn from_integer(value: u64, len: usize) -> Result<Self> {
        if len < 64 && value >> len != 0 {
            return Err(Error::InvalidArgument(format!(
                "{value} does not fit in {len} bits"
            )));
        }
        Ok(Self::from_fn(len, |i| {
            let shift = len - 1 - i;
            shift < 64 && (value >> shift) & 1 == 1
        }))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / WORD] & mask(i) != 0
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        if bit {
            self.words[i / WORD] |= mask(i);
        } else {
            self.words[i / WORD] &= !mask(i);
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / WORD] ^= mask(i);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_bits(&self) -> Vec<bool> {
        self.iter().collect()
    }

    /// Packed words; tail bits beyond `len` are zero.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn as_integer(&self) -> Result<u64> {
        if self.len > 63 {
            return Err(Error::TooWide(self.len));
        }
        if self.len == 0 {
            return Ok(0);
        }
        Ok(self.words[0] >> (WORD - self.len))
    }

    pub fn parity(&self) -> Result<bool> {
        if self.len == 0 {
            return Err(Error::EmptyParity);
        }
        Ok(self.count_ones() % 2 == 1)
    }

    /// Elementwise sum mod 2. A length-1 operand is repeated to the other
    /// operand's length.
    pub fn xor_broadcast(&self, other: &BitVector) -> Result<BitVector> {
        if self.len == other.len {
            let mut out = self.clone();
            out.xor_assign(other);
            return Ok(out);
        }
        let (wide, scalar) = match (self.len, other.len) {
            (_, 1) => (self, other),
            (1, _) => (other, self),
            (a, b) => return Err(Error::Broadcast(a, b)),
        };
        Ok(if scalar.get(0) {
            wide.complement()
        } else {
            wide.clone()
        })
    }

    /// In-place xor of an equal-length vector.
    #[inline]
    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len, "xor_assign on unequal lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    pub fn hamming(&self, other: &BitVector) -> Result<usize> {
        if self.len != other.len {
            return Err(Error::LengthMismatch(self.len, other.len));
        }
        Ok(self.hamming_unchecked(other))
    }

    #[inline]
    pub(crate) fn hamming_unchecked(&self, other: &BitVector) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn complement(&self) -> BitVector {
        let mut out = BitVector {
            len: self.len,
            words: self.words.iter().map(|w| !w).collect(),
        };
        out.clear_tail();
        out
    }

    /// Big-endian comparison of two vectors. Equal lengths compare
    /// lexicographically (identical to the integer view when it exists); a
    /// length-1 operand is broadcast first.
    pub fn compare(&self, other: &BitVector) -> Result<Ordering> {
        if self.len == other.len {
            return Ok(self.words.cmp(&other.words));
        }
        match (self.len, other.len) {
            (_, 1) => Ok(self.words.cmp(&broadcast_bit(other.get(0), self.len).words)),
            (1, _) => Ok(broadcast_bit(self.get(0), other.len).words.cmp(&other.words)),
            (a, b) => Err(Error::Broadcast(a, b)),
        }
    }

    pub fn concat(parts: &[&BitVector]) -> BitVector {
        let len = parts.iter().map(|p| p.len).sum();
        let mut out = BitVector::zeros(len);
        let mut at = 0;
        for p in parts {
            for i in 0..p.len {
                if p.get(i) {
                    out.words[(at + i) / WORD] |= mask(at + i);
                }
            }
            at += p.len;
        }
        out
    }

    pub fn slice(&self, start: usize, len: usize) -> BitVector {
        assert!(start + len <= self.len, "slice out of range");
        BitVector::from_fn(len, |i| self.get(start + i))
    }

    /// Bits at the given positions, in order.
    pub fn select(&self, positions: &[usize]) -> BitVector {
        BitVector::from_fn(positions.len(), |i| self.get(positions[i]))
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= u64::MAX << (WORD - rem);
            }
        }
    }
}

fn broadcast_bit(bit: bool, len: usize) -> BitVector {
    if bit {
        BitVector::ones(len)
    } else {
        BitVector::zeros(len)
    }
}

impl PartialOrd for BitVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order used for map keys: shorter vectors first, then lexicographic.
impl Ord for BitVector {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len
            .cmp(&other.len)
            .then_with(|| self.words.cmp(&other.words))
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl FromStr for BitVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut v = BitVector::zeros(s.len());
        for (i, c) in s.bytes().enumerate() {
            match c {
                b'0' => {}
                b'1' => v.words[i / WORD] |= mask(i),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "`{s}` is not a bit string"
                    )))
                }
            }
        }
        Ok(v)
    }
}

/// Shorthand for tests and templates: `bv("0101")`.
pub fn bv(s: &str) -> BitVector {
    s.parse().expect("valid bit string")
}
