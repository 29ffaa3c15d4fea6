//! Index-like domain types: exponent vectors, index-set partitions and sign matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::MAX_DIM;

/// Exponent vector `(n_1, ..., n_d)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    pub fn uniform(d: usize, value: u32) -> Self {
        MultiIndex(vec![value; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, j: usize) -> u32 {
        self.0[j]
    }

    /// Componentwise `2 n`.
    pub fn doubled(&self) -> MultiIndex {
        MultiIndex(self.0.iter().map(|&n| 2 * n).collect())
    }

    pub fn all_even(&self) -> bool {
        self.0.iter().all(|n| n % 2 == 0)
    }

    /// Components at the listed positions, in order.
    pub fn restrict(&self, positions: &[usize]) -> MultiIndex {
        MultiIndex(positions.iter().map(|&j| self.0[j]).collect())
    }

    /// `n!` componentwise product.
    pub fn factorial_product(&self) -> u128 {
        self.0
            .iter()
            .map(|&n| (1..=n as u128).product::<u128>())
            .product()
    }

    /// Every exponent vector of dimension `d` with total degree at most `max_total`.
    pub fn all_with_total_at_most(d: usize, max_total: u32) -> Vec<MultiIndex> {
        fn rec(prefix: &mut Vec<u32>, d: usize, budget: u32, out: &mut Vec<MultiIndex>) {
            if prefix.len() == d {
                out.push(MultiIndex(prefix.clone()));
                return;
            }
            for k in 0..=budget {
                prefix.push(k);
                rec(prefix, d, budget - k, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::with_capacity(d), d, max_total, &mut out);
        out
    }

    /// Parses `"2,2,2"`.
    pub fn parse(text: &str) -> Result<Self> {
        text.split(',')
            .map(|s| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Unsupported(format!("exponent {s:?} is not a nonnegative integer")))
            })
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

/// A subset `I` of `{0, .., d-1}` together with its complement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    d: usize,
    mask: u16,
}

impl Partition {
    /// `members` are 0-based indices.
    pub fn new(d: usize, members: &[usize]) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::DimensionCap(d));
        }
        let mut mask = 0u16;
        for &j in members {
            if j >= d {
                return Err(Error::Structural(format!(
                    "partition index {} outside 1..={d}",
                    j + 1
                )));
            }
            mask |= 1 << j;
        }
        Ok(Partition { d, mask })
    }

    pub fn from_mask(d: usize, mask: u16) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::DimensionCap(d));
        }
        if mask >> d != 0 {
            return Err(Error::Structural(format!("mask {mask:#b} exceeds dimension {d}")));
        }
        Ok(Partition { d, mask })
    }

    /// Parses 1-based `"1,2"`.
    pub fn parse_one_based(d: usize, text: &str) -> Result<Self> {
        let members = text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| match s.trim().parse::<usize>() {
                Ok(k) if k >= 1 => Ok(k - 1),
                _ => Err(Error::Structural(format!("bad partition index {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::new(d, &members)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn mask(&self) -> u16 {
        self.mask
    }

    pub fn contains(&self, j: usize) -> bool {
        self.mask & (1 << j) != 0
    }

    pub fn members(&self) -> Vec<usize> {
        (0..self.d).filter(|&j| self.contains(j)).collect()
    }

    pub fn complement_members(&self) -> Vec<usize> {
        (0..self.d).filter(|&j| !self.contains(j)).collect()
    }

    pub fn complement(&self) -> Partition {
        let full = ((1u32 << self.d) - 1) as u16;
        Partition {
            d: self.d,
            mask: !self.mask & full,
        }
    }

    /// `I` empty or everything.
    pub fn is_trivial(&self) -> bool {
        self.mask == 0 || self.complement().mask == 0
    }

    /// The `2^(d-1) - 1` nontrivial splits, one representative per complement pair
    /// (the block containing index 0).
    pub fn all_nontrivial(d: usize) -> Vec<Partition> {
        let full: u32 = (1 << d) - 1;
        (1..full)
            .filter(|m| m & 1 == 1)
            .map(|m| Partition { d, mask: m as u16 })
            .collect()
    }

    /// 1-based member list for reports.
    pub fn one_based(&self) -> Vec<usize> {
        self.members().into_iter().map(|j| j + 1).collect()
    }
}

/// Diagonal matrix with `±1` entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignMatrix(Vec<i8>);

impl SignMatrix {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Structural("sign matrix entries must be ±1".into()));
        }
        Ok(SignMatrix(signs))
    }

    pub fn identity(d: usize) -> Self {
        SignMatrix(vec![1; d])
    }

    /// Bit `j` of `bits` set means `s_j = -1`.
    pub fn from_bits(d: usize, bits: u32) -> Self {
        SignMatrix((0..d).map(|j| if bits >> j & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, j: usize) -> i8 {
        self.0[j]
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    /// Canonical representative of `{S, -S}` with `s_1 = +1`.
    pub fn normalized(&self) -> SignMatrix {
        if self.0.first() == Some(&-1) {
            SignMatrix(self.0.iter().map(|s| -s).collect())
        } else {
            self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_enumeration_counts() {
        // C(d + k, d)
        assert_eq!(MultiIndex::all_with_total_at_most(4, 6).len(), 210);
        assert_eq!(MultiIndex::all_with_total_at_most(4, 8).len(), 495);
        assert_eq!(MultiIndex::all_with_total_at_most(1, 3).len(), 4);
    }

    #[test]
    fn partition_complement_and_enumeration() {
        let p = Partition::new(3, &[0, 1]).unwrap();
        assert_eq!(p.complement_members(), vec![2]);
        assert_eq!(p.complement().complement(), p);
        assert_eq!(Partition::all_nontrivial(3).len(), 3);
        assert_eq!(Partition::all_nontrivial(5).len(), 15);
        assert!(Partition::new(3, &[]).unwrap().is_trivial());
        assert!(Partition::new(3, &[3]).is_err());
        assert_eq!(Partition::parse_one_based(3, "1,2").unwrap(), p);
    }

    #[test]
    fn sign_matrix_validation() {
        assert!(SignMatrix::new(vec![1, -1, 1]).is_ok());
        assert!(SignMatrix::new(vec![1, 0]).is_err());
        assert_eq!(SignMatrix::from_bits(3, 0b110).as_slice(), &[1, -1, -1]);
        assert_eq!(SignMatrix::new(vec![-1, 1]).unwrap().normalized().as_slice(), &[1, -1]);
    }

    #[test]
    fn multi_index_parse() {
        assert_eq!(MultiIndex::parse("2, 2,2").unwrap().total(), 6);
        assert!(MultiIndex::parse("1,0.5").is_err());
        assert_eq!(MultiIndex::new(vec![2, 3]).factorial_product(), 12);
    }
}
