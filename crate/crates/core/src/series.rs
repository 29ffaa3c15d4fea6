//! Truncated multivariate power series in `t_1, .., t_d`.
//!
//! A series stores one coefficient per admissible monomial: exponents bounded
//! componentwise by `caps` and, optionally, with total degree at most `max_total`.
//! Products discard every monomial outside that set, which is exact for any
//! coefficient that stays inside it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::index::MultiIndex;
use crate::scalar::Scalar;

#[derive(Debug, PartialEq, Eq)]
struct Layout {
    caps: Vec<u32>,
    max_total: Option<u32>,
    /// Admissible exponent vectors, sorted by total degree.
    keys: Vec<Vec<u32>>,
    totals: Vec<u32>,
    strides: Vec<usize>,
    /// Dense mixed-radix index to slot, `u32::MAX` when inadmissible.
    slot_of: Vec<u32>,
}

impl Layout {
    fn new(caps: &[u32], max_total: Option<u32>) -> Self {
        let d = caps.len();
        let mut strides = vec![1usize; d];
        for j in 1..d {
            strides[j] = strides[j - 1] * (caps[j - 1] as usize + 1);
        }
        let dense = if d == 0 {
            1
        } else {
            strides[d - 1] * (caps[d - 1] as usize + 1)
        };
        let mut keys: Vec<Vec<u32>> = Vec::new();
        let mut e = vec![0u32; d];
        for idx in 0..dense {
            if idx > 0 {
                for j in 0..d {
                    if e[j] < caps[j] {
                        e[j] += 1;
                        break;
                    }
                    e[j] = 0;
                }
            }
            let t: u32 = e.iter().sum();
            if max_total.is_none_or(|m| t <= m) {
                keys.push(e.clone());
            }
        }
        keys.sort_by_key(|k| k.iter().sum::<u32>());
        let totals = keys.iter().map(|k| k.iter().sum()).collect();
        let mut slot_of = vec![u32::MAX; dense];
        for (s, k) in keys.iter().enumerate() {
            let idx: usize = k.iter().zip(&strides).map(|(&e, &st)| e as usize * st).sum();
            slot_of[idx] = s as u32;
        }
        Layout {
            caps: caps.to_vec(),
            max_total,
            keys,
            totals,
            strides,
            slot_of,
        }
    }

    fn slot(&self, exps: &[u32]) -> Option<usize> {
        if exps.len() != self.caps.len() || exps.iter().zip(&self.caps).any(|(e, c)| e > c) {
            return None;
        }
        let idx: usize = exps.iter().zip(&self.strides).map(|(&e, &st)| e as usize * st).sum();
        match self.slot_of[idx] {
            u32::MAX => None,
            s => Some(s as usize),
        }
    }

    /// Slot of `keys[a] + keys[b]` if admissible.
    fn sum_slot(&self, a: usize, b: usize) -> Option<usize> {
        let (ka, kb) = (&self.keys[a], &self.keys[b]);
        let mut idx = 0usize;
        for j in 0..self.caps.len() {
            let e = ka[j] + kb[j];
            if e > self.caps[j] {
                return None;
            }
            idx += e as usize * self.strides[j];
        }
        match self.slot_of[idx] {
            u32::MAX => None,
            s => Some(s as usize),
        }
    }

    /// Slot of `keys[m] - keys[k]` if `keys[k] <= keys[m]` componentwise.
    fn diff_slot(&self, m: usize, k: usize) -> Option<usize> {
        let (km, kk) = (&self.keys[m], &self.keys[k]);
        let mut idx = 0usize;
        for j in 0..self.caps.len() {
            if kk[j] > km[j] {
                return None;
            }
            idx += (km[j] - kk[j]) as usize * self.strides[j];
        }
        Some(self.slot_of[idx] as usize)
    }

    fn max_degree(&self) -> u32 {
        let by_caps: u32 = self.caps.iter().sum();
        self.max_total.map_or(by_caps, |m| m.min(by_caps))
    }
}

#[derive(Clone, Debug)]
pub struct TruncatedSeries<T> {
    layout: Arc<Layout>,
    coeffs: Vec<T>,
}

impl<T: Scalar> PartialEq for TruncatedSeries<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout && self.coeffs == other.coeffs
    }
}

impl<T: Scalar> TruncatedSeries<T> {
    /// Zero series with per-variable caps and an optional total-degree cap.
    pub fn zero(caps: &MultiIndex, max_total: Option<u32>) -> Self {
        let layout = Arc::new(Layout::new(caps.as_slice(), max_total));
        let coeffs = vec![T::zero(); layout.keys.len()];
        TruncatedSeries { layout, coeffs }
    }

    /// Zero series sharing `self`'s truncation.
    pub fn zero_like(&self) -> Self {
        TruncatedSeries {
            layout: Arc::clone(&self.layout),
            coeffs: vec![T::zero(); self.coeffs.len()],
        }
    }

    pub fn one(caps: &MultiIndex, max_total: Option<u32>) -> Self {
        let mut s = Self::zero(caps, max_total);
        s.coeffs[0] = T::one();
        s
    }

    pub fn one_like(&self) -> Self {
        let mut s = self.zero_like();
        s.coeffs[0] = T::one();
        s
    }

    pub fn num_vars(&self) -> usize {
        self.layout.caps.len()
    }

    pub fn caps(&self) -> MultiIndex {
        MultiIndex::new(self.layout.caps.clone())
    }

    pub fn max_total(&self) -> Option<u32> {
        self.layout.max_total
    }

    /// Number of admissible monomials.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of `t^exps`; zero for monomials outside the truncation.
    pub fn coeff(&self, exps: &[u32]) -> T {
        self.layout
            .slot(exps)
            .map_or_else(T::zero, |s| self.coeffs[s].clone())
    }

    /// Sets a coefficient; monomials outside the truncation are a structural error.
    pub fn set(&mut self, exps: &[u32], value: T) -> Result<()> {
        let s = self.layout.slot(exps).ok_or_else(|| {
            Error::Structural(format!("monomial {exps:?} exceeds the series truncation"))
        })?;
        self.coeffs[s] = value;
        Ok(())
    }

    /// Nonzero terms in order of increasing total degree.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &T)> {
        self.layout
            .keys
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| (k.as_slice(), c))
    }

    pub fn constant_term(&self) -> &T {
        &self.coeffs[0]
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.layout, &other.layout)
            || (self.layout.caps == other.layout.caps
                && self.layout.max_total == other.layout.max_total)
        {
            Ok(())
        } else {
            Err(Error::Structural(format!(
                "series truncations differ: caps {:?}/{:?} vs {:?}/{:?}",
                self.layout.caps, self.layout.max_total, other.layout.caps, other.layout.max_total
            )))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            if !b.is_zero() {
                *a = a.clone() + b.clone();
            }
        }
        Ok(out)
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, other: &Self, factor: &T) -> Result<()> {
        self.check_compatible(other)?;
        if factor.is_zero() {
            return Ok(());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            if !b.is_zero() {
                *a = a.clone() + b.clone() * factor.clone();
            }
        }
        Ok(())
    }

    pub fn scale(&self, factor: &T) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            if !c.is_zero() {
                *c = c.clone() * factor.clone();
            }
        }
        out
    }

    /// Multiplication by `t_var`, dropping monomials that leave the truncation.
    pub fn shift(&self, var: usize) -> Self {
        let mut out = self.zero_like();
        let mut e;
        for (s, k) in self.layout.keys.iter().enumerate() {
            if self.coeffs[s].is_zero() {
                continue;
            }
            e = k.clone();
            e[var] += 1;
            if let Some(t) = self.layout.slot(&e) {
                out.coeffs[t] = self.coeffs[s].clone();
            }
        }
        out
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let layout = &self.layout;
        let cap = layout.max_total;
        let mut out = self.zero_like();
        for (a, ca) in self.coeffs.iter().enumerate() {
            if ca.is_zero() {
                continue;
            }
            for (b, cb) in other.coeffs.iter().enumerate() {
                if cap.is_some_and(|m| layout.totals[a] + layout.totals[b] > m) {
                    // Keys are sorted by total degree.
                    break;
                }
                if cb.is_zero() {
                    continue;
                }
                if let Some(s) = layout.sum_slot(a, b) {
                    out.coeffs[s] = out.coeffs[s].clone() + ca.clone() * cb.clone();
                }
            }
        }
        Ok(out)
    }

    /// `exp(self)` via `m_v E_m = Σ_{k ≤ m} k_v A_k E_{m−k}`, where `v` is the first
    /// variable with `m_v > 0`. Requires a zero constant term.
    pub fn exp(&self) -> Result<Self> {
        self.require_zero_constant()?;
        let layout = &self.layout;
        let mut out = self.one_like();
        let nonzero: Vec<usize> = (1..self.coeffs.len())
            .filter(|&k| !self.coeffs[k].is_zero())
            .collect();
        for m in 1..self.coeffs.len() {
            let km = &layout.keys[m];
            let v = km.iter().position(|&e| e > 0).expect("nonconstant key");
            let mut acc = T::zero();
            for &k in &nonzero {
                if layout.totals[k] > layout.totals[m] {
                    break;
                }
                let kv = layout.keys[k][v];
                if kv == 0 {
                    continue;
                }
                if let Some(rest) = layout.diff_slot(m, k) {
                    let e = &out.coeffs[rest];
                    if !e.is_zero() {
                        acc = acc + T::from_i64(kv as i64) * self.coeffs[k].clone() * e.clone();
                    }
                }
            }
            out.coeffs[m] = acc / T::from_i64(km[v] as i64);
        }
        Ok(out)
    }

    /// `exp(self)` as `Σ_j A^j / j!`, stopping once `A^j` is truncated to zero.
    pub fn exp_by_powers(&self) -> Result<Self> {
        self.require_zero_constant()?;
        let mut out = self.one_like();
        let mut power = self.one_like();
        for j in 1..=self.layout.max_degree() {
            power = power.mul(self)?.scale(&(T::one() / T::from_i64(j as i64)));
            if power.coeffs.iter().all(|c| c.is_zero()) {
                break;
            }
            out = out.add(&power)?;
        }
        Ok(out)
    }

    fn require_zero_constant(&self) -> Result<()> {
        if !self.coeffs[0].is_zero() {
            return Err(Error::Contract(
                "exp requires a series with zero constant term".into(),
            ));
        }
        Ok(())
    }
}
