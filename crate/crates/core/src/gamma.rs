//! Moments of the multivariate gamma law `Gamma_d(α, Σ)`, defined through its
//! moment-generating function `det(I − ΣT)^{−α}`.
//!
//! The MGF is expanded as `exp(α Σ_n tr[(ΣT)^n] / n)`; every coefficient of
//! `tr[(ΣT)^n]` is a sum of cyclic products `σ_{i1 i2} σ_{i2 i3} ⋯ σ_{in i1}`,
//! so all moments are exact polynomials in the entries of `Σ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::GapReport;
use crate::index::{MultiIndex, Partition};
use crate::matrix::CovarianceMatrix;
use crate::scalar::Scalar;
use crate::series::TruncatedSeries;

/// Largest total degree accepted by the moment routines.
pub const MAX_GAMMA_DEGREE: u32 = 24;

/// Shape `α` and matrix parameter `Σ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaParams<T> {
    alpha: T,
    sigma: CovarianceMatrix<T>,
}

impl<T: Scalar> GammaParams<T> {
    pub fn new(alpha: T, sigma: CovarianceMatrix<T>) -> Result<Self> {
        if alpha <= T::zero() {
            return Err(Error::Contract(format!("shape must be positive, got {alpha}")));
        }
        Ok(GammaParams { alpha, sigma })
    }

    pub fn alpha(&self) -> &T {
        &self.alpha
    }

    pub fn sigma(&self) -> &CovarianceMatrix<T> {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    /// Set when `2α` is not an integer and `2α <= floor((d−1)/2)`, where existence of
    /// the distribution is not guaranteed. Moments are still the formal MGF
    /// coefficients.
    pub fn existence_warning(&self) -> Option<String> {
        let two_alpha = self.alpha.clone() * T::from_i64(2);
        let bound = ((self.dim() as i64) - 1) / 2;
        if !two_alpha.is_integer() && two_alpha <= T::from_i64(bound) {
            Some(format!(
                "2α = {} is not an integer and does not exceed [(d−1)/2] = {bound}; \
                 existence of Gamma_{}(α, Σ) is not guaranteed, moments are formal",
                two_alpha.render(),
                self.dim()
            ))
        } else {
            None
        }
    }

    /// Parameters of the marginal law on `idx`.
    pub fn marginal(&self, idx: &[usize]) -> GammaParams<T> {
        GammaParams {
            alpha: self.alpha.clone(),
            sigma: self.sigma.marginal(idx),
        }
    }
}

/// `Σ_{n=1}^{N} tr[(ΣT)^n] / n` truncated at `caps` (and `max_total` if given).
pub fn trace_power_series<T: Scalar>(
    sigma: &CovarianceMatrix<T>,
    caps: &MultiIndex,
    max_total: Option<u32>,
    max_power: u32,
) -> Result<TruncatedSeries<T>> {
    let d = sigma.dim();
    if caps.dim() != d {
        return Err(Error::Structural(format!(
            "caps have {} entries but the matrix is {d}×{d}",
            caps.dim()
        )));
    }
    let reachable = max_total.map_or(caps.total(), |m| m.min(caps.total()));
    if max_power > reachable {
        return Err(Error::Contract(format!(
            "power {max_power} exceeds the largest representable degree {reachable}"
        )));
    }
    let zero = TruncatedSeries::<T>::zero(caps, max_total);
    let mut acc = zero.clone();
    if max_power == 0 {
        return Ok(acc);
    }
    // (ΣT)_{kj} = σ_kj t_j, so M ← M·ΣT is (M·Σ)_{ij} shifted by t_j.
    let unit_shift: Vec<TruncatedSeries<T>> = (0..d).map(|j| zero.one_like().shift(j)).collect();
    let mut m: Vec<Vec<TruncatedSeries<T>>> = (0..d)
        .map(|i| (0..d).map(|j| unit_shift[j].scale(sigma.get(i, j))).collect())
        .collect();
    for power in 1..=max_power {
        if power > 1 {
            m = (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            let mut s = zero.clone();
                            for k in 0..d {
                                s.add_scaled(&m[i][k], sigma.get(k, j))?;
                            }
                            Ok(s.shift(j))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
        }
        let inv = T::one() / T::from_i64(power as i64);
        for (i, row) in m.iter().enumerate() {
            acc.add_scaled(&row[i], &inv)?;
        }
    }
    Ok(acc)
}

fn check_degree(n: &MultiIndex, d: usize) -> Result<()> {
    if n.dim() != d {
        return Err(Error::Structural(format!(
            "exponent vector has {} entries, expected {d}",
            n.dim()
        )));
    }
    if n.total() > MAX_GAMMA_DEGREE {
        return Err(Error::Resource(format!(
            "total degree {} exceeds the cap of {MAX_GAMMA_DEGREE}",
            n.total()
        )));
    }
    Ok(())
}

/// Moment with its existence warning, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaMoment<T> {
    pub moment: T,
    pub warnings: Vec<String>,
}

fn factorial<T: Scalar>(n: &MultiIndex) -> T {
    n.as_slice()
        .iter()
        .flat_map(|&k| 1..=k as i64)
        .fold(T::one(), |acc, k| acc * T::from_i64(k))
}

/// `E ∏ X_j^{n_j}` for `X ~ Gamma_d(α, Σ)`: `n!` times the coefficient of `t^n` in
/// `exp(α · trace_power_series(Σ, caps = n))`.
pub fn gamma_moment<T: Scalar>(params: &GammaParams<T>, n: &MultiIndex) -> Result<GammaMoment<T>> {
    gamma_sum_moment(std::slice::from_ref(params), n)
}

/// Moment of `Z = Σ_i Y_i` for independent `Y_i ~ Gamma_d(α_i, Σ_i)`.
pub fn gamma_sum_moment<T: Scalar>(
    components: &[GammaParams<T>],
    n: &MultiIndex,
) -> Result<GammaMoment<T>> {
    let first = components
        .first()
        .ok_or_else(|| Error::Contract("at least one gamma component is required".into()))?;
    let d = first.dim();
    if components.iter().any(|c| c.dim() != d) {
        return Err(Error::Structural("gamma components differ in dimension".into()));
    }
    check_degree(n, d)?;
    let mut log_mgf = TruncatedSeries::<T>::zero(n, None);
    for c in components {
        let tr = trace_power_series(&c.sigma, n, None, n.total())?;
        log_mgf.add_scaled(&tr, &c.alpha)?;
    }
    let mgf = log_mgf.exp()?;
    let moment = mgf.coeff(n.as_slice()) * factorial::<T>(n);
    let warnings = components.iter().filter_map(|c| c.existence_warning()).collect();
    Ok(GammaMoment { moment, warnings })
}

/// Strong-form gap
/// `E ∏ X_j^{n_j} − E ∏_{I} X_j^{n_j} · E ∏_{I^c} X_j^{n_j}`, where each block
/// moment is computed from the marginal law `Gamma_{|I|}(α, Σ_I)`.
pub fn gamma_gpi_gap<T: Scalar>(
    params: &GammaParams<T>,
    n: &MultiIndex,
    partition: &Partition,
) -> Result<GapReport<T>> {
    check_degree(n, params.dim())?;
    if partition.dim() != params.dim() {
        return Err(Error::Structural("partition dimension mismatch".into()));
    }
    let full = gamma_moment(params, n)?;
    let block = |idx: Vec<usize>| -> Result<T> {
        if idx.is_empty() {
            return Ok(T::one());
        }
        Ok(gamma_moment(&params.marginal(&idx), &n.restrict(&idx))?.moment)
    };
    let rhs = block(partition.members())? * block(partition.complement_members())?;
    Ok(GapReport::new(full.moment, rhs, Some(*partition), full.warnings))
}

/// All moments of total degree `<= max_total` from a single series expansion.
///
/// Used for batch certification; [`MomentTable::moment`] agrees exactly with
/// [`gamma_moment`] on every exponent vector it covers.
#[derive(Clone, Debug)]
pub struct MomentTable<T> {
    mgf: TruncatedSeries<T>,
}

impl<T: Scalar> MomentTable<T> {
    pub fn new(params: &GammaParams<T>, max_total: u32) -> Result<Self> {
        if max_total > MAX_GAMMA_DEGREE {
            return Err(Error::Resource(format!(
                "total degree {max_total} exceeds the cap of {MAX_GAMMA_DEGREE}"
            )));
        }
        let d = params.dim();
        let caps = MultiIndex::uniform(d, max_total);
        let tr = trace_power_series(&params.sigma, &caps, Some(max_total), max_total)?;
        let mgf = tr.scale(&params.alpha).exp()?;
        Ok(MomentTable { mgf })
    }

    pub fn moment(&self, n: &MultiIndex) -> Option<T> {
        let total = self.mgf.max_total().unwrap_or(u32::MAX);
        (n.dim() == self.mgf.num_vars() && n.total() <= total)
            .then(|| self.mgf.coeff(n.as_slice()) * factorial::<T>(n))
    }
}

/// Strong-form gaps for every exponent vector up to `max_total` and every
/// nontrivial split, with block moments taken from the marginal laws.
#[derive(Clone, Debug, Serialize)]
pub struct CertificationSummary<T> {
    pub checked: usize,
    pub negative: Vec<(Vec<u32>, Vec<usize>, T)>,
    pub min_gap: Option<T>,
}

pub fn certify_strong_gpi<T: Scalar>(
    params: &GammaParams<T>,
    max_total: u32,
) -> Result<CertificationSummary<T>> {
    let d = params.dim();
    let full = MomentTable::new(params, max_total)?;
    let full_mask: u16 = ((1u32 << d) - 1) as u16;
    // Marginal tables per nonempty proper subset.
    let mut sub_tables: Vec<Option<MomentTable<T>>> = vec![None; 1 << d];
    for mask in 1..full_mask {
        let idx: Vec<usize> = (0..d).filter(|j| mask >> j & 1 == 1).collect();
        sub_tables[mask as usize] = Some(MomentTable::new(&params.marginal(&idx), max_total)?);
    }
    let mut summary = CertificationSummary {
        checked: 0,
        negative: Vec::new(),
        min_gap: None,
    };
    for n in MultiIndex::all_with_total_at_most(d, max_total) {
        let lhs = full.moment(&n).expect("in range");
        for p in Partition::all_nontrivial(d) {
            let a = p.members();
            let b = p.complement_members();
            let ma = sub_tables[p.mask() as usize].as_ref().expect("table");
            let mb = sub_tables[p.complement().mask() as usize].as_ref().expect("table");
            let rhs = ma.moment(&n.restrict(&a)).expect("in range")
                * mb.moment(&n.restrict(&b)).expect("in range");
            let gap = lhs.clone() - rhs;
            summary.checked += 1;
            if summary.min_gap.as_ref().is_none_or(|m| gap < *m) {
                summary.min_gap = Some(gap.clone());
            }
            if gap < T::zero() {
                summary.negative.push((n.as_slice().to_vec(), p.one_based(), gap));
            }
        }
    }
    Ok(summary)
}
