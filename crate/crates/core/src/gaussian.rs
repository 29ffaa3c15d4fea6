//! Mixed moments of centered Gaussian vectors.
//!
//! The production path is the Stein recursion
//! `E[X_i f(X)] = Σ_j σ_ij E[∂_j f(X)]` tabulated over every residual exponent
//! vector below `n`. A direct perfect-matching enumerator is kept alongside as an
//! independent check for small total degree.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::{MultiIndex, Partition};
use crate::matrix::CovarianceMatrix;
use crate::scalar::Scalar;

/// Largest total degree accepted by [`wick_moment`].
pub const MAX_WICK_DEGREE: u32 = 24;
/// Largest total degree accepted by [`wick_moment_by_matchings`].
pub const MAX_MATCHING_DEGREE: u32 = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct WickResult<T> {
    pub moment: T,
    /// Number of perfect matchings of the degree-`N` multiset, `(N-1)!!` (zero for odd `N`).
    pub pairing_count: u128,
}

/// Difference between a joint moment and a product of block moments.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport<T> {
    pub lhs: T,
    pub rhs: T,
    pub gap: T,
    /// `None` for the weak form (product over all singletons).
    #[serde(skip)]
    pub partition: Option<Partition>,
    /// Only meaningful on the exact backend.
    pub certified_nonnegative: Option<bool>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> GapReport<T> {
    pub(crate) fn new(lhs: T, rhs: T, partition: Option<Partition>, warnings: Vec<String>) -> Self {
        let gap = lhs.clone() - rhs.clone();
        let certified_nonnegative = T::EXACT.then(|| gap >= T::zero());
        GapReport {
            lhs,
            rhs,
            gap,
            partition,
            certified_nonnegative,
            warnings,
        }
    }
}

pub fn double_factorial_odd(n: u32) -> u128 {
    // (n-1)!! for even n; 0 for odd n.
    if n % 2 == 1 {
        return 0;
    }
    (1..n as u128).step_by(2).product()
}

fn check_dims<T>(sigma: &CovarianceMatrix<T>, n: &MultiIndex) -> Result<()>
where
    T: Scalar,
{
    if n.dim() != sigma.dim() {
        return Err(Error::Structural(format!(
            "exponent vector has {} entries but the matrix is {}×{}",
            n.dim(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    Ok(())
}

/// `E[∏ X_j^{n_j}]` for `X ~ N_d(0, Σ)`.
pub fn wick_moment<T: Scalar>(sigma: &CovarianceMatrix<T>, n: &MultiIndex) -> Result<WickResult<T>> {
    check_dims(sigma, n)?;
    let total = n.total();
    if total > MAX_WICK_DEGREE {
        return Err(Error::Resource(format!(
            "total degree {total} exceeds the cap of {MAX_WICK_DEGREE}"
        )));
    }
    let pairing_count = double_factorial_odd(total);
    if total % 2 == 1 {
        return Ok(WickResult {
            moment: T::zero(),
            pairing_count,
        });
    }
    let d = n.dim();
    let caps = n.as_slice();
    let mut strides = vec![1usize; d];
    for j in 1..d {
        strides[j] = strides[j - 1] * (caps[j - 1] as usize + 1);
    }
    let size = strides[d - 1] * (caps[d - 1] as usize + 1);

    // Every state's predecessors have smaller mixed-radix index, so a single forward
    // pass fills the table.
    let mut table: Vec<T> = Vec::with_capacity(size);
    let mut residual = vec![0u32; d];
    for idx in 0..size {
        if idx > 0 {
            for j in 0..d {
                if residual[j] < caps[j] {
                    residual[j] += 1;
                    break;
                }
                residual[j] = 0;
            }
        }
        let deg: u32 = residual.iter().sum();
        let value = if deg == 0 {
            T::one()
        } else if deg % 2 == 1 {
            T::zero()
        } else {
            let i = residual.iter().position(|&r| r > 0).expect("nonzero degree");
            let base = idx - strides[i];
            let mut acc = T::zero();
            for j in 0..d {
                let rj = residual[j] - u32::from(i == j);
                if rj == 0 {
                    continue;
                }
                let s = sigma.get(i, j);
                if s.is_zero() {
                    continue;
                }
                let sub = &table[base - strides[j]];
                if sub.is_zero() {
                    continue;
                }
                acc = acc + s.clone() * T::from_i64(rj as i64) * sub.clone();
            }
            acc
        };
        table.push(value);
    }
    Ok(WickResult {
        moment: table.pop().expect("nonempty table"),
        pairing_count,
    })
}

/// Same quantity by summing over every perfect matching explicitly.
pub fn wick_moment_by_matchings<T: Scalar>(
    sigma: &CovarianceMatrix<T>,
    n: &MultiIndex,
) -> Result<WickResult<T>> {
    check_dims(sigma, n)?;
    let total = n.total();
    if total > MAX_MATCHING_DEGREE {
        return Err(Error::Resource(format!(
            "matching enumeration limited to total degree {MAX_MATCHING_DEGREE}, got {total}"
        )));
    }
    let labels: Vec<usize> = n
        .as_slice()
        .iter()
        .enumerate()
        .flat_map(|(j, &k)| std::iter::repeat_n(j, k as usize))
        .collect();
    if labels.len() % 2 == 1 {
        return Ok(WickResult {
            moment: T::zero(),
            pairing_count: 0,
        });
    }
    fn rec<T: Scalar>(
        sigma: &CovarianceMatrix<T>,
        items: &mut Vec<usize>,
        count: &mut u128,
    ) -> T {
        if items.is_empty() {
            *count += 1;
            return T::one();
        }
        let first = items.remove(0);
        let mut acc = T::zero();
        for k in 0..items.len() {
            let partner = items.remove(k);
            let rest = rec(sigma, items, count);
            acc = acc + sigma.get(first, partner).clone() * rest;
            items.insert(k, partner);
        }
        items.insert(0, first);
        acc
    }
    let mut count = 0u128;
    let mut items = labels;
    let moment = rec(sigma, &mut items, &mut count);
    Ok(WickResult {
        moment,
        pairing_count: count,
    })
}

fn require_even(n: &MultiIndex) -> Result<()> {
    if !n.all_even() {
        return Err(Error::Unsupported(
            "odd exponents have no finite Wick expansion for |X_j|^n_j; use the Monte Carlo tools".into(),
        ));
    }
    Ok(())
}

/// `E ∏ X_j^{n_j} − E ∏_{I} X_j^{n_j} · E ∏_{I^c} X_j^{n_j}` for even exponents.
pub fn gaussian_gpi_gap<T: Scalar>(
    sigma: &CovarianceMatrix<T>,
    n: &MultiIndex,
    partition: &Partition,
) -> Result<GapReport<T>> {
    check_dims(sigma, n)?;
    require_even(n)?;
    if partition.dim() != sigma.dim() {
        return Err(Error::Structural("partition dimension mismatch".into()));
    }
    let lhs = wick_moment(sigma, n)?.moment;
    let block = |idx: Vec<usize>| -> Result<T> {
        if idx.is_empty() {
            return Ok(T::one());
        }
        Ok(wick_moment(&sigma.marginal(&idx), &n.restrict(&idx))?.moment)
    };
    let rhs = block(partition.members())? * block(partition.complement_members())?;
    Ok(GapReport::new(lhs, rhs, Some(*partition), Vec::new()))
}

/// Weak form: `E ∏ X_j^{n_j} − ∏ E X_j^{n_j}` for even exponents.
pub fn gaussian_weak_gpi_gap<T: Scalar>(
    sigma: &CovarianceMatrix<T>,
    n: &MultiIndex,
) -> Result<GapReport<T>> {
    check_dims(sigma, n)?;
    require_even(n)?;
    let lhs = wick_moment(sigma, n)?.moment;
    let rhs = (0..sigma.dim()).fold(T::one(), |acc, j| {
        let m = n.get(j) / 2;
        let var = sigma.get(j, j).clone();
        let pow = (0..m).fold(T::one(), |p, _| p * var.clone());
        acc * T::from_i64(double_factorial_odd(n.get(j)) as i64) * pow
    });
    Ok(GapReport::new(lhs, rhs, None, Vec::new()))
}

/// `E|X|^p` for `X ~ N(0, σ²)`, `p > -1`.
pub fn abs_moment_univariate(variance: f64, p: f64) -> Result<f64> {
    if p <= -1.0 {
        return Err(Error::Divergent(format!(
            "E|X|^p diverges for p = {p} <= -1"
        )));
    }
    if !(variance > 0.0) {
        return Err(Error::Contract(format!("variance must be positive, got {variance}")));
    }
    use statrs::function::gamma::ln_gamma;
    let log = 0.5 * p * (variance.ln() + std::f64::consts::LN_2) + ln_gamma(0.5 * (p + 1.0))
        - ln_gamma(0.5);
    Ok(log.exp())
}
