//! Covariance-structure hypotheses: sign-balanceability, the Karlin–Rinott MTP₂
//! criterion for `|X|`, and one-factor ("structure ℓ") correlation.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::SignMatrix;
use crate::matrix::{CovarianceMatrix, SymMatrix};
use crate::scalar::Scalar;

/// Outcome of a signing search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigningOutcome {
    pub feasible: bool,
    /// Present iff feasible; normalized so that `s_1 = +1`.
    pub sign_matrix: Option<SignMatrix>,
    /// Present iff infeasible: 0-based vertices of a cycle carrying an odd number of
    /// "opposite sign" constraints, listed in traversal order.
    pub violating_cycle: Option<Vec<usize>>,
    /// Entries with magnitude at or below this were treated as unconstrained.
    pub tolerance: String,
}

impl SigningOutcome {
    /// 1-based cycle for reports.
    pub fn cycle_one_based(&self) -> Option<Vec<usize>> {
        self.violating_cycle
            .as_ref()
            .map(|c| c.iter().map(|i| i + 1).collect())
    }
}

/// Union–find with the parity of each node relative to its parent.
struct ParityUnionFind {
    parent: Vec<usize>,
    parity: Vec<u8>,
    rank: Vec<u8>,
}

impl ParityUnionFind {
    fn new(n: usize) -> Self {
        ParityUnionFind {
            parent: (0..n).collect(),
            parity: vec![0; n],
            rank: vec![0; n],
        }
    }

    /// Root of `x` and the parity of `x` relative to it.
    fn find(&mut self, x: usize) -> (usize, u8) {
        let p = self.parent[x];
        if p == x {
            return (x, 0);
        }
        let (root, par) = self.find(p);
        self.parent[x] = root;
        self.parity[x] ^= par;
        (root, self.parity[x])
    }

    /// Records `parity(a) ^ parity(b) == rel`. Returns `false` on contradiction.
    fn union(&mut self, a: usize, b: usize, rel: u8) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return pa ^ pb == rel;
        }
        let (hi, lo) = if self.rank[ra] >= self.rank[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[lo] = hi;
        self.parity[lo] = pa ^ pb ^ rel;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        true
    }
}

/// Finds signs with `s_i s_j = +1` on "equal" edges and `-1` on "opposite" edges.
/// `relation(i, j)` is `Some(false)` for equal, `Some(true)` for opposite, `None`
/// for unconstrained.
fn balance(d: usize, relation: impl Fn(usize, usize) -> Option<bool>) -> (Option<SignMatrix>, Option<Vec<usize>>) {
    let mut uf = ParityUnionFind::new(d);
    // Spanning forest of accepted constraints, used to extract the fundamental cycle.
    let mut forest: Vec<Vec<usize>> = vec![Vec::new(); d];
    for i in 0..d {
        for j in i + 1..d {
            let Some(opposite) = relation(i, j) else {
                continue;
            };
            let (ri, _) = uf.find(i);
            let (rj, _) = uf.find(j);
            let joined = ri != rj;
            if !uf.union(i, j, u8::from(opposite)) {
                return (None, Some(forest_path(&forest, j, i)));
            }
            if joined {
                forest[i].push(j);
                forest[j].push(i);
            }
        }
    }
    let signs = (0..d)
        .map(|x| if uf.find(x).1 == 0 { 1 } else { -1 })
        .collect();
    let s = SignMatrix::new(signs).expect("±1").normalized();
    (Some(s), None)
}

/// Vertex path `from → to` in the forest (BFS).
fn forest_path(forest: &[Vec<usize>], from: usize, to: usize) -> Vec<usize> {
    let mut prev = vec![usize::MAX; forest.len()];
    let mut queue = VecDeque::from([from]);
    prev[from] = from;
    while let Some(x) = queue.pop_front() {
        if x == to {
            break;
        }
        for &y in &forest[x] {
            if prev[y] == usize::MAX {
                prev[y] = x;
                queue.push_back(y);
            }
        }
    }
    let mut path = vec![to];
    let mut x = to;
    while x != from {
        x = prev[x];
        path.push(x);
    }
    path.reverse();
    path
}

fn signing_outcome<T: Scalar>(
    m: &SymMatrix<T>,
    tol: &T,
    want_nonneg: bool,
) -> SigningOutcome {
    let d = m.dim();
    let rel = |i: usize, j: usize| -> Option<bool> {
        let v = if want_nonneg {
            m.get(i, j).clone()
        } else {
            -m.get(i, j).clone()
        };
        if v > tol.clone() {
            Some(false)
        } else if v < -tol.clone() {
            Some(true)
        } else {
            None
        }
    };
    let (signs, cycle) = balance(d, rel);
    if let Some(s) = &signs {
        // Post-verification of the certificate.
        for i in 0..d {
            for j in i + 1..d {
                let v = m.get(i, j).clone() * T::from_i64((s.get(i) * s.get(j)) as i64);
                let v = if want_nonneg { v } else { -v };
                assert!(
                    !v.is_negative_beyond(tol),
                    "signing certificate failed verification at ({i}, {j})"
                );
            }
        }
    }
    SigningOutcome {
        feasible: signs.is_some(),
        sign_matrix: signs,
        violating_cycle: cycle,
        tolerance: tol.render(),
    }
}

/// Finds `S` with `s_i s_j σ_ij >= 0` for all `i < j`, or a cycle proving none exists.
/// Entries with `|σ_ij| <= tol` impose no constraint.
pub fn sign_balance<T: Scalar>(sigma: &SymMatrix<T>, tol: &T) -> SigningOutcome {
    signing_outcome(sigma, tol, true)
}

/// Karlin–Rinott: `|X|` is MTP₂ iff some `S` makes every off-diagonal entry of
/// `−SΣ⁻¹S` nonnegative. A feasible outcome therefore certifies the strong product
/// inequality for `Σ` (MTP₂ ⇒ association ⇒ strong form); that chain is recorded,
/// not recomputed.
pub fn mtp2_check<T: Scalar>(sigma: &CovarianceMatrix<T>, tol: Option<&T>) -> Result<SigningOutcome> {
    let inv = sigma.inverse()?;
    let tol = tol.cloned().unwrap_or_else(|| inv.default_tol());
    Ok(signing_outcome(inv.as_sym(), &tol, false))
}

/// Provenance text attached to feasible MTP₂ reports.
pub const MTP2_IMPLICATION: &str =
    "|X| is MTP2, hence associated, hence the strong product inequality holds for this covariance";

/// One-factor correlation `σ_ij = a_i a_j (σ_ii σ_jj)^{1/2}`, `|a_j| < 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct EllStructure<T> {
    /// `a_j²`, exact on the rational backend.
    pub a_squared: Vec<T>,
    /// Sign of each `a_j` (0 when `a_j = 0`); the first nonzero sign is `+1`.
    pub signs: Vec<i8>,
}

impl<T: Scalar> EllStructure<T> {
    pub fn a(&self) -> Vec<f64> {
        self.a_squared
            .iter()
            .zip(&self.signs)
            .map(|(a2, &s)| s as f64 * a2.to_f64().max(0.0).sqrt())
            .collect()
    }

    /// `a` in the scalar backend when every `a_j²` has a representable square root.
    pub fn exact_a(&self) -> Option<Vec<T>> {
        self.a_squared
            .iter()
            .zip(&self.signs)
            .map(|(a2, &s)| {
                a2.sqrt_exact()
                    .map(|r| if s < 0 { -r } else { r })
            })
            .collect()
    }
}

/// Recovers `a` (up to a global sign, fixed by making the first nonzero `a_j`
/// positive) or returns `None` when `Σ` is not of structure ℓ.
///
/// Nonzero correlations must form at most one clique: `a_i a_j ≠ 0` for every pair in
/// the support of `a`. On a clique of size ≥ 3, `a_i² = σ_ij σ_ik / (σ_ii σ_jk)`; a
/// clique of size 2 is underdetermined and uses `a_i² = (1 + r²)/2`, `a_j² = r²/a_i²`.
pub fn structure_ell_check<T: Scalar>(sigma: &SymMatrix<T>, tol: &T) -> Result<Option<EllStructure<T>>> {
    let d = sigma.dim();
    for i in 0..d {
        if *sigma.get(i, i) <= T::zero() {
            return Err(Error::Contract(format!(
                "structure ℓ needs positive variances; σ_{0}{0} = {1}",
                i + 1,
                sigma.get(i, i)
            )));
        }
    }
    let nz = |i: usize, j: usize| !sigma.get(i, j).is_within(tol);
    let support: Vec<usize> = (0..d).filter(|&i| (0..d).any(|j| j != i && nz(i, j))).collect();
    let zero = T::zero();
    let mut a_squared = vec![zero.clone(); d];
    let mut signs = vec![0i8; d];
    if !support.is_empty() {
        for (x, &i) in support.iter().enumerate() {
            for &j in &support[x + 1..] {
                if !nz(i, j) {
                    return Ok(None);
                }
            }
        }
        let var = |i: usize| sigma.get(i, i).clone();
        let s = |i: usize, j: usize| sigma.get(i, j).clone();
        let one = T::one();
        if support.len() == 2 {
            let (i, j) = (support[0], support[1]);
            let r2 = s(i, j) * s(i, j) / (var(i) * var(j));
            let ai2 = (one.clone() + r2.clone()) / T::from_i64(2);
            a_squared[j] = r2 / ai2.clone();
            a_squared[i] = ai2;
        } else {
            for (x, &i) in support.iter().enumerate() {
                let others: Vec<usize> = support
                    .iter()
                    .enumerate()
                    .filter(|&(y, _)| y != x)
                    .map(|(_, &k)| k)
                    .take(2)
                    .collect();
                let (j, k) = (others[0], others[1]);
                a_squared[i] = s(i, j) * s(i, k) / (var(i) * s(j, k));
            }
        }
        let lead = support[0];
        signs[lead] = 1;
        for &j in &support[1..] {
            signs[j] = if s(lead, j) > zero { 1 } else { -1 };
        }
        if support
            .iter()
            .any(|&i| a_squared[i] <= zero || a_squared[i] >= one)
        {
            return Ok(None);
        }
        for i in 0..d {
            for j in i + 1..d {
                let lhs = s(i, j) * s(i, j);
                let rhs = a_squared[i].clone() * a_squared[j].clone() * var(i) * var(j);
                if !(lhs - rhs).is_within(&(tol.clone() * var(i) * var(j))) {
                    return Ok(None);
                }
                if nz(i, j) && (s(i, j) > zero) != (signs[i] * signs[j] > 0) {
                    return Ok(None);
                }
            }
        }
    }
    Ok(Some(EllStructure { a_squared, signs }))
}

/// Builds `σ_ij = a_i a_j (σ_ii σ_jj)^{1/2}` with unit variances.
pub fn ell_correlation<T: Scalar>(a: &[T]) -> SymMatrix<T> {
    SymMatrix::from_fn(a.len(), |i, j| {
        if i == j {
            T::one()
        } else {
            a[i].clone() * a[j].clone()
        }
    })
}
