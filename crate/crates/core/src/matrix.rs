//! Small symmetric matrices over a [`Scalar`] backend.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::index::SignMatrix;
use crate::scalar::{Scalar, DEFAULT_FLOAT_TOL};

/// Largest supported dimension.
pub const MAX_DIM: usize = 12;

/// Symmetric `d × d` matrix, row-major. Not necessarily positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix<T> {
    d: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    /// Validates shape and symmetry. Float inputs within tolerance are symmetrized.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::Structural("empty matrix".into()));
        }
        if d > MAX_DIM {
            return Err(Error::DimensionCap(d));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::Structural(format!(
                "row {} has {} entries, expected {d}",
                i + 1,
                r.len()
            )));
        }
        let mut data: Vec<T> = rows.into_iter().flatten().collect();
        let scale = data.iter().fold(T::zero(), |m, x| if x.abs() > m { x.abs() } else { m });
        let tol = T::tolerance(&scale);
        for i in 0..d {
            for j in i + 1..d {
                let (a, b) = (&data[i * d + j], &data[j * d + i]);
                if !(a.clone() - b.clone()).is_within(&tol) {
                    return Err(Error::Structural(format!(
                        "asymmetric at ({}, {}): {a} vs {b}",
                        i + 1,
                        j + 1
                    )));
                }
                if !T::EXACT {
                    let avg = (a.clone() + b.clone()) / T::from_i64(2);
                    data[i * d + j] = avg.clone();
                    data[j * d + i] = avg;
                }
            }
        }
        Ok(SymMatrix { d, data })
    }

    pub fn identity(d: usize) -> Self {
        Self::diagonal((0..d).map(|_| T::one()).collect())
    }

    pub fn diagonal(diag: Vec<T>) -> Self {
        let d = diag.len();
        let mut data = vec![T::zero(); d * d];
        for (i, v) in diag.into_iter().enumerate() {
            data[i * d + i] = v;
        }
        SymMatrix { d, data }
    }

    /// Builds from the upper triangle given by `f(i, j)` for `i <= j`.
    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = vec![T::zero(); d * d];
        for i in 0..d {
            for j in i..d {
                let v = f(i, j);
                data[j * d + i] = v.clone();
                data[i * d + j] = v;
            }
        }
        SymMatrix { d, data }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.d + j]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.d).map(|r| r.to_vec()).collect()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, x| if x.abs() > m { x.abs() } else { m })
    }

    pub fn default_tol(&self) -> T {
        T::tolerance(&self.max_abs())
    }

    pub fn principal_submatrix(&self, idx: &[usize]) -> SymMatrix<T> {
        let k = idx.len();
        let mut data = Vec::with_capacity(k * k);
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j).clone());
            }
        }
        SymMatrix { d: k, data }
    }

    /// Entry `(i, j)` becomes `s_i s_j σ_ij`.
    pub fn conjugate_by_sign(&self, signs: &SignMatrix) -> SymMatrix<T> {
        assert_eq!(signs.dim(), self.d, "sign matrix dimension mismatch");
        let d = self.d;
        let mut data = self.data.clone();
        for i in 0..d {
            for j in 0..d {
                if signs.get(i) * signs.get(j) < 0 {
                    data[i * d + j] = -data[i * d + j].clone();
                }
            }
        }
        SymMatrix { d, data }
    }

    /// Simultaneous row/column permutation: result `(i, j)` is `self(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> SymMatrix<T> {
        self.principal_submatrix(perm)
    }

    /// `D Σ D` for `D = diag(scale)`.
    pub fn scaled(&self, scale: &[T]) -> SymMatrix<T> {
        let d = self.d;
        let mut data = self.data.clone();
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = data[i * d + j].clone() * scale[i].clone() * scale[j].clone();
            }
        }
        SymMatrix { d, data }
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.d).all(|i| (0..self.d).all(|j| i == j || self.get(i, j).is_zero()))
    }

    pub fn to_f64(&self) -> SymMatrix<f64> {
        SymMatrix {
            d: self.d,
            data: self.data.iter().map(Scalar::to_f64).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.d)
            .map(|i| {
                (0..self.d).fold(T::zero(), |acc, j| acc + self.get(i, j).clone() * v[j].clone())
            })
            .collect()
    }

    pub fn quadratic_form(&self, v: &[T]) -> T {
        self.mul_vec(v)
            .into_iter()
            .zip(v)
            .fold(T::zero(), |acc, (a, b)| acc + a * b.clone())
    }

    /// Plain matrix product; the caller knows whether the result is symmetric.
    pub fn matmul(&self, other: &SymMatrix<T>) -> Vec<Vec<T>> {
        let d = self.d;
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        (0..d).fold(T::zero(), |acc, k| {
                            acc + self.get(i, k).clone() * other.get(k, j).clone()
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

/// Result of a positive-semidefiniteness test.
#[derive(Clone, Debug)]
pub struct PsdCheck<T> {
    pub psd: bool,
    /// Direction `v` with `vᵀΣv < 0` when `psd` is false.
    pub witness: Option<Vec<T>>,
    /// Smallest eigenvalue (float backend only).
    pub min_eigenvalue: Option<f64>,
}

/// PSD test with the backend's default tolerance.
pub fn check_psd<T: Scalar>(sigma: &SymMatrix<T>) -> PsdCheck<T> {
    check_psd_with_tol(sigma, DEFAULT_FLOAT_TOL)
}

/// Exact backend: pivoted LDLᵀ, all pivots must be `>= 0`.
/// Float backend: Jacobi eigenvalues `>= -rel_tol·‖Σ‖`.
pub fn check_psd_with_tol<T: Scalar>(sigma: &SymMatrix<T>, rel_tol: f64) -> PsdCheck<T> {
    if T::EXACT {
        return ldl_psd(sigma);
    }
    let f = sigma.to_f64();
    let (eig, vecs) = jacobi_eigen(&f);
    let norm = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let (k, &min) = eig
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let psd = min >= -rel_tol * norm.max(f64::MIN_POSITIVE);
    PsdCheck {
        psd,
        witness: (!psd).then(|| vecs.iter().map(|row| T::from_f64(row[k])).collect()),
        min_eigenvalue: Some(min),
    }
}

/// Symmetric elimination with largest-diagonal pivoting. Each remaining index carries
/// a vector `u_r` (original coordinates) such that the Schur-complement quadratic form
/// of `w` equals `vᵀΣv` for `v = Σ w_r u_r`, which turns a failing pivot into a witness.
fn ldl_psd<T: Scalar>(sigma: &SymMatrix<T>) -> PsdCheck<T> {
    let d = sigma.dim();
    let mut s: Vec<Vec<T>> = sigma.rows();
    let mut u: Vec<Vec<T>> = (0..d)
        .map(|r| (0..d).map(|c| if r == c { T::one() } else { T::zero() }).collect())
        .collect();
    let mut remaining: Vec<usize> = (0..d).collect();
    let done = |psd: bool, witness: Option<Vec<T>>| PsdCheck {
        psd,
        witness,
        min_eigenvalue: None,
    };
    while !remaining.is_empty() {
        let (pos, &p) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| s[*a.1][*a.1].partial_cmp(&s[*b.1][*b.1]).expect("ordered"))
            .expect("nonempty");
        let pivot = s[p][p].clone();
        if pivot < T::zero() {
            return done(false, Some(u[p].clone()));
        }
        if pivot.is_zero() {
            // All remaining diagonals are zero: any nonzero off-diagonal breaks PSD.
            for &i in &remaining {
                for &j in &remaining {
                    if i != j && !s[i][j].is_zero() {
                        let sign = if s[i][j] > T::zero() { -T::one() } else { T::one() };
                        let v = u[i]
                            .iter()
                            .zip(&u[j])
                            .map(|(a, b)| a.clone() + sign.clone() * b.clone())
                            .collect();
                        return done(false, Some(v));
                    }
                }
            }
            return done(true, None);
        }
        remaining.remove(pos);
        for &r in &remaining {
            let factor = s[p][r].clone() / pivot.clone();
            for c in 0..d {
                let delta = factor.clone() * u[p][c].clone();
                u[r][c] = u[r][c].clone() - delta;
            }
            for &c in &remaining {
                let delta = factor.clone() * s[p][c].clone();
                s[r][c] = s[r][c].clone() - delta;
            }
        }
    }
    done(true, None)
}

/// Cyclic Jacobi eigen-decomposition. Returns eigenvalues and the eigenvector matrix
/// (column `k` is the eigenvector of eigenvalue `k`).
pub fn jacobi_eigen(m: &SymMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = m.dim();
    let mut a = m.rows();
    let mut v: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[p][q].abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..d).map(|i| a[i][i]).collect(), v)
}

/// Inverse by Gauss–Jordan elimination.
///
/// Exact backend: exact, fails only on a truly zero pivot. Float backend: partial
/// pivoting, fails when a pivot is below `1e-10·max|σ|`.
pub fn inverse<T: Scalar>(sigma: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let d = sigma.dim();
    let tol = sigma.default_tol();
    let mut a = sigma.rows();
    let mut inv: Vec<Vec<T>> = SymMatrix::<T>::identity(d).rows();
    for col in 0..d {
        let pivot_row = if T::EXACT {
            (col..d).find(|&r| !a[r][col].is_zero())
        } else {
            (col..d)
                .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).expect("ordered"))
                .filter(|&r| !a[r][col].is_within(&tol))
        };
        let Some(pr) = pivot_row else {
            return Err(Error::Singular { pivot: col + 1 });
        };
        a.swap(col, pr);
        inv.swap(col, pr);
        let pivot = a[col][col].clone();
        for k in 0..d {
            a[col][k] = a[col][k].clone() / pivot.clone();
            inv[col][k] = inv[col][k].clone() / pivot.clone();
        }
        for r in 0..d {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for k in 0..d {
                let da = f.clone() * a[col][k].clone();
                a[r][k] = a[r][k].clone() - da;
                let di = f.clone() * inv[col][k].clone();
                inv[r][k] = inv[r][k].clone() - di;
            }
        }
    }
    // Symmetric by construction on the exact backend; averaging removes float drift.
    Ok(SymMatrix::from_fn(d, |i, j| {
        if T::EXACT {
            inv[i][j].clone()
        } else {
            (inv[i][j].clone() + inv[j][i].clone()) / T::from_i64(2)
        }
    }))
}

/// A validated covariance matrix: symmetric, positive semidefinite, `d <= 12`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix<T>(SymMatrix<T>);

impl<T: Scalar> CovarianceMatrix<T> {
    pub fn new(sym: SymMatrix<T>) -> Result<Self> {
        Self::with_tol(sym, DEFAULT_FLOAT_TOL)
    }

    pub fn with_tol(sym: SymMatrix<T>, rel_tol: f64) -> Result<Self> {
        let check = check_psd_with_tol(&sym, rel_tol);
        if !check.psd {
            let witness = check.witness.unwrap_or_default();
            let value = sym.quadratic_form(&witness).to_f64();
            return Err(Error::NotPsd {
                witness: witness.iter().map(Scalar::to_f64).collect(),
                value,
            });
        }
        Ok(CovarianceMatrix(sym))
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::new(SymMatrix::from_rows(rows)?)
    }

    pub fn identity(d: usize) -> Self {
        CovarianceMatrix(SymMatrix::identity(d))
    }

    pub fn as_sym(&self) -> &SymMatrix<T> {
        &self.0
    }

    pub fn into_sym(self) -> SymMatrix<T> {
        self.0
    }

    /// Sign conjugation is a similarity by an orthogonal matrix, so PSD is preserved.
    pub fn conjugate_by_sign(&self, signs: &SignMatrix) -> CovarianceMatrix<T> {
        CovarianceMatrix(self.0.conjugate_by_sign(signs))
    }

    /// Principal submatrices of a PSD matrix are PSD.
    pub fn marginal(&self, idx: &[usize]) -> CovarianceMatrix<T> {
        CovarianceMatrix(self.0.principal_submatrix(idx))
    }

    pub fn permuted(&self, perm: &[usize]) -> CovarianceMatrix<T> {
        CovarianceMatrix(self.0.permuted(perm))
    }

    pub fn scaled(&self, scale: &[T]) -> CovarianceMatrix<T> {
        CovarianceMatrix(self.0.scaled(scale))
    }

    /// Requires a strictly positive definite matrix.
    pub fn inverse(&self) -> Result<CovarianceMatrix<T>> {
        inverse(&self.0).map(CovarianceMatrix)
    }

    pub fn to_f64(&self) -> CovarianceMatrix<f64> {
        CovarianceMatrix(self.0.to_f64())
    }
}

impl<T> Deref for CovarianceMatrix<T> {
    type Target = SymMatrix<T>;

    fn deref(&self) -> &SymMatrix<T> {
        &self.0
    }
}
