use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Gamma, Normal};

use crate::error::{Error, Result};
use crate::matrix::{jacobi_eigen, CovarianceMatrix};
use crate::par::Execution;
use crate::scalar::{Scalar, DEFAULT_FLOAT_TOL};

use super::rng::{run_chunks, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Cholesky,
    Eigen,
}

/// Draws `X = L Z` with `L Lᵀ = Σ`.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    d: usize,
    factor: Vec<f64>,
    variances: Vec<f64>,
    kind: FactorKind,
    clamp: f64,
}

impl GaussianSampler {
    /// Cholesky when `Σ` is positive definite, otherwise an eigen-factor with
    /// eigenvalues in `[-ε, 0)` clamped to zero, `ε = 1e-10·max|λ|`.
    pub fn new<T: Scalar>(sigma: &CovarianceMatrix<T>) -> Result<Self> {
        let s = sigma.to_f64();
        let d = s.dim();
        let variances = (0..d).map(|i| *s.get(i, i)).collect();
        if let Some(factor) = cholesky(&s.rows()) {
            return Ok(GaussianSampler { d, factor, variances, kind: FactorKind::Cholesky, clamp: 0.0 });
        }
        let (eig, vecs) = jacobi_eigen(s.as_sym());
        let eps = DEFAULT_FLOAT_TOL * eig.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(1.0);
        let mut clamp = 0.0f64;
        for (k, &lambda) in eig.iter().enumerate() {
            if lambda < -eps {
                return Err(Error::NotPsd {
                    witness: vecs.iter().map(|row| row[k]).collect(),
                    value: lambda,
                });
            }
            if lambda < 0.0 {
                clamp = clamp.max(-lambda);
            }
        }
        let mut factor = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                factor[i * d + k] = vecs[i][k] * eig[k].max(0.0).sqrt();
            }
        }
        Ok(GaussianSampler { d, factor, variances, kind: FactorKind::Eigen, clamp })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    /// Largest magnitude of a negative eigenvalue that was set to zero.
    pub fn clamp_magnitude(&self) -> f64 {
        self.clamp
    }

    pub fn variance(&self, j: usize) -> f64 {
        self.variances[j]
    }

    /// Writes one draw into `out`; `z` is scratch space of length `d`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        self.apply(z, out);
    }

    pub(crate) fn apply(&self, z: &[f64], out: &mut [f64]) {
        let d = self.d;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.factor[i * d..(i + 1) * d].iter().zip(z).map(|(l, z)| l * z).sum();
        }
    }
}

/// Lower Cholesky factor, or `None` when a pivot is not clearly positive.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<f64>> {
    let d = a.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let diag = a[j][j] - (0..j).map(|k| l[j * d + k] * l[j * d + k]).sum::<f64>();
        if diag <= 1e-12 * scale {
            return None;
        }
        let ljj = diag.sqrt();
        l[j * d + j] = ljj;
        for i in j + 1..d {
            let s = a[i][j] - (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum::<f64>();
            l[i * d + j] = s / ljj;
        }
    }
    Some(l)
}

/// Wishart-diagonal sampler: `X_j = ½ Σ_{k≤2α} Z_{kj}²` for `2α` independent `N_d(0,Σ)`.
#[derive(Clone, Debug)]
pub struct GammaSampler {
    gauss: GaussianSampler,
    alpha: f64,
    copies: usize,
}

impl GammaSampler {
    pub fn new<T: Scalar>(alpha: &T, sigma: &CovarianceMatrix<T>) -> Result<Self> {
        let two_alpha = alpha.clone() + alpha.clone();
        if !two_alpha.is_integer() || two_alpha <= T::zero() {
            return Err(Error::Unsupported(format!(
                "gamma sampling needs 2α to be a positive integer, got α = {alpha}"
            )));
        }
        Ok(GammaSampler {
            gauss: GaussianSampler::new(sigma)?,
            alpha: alpha.to_f64(),
            copies: two_alpha.to_f64().round() as usize,
        })
    }

    pub fn dim(&self) -> usize {
        self.gauss.d
    }

    pub fn gaussian(&self) -> &GaussianSampler {
        &self.gauss
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], x: &mut [f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for _ in 0..self.copies {
            self.gauss.draw(rng, z, x);
            for (o, v) in out.iter_mut().zip(x.iter()) {
                *o += 0.5 * v * v;
            }
        }
    }
}

/// A source of random vectors for the estimators.
#[derive(Clone, Debug)]
pub enum Sampler {
    /// `X ~ N_d(0,Σ)`, optionally reported as `|X|`.
    Gaussian { sampler: GaussianSampler, absolute: bool },
    Gamma(GammaSampler),
}

impl Sampler {
    pub fn gaussian<T: Scalar>(sigma: &CovarianceMatrix<T>) -> Result<Self> {
        Ok(Sampler::Gaussian { sampler: GaussianSampler::new(sigma)?, absolute: false })
    }

    pub fn abs_gaussian<T: Scalar>(sigma: &CovarianceMatrix<T>) -> Result<Self> {
        Ok(Sampler::Gaussian { sampler: GaussianSampler::new(sigma)?, absolute: true })
    }

    pub fn gamma<T: Scalar>(alpha: &T, sigma: &CovarianceMatrix<T>) -> Result<Self> {
        Ok(Sampler::Gamma(GammaSampler::new(alpha, sigma)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            Sampler::Gaussian { sampler, .. } => sampler.dim(),
            Sampler::Gamma(g) => g.dim(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        !matches!(self, Sampler::Gaussian { absolute: false, .. })
    }

    pub(crate) fn scratch(&self) -> Scratch {
        let d = self.dim();
        Scratch { z: vec![0.0; d], x: vec![0.0; d], out: vec![0.0; d] }
    }

    /// Draws one vector into `scratch.out`.
    pub(crate) fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, s: &mut Scratch) {
        match self {
            Sampler::Gaussian { sampler, absolute } => {
                sampler.draw(rng, &mut s.z, &mut s.out);
                if *absolute {
                    s.out.iter_mut().for_each(|v| *v = v.abs());
                }
            }
            Sampler::Gamma(g) => g.draw(rng, &mut s.z, &mut s.x, &mut s.out),
        }
    }

    /// Draws an antithetic pair: `scratch.out` from `Z` and `mirror` from `−Z`.
    pub(crate) fn draw_antithetic<R: Rng + ?Sized>(&self, rng: &mut R, s: &mut Scratch, mirror: &mut [f64]) {
        match self {
            Sampler::Gaussian { sampler, absolute } => {
                sampler.draw(rng, &mut s.z, &mut s.out);
                for (m, v) in mirror.iter_mut().zip(s.out.iter_mut()) {
                    if *absolute {
                        *v = v.abs();
                        *m = *v;
                    } else {
                        *m = -*v;
                    }
                }
            }
            Sampler::Gamma(g) => {
                // Squares are invariant under Z → −Z.
                g.draw(rng, &mut s.z, &mut s.x, &mut s.out);
                mirror.copy_from_slice(&s.out);
            }
        }
    }

    /// `x` with `P(V_j ≤ x) = p` for the marginal of component `j`.
    pub fn marginal_quantile(&self, j: usize, p: f64) -> Result<f64> {
        match self {
            Sampler::Gaussian { sampler, absolute: true } => {
                Ok(sampler.variance(j).sqrt() * std_normal().inverse_cdf((1.0 + p) / 2.0))
            }
            Sampler::Gaussian { sampler, absolute: false } => {
                Ok(sampler.variance(j).sqrt() * std_normal().inverse_cdf(p))
            }
            Sampler::Gamma(g) => {
                let var = g.gauss.variance(j);
                if var <= 0.0 {
                    return Ok(0.0);
                }
                let dist = Gamma::new(g.alpha, 1.0 / var)
                    .map_err(|e| Error::Contract(format!("gamma marginal: {e}")))?;
                Ok(dist.inverse_cdf(p))
            }
        }
    }

    /// `P(V_j ≥ t)` where it has a closed form.
    pub fn marginal_upper(&self, j: usize, t: f64) -> f64 {
        match self {
            Sampler::Gaussian { sampler, absolute } => {
                let sd = sampler.variance(j).sqrt();
                if sd == 0.0 {
                    return if t <= 0.0 { 1.0 } else { 0.0 };
                }
                if *absolute {
                    if t <= 0.0 {
                        1.0
                    } else {
                        2.0 * std_normal().cdf(-t / sd)
                    }
                } else {
                    std_normal().cdf(-t / sd)
                }
            }
            Sampler::Gamma(g) => {
                let var = g.gauss.variance(j);
                if t <= 0.0 {
                    return 1.0;
                }
                if var <= 0.0 {
                    return 0.0;
                }
                Gamma::new(g.alpha, 1.0 / var).map(|dist| dist.sf(t)).unwrap_or(f64::NAN)
            }
        }
    }

    /// Whether `E V_j^p` is finite for this marginal.
    pub(crate) fn power_moment_finite(&self, p: f64) -> bool {
        match self {
            Sampler::Gaussian { .. } => p > -1.0,
            Sampler::Gamma(g) => p > -g.alpha,
        }
    }
}

pub(crate) struct Scratch {
    z: Vec<f64>,
    x: Vec<f64>,
    pub(crate) out: Vec<f64>,
}

pub(crate) fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// `N` draws from `N_d(0,Σ)`, one row per draw.
pub fn sample_gaussian<T: Scalar>(sigma: &CovarianceMatrix<T>, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    sample_rows(&Sampler::gaussian(sigma)?, n, seed)
}

/// `N` draws from the Wishart-diagonal gamma law with `2α ∈ ℕ`.
pub fn sample_gamma<T: Scalar>(alpha: &T, sigma: &CovarianceMatrix<T>, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    sample_rows(&Sampler::gamma(alpha, sigma)?, n, seed)
}

fn sample_rows(sampler: &Sampler, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Contract("sample count must be at least 1".into()));
    }
    let chunks = run_chunks(Execution::Parallel, n, seed, Stream::Sample, |rng, range| {
        let mut s = sampler.scratch();
        range
            .map(|_| {
                sampler.draw_into(rng, &mut s);
                s.out.clone()
            })
            .collect::<Vec<_>>()
    });
    Ok(chunks.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn cov(rows: &[&[f64]]) -> CovarianceMatrix<f64> {
        CovarianceMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn identity_sample_covariance() {
        let n = 20_000;
        let xs = sample_gaussian(&CovarianceMatrix::<f64>::identity(3), n, 11).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let c: f64 = xs.iter().map(|x| x[i] * x[j]).sum::<f64>() / n as f64;
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((c - target).abs() < 4.0 / (n as f64).sqrt(), "{i}{j}: {c}");
            }
        }
    }

    #[test]
    fn rank_one_draws_coincide() {
        let s = GaussianSampler::new(&cov(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        assert_eq!(s.kind(), FactorKind::Eigen);
        for x in sample_gaussian(&cov(&[&[1.0, 1.0], &[1.0, 1.0]]), 500, 3).unwrap() {
            assert!((x[0] - x[1]).abs() <= 1e-12 * x[0].abs().max(1.0));
        }
    }

    #[test]
    fn slightly_negative_eigenvalue_is_clamped_and_reported() {
        let s = GaussianSampler::new(&CovarianceMatrix::with_tol(
            SymMatrixF::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0 - 1e-13]]).unwrap(),
            1e-10,
        )
        .unwrap())
        .unwrap();
        assert_eq!(s.kind(), FactorKind::Eigen);
        assert!(s.clamp_magnitude() > 0.0 && s.clamp_magnitude() < 1e-12);
    }

    type SymMatrixF = crate::matrix::SymMatrix<f64>;

    #[test]
    fn gamma_needs_half_integer_shape() {
        let id = CovarianceMatrix::<Rational>::identity(2);
        assert!(matches!(
            GammaSampler::new(&Rational::from_ratio(1, 3), &id),
            Err(Error::Unsupported(_))
        ));
        assert!(GammaSampler::new(&Rational::from_ratio(3, 2), &id).is_ok());
    }

    #[test]
    fn gamma_half_mean() {
        let n = 40_000;
        let xs = sample_gamma(&0.5, &CovarianceMatrix::<f64>::identity(2), n, 5).unwrap();
        let m: f64 = xs.iter().map(|x| x[0]).sum::<f64>() / n as f64;
        // Var = α σ² = 1/2.
        assert!((m - 0.5).abs() < 4.0 * (0.5f64 / n as f64).sqrt());
    }

    #[test]
    fn marginal_helpers() {
        let s = Sampler::abs_gaussian(&CovarianceMatrix::<f64>::identity(1)).unwrap();
        let tail = s.marginal_upper(0, 1.0);
        assert!((tail - 0.317_310_507_862_914).abs() < 1e-10, "{tail}");
        let q = s.marginal_quantile(0, 0.5).unwrap();
        assert!((s.marginal_upper(0, q) - 0.5).abs() < 1e-12);
        let g = Sampler::gamma(&1.0, &CovarianceMatrix::<f64>::identity(1)).unwrap();
        assert!((g.marginal_upper(0, 2.0) - (-2.0f64).exp()).abs() < 1e-12);
    }
}
