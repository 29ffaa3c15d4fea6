use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::abs_moment_univariate;
use crate::index::Partition;
use crate::matrix::CovarianceMatrix;
use crate::scalar::Scalar;

use super::rng::{reduce_chunks, Stream};
use super::sampler::Sampler;
use super::{MCEstimate, McConfig, Method, Moments};

/// Plain or antithetic mean of `f(V)` over `cfg.n_samples` draws.
pub(crate) fn estimate_mean<F>(sampler: &Sampler, cfg: &McConfig, op: Stream, f: F) -> Result<MCEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    cfg.validate()?;
    let units = match cfg.method {
        Method::Plain => cfg.n_samples,
        Method::Antithetic => cfg.n_samples.div_ceil(2),
    };
    let d = sampler.dim();
    let moments = reduce_chunks(
        cfg.execution,
        units,
        cfg.seed,
        op,
        Moments::default(),
        |rng, range| {
            let mut s = sampler.scratch();
            let mut mirror = vec![0.0; d];
            let mut m = Moments::default();
            for _ in range {
                match cfg.method {
                    Method::Plain => {
                        sampler.draw_into(rng, &mut s);
                        m.push(f(&s.out));
                    }
                    Method::Antithetic => {
                        sampler.draw_antithetic(rng, &mut s, &mut mirror);
                        m.push(0.5 * (f(&s.out) + f(&mirror)));
                    }
                }
            }
            m
        },
        |acc, part| acc.merge(part),
    );
    let n_samples = match cfg.method {
        Method::Plain => units,
        Method::Antithetic => 2 * units,
    };
    Ok(moments.estimate(cfg, n_samples))
}

/// `P(V_1 ≥ t_1, …, V_d ≥ t_d)`.
pub fn orthant_upper(sampler: &Sampler, t: &[f64], cfg: &McConfig) -> Result<MCEstimate> {
    if t.len() != sampler.dim() {
        return Err(Error::Structural(format!(
            "threshold vector has length {}, sampler dimension is {}",
            t.len(),
            sampler.dim()
        )));
    }
    if t.iter().any(|x| x.is_nan()) {
        return Err(Error::Contract("thresholds must be numbers".into()));
    }
    estimate_mean(sampler, cfg, Stream::Orthant, |v| {
        if v.iter().zip(t).all(|(v, t)| v >= t) {
            1.0
        } else {
            0.0
        }
    })
}

pub const SURVIVAL_GRID_POINTS: usize = 64;
/// Upper marginal tail mass left outside the integration box.
pub const SURVIVAL_TAIL: f64 = 1e-4;

/// Direct and survival-integral estimates of `E ∏ V_j^{n_j}`.
#[derive(Clone, Debug, Serialize)]
pub struct SurvivalEstimate {
    pub direct: MCEstimate,
    pub integral: MCEstimate,
    /// `|I_64 − I_32|`: the integral on the full grid against every other point.
    pub grid_error: f64,
    /// Empirical mean of `∏ Y_j − ∏ min(Y_j, T_j)`, the mass cut off at the box edge.
    pub tail_error: f64,
    /// Per-axis integration limits `T_j` (the `1 − 10⁻⁴` marginal quantiles of `Y_j`).
    pub limits: Vec<f64>,
    /// `|direct − integral| ≤ 3·√(se_d² + se_i²) + grid_error + tail_error`.
    pub consistent: bool,
}

impl SurvivalEstimate {
    pub fn truncation_bound(&self) -> f64 {
        self.grid_error + self.tail_error
    }

    /// Half-width used for agreement checks against a reference value.
    pub fn tolerance(&self) -> f64 {
        3.0 * (self.direct.stderr.powi(2) + self.integral.stderr.powi(2)).sqrt() + self.truncation_bound()
    }
}

/// Trapezoid rule on one axis, collapsed into a step function of the sample value.
///
/// With the empirical survival function `S(y) = N⁻¹ Σ_k ∏_j 1[Y_kj ≥ y_j]`, the tensor
/// trapezoid sum `Σ_y w(y) S(y)` factorizes as `N⁻¹ Σ_k ∏_j G_j(Y_kj)` where `G_j(v)` is
/// the total weight of the grid points `≤ v`.
struct AxisRule {
    points: Vec<f64>,
    cumulative: Vec<f64>,
}

impl AxisRule {
    fn new(points: Vec<f64>) -> Self {
        let m = points.len();
        let mut cumulative = Vec::with_capacity(m);
        let mut acc = 0.0;
        for i in 0..m {
            let left = if i > 0 { points[i] - points[i - 1] } else { 0.0 };
            let right = if i + 1 < m { points[i + 1] - points[i] } else { 0.0 };
            acc += 0.5 * (left + right);
            cumulative.push(acc);
        }
        AxisRule { points, cumulative }
    }

    /// Geometric grid on `(0, limit]` with `0` prepended.
    fn geometric(limit: f64, count: usize) -> Self {
        let ratio_span = SURVIVAL_TAIL;
        let mut points = vec![0.0];
        for i in 0..count - 1 {
            let e = (count - 2 - i) as f64 / (count - 2) as f64;
            points.push(limit * ratio_span.powf(e));
        }
        AxisRule::new(points)
    }

    fn coarse(&self) -> Self {
        let last = self.points.len() - 1;
        let points = self
            .points
            .iter()
            .enumerate()
            .filter(|&(i, _)| i % 2 == 0 || i == last)
            .map(|(_, &p)| p)
            .collect();
        AxisRule::new(points)
    }

    fn weight_below(&self, v: f64) -> f64 {
        let k = self.points.partition_point(|&p| p <= v);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }
}

#[derive(Clone, Copy, Default)]
struct SurvivalAcc {
    direct: Moments,
    fine: Moments,
    coarse_sum: f64,
    tail_sum: f64,
}

/// Self-test: the mean of `∏ Y_j`, `Y_j = V_j^{n_j}`, computed directly and
/// as the integral of the empirical joint survival function over the positive orthant.
pub fn survival_integral_moment(sampler: &Sampler, n: &[f64], cfg: &McConfig) -> Result<SurvivalEstimate> {
    cfg.validate()?;
    let d = sampler.dim();
    if n.len() != d {
        return Err(Error::Structural(format!("exponent vector has length {}, expected {d}", n.len())));
    }
    if !sampler.is_nonnegative() {
        return Err(Error::Contract("survival integral needs a nonnegative sampler (|X| or gamma)".into()));
    }
    for (j, &p) in n.iter().enumerate() {
        if !p.is_finite() || !sampler.power_moment_finite(p) {
            return Err(Error::Divergent(format!(
                "E V_{}^{p} is infinite for this marginal",
                j + 1
            )));
        }
    }
    let mut limits = Vec::with_capacity(d);
    for (j, &p) in n.iter().enumerate() {
        let t = if p == 0.0 {
            1.0
        } else if p > 0.0 {
            sampler.marginal_quantile(j, 1.0 - SURVIVAL_TAIL)?.powf(p)
        } else {
            sampler.marginal_quantile(j, SURVIVAL_TAIL)?.powf(p)
        };
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Contract(format!("degenerate marginal on axis {}", j + 1)));
        }
        limits.push(t);
    }
    let fine: Vec<AxisRule> = limits.iter().map(|&t| AxisRule::geometric(t, SURVIVAL_GRID_POINTS)).collect();
    let coarse: Vec<AxisRule> = fine.iter().map(AxisRule::coarse).collect();
    let transform = |v: &[f64], y: &mut [f64]| {
        for ((y, &v), &p) in y.iter_mut().zip(v).zip(n) {
            *y = if p == 0.0 { 1.0 } else { v.powf(p) };
        }
    };
    let acc = reduce_chunks(
        cfg.execution,
        cfg.n_samples,
        cfg.seed,
        Stream::Survival,
        SurvivalAcc::default(),
        |rng, range| {
            let mut s = sampler.scratch();
            let mut y = vec![0.0; d];
            let mut a = SurvivalAcc::default();
            for _ in range {
                sampler.draw_into(rng, &mut s);
                transform(&s.out, &mut y);
                let direct: f64 = y.iter().product();
                let capped: f64 = y.iter().zip(&limits).map(|(y, t)| y.min(*t)).product();
                let g_fine: f64 = y.iter().zip(&fine).map(|(y, r)| r.weight_below(*y)).product();
                let g_coarse: f64 = y.iter().zip(&coarse).map(|(y, r)| r.weight_below(*y)).product();
                a.direct.push(direct);
                a.fine.push(g_fine);
                a.coarse_sum += g_coarse;
                a.tail_sum += direct - capped;
            }
            a
        },
        |acc, part| {
            acc.direct.merge(part.direct);
            acc.fine.merge(part.fine);
            acc.coarse_sum += part.coarse_sum;
            acc.tail_sum += part.tail_sum;
        },
    );
    let plain = McConfig { method: Method::Plain, ..*cfg };
    let direct = acc.direct.estimate(&plain, cfg.n_samples);
    let integral = acc.fine.estimate(&plain, cfg.n_samples);
    let grid_error = (integral.mean - acc.coarse_sum / cfg.n_samples as f64).abs();
    let tail_error = acc.tail_sum / cfg.n_samples as f64;
    let mut out = SurvivalEstimate {
        direct,
        integral,
        grid_error,
        tail_error,
        limits,
        consistent: false,
    };
    out.consistent = (out.direct.mean - out.integral.mean).abs() <= out.tolerance();
    Ok(out)
}

/// `E∏|X_j|^{−n_j} − E∏_I|X_j|^{−n_j} · E∏_{I^c}|X_j|^{−n_j}` by Monte Carlo.
#[derive(Clone, Debug, Serialize)]
pub struct NegativeGapEstimate {
    pub gap: MCEstimate,
    pub joint: f64,
    pub block: f64,
    pub complement: f64,
    /// Which of (block, complement) used the closed-form univariate moment.
    pub analytic: [bool; 2],
    /// Sample kurtosis of the joint integrand.
    pub kurtosis: f64,
    pub warnings: Vec<String>,
}

/// Kurtosis above which negative-exponent estimates are flagged.
pub const KURTOSIS_WARNING: f64 = 1e3;

#[derive(Clone, Copy, Default)]
struct GapAcc {
    count: usize,
    s: [f64; 3],
    ss: [[f64; 3]; 3],
    f3: f64,
    f4: f64,
}

pub fn negative_exponent_gap<T: Scalar>(
    sigma: &CovarianceMatrix<T>,
    n: &[f64],
    partition: &Partition,
    cfg: &McConfig,
) -> Result<NegativeGapEstimate> {
    cfg.validate()?;
    let d = sigma.dim();
    if n.len() != d || partition.dim() != d {
        return Err(Error::Structural(format!(
            "exponents ({}) and partition ({}) must match dimension {d}",
            n.len(),
            partition.dim()
        )));
    }
    if let Some(p) = n.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::Contract(format!("negative-exponent gap needs every n_j in (0,1), got {p}")));
    }
    if partition.is_trivial() {
        return Err(Error::Contract("partition must split the coordinates into two nonempty blocks".into()));
    }
    let sampler = Sampler::abs_gaussian(sigma)?;
    let blocks = [partition.members(), partition.complement_members()];
    let analytic_value = |b: &[usize]| -> Result<Option<f64>> {
        if b.len() == 1 {
            let j = b[0];
            Ok(Some(abs_moment_univariate(sigma.get(j, j).to_f64(), -n[j])?))
        } else {
            Ok(None)
        }
    };
    let analytic = [analytic_value(&blocks[0])?, analytic_value(&blocks[1])?];
    let acc = reduce_chunks(
        cfg.execution,
        cfg.n_samples,
        cfg.seed,
        Stream::NegativeExponent,
        GapAcc::default(),
        |rng, range| {
            let mut s = sampler.scratch();
            let mut a = GapAcc::default();
            for _ in range {
                sampler.draw_into(rng, &mut s);
                let y: Vec<f64> = s.out.iter().zip(n).map(|(v, p)| v.powf(-p)).collect();
                let prod = |b: &[usize]| b.iter().map(|&j| y[j]).product::<f64>();
                let v = [y.iter().product::<f64>(), prod(&blocks[0]), prod(&blocks[1])];
                a.count += 1;
                for i in 0..3 {
                    a.s[i] += v[i];
                    for k in 0..3 {
                        a.ss[i][k] += v[i] * v[k];
                    }
                }
                a.f3 += v[0].powi(3);
                a.f4 += v[0].powi(4);
            }
            a
        },
        |acc, part| {
            acc.count += part.count;
            for i in 0..3 {
                acc.s[i] += part.s[i];
                for k in 0..3 {
                    acc.ss[i][k] += part.ss[i][k];
                }
            }
            acc.f3 += part.f3;
            acc.f4 += part.f4;
        },
    );
    let nn = acc.count as f64;
    let mean = acc.s.map(|s| s / nn);
    let cov = |i: usize, k: usize| (acc.ss[i][k] - acc.s[i] * acc.s[k] / nn) / (nn - 1.0);
    let block = analytic[0].unwrap_or(mean[1]);
    let complement = analytic[1].unwrap_or(mean[2]);
    // Gradient of f(F, A, B) = F − A·B; analytic blocks are constants.
    let mut grad = [1.0, -complement, -block];
    if analytic[0].is_some() {
        grad[1] = 0.0;
    }
    if analytic[1].is_some() {
        grad[2] = 0.0;
    }
    let mut var = 0.0;
    for i in 0..3 {
        for k in 0..3 {
            var += grad[i] * grad[k] * cov(i, k);
        }
    }
    let stderr = (var.max(0.0) / nn).sqrt();
    let m = mean[0];
    let central2 = acc.ss[0][0] / nn - m * m;
    let central4 = acc.f4 / nn - 4.0 * m * acc.f3 / nn + 6.0 * m * m * acc.ss[0][0] / nn - 3.0 * m.powi(4);
    let kurtosis = if central2 > 0.0 { central4 / (central2 * central2) } else { f64::NAN };
    let mut warnings = Vec::new();
    if kurtosis > KURTOSIS_WARNING {
        warnings.push(format!(
            "integrand kurtosis {kurtosis:.3e} exceeds {KURTOSIS_WARNING:.0e}; the standard error is unreliable"
        ));
    }
    Ok(NegativeGapEstimate {
        gap: MCEstimate {
            mean: m - block * complement,
            stderr,
            n_samples: acc.count,
            ci_level: cfg.ci_level,
            seed: cfg.seed,
            method: Method::Plain,
        },
        joint: m,
        block,
        complement,
        analytic: [analytic[0].is_some(), analytic[1].is_some()],
        kurtosis,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Execution;

    fn cov(rows: &[&[f64]]) -> CovarianceMatrix<f64> {
        CovarianceMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn univariate_orthant_matches_normal_tail() {
        let s = Sampler::abs_gaussian(&cov(&[&[1.0]])).unwrap();
        let est = orthant_upper(&s, &[1.0], &McConfig::new(200_000, 9)).unwrap();
        assert!((est.mean - 0.317_310_507_862_914).abs() < 4.0 * est.stderr);
        let raw = Sampler::gaussian(&cov(&[&[1.0, 0.3], &[0.3, 1.0]])).unwrap();
        let all = orthant_upper(&raw, &[-1e9, -1e9], &McConfig::new(1000, 1)).unwrap();
        assert_eq!(all.mean, 1.0);
    }

    #[test]
    fn parallel_and_sequential_are_bit_identical() {
        let s = Sampler::abs_gaussian(&cov(&[&[1.0, 0.5], &[0.5, 2.0]])).unwrap();
        let cfg = McConfig::new(50_000, 3);
        let a = orthant_upper(&s, &[0.5, 1.0], &cfg.with_execution(Execution::Parallel)).unwrap();
        let b = orthant_upper(&s, &[0.5, 1.0], &cfg.with_execution(Execution::Sequential)).unwrap();
        assert_eq!(a, b);
        let sa = survival_integral_moment(&s, &[1.0, 1.0], &cfg).unwrap();
        let sb = survival_integral_moment(&s, &[1.0, 1.0], &cfg.with_execution(Execution::Sequential)).unwrap();
        assert_eq!(sa.integral, sb.integral);
        assert_eq!(sa.direct, sb.direct);
    }

    #[test]
    fn antithetic_halves_raw_gaussian_mean_variance() {
        let raw = Sampler::gaussian(&cov(&[&[1.0]])).unwrap();
        let cfg = McConfig::new(10_000, 4).with_method(Method::Antithetic);
        let est = estimate_mean(&raw, &cfg, Stream::Orthant, |v| v[0]).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.n_samples, 10_000);
    }

    #[test]
    fn survival_univariate_abs_mean() {
        let s = Sampler::abs_gaussian(&cov(&[&[1.0]])).unwrap();
        let est = survival_integral_moment(&s, &[1.0], &McConfig::new(200_000, 2)).unwrap();
        let truth = (2.0 / std::f64::consts::PI).sqrt();
        assert!(est.consistent);
        assert!((est.direct.mean - truth).abs() <= est.tolerance());
        assert!((est.integral.mean - truth).abs() <= est.tolerance());
    }

    #[test]
    fn axis_rule_integrates_constant_survival() {
        // Y ≡ 1 has survival 1 on [0,1]: ∫ = 1.
        let r = AxisRule::geometric(1.0, SURVIVAL_GRID_POINTS);
        assert!((r.weight_below(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(r.weight_below(-1.0), 0.0);
    }

    #[test]
    fn survival_rejects_divergent_and_signed() {
        let s = Sampler::abs_gaussian(&cov(&[&[1.0]])).unwrap();
        assert!(matches!(
            survival_integral_moment(&s, &[-1.0], &McConfig::new(100, 1)),
            Err(Error::Divergent(_))
        ));
        let raw = Sampler::gaussian(&cov(&[&[1.0]])).unwrap();
        assert!(matches!(
            survival_integral_moment(&raw, &[1.0], &McConfig::new(100, 1)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn negative_gap_contracts_and_diagonal() {
        let id = CovarianceMatrix::<f64>::identity(2);
        let p = Partition::new(2, &[0]).unwrap();
        assert!(matches!(
            negative_exponent_gap(&id, &[1.0, 0.5], &p, &McConfig::new(100, 1)),
            Err(Error::Contract(_))
        ));
        let est = negative_exponent_gap(&id, &[0.5, 0.5], &p, &McConfig::new(200_000, 1)).unwrap();
        assert_eq!(est.analytic, [true, true]);
        assert!(est.gap.mean.abs() < 4.0 * est.gap.stderr);
    }
}
