//! Monte Carlo estimators for the statements without a closed form: orthant
//! probabilities, upper-orthant dependence screens, the survival-integral
//! representation of product moments, and negative-exponent product gaps.
//!
//! All estimators are reproducible: the same seed, sample count, matrix and
//! operation give bit-identical results with or without the worker pool.

mod estimators;
pub mod rng;
mod sampler;
mod screen;

use serde::Serialize;
use statrs::distribution::ContinuousCDF;

use crate::error::{Error, Result};
use crate::par::Execution;

pub use estimators::{
    negative_exponent_gap, orthant_upper, survival_integral_moment, NegativeGapEstimate, SurvivalEstimate,
    SURVIVAL_GRID_POINTS, SURVIVAL_TAIL,
};
pub use sampler::{sample_gamma, sample_gaussian, FactorKind, GammaSampler, GaussianSampler, Sampler};
pub use screen::{
    correlation_inequality_screen, dependence_screen, Conclusion, DependenceProperty, DependenceVerdict,
    GridSpec, Violation, WeakGpiCrossCheck, MIN_JOINT_HITS,
};

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 20_240_101;
pub const DEFAULT_CI_LEVEL: f64 = 0.95;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Plain,
    /// Pairs `(Z, −Z)`; `n_samples` counts both halves of each pair.
    Antithetic,
}

/// Shared knobs of every estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub ci_level: f64,
    pub method: Method,
    pub execution: Execution,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            ci_level: DEFAULT_CI_LEVEL,
            method: Method::Plain,
            execution: Execution::Parallel,
        }
    }
}

impl McConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        McConfig { n_samples, seed, ..McConfig::default() }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_ci_level(mut self, ci_level: f64) -> Self {
        self.ci_level = ci_level;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::Contract(format!("need at least 2 samples, got {}", self.n_samples)));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Contract(format!("ci level must lie in (0,1), got {}", self.ci_level)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub ci_level: f64,
    pub seed: u64,
    pub method: Method,
}

impl MCEstimate {
    /// `mean ± z(ci_level)·stderr`, two-sided.
    pub fn ci(&self) -> (f64, f64) {
        let z = two_sided_z(self.ci_level);
        (self.mean - z * self.stderr, self.mean + z * self.stderr)
    }

    pub fn covers(&self, value: f64) -> bool {
        let (lo, hi) = self.ci();
        lo <= value && value <= hi
    }
}

pub(crate) fn two_sided_z(ci_level: f64) -> f64 {
    sampler::std_normal().inverse_cdf(0.5 + ci_level / 2.0)
}

/// Power sums of one scalar statistic.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Moments {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn estimate(&self, cfg: &McConfig, n_samples: usize) -> MCEstimate {
        MCEstimate {
            mean: self.mean(),
            stderr: (self.variance() / self.count as f64).sqrt(),
            n_samples,
            ci_level: cfg.ci_level,
            seed: cfg.seed,
            method: cfg.method,
        }
    }
}
