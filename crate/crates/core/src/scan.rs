//! Searches covariance families for negative product-inequality gaps.
//!
//! Every reported violation has been evaluated on the exact backend: float-mode
//! candidates are rationalized (nearest rationals within `1e-12`) and recomputed
//! before they are emitted.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gamma::{certify_strong_gpi, gamma_gpi_gap, GammaParams};
use crate::gaussian::gaussian_gpi_gap;
use crate::index::{MultiIndex, Partition, SignMatrix};
use crate::matrix::{check_psd, CovarianceMatrix, SymMatrix};
use crate::mc::rng::{stream_rng, Stream};
use crate::par::{map_slice, Execution};
use crate::scalar::{rationalize, Rational, Scalar};

/// Inclusive evenly spaced grid `start, …, end` with `steps` points.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamRange {
    pub start: Rational,
    pub end: Rational,
    pub steps: usize,
}

impl ParamRange {
    pub fn new(start: Rational, end: Rational, steps: usize) -> Result<Self> {
        if steps == 0 || (steps == 1 && start != end) {
            return Err(Error::Contract("a range needs at least one point (two if start ≠ end)".into()));
        }
        Ok(ParamRange { start, end, steps })
    }

    /// `"start:end:steps"` or a single value.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        match parts.as_slice() {
            [v] => {
                let v = Rational::parse(v)?;
                ParamRange::new(v.clone(), v, 1)
            }
            [a, b, n] => ParamRange::new(
                Rational::parse(a)?,
                Rational::parse(b)?,
                n.trim().parse().map_err(|_| Error::Parse(n.to_string()))?,
            ),
            _ => Err(Error::Parse(text.to_owned())),
        }
    }

    pub fn values(&self) -> Vec<Rational> {
        if self.steps == 1 {
            return vec![self.start.clone()];
        }
        let span = self.end.clone() - self.start.clone();
        (0..self.steps)
            .map(|i| {
                self.start.clone() + span.clone() * Rational::from_ratio(i as i64, (self.steps - 1) as i64)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// Unit variances, `σ₁₃ = σ₂₃ = ρ`, free `σ₁₂`.
    Counterexample { rho: ParamRange, sigma12: ParamRange },
    /// `Σ = BBᵀ` with `B` entries in `{−1, −3/4, …, 1}`.
    RandomPsd { count: usize, min_dim: usize, max_dim: usize },
    /// `S·BBᵀ·S` with `B ≥ 0` entrywise and a random sign matrix `S`.
    RandomSignedNonneg { count: usize, min_dim: usize, max_dim: usize },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Counterexample { .. } => "counterexample_family",
            Family::RandomPsd { .. } => "random_psd",
            Family::RandomSignedNonneg { .. } => "random_signed_nonneg",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    Gaussian,
    Gamma { alpha: Rational },
}

/// Which exponent vectors to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub enum Exponents {
    Fixed(MultiIndex),
    /// Gamma: every `n` with `Σ n_j ≤ T`. Gaussian: every even `n` with `Σ n_j ≤ T`.
    AllUpTo(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Partitions {
    All,
    Explicit(Vec<Partition>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Exact,
    Float,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanSpec {
    pub family: Family,
    pub distribution: Distribution,
    pub exponents: Exponents,
    pub partitions: Partitions,
    pub backend: Backend,
    pub seed: u64,
    pub execution: Execution,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanViolation {
    pub instance: usize,
    pub sigma: Vec<Vec<String>>,
    pub n: Vec<u32>,
    pub partition: Vec<usize>,
    pub gap: String,
    pub gap_f64: f64,
}

/// One line per grid point / random draw.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub instance: usize,
    /// `rho=…;sigma12=…` for the counterexample family, `d=…` otherwise.
    pub params: String,
    /// `evaluated` or `skipped_not_psd`.
    pub status: String,
    pub min_gap: Option<String>,
    pub min_gap_f64: Option<f64>,
    pub n: Option<Vec<u32>>,
    pub partition: Option<Vec<usize>>,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub family: String,
    pub backend: Backend,
    pub instances: usize,
    pub evaluated: usize,
    pub skipped_infeasible: usize,
    pub comparisons: usize,
    pub violations: Vec<ScanViolation>,
    /// Most negative gap over the whole scan.
    pub minimum: Option<ScanViolation>,
    /// Counterexample family at `n = (2,2,2)`, `I = {1,2}`: grid points where the computed gap
    /// differs from `4ρ²(1 + 2σ₁₂)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula_mismatches: Option<usize>,
    pub runtime_ms: u128,
    pub rows: Vec<ScanRow>,
}

impl ScanReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,params,status,min_gap,min_gap_f64,n,partition,violations\n");
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.instance,
                r.params,
                r.status,
                r.min_gap.clone().unwrap_or_default(),
                r.min_gap_f64.map(|g| g.to_string()).unwrap_or_default(),
                r.n.as_ref()
                    .map(|n| n.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
                    .unwrap_or_default(),
                r.partition.as_deref().map(join).unwrap_or_default(),
                r.violations,
            ));
        }
        out
    }
}

struct Instance {
    params: String,
    sigma: SymMatrix<Rational>,
    /// `(ρ, σ₁₂)` for the counterexample family.
    rho_sigma12: Option<(Rational, Rational)>,
}

fn generate(spec: &ScanSpec) -> Result<Vec<Instance>> {
    match &spec.family {
        Family::Counterexample { rho, sigma12 } => {
            let mut out = Vec::new();
            for r in rho.values() {
                for s in sigma12.values() {
                    let one = Rational::from_i64(1);
                    let rows = vec![
                        vec![one.clone(), s.clone(), r.clone()],
                        vec![s.clone(), one.clone(), r.clone()],
                        vec![r.clone(), r.clone(), one.clone()],
                    ];
                    out.push(Instance {
                        params: format!("rho={};sigma12={}", r, s),
                        sigma: SymMatrix::from_rows(rows)?,
                        rho_sigma12: Some((r.clone(), s)),
                    });
                }
            }
            Ok(out)
        }
        Family::RandomPsd { count, min_dim, max_dim } => random_family(spec.seed, *count, *min_dim, *max_dim, false),
        Family::RandomSignedNonneg { count, min_dim, max_dim } => {
            random_family(spec.seed, *count, *min_dim, *max_dim, true)
        }
    }
}

fn random_family(seed: u64, count: usize, min_dim: usize, max_dim: usize, signed_nonneg: bool) -> Result<Vec<Instance>> {
    if min_dim < 2 || min_dim > max_dim || max_dim > crate::matrix::MAX_DIM {
        return Err(Error::Contract(format!("invalid dimension range {min_dim}..={max_dim}")));
    }
    Ok((0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, Stream::Scan, i);
            let d = rng.random_range(min_dim..=max_dim);
            let sigma = if signed_nonneg {
                let s = SignMatrix::from_bits(d, rng.random_range(0..1u32 << d));
                random_gram(&mut rng, d, 0..=4).conjugate_by_sign(&s)
            } else {
                random_gram(&mut rng, d, -4..=4)
            };
            Instance { params: format!("d={d}"), sigma, rho_sigma12: None }
        })
        .collect())
}

/// `BBᵀ` with `B_ij = k/4`, `k` uniform in `range`, `d` columns.
pub fn random_gram<R: Rng + ?Sized>(rng: &mut R, d: usize, range: std::ops::RangeInclusive<i64>) -> SymMatrix<Rational> {
    let b: Vec<Vec<i64>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(range.clone())).collect()).collect();
    SymMatrix::from_fn(d, |i, j| {
        Rational::from_ratio((0..d).map(|k| b[i][k] * b[j][k]).sum::<i64>(), 16)
    })
}

struct Outcome {
    comparisons: usize,
    /// `(n, partition, exact gap)` for every negative gap.
    negative: Vec<(Vec<u32>, Vec<usize>, Rational)>,
    minimum: Option<(Vec<u32>, Vec<usize>, Rational)>,
    formula_mismatch: bool,
}

fn exponent_list(spec: &ScanSpec, d: usize) -> Result<Vec<MultiIndex>> {
    match (&spec.exponents, &spec.distribution) {
        (Exponents::Fixed(n), _) => {
            if n.dim() != d {
                return Err(Error::Structural(format!("exponents have {} entries, matrix is {d}×{d}", n.dim())));
            }
            Ok(vec![n.clone()])
        }
        (Exponents::AllUpTo(t), Distribution::Gaussian) => Ok(MultiIndex::all_with_total_at_most(d, t / 2)
            .into_iter()
            .map(|m| m.doubled())
            .collect()),
        (Exponents::AllUpTo(t), Distribution::Gamma { .. }) => Ok(MultiIndex::all_with_total_at_most(d, *t)),
    }
}

fn partition_list(spec: &ScanSpec, d: usize) -> Result<Vec<Partition>> {
    match &spec.partitions {
        Partitions::All => Ok(Partition::all_nontrivial(d)),
        Partitions::Explicit(ps) => {
            if ps.iter().any(|p| p.dim() != d) {
                return Err(Error::Structural("partition dimension differs from the matrix".into()));
            }
            Ok(ps.clone())
        }
    }
}

/// Gap on backend `T` for one (Σ, n, I).
fn gap_on<T: Scalar>(spec: &ScanSpec, sigma: &CovarianceMatrix<T>, n: &MultiIndex, p: &Partition) -> Result<T> {
    match &spec.distribution {
        Distribution::Gaussian => Ok(gaussian_gpi_gap(sigma, n, p)?.gap),
        Distribution::Gamma { alpha } => {
            let a = T::parse(&alpha.render())?;
            Ok(gamma_gpi_gap(&GammaParams::new(a, sigma.clone())?, n, p)?.gap)
        }
    }
}

fn evaluate(spec: &ScanSpec, inst: &Instance) -> Result<Option<Outcome>> {
    if !check_psd(&inst.sigma).psd {
        return Ok(None);
    }
    let exact = CovarianceMatrix::new(inst.sigma.clone())?;
    let d = exact.dim();
    let ns = exponent_list(spec, d)?;
    let parts = partition_list(spec, d)?;
    let mut out = Outcome { comparisons: 0, negative: Vec::new(), minimum: None, formula_mismatch: false };
    let record = |n: &[u32], p: Vec<usize>, gap: Rational, out: &mut Outcome| {
        out.comparisons += 1;
        if out.minimum.as_ref().is_none_or(|m| gap < m.2) {
            out.minimum = Some((n.to_vec(), p.clone(), gap.clone()));
        }
        if gap < Rational::from_i64(0) {
            out.negative.push((n.to_vec(), p, gap));
        }
    };
    let batch_gamma = matches!(
        (&spec.distribution, &spec.exponents, &spec.partitions, spec.backend),
        (Distribution::Gamma { .. }, Exponents::AllUpTo(_), Partitions::All, Backend::Exact)
    );
    if batch_gamma {
        let (Distribution::Gamma { alpha }, Exponents::AllUpTo(t)) = (&spec.distribution, &spec.exponents) else {
            unreachable!()
        };
        let summary = certify_strong_gpi(&GammaParams::new(alpha.clone(), exact.clone())?, *t)?;
        out.comparisons = summary.checked;
        out.negative = summary.negative;
        // Certification keeps only the minimum value; rerun it for its location.
        if let Some(min) = summary.min_gap {
            'find: for n in &ns {
                for p in &parts {
                    let g = gap_on(spec, &exact, n, p)?;
                    if g == min {
                        out.minimum = Some((n.as_slice().to_vec(), p.one_based(), g));
                        break 'find;
                    }
                }
            }
        }
    } else {
        let float = exact.to_f64();
        for n in &ns {
            for p in &parts {
                let gap = match spec.backend {
                    Backend::Exact => gap_on(spec, &exact, n, p)?,
                    Backend::Float => {
                        let g = gap_on(spec, &float, n, p)?;
                        if g < -f64::tolerance(&g) {
                            // Re-verify on rationalized inputs before it can be reported.
                            let rows = float
                                .rows()
                                .into_iter()
                                .map(|r| r.into_iter().map(|x| rationalize(x, 1e-12)).collect::<Result<Vec<_>>>())
                                .collect::<Result<Vec<_>>>()?;
                            let re = CovarianceMatrix::new(SymMatrix::from_rows(rows)?)?;
                            gap_on(spec, &re, n, p)?
                        } else {
                            rationalize(g, 1e-12)?
                        }
                    }
                };
                if let (Some((rho, s12)), true) = (&inst.rho_sigma12, n.as_slice() == [2, 2, 2] && p.mask() == 0b011) {
                    let formula = Rational::from_i64(4)
                        * rho.clone()
                        * rho.clone()
                        * (Rational::from_i64(1) + Rational::from_i64(2) * s12.clone());
                    if spec.backend == Backend::Exact && gap != formula {
                        out.formula_mismatch = true;
                    }
                }
                record(n.as_slice(), p.one_based(), gap, &mut out);
            }
        }
    }
    Ok(Some(out))
}

fn render_rows(m: &SymMatrix<Rational>) -> Vec<Vec<String>> {
    m.rows().iter().map(|r| r.iter().map(Scalar::render).collect()).collect()
}

pub fn run_scan(spec: &ScanSpec) -> Result<ScanReport> {
    let started = Instant::now();
    let instances = generate(spec)?;
    if instances.is_empty() {
        return Err(Error::Contract("scan spec produced no instances".into()));
    }
    let results = map_slice(spec.execution, &instances, |inst| evaluate(spec, inst));
    let mut report = ScanReport {
        family: spec.family.name().to_owned(),
        backend: spec.backend,
        instances: instances.len(),
        evaluated: 0,
        skipped_infeasible: 0,
        comparisons: 0,
        violations: Vec::new(),
        minimum: None,
        formula_mismatches: matches!(spec.family, Family::Counterexample { .. }).then_some(0),
        runtime_ms: 0,
        rows: Vec::with_capacity(instances.len()),
    };
    let mut min_exact: Option<Rational> = None;
    for (i, (inst, res)) in instances.iter().zip(results).enumerate() {
        let Some(out) = res? else {
            report.skipped_infeasible += 1;
            report.rows.push(ScanRow {
                instance: i,
                params: inst.params.clone(),
                status: "skipped_not_psd".into(),
                min_gap: None,
                min_gap_f64: None,
                n: None,
                partition: None,
                violations: 0,
            });
            continue;
        };
        report.evaluated += 1;
        report.comparisons += out.comparisons;
        if out.formula_mismatch {
            *report.formula_mismatches.get_or_insert(0) += 1;
        }
        let sigma = render_rows(&inst.sigma);
        let violation = |(n, p, g): &(Vec<u32>, Vec<usize>, Rational)| ScanViolation {
            instance: i,
            sigma: sigma.clone(),
            n: n.clone(),
            partition: p.clone(),
            gap: g.render(),
            gap_f64: g.to_f64(),
        };
        report.rows.push(ScanRow {
            instance: i,
            params: inst.params.clone(),
            status: "evaluated".into(),
            min_gap: out.minimum.as_ref().map(|m| m.2.render()),
            min_gap_f64: out.minimum.as_ref().map(|m| m.2.to_f64()),
            n: out.minimum.as_ref().map(|m| m.0.clone()),
            partition: out.minimum.as_ref().map(|m| m.1.clone()),
            violations: out.negative.len(),
        });
        report.violations.extend(out.negative.iter().map(violation));
        if let Some(m) = &out.minimum {
            if min_exact.as_ref().is_none_or(|cur| m.2 < *cur) {
                min_exact = Some(m.2.clone());
                report.minimum = Some(violation(m));
            }
        }
    }
    report.runtime_ms = started.elapsed().as_millis();
    Ok(report)
}
