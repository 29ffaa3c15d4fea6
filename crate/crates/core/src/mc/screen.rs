use serde::Serialize;
use statrs::distribution::ContinuousCDF;

use crate::error::{Error, Result};
use crate::gaussian::gaussian_weak_gpi_gap;
use crate::index::{MultiIndex, Partition};
use crate::matrix::{CovarianceMatrix, SymMatrix};
use crate::scalar::{rationalize, Rational, Scalar};

use super::rng::{reduce_chunks, Stream};
use super::sampler::{std_normal, Sampler};
use super::McConfig;

/// Grid points whose joint event was seen fewer times than this make a screen
/// inconclusive instead of consistent.
pub const MIN_JOINT_HITS: u64 = 50;

/// Largest `grid points × 2^d` count table a screen will allocate.
const MAX_TABLE: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DependenceProperty {
    #[serde(rename = "PUOD")]
    Puod,
    #[serde(rename = "SPUOD")]
    Spuod,
    #[serde(rename = "corr_ineq")]
    CorrIneq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    /// No grid point rejected. This is a non-rejection, never a proof.
    Consistent,
    Violated,
    /// No rejection, but some grid point had too few joint hits to be tested.
    Inconclusive,
}

/// Per-axis marginal quantile levels; the grid is their `d`-fold product.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub levels: Vec<f64>,
}

impl GridSpec {
    /// `k` levels at the midpoints `(2i − 1)/(2k)`: `k = 5` gives `0.1, 0.3, …, 0.9`.
    pub fn uniform(k: usize) -> Self {
        GridSpec { levels: (1..=k).map(|i| (2 * i - 1) as f64 / (2 * k) as f64).collect() }
    }

    /// Either a level count (`"5"`) or explicit levels (`"0.1,0.5,0.9"`).
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Ok(k) = t.parse::<usize>() {
            if k == 0 {
                return Err(Error::Contract("grid needs at least one level".into()));
            }
            return Ok(GridSpec::uniform(k));
        }
        let levels = t
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(s.to_owned())))
            .collect::<Result<Vec<_>>>()?;
        let g = GridSpec { levels };
        g.validate(true)?;
        Ok(g)
    }

    fn validate(&self, allow_one: bool) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Contract("grid needs at least one level".into()));
        }
        for &q in &self.levels {
            let ok = q > 0.0 && (q < 1.0 || (allow_one && q == 1.0));
            if !ok {
                return Err(Error::Contract(format!("grid level {q} outside (0,1)")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub t: Vec<f64>,
    /// One-based first block, absent for the full-product (PUOD) comparison.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<usize>>,
    pub deficit: f64,
    pub z: f64,
}

/// Exact weak-product gap rerun after a PUOD rejection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakGpiCrossCheck {
    pub n: Vec<u32>,
    pub gap: String,
    pub gap_f64: f64,
    pub weak_gpi_holds: bool,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DependenceVerdict {
    pub property: DependenceProperty,
    pub grid: Vec<Vec<f64>>,
    pub violations: Vec<Violation>,
    pub conclusion: Conclusion,
    /// Most negative z-score over all tested comparisons.
    pub min_z: f64,
    /// One-sided Bonferroni critical value over all comparisons.
    pub z_threshold: f64,
    pub comparisons: usize,
    pub underpowered: usize,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak_gpi_crosscheck: Option<WeakGpiCrossCheck>,
    pub note: String,
}

const NON_REJECTION_NOTE: &str =
    "a consistent verdict is a non-rejection on a finite grid, not a proof of the dependence property";

/// Joint-event counts for every grid point and every subset of axes.
struct Table {
    d: usize,
    points: Vec<Vec<usize>>,
    /// `counts[g][S]`: draws where exactly the axes in `S` passed at grid point `g`,
    /// later turned into "at least the axes in `S`" by a superset sum.
    counts: Vec<Vec<u64>>,
    n: u64,
}

impl Table {
    fn prob(&self, g: usize, mask: usize) -> f64 {
        self.counts[g][mask] as f64 / self.n as f64
    }

    fn superset_sums(&mut self) {
        let full = 1usize << self.d;
        for row in &mut self.counts {
            for bit in 0..self.d {
                for mask in 0..full {
                    if mask & (1 << bit) == 0 {
                        row[mask] += row[mask | (1 << bit)];
                    }
                }
            }
        }
    }
}

fn grid_points(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

/// Counts joint events `V_j ≥ t_j` (`upper`) or `V_j ≤ t_j` on the whole grid.
fn count_events(
    sampler: &Sampler,
    thresholds: &[Vec<f64>],
    upper: bool,
    cfg: &McConfig,
    op: Stream,
) -> Result<Table> {
    let d = sampler.dim();
    let k = thresholds[0].len();
    let points = grid_points(d, k);
    if points.len().saturating_mul(1 << d) > MAX_TABLE {
        return Err(Error::Resource(format!(
            "grid of {} points in dimension {d} exceeds the screen table limit",
            points.len()
        )));
    }
    let width = 1usize << d;
    let counts = reduce_chunks(
        cfg.execution,
        cfg.n_samples,
        cfg.seed,
        op,
        vec![vec![0u64; width]; points.len()],
        |rng, range| {
            let mut s = sampler.scratch();
            let mut local = vec![vec![0u64; width]; points.len()];
            let mut level = vec![0usize; d];
            for _ in range {
                sampler.draw_into(rng, &mut s);
                for j in 0..d {
                    let v = s.out[j];
                    // Upper: passes for indices below `level`; lower: at or above it.
                    level[j] = if upper {
                        thresholds[j].partition_point(|&t| t <= v)
                    } else {
                        thresholds[j].partition_point(|&t| t < v)
                    };
                }
                for (g, p) in points.iter().enumerate() {
                    let mut mask = 0usize;
                    for j in 0..d {
                        let pass = if upper { p[j] < level[j] } else { p[j] >= level[j] };
                        mask |= (pass as usize) << j;
                    }
                    local[g][mask] += 1;
                }
            }
            local
        },
        |acc, part| {
            for (a, p) in acc.iter_mut().zip(part) {
                for (x, y) in a.iter_mut().zip(p) {
                    *x += y;
                }
            }
        },
    );
    let mut table = Table { d, points, counts, n: cfg.n_samples as u64 };
    table.superset_sums();
    Ok(table)
}

fn bonferroni_z(ci_level: f64, comparisons: usize) -> f64 {
    std_normal().inverse_cdf(1.0 - (1.0 - ci_level) / comparisons.max(1) as f64)
}

fn mask_of(members: &[usize]) -> usize {
    members.iter().fold(0, |m, &j| m | (1 << j))
}

/// Deficit `joint − a·b` and its delta-method standard error, where `a`, `b` are the
/// block probabilities (`None` = estimated from the same draws, `Some` = analytic).
fn block_deficit(table: &Table, g: usize, masks: [usize; 2], analytic: [Option<f64>; 2]) -> (f64, f64) {
    let full = (1usize << table.d) - 1;
    let pf = table.prob(g, full);
    let pa = analytic[0].unwrap_or_else(|| table.prob(g, masks[0]));
    let pb = analytic[1].unwrap_or_else(|| table.prob(g, masks[1]));
    let n = table.n as f64;
    // Indicators: F ⊂ A, F ⊂ B and A ∩ B = F, so every covariance is a function of pf, pa, pb.
    let var_f = pf * (1.0 - pf);
    let mut var = var_f;
    let est_a = analytic[0].is_none();
    let est_b = analytic[1].is_none();
    if est_a {
        var += pb * pb * pa * (1.0 - pa) - 2.0 * pb * (pf - pf * pa);
    }
    if est_b {
        var += pa * pa * pb * (1.0 - pb) - 2.0 * pa * (pf - pf * pb);
    }
    if est_a && est_b {
        var += 2.0 * pa * pb * (pf - pa * pb);
    }
    (pf - pa * pb, (var.max(0.0) / n).sqrt())
}

fn z_score(deficit: f64, se: f64) -> f64 {
    if se > 0.0 {
        deficit / se
    } else if deficit < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

struct Comparison {
    point: usize,
    partition: Option<Partition>,
    deficit: f64,
    se: f64,
}

fn finish(
    property: DependenceProperty,
    table: &Table,
    thresholds: &[Vec<f64>],
    comparisons: Vec<Comparison>,
    cfg: &McConfig,
) -> DependenceVerdict {
    let full = (1usize << table.d) - 1;
    let z_threshold = bonferroni_z(cfg.ci_level, comparisons.len());
    let t_of = |g: usize| -> Vec<f64> {
        table.points[g].iter().enumerate().map(|(j, &i)| thresholds[j][i]).collect()
    };
    let underpowered = (0..table.points.len())
        .filter(|&g| table.counts[g][full] < MIN_JOINT_HITS)
        .count();
    let mut min_z = f64::INFINITY;
    let mut violations = Vec::new();
    for c in &comparisons {
        let z = z_score(c.deficit, c.se);
        min_z = min_z.min(z);
        if c.deficit < -z_threshold * c.se || (c.se == 0.0 && c.deficit < 0.0) {
            violations.push(Violation {
                t: t_of(c.point),
                partition: c.partition.map(|p| p.one_based()),
                deficit: c.deficit,
                z,
            });
        }
    }
    let conclusion = if !violations.is_empty() {
        Conclusion::Violated
    } else if underpowered > 0 {
        Conclusion::Inconclusive
    } else {
        Conclusion::Consistent
    };
    DependenceVerdict {
        property,
        grid: (0..table.points.len()).map(t_of).collect(),
        violations,
        conclusion,
        min_z,
        z_threshold,
        comparisons: comparisons.len(),
        underpowered,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        weak_gpi_crosscheck: None,
        note: NON_REJECTION_NOTE.to_owned(),
    }
}

fn abs_thresholds(sampler: &Sampler, grid: &GridSpec) -> Result<Vec<Vec<f64>>> {
    (0..sampler.dim())
        .map(|j| grid.levels.iter().map(|&q| sampler.marginal_quantile(j, q)).collect())
        .collect()
}

/// PUOD or SPUOD screen of `|X|`, `X ~ N_d(0,Σ)`, on a quantile grid.
///
/// PUOD compares the joint upper orthant with the product of the analytic marginals
/// `P(|X_j| ≥ t) = 2Φ(−t/√σ_jj)`; SPUOD compares it with the product of the two block
/// probabilities for every nontrivial partition. After a PUOD rejection the exact
/// weak-product gap at `crosscheck_n` (default all 2s) is computed as well; a PUOD
/// violation does not imply a product-inequality violation.
pub fn dependence_screen<T: Scalar>(
    sigma: &CovarianceMatrix<T>,
    property: DependenceProperty,
    grid: &GridSpec,
    crosscheck_n: Option<&MultiIndex>,
    cfg: &McConfig,
) -> Result<DependenceVerdict> {
    cfg.validate()?;
    grid.validate(false)?;
    let d = sigma.dim();
    let sampler = Sampler::abs_gaussian(sigma)?;
    let thresholds = abs_thresholds(&sampler, grid)?;
    let (op, partitions) = match property {
        DependenceProperty::Puod => (Stream::Puod, vec![]),
        DependenceProperty::Spuod => (Stream::Spuod, Partition::all_nontrivial(d)),
        DependenceProperty::CorrIneq => {
            return Err(Error::Contract("use correlation_inequality_screen for corr_ineq".into()))
        }
    };
    let table = count_events(&sampler, &thresholds, true, cfg, op)?;
    let full = (1usize << d) - 1;
    let mut comparisons = Vec::new();
    for (g, p) in table.points.iter().enumerate() {
        let marginal = |j: usize| sampler.marginal_upper(j, thresholds[j][p[j]]);
        if property == DependenceProperty::Puod {
            let pf = table.prob(g, full);
            let product: f64 = (0..d).map(marginal).product();
            comparisons.push(Comparison {
                point: g,
                partition: None,
                deficit: pf - product,
                se: (pf * (1.0 - pf) / table.n as f64).sqrt(),
            });
        } else {
            for part in &partitions {
                let blocks = [part.members(), part.complement_members()];
                let analytic = [0, 1].map(|b| (blocks[b].len() == 1).then(|| marginal(blocks[b][0])));
                let (deficit, se) =
                    block_deficit(&table, g, [mask_of(&blocks[0]), mask_of(&blocks[1])], analytic);
                comparisons.push(Comparison { point: g, partition: Some(*part), deficit, se });
            }
        }
    }
    let mut verdict = finish(property, &table, &thresholds, comparisons, cfg);
    if property == DependenceProperty::Puod && verdict.conclusion == Conclusion::Violated {
        let n = crosscheck_n.cloned().unwrap_or_else(|| MultiIndex::uniform(d, 2));
        verdict.weak_gpi_crosscheck = Some(weak_crosscheck(sigma, &n)?);
    }
    Ok(verdict)
}

fn weak_crosscheck<T: Scalar>(sigma: &CovarianceMatrix<T>, n: &MultiIndex) -> Result<WeakGpiCrossCheck> {
    let rows = sigma
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|x| rationalize(x.to_f64(), 1e-12)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<Vec<Rational>>>>()?;
    let exact = CovarianceMatrix::new(SymMatrix::from_rows(rows)?)?;
    let report = gaussian_weak_gpi_gap(&exact, n)?;
    Ok(WeakGpiCrossCheck {
        n: n.as_slice().to_vec(),
        gap_f64: report.gap.to_f64(),
        weak_gpi_holds: report.gap >= Rational::from_i64(0),
        gap: report.gap.render(),
        note: "a PUOD violation does not imply a violation of the weak product inequality".to_owned(),
    })
}

/// Lower-orthant comparison `P(|X_j| ≤ t_j ∀j)` against `P(block) · P(complement)` for
/// each given partition. Grid levels are marginal probabilities `P(|X_j| ≤ t)`; a level
/// of `1` puts `t_j = ∞`.
pub fn correlation_inequality_screen<T: Scalar>(
    sigma: &CovarianceMatrix<T>,
    grid: &GridSpec,
    partitions: &[Partition],
    cfg: &McConfig,
) -> Result<DependenceVerdict> {
    cfg.validate()?;
    grid.validate(true)?;
    let d = sigma.dim();
    if partitions.iter().any(|p| p.dim() != d || p.is_trivial()) {
        return Err(Error::Contract("partitions must be nontrivial and match the dimension".into()));
    }
    let sampler = Sampler::abs_gaussian(sigma)?;
    let thresholds: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            grid.levels
                .iter()
                .map(|&q| if q >= 1.0 { Ok(f64::INFINITY) } else { sampler.marginal_quantile(j, q) })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let table = count_events(&sampler, &thresholds, false, cfg, Stream::CorrelationInequality)?;
    let mut comparisons = Vec::new();
    for (g, p) in table.points.iter().enumerate() {
        let marginal = |j: usize| 1.0 - sampler.marginal_upper(j, thresholds[j][p[j]]);
        for part in partitions {
            let blocks = [part.members(), part.complement_members()];
            let analytic = [0, 1].map(|b| (blocks[b].len() == 1).then(|| marginal(blocks[b][0])));
            let (deficit, se) = block_deficit(&table, g, [mask_of(&blocks[0]), mask_of(&blocks[1])], analytic);
            comparisons.push(Comparison { point: g, partition: Some(*part), deficit, se });
        }
    }
    Ok(finish(DependenceProperty::CorrIneq, &table, &thresholds, comparisons, cfg))
}
