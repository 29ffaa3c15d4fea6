//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use gpi_core::gamma::{certify_strong_gpi, MomentTable};
use gpi_core::gaussian::abs_moment_univariate;
use gpi_core::mc::{negative_exponent_gap, survival_integral_moment, McConfig, Sampler};
use gpi_core::par::map_range;
use gpi_core::scan::random_gram;
use gpi_core::structure::ell_correlation;
use gpi_core::{
    check_psd, gamma_moment, gamma_sum_moment, gaussian_gpi_gap, gaussian_weak_gpi_gap, mtp2_check, sign_balance,
    structure_ell_check, trace_power_series, wick_moment, CovarianceMatrix, Execution, GammaParams, MultiIndex,
    Partition, Rational, Scalar, SignMatrix, SymMatrix,
};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn family(rho: &Rational, s12: &Rational) -> SymMatrix<Rational> {
    let one = Rational::one();
    SymMatrix::from_rows(vec![
        vec![one.clone(), s12.clone(), rho.clone()],
        vec![s12.clone(), one.clone(), rho.clone()],
        vec![rho.clone(), rho.clone(), one],
    ])
    .unwrap()
}

/// Random PSD Gram matrix of dimension `lo..=hi` with entries in multiples of 1/16.
fn random_cov(r: &mut ChaCha8Rng, lo: usize, hi: usize) -> CovarianceMatrix<Rational> {
    let d = r.random_range(lo..=hi);
    CovarianceMatrix::new(random_gram(r, d, -4..=4)).unwrap()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let n = MultiIndex::uniform(3, 2);
    let p = Partition::new(3, &[0, 1]).unwrap();
    let mut count = 0;
    for i in 0..20 {
        let rho = q(2 * i - 19, 40);
        let lo = q(2, 1) * rho.clone() * rho.clone() - Rational::one();
        for j in 0..20 {
            // Strictly inside the PSD region σ₁₂ ∈ [2ρ² − 1, 1].
            let s12 = lo.clone() + (Rational::one() - lo.clone()) * q(2 * j + 1, 40);
            let sym = family(&rho, &s12);
            let cov = CovarianceMatrix::new(sym.clone()).map_err(|e| format!("ρ={rho} σ₁₂={s12}: {e}"))?;
            let gap = gaussian_gpi_gap(&cov, &n, &p).map_err(|e| e.to_string())?.gap;
            let (s11, s22, s13, s23) = (sym.get(0, 0), sym.get(1, 1), sym.get(0, 2), sym.get(1, 2));
            let entrywise = q(2, 1)
                * (s11.clone() * s23.clone() * s23.clone()
                    + q(4, 1) * s12.clone() * s13.clone() * s23.clone()
                    + s13.clone() * s13.clone() * s22.clone());
            let closed = q(4, 1) * rho.clone() * rho.clone() * (Rational::one() + q(2, 1) * s12.clone());
            ensure(gap == entrywise && gap == closed, || format!("ρ={rho} σ₁₂={s12}: {gap} vs {closed}"))?;
            count += 1;
        }
    }
    for (s12, rho, expected) in [(q(-3, 5), q(2, 5), q(-16, 125)), (q(-3, 4), q(3, 10), q(-9, 50))] {
        let sym = family(&rho, &s12);
        ensure(check_psd(&sym).psd, || format!("ρ={rho} σ₁₂={s12} not PSD"))?;
        let gap = gaussian_gpi_gap(&CovarianceMatrix::new(sym).unwrap(), &n, &p).unwrap().gap;
        ensure(gap == expected, || format!("ρ={rho} σ₁₂={s12}: {gap} ≠ {expected}"))?;
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{count} grid points, gaps -16/125 and -9/50"))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let half = q(1, 2);
    let results = map_range(Execution::Parallel, 100, |k| -> Result<usize, String> {
        let mut r = rng(200 + k as u64);
        let cov = random_cov(&mut r, 1, 4);
        let params = GammaParams::new(half.clone(), cov.clone()).unwrap();
        let mut checked = 0;
        for n in MultiIndex::all_with_total_at_most(cov.dim(), 8) {
            let g = gamma_moment(&params, &n).map_err(|e| e.to_string())?.moment;
            let w = wick_moment(&cov, &n.doubled()).map_err(|e| e.to_string())?.moment;
            let scale = Rational::from_i64(1i64 << n.total());
            ensure(g.clone() * scale.clone() == w, || format!("instance {k}, n={:?}: {g}·{scale} ≠ {w}", n.as_slice()))?;
            checked += 1;
        }
        Ok(checked)
    });
    let checked: usize = results.into_iter().sum::<Result<usize, String>>()?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("100 matrices, {checked} exponent vectors, zero residual"))
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let mut r = rng(3);
    let mut matrices = Vec::new();
    let mut dims = [0usize; 5];
    while matrices.len() < 200 {
        let cov = random_cov(&mut r, 2, 4);
        let sym = cov.as_sym();
        if sign_balance(sym, &Rational::zero()).feasible {
            dims[cov.dim()] += 1;
            matrices.push(cov);
        }
    }
    let alphas = [q(1, 2), q(1, 1), q(3, 2), q(2, 1)];
    let results = map_range(Execution::Parallel, matrices.len() * alphas.len(), |k| -> Result<usize, String> {
        let cov = &matrices[k / alphas.len()];
        let params = GammaParams::new(alphas[k % alphas.len()].clone(), cov.clone()).unwrap();
        let s = certify_strong_gpi(&params, 6).map_err(|e| e.to_string())?;
        ensure(s.negative.is_empty(), || format!("matrix {}: negative gaps {:?}", k / alphas.len(), s.negative))?;
        Ok(s.checked)
    });
    let checked: usize = results.into_iter().sum::<Result<usize, String>>()?;
    within(start.elapsed(), Duration::from_secs(600))?;
    Ok(format!(
        "200 balanced matrices (d=2:{}, d=3:{}, d=4:{}), {checked} gaps ≥ 0",
        dims[2], dims[3], dims[4]
    ))
}

fn exhaustive_balance(sym: &SymMatrix<Rational>) -> bool {
    let d = sym.dim();
    (0..1u32 << d).any(|bits| {
        let s = SignMatrix::from_bits(d, bits);
        (0..d).all(|i| (0..i).all(|j| Rational::from_i64((s.get(i) * s.get(j)) as i64) * sym.get(i, j).clone() >= Rational::zero()))
    })
}

fn criterion_4() -> Check {
    let mut r = rng(4);
    let mut feasible = 0;
    for k in 0..1000 {
        let d = r.random_range(2..=5);
        let mut rows = vec![vec![Rational::zero(); d]; d];
        for i in 0..d {
            rows[i][i] = Rational::one();
            for j in 0..i {
                let v = Rational::from_i64(r.random_range(-2..=2));
                rows[i][j] = v.clone();
                rows[j][i] = v;
            }
        }
        let sym = SymMatrix::from_rows(rows).unwrap();
        let out = sign_balance(&sym, &Rational::zero());
        ensure(out.feasible == exhaustive_balance(&sym), || format!("matrix {k}: {out:?}"))?;
        if let Some(s) = &out.sign_matrix {
            let conj = sym.conjugate_by_sign(s);
            ensure((0..d).all(|i| (0..d).all(|j| *conj.get(i, j) >= Rational::zero())), || format!("matrix {k}: bad witness"))?;
            feasible += 1;
        }
        if let Some(cycle) = &out.violating_cycle {
            let negatives = (0..cycle.len())
                .filter(|&t| *sym.get(cycle[t], cycle[(t + 1) % cycle.len()]) < Rational::zero())
                .count();
            let nonzero = (0..cycle.len()).all(|t| !sym.get(cycle[t], cycle[(t + 1) % cycle.len()]).is_zero());
            ensure(nonzero && negatives % 2 == 1, || format!("matrix {k}: cycle {cycle:?} is not odd"))?;
        }
    }
    for rho in [q(1, 4), q(1, 2), q(3, 4)] {
        let cov = CovarianceMatrix::from_rows(vec![vec![Rational::one(), rho.clone()], vec![rho.clone(), Rational::one()]]).unwrap();
        ensure(mtp2_check(&cov, None).unwrap().feasible, || format!("mtp2 infeasible at ρ={rho}"))?;
    }
    let cex = CovarianceMatrix::new(family(&q(2, 5), &q(-3, 5))).unwrap();
    ensure(!mtp2_check(&cex, None).unwrap().feasible, || "counterexample reported MTP2".into())?;
    for k in 0..100 {
        let d = r.random_range(3..=5);
        let mut a: Vec<Rational> = (0..d)
            .map(|_| {
                let m = r.random_range(1..=9);
                q(if r.random_bool(0.5) { m } else { -m }, 10)
            })
            .collect();
        if a[0] < Rational::zero() {
            a.iter_mut().for_each(|x| *x = -x.clone());
        }
        let found = structure_ell_check(&ell_correlation(&a), &Rational::zero())
            .map_err(|e| e.to_string())?
            .ok_or_else(|| format!("round trip {k}: structure not recognized"))?;
        ensure(found.exact_a().as_ref() == Some(&a), || format!("round trip {k}: {a:?} → {found:?}"))?;
    }
    Ok(format!("1000 signings ({feasible} feasible), 3 MTP2 + counterexample, 100 one-factor round trips"))
}

fn criterion_5() -> Check {
    let mut parts = Vec::new();
    for (k, rho) in [0.0, 0.5, 0.9].into_iter().enumerate() {
        let start = Instant::now();
        let cov = CovarianceMatrix::from_rows(vec![vec![1.0, rho], vec![rho, 1.0]]).unwrap();
        let s = Sampler::abs_gaussian(&cov).map_err(|e| e.to_string())?;
        let e = survival_integral_moment(&s, &[1.0, 1.0], &McConfig::new(1_000_000, 500 + k as u64))
            .map_err(|e| e.to_string())?;
        let truth = (2.0 / PI) * ((1.0 - rho * rho).sqrt() + rho * rho.asin());
        let tol = e.tolerance();
        ensure(e.consistent, || format!("ρ={rho}: direct {} vs integral {}", e.direct.mean, e.integral.mean))?;
        ensure((e.direct.mean - truth).abs() <= tol && (e.integral.mean - truth).abs() <= tol, || {
            format!("ρ={rho}: direct {} integral {} closed {truth} tol {tol}", e.direct.mean, e.integral.mean)
        })?;
        within(start.elapsed(), Duration::from_secs(60))?;
        parts.push(format!("ρ={rho}: |Δ|={:.1e} ≤ {tol:.1e}", (e.integral.mean - e.direct.mean).abs()));
    }
    Ok(parts.join(", "))
}

fn criterion_6() -> Check {
    let mut r = rng(6);
    let n = [0.5; 3];
    let cfg = |seed| McConfig::new(1_000_000, seed);
    let mut worst = f64::INFINITY;
    let mut runs = 0;
    for k in 0..20u64 {
        let b: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let rows = (0..3)
            .map(|i| (0..3).map(|j| (0..3).map(|l| b[i][l] * b[j][l]).sum::<f64>() + if i == j { 0.1 } else { 0.0 }).collect())
            .collect();
        let cov = CovarianceMatrix::from_rows(rows).map_err(|e| e.to_string())?;
        for p in Partition::all_nontrivial(3) {
            let e = negative_exponent_gap(&cov, &n, &p, &cfg(600 + k)).map_err(|e| e.to_string())?;
            let z = e.gap.mean / e.gap.stderr;
            ensure(z >= -3.0, || format!("matrix {k}, block {:?}: z = {z:.2}", p.one_based()))?;
            worst = worst.min(z);
            runs += 1;
        }
    }
    let rho = 0.8;
    let eq = CovarianceMatrix::from_rows((0..3).map(|i| (0..3).map(|j| if i == j { 1.0 } else { rho }).collect()).collect())
        .unwrap();
    let mut eq_z = Vec::new();
    for p in Partition::all_nontrivial(3) {
        let e = negative_exponent_gap(&eq, &n, &p, &cfg(700)).map_err(|e| e.to_string())?;
        let z = e.gap.mean / e.gap.stderr;
        ensure(z > 3.0, || format!("equicorrelated, block {:?}: z = {z:.2}", p.one_based()))?;
        eq_z.push(format!("{z:.1}"));
    }
    Ok(format!("{runs} random gaps, min z {worst:.2}; ρ=0.8 z = {}", eq_z.join("/")))
}

fn criterion_7() -> Check {
    let results = map_range(Execution::Parallel, 500, |k| -> Result<bool, String> {
        let mut r = rng(7_000 + k as u64);
        let cov = random_cov(&mut r, 2, 5);
        let has_negative = (0..cov.dim()).any(|i| (0..i).any(|j| *cov.get(i, j) < Rational::zero()));
        let gap = gaussian_weak_gpi_gap(&cov, &MultiIndex::uniform(cov.dim(), 2)).map_err(|e| e.to_string())?.gap;
        ensure(gap >= Rational::zero(), || format!("matrix {k}: weak gap {gap}"))?;
        Ok(has_negative)
    });
    let negative = results.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().filter(|&b| b).count();
    Ok(format!("500 matrices ({negative} with negative entries), all weak gaps ≥ 0"))
}

fn criterion_8() -> Check {
    let alphas = [q(1, 2), q(1, 1), q(3, 2), q(5, 3)];
    let results = map_range(Execution::Parallel, 100, |k| -> Result<(), String> {
        let mut r = rng(8_000 + k as u64);
        let cov = random_cov(&mut r, 2, 3);
        let d = cov.dim();
        let alpha = alphas[k % alphas.len()].clone();
        let params = GammaParams::new(alpha.clone(), cov.clone()).unwrap();
        let n = MultiIndex::new((0..d).map(|_| r.random_range(0..=3)).collect());
        let err = |e: gpi_core::Error| e.to_string();

        // Truncation stability: enlarging the caps leaves low-order coefficients alone.
        let tight = trace_power_series(&cov, &n, None, n.total()).map_err(err)?;
        let wide_caps = MultiIndex::uniform(d, n.total() + 2);
        let wide = trace_power_series(&cov, &wide_caps, Some(n.total() + 2), n.total() + 2).map_err(err)?;
        for (key, c) in tight.terms() {
            ensure(wide.coeff(key) == *c, || format!("instance {k}: coefficient {key:?} moved"))?;
        }
        let table = MomentTable::new(&params, n.total() + 2).map_err(err)?;
        let direct = gamma_moment(&params, &n).map_err(err)?.moment;
        ensure(table.moment(&n) == Some(direct.clone()), || format!("instance {k}: table disagrees"))?;

        // Shape additivity on a common Σ.
        let split = [
            GammaParams::new(alpha.clone() * q(1, 3), cov.clone()).unwrap(),
            GammaParams::new(alpha.clone() * q(2, 3), cov.clone()).unwrap(),
        ];
        let summed = gamma_sum_moment(&split, &n).map_err(err)?.moment;
        ensure(summed == direct, || format!("instance {k}: additivity {summed} ≠ {direct}"))?;

        // Recurrence exp against the power-series exp.
        let log_mgf = tight.scale(&alpha);
        ensure(log_mgf.exp().map_err(err)? == log_mgf.exp_by_powers().map_err(err)?, || {
            format!("instance {k}: exp methods differ")
        })?;

        // det(I − SΣS·T) = det(I − ΣT), so Σ → SΣS leaves every moment unchanged.
        let s = SignMatrix::from_bits(d, r.random_range(1..1u32 << d));
        let flipped = gamma_moment(&GammaParams::new(alpha, cov.conjugate_by_sign(&s)).unwrap(), &n).map_err(err)?.moment;
        ensure(flipped == direct, || format!("instance {k}: sign invariance {flipped} ≠ {direct}"))?;
        Ok(())
    });
    results.into_iter().collect::<Result<Vec<()>, _>>()?;
    Ok("100 instances each: truncation, additivity, exp agreement, sign invariance".into())
}

fn main() {
    // Cross-check of the univariate negative moment used by criterion 6.
    let m = abs_moment_univariate(1.0, -0.5).unwrap();
    assert!((m - 1.720_08).abs() < 1e-5, "{m}");

    let criteria: [(&str, fn() -> Check); 8] = [
        ("counterexample identity on the 20×20 grid", criterion_1),
        ("α = 1/2 bridge to Wick moments", criterion_2),
        ("strong inequality under sign balance", criterion_3),
        ("structure checks", criterion_4),
        ("survival-integral self-test", criterion_5),
        ("negative exponents", criterion_6),
        ("weak form at n = (2,…,2)", criterion_7),
        ("series engine properties", criterion_8),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match run() {
            Ok(detail) => println!("PASS {}: {name}: {detail} [{:.2?}]", k + 1, start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {}: {name}: {why} [{:.2?}]", k + 1, start.elapsed());
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
