use gpi_core::gaussian::wick_moment_by_matchings;
use gpi_core::matrix::jacobi_eigen;
use gpi_core::scan::random_gram;
use gpi_core::structure::ell_correlation;
use gpi_core::{
    check_psd, gamma_moment, sign_balance, structure_ell_check, wick_moment, CovarianceMatrix, GammaParams,
    MultiIndex, Rational, Scalar, SignMatrix, SymMatrix,
};
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gram(seed: u64, d: usize) -> SymMatrix<Rational> {
    random_gram(&mut ChaCha8Rng::seed_from_u64(seed), d, -4..=4)
}

fn signed(d: usize) -> impl Strategy<Value = SymMatrix<Rational>> {
    proptest::collection::vec(-2i64..=2, d * d).prop_map(move |v| {
        SymMatrix::from_fn(d, |i, j| {
            if i == j {
                Rational::one()
            } else {
                let (a, b) = (i.max(j), i.min(j));
                Rational::from_i64(v[a * d + b])
            }
        })
    })
}

fn brute_force_balanced(m: &SymMatrix<Rational>) -> bool {
    let d = m.dim();
    (0..1u32 << d).any(|bits| {
        let c = m.conjugate_by_sign(&SignMatrix::from_bits(d, bits));
        (0..d).all(|i| (0..d).all(|j| *c.get(i, j) >= Rational::zero()))
    })
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    det
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sign_conjugation_is_an_involution(seed in any::<u64>(), d in 1usize..=5, bits in any::<u32>()) {
        let m = gram(seed, d);
        let s = SignMatrix::from_bits(d, bits);
        prop_assert_eq!(m.conjugate_by_sign(&s).conjugate_by_sign(&s), m.clone());
        prop_assert_eq!(check_psd(&m.conjugate_by_sign(&s)).psd, check_psd(&m).psd);
    }

    #[test]
    fn wick_is_permutation_scale_and_sign_covariant(
        seed in any::<u64>(),
        d in 2usize..=4,
        exps in proptest::collection::vec(0u32..=3, 4),
        bits in any::<u32>(),
        scales in proptest::collection::vec(1i64..=3, 4),
    ) {
        let sym = gram(seed, d);
        let cov = CovarianceMatrix::new(sym.clone()).unwrap();
        let n = MultiIndex::new(exps[..d].to_vec());
        let base = wick_moment(&cov, &n).unwrap().moment;

        let perm: Vec<usize> = (0..d).rev().collect();
        let pn = MultiIndex::new(perm.iter().map(|&j| n.get(j)).collect());
        prop_assert_eq!(wick_moment(&cov.permuted(&perm), &pn).unwrap().moment, base.clone());

        let c: Vec<Rational> = scales[..d].iter().map(|&k| Rational::from_ratio(k, 2)).collect();
        let factor = (0..d).fold(Rational::one(), |acc, j| (0..n.get(j)).fold(acc, |a, _| a * c[j].clone()));
        prop_assert_eq!(wick_moment(&cov.scaled(&c), &n).unwrap().moment, base.clone() * factor);

        let s = SignMatrix::from_bits(d, bits);
        let flips = (0..d).filter(|&j| s.get(j) < 0 && n.get(j) % 2 == 1).count();
        let expected = if flips % 2 == 1 { -base.clone() } else { base.clone() };
        prop_assert_eq!(wick_moment(&cov.conjugate_by_sign(&s), &n).unwrap().moment, expected);
    }

    #[test]
    fn wick_recursion_matches_matching_enumeration(
        seed in any::<u64>(),
        d in 1usize..=4,
        exps in proptest::collection::vec(0u32..=4, 4),
    ) {
        let cov = CovarianceMatrix::new(gram(seed, d)).unwrap();
        let n = MultiIndex::new(exps[..d].to_vec());
        prop_assume!(n.total() <= 12);
        let a = wick_moment(&cov, &n).unwrap();
        let b = wick_moment_by_matchings(&cov, &n).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gamma_half_equals_scaled_even_gaussian(
        seed in any::<u64>(),
        d in 1usize..=3,
        exps in proptest::collection::vec(0u32..=3, 3),
    ) {
        let cov = CovarianceMatrix::new(gram(seed, d)).unwrap();
        let n = MultiIndex::new(exps[..d].to_vec());
        let g = gamma_moment(&GammaParams::new(Rational::from_ratio(1, 2), cov.clone()).unwrap(), &n).unwrap().moment;
        let w = wick_moment(&cov, &n.doubled()).unwrap().moment;
        prop_assert_eq!(g * Rational::from_i64(1 << n.total()), w);
    }

    #[test]
    fn sign_balance_matches_exhaustive_search(m in (2usize..=5).prop_flat_map(signed)) {
        let out = sign_balance(&m, &Rational::zero());
        prop_assert_eq!(out.feasible, brute_force_balanced(&m));
        prop_assert_eq!(out.sign_matrix.is_some(), out.feasible);
        prop_assert_eq!(out.violating_cycle.is_some(), !out.feasible);
    }

    #[test]
    fn one_factor_structure_round_trips(nums in proptest::collection::vec((1i64..=19, any::<bool>()), 3..=6)) {
        let mut a: Vec<Rational> = nums
            .iter()
            .map(|&(k, neg)| Rational::from_ratio(if neg { -k } else { k }, 20))
            .collect();
        if a[0] < Rational::zero() {
            a.iter_mut().for_each(|x| *x = -x.clone());
        }
        let found = structure_ell_check(&ell_correlation(&a), &Rational::zero()).unwrap().unwrap();
        prop_assert_eq!(found.exact_a(), Some(a));
    }

    #[test]
    fn jacobi_eigenvalues_are_characteristic_roots(entries in proptest::collection::vec(-3.0f64..3.0, 36), d in 1usize..=6) {
        let m = SymMatrix::from_fn(d, |i, j| entries[i.max(j) * 6 + i.min(j)]);
        let (values, _) = jacobi_eigen(&m);
        prop_assert_eq!(values.len(), d);
        let trace: f64 = (0..d).map(|i| *m.get(i, i)).sum();
        prop_assert!((values.iter().sum::<f64>() - trace).abs() < 1e-9 * (1.0 + trace.abs()));
        let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for &lambda in &values {
            let shifted: Vec<Vec<f64>> = (0..d)
                .map(|i| (0..d).map(|j| m.get(i, j) - if i == j { lambda } else { 0.0 }).collect())
                .collect();
            prop_assert!(det(shifted).abs() < 1e-8 * scale.powi(d as i32), "λ = {lambda}");
        }
    }
}

#[test]
fn negative_entries_do_not_break_psd_certificate() {
    let m = SymMatrix::from_rows(vec![
        vec![Rational::from_i64(2), Rational::from_i64(-1)],
        vec![Rational::from_i64(-1), Rational::from_i64(2)],
    ])
    .unwrap();
    assert!(check_psd(&m).psd);
    assert_eq!(Scalar::to_f64(&wick_moment(&CovarianceMatrix::new(m).unwrap(), &MultiIndex::new(vec![1, 1])).unwrap().moment), -1.0);
}
