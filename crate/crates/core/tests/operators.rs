mod common;

use common::{dot, jacobi_singular_values, l2, random_vec, rng};
use proptest::prelude::*;
use sesop::linop::{norm_estimate, DenseOperator, LinearOperator, MatrixOperator, SparseOperator};

fn random_dense(seed: u64, rows: usize, cols: usize) -> DenseOperator {
    let mut r = rng(seed);
    DenseOperator::new(rows, cols, random_vec(&mut r, rows * cols)).unwrap()
}

fn random_sparse(seed: u64, rows: usize, cols: usize) -> SparseOperator {
    let mut r = rng(seed);
    let vals = random_vec(&mut r, rows * cols);
    let per_row = (0..rows)
        .map(|i| {
            (0..cols)
                .filter(|j| (i * 7 + j * 3) % 4 == 0)
                .map(|j| (j, vals[i * cols + j]))
                .collect()
        })
        .collect();
    SparseOperator::from_rows(cols, per_row).unwrap()
}

#[test]
fn dense_adjointness_on_random_pairs() {
    let a = random_dense(1, 5, 7);
    let mut r = rng(2);
    for _ in 0..100 {
        let x = random_vec(&mut r, 7);
        let w = random_vec(&mut r, 5);
        let lhs = dot(&a.apply(&x).unwrap(), &w);
        let rhs = dot(&x, &a.apply_adjoint(&w).unwrap());
        assert!((lhs - rhs).abs() <= 1e-13 * l2(&x) * l2(&w) * 7.0);
    }
}

#[test]
fn sparse_matches_its_densification_exactly() {
    let s = random_sparse(3, 9, 6);
    let d = s.to_dense();
    let mut r = rng(4);
    for _ in 0..20 {
        let x = random_vec(&mut r, 6);
        let w = random_vec(&mut r, 9);
        assert_eq!(s.apply(&x).unwrap(), d.apply(&x).unwrap());
        assert_eq!(s.apply_adjoint(&w).unwrap(), d.apply_adjoint(&w).unwrap());
    }
}

#[test]
fn norm_estimate_matches_jacobi_svd() {
    let a = random_dense(11, 20, 30);
    let sv = jacobi_singular_values(a.entries(), 20, 30);
    let est = norm_estimate(&a, 1e-12, 10000).unwrap();
    assert!(
        (est.value - sv[0]).abs() <= 1e-6 * sv[0],
        "{} vs {}",
        est.value,
        sv[0]
    );
}

#[test]
fn norm_estimate_edge_cases() {
    assert!(
        (norm_estimate(&DenseOperator::identity(6), 1e-8, 1000)
            .unwrap()
            .value
            - 1.0)
            .abs()
            < 1e-12
    );
    assert_eq!(
        norm_estimate(&DenseOperator::zeros(3, 4), 1e-8, 1000)
            .unwrap()
            .value,
        0.0
    );
    assert!(norm_estimate(&DenseOperator::identity(2), 0.0, 10).is_err());
}

#[test]
fn matrix_files_round_trip() {
    let dense = MatrixOperator::parse("2 2\n1 2\n3 4\n").unwrap();
    assert!(matches!(dense, MatrixOperator::Dense(_)));
    assert_eq!(dense.apply(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    let sparse = MatrixOperator::parse("2 3 2\n0 2 5.0\n1 0 -1\n").unwrap();
    assert!(matches!(sparse, MatrixOperator::Sparse(_)));
    assert_eq!(sparse.apply(&[1.0, 1.0, 1.0]).unwrap(), vec![5.0, -1.0]);
    assert!(MatrixOperator::parse("2 2\n1 2 3\n").is_err());
    assert!(MatrixOperator::parse("2 2 1\n5 0 1\n").is_err());
    assert!(MatrixOperator::parse("").is_err());
}

proptest! {
    #[test]
    fn adjointness_holds_for_all_realizations(seed in 0u64..1000, rows in 1usize..12, cols in 1usize..12) {
        let a = random_dense(seed, rows, cols);
        let s = random_sparse(seed, rows, cols);
        let norm_a = norm_estimate(&a, 1e-8, 1000).unwrap().value.max(1e-300);
        let mut r = rng(seed + 1);
        let x = random_vec(&mut r, cols);
        let w = random_vec(&mut r, rows);
        let lhs = dot(&a.apply(&x).unwrap(), &w);
        let rhs = dot(&x, &a.apply_adjoint(&w).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * l2(&x) * l2(&w) * norm_a);
        let ls = dot(&s.apply(&x).unwrap(), &w);
        let rs = dot(&x, &s.apply_adjoint(&w).unwrap());
        prop_assert!((ls - rs).abs() <= 1e-12 * l2(&x) * l2(&w) * norm_a.max(1.0));
    }

    #[test]
    fn norm_estimate_bounds_random_probes(seed in 0u64..500) {
        let a = random_dense(seed, 8, 5);
        let tol = 1e-8;
        let n = norm_estimate(&a, tol, 1000).unwrap().value;
        let mut r = rng(seed ^ 0xabc);
        for _ in 0..10 {
            let x = random_vec(&mut r, 5);
            prop_assert!(l2(&a.apply(&x).unwrap()) <= n * l2(&x) * (1.0 + tol) + 1e-12);
        }
    }
}
