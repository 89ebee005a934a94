//! Numerical rank against exact Gaussian elimination over the rationals.

use dynrecon::matrix::{numerical_rank, DenseMatrix, RankTolerance};
use dynrecon::subspace::null_space;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

fn exact_rank(rows: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect())
        .collect();
    let ncols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..ncols {
        let Some(pivot) = (rank..a.len()).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, pivot);
        let pivot_row = a[rank].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != rank && !row[col].is_zero() {
                let factor = &row[col] / &pivot_row[col];
                for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= &factor * p;
                }
            }
        }
        rank += 1;
    }
    debug_assert!(a[rank..].iter().all(|r| r.iter().all(Zero::is_zero)));
    rank
}

fn to_dense(rows: &[Vec<i64>]) -> DenseMatrix {
    let refs: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let slices: Vec<&[f64]> = refs.iter().map(|r| r.as_slice()).collect();
    DenseMatrix::from_rows(&slices).unwrap()
}

fn small_integer_matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-3i64..=3, c), r))
}

/// Integer matrices with planted dependent rows.
fn dependent_matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (2usize..=5, 2usize..=6)
        .prop_flat_map(|(basis_rows, c)| {
            (
                prop::collection::vec(prop::collection::vec(-3i64..=3, c), basis_rows),
                prop::collection::vec(prop::collection::vec(-2i64..=2, basis_rows), 1..4),
            )
        })
        .prop_map(|(basis, combos)| {
            let mut rows = basis.clone();
            for w in combos {
                let c = basis[0].len();
                let row = (0..c).map(|j| basis.iter().zip(&w).map(|(b, k)| b[j] * k).sum()).collect();
                rows.push(row);
            }
            rows
        })
}

#[test]
fn planted_dependency_five_by_five() {
    let rows = vec![
        vec![1, 2, 0, -1, 3],
        vec![0, 1, 4, 2, -2],
        vec![1, 3, 4, 1, 1],
        vec![2, 0, 1, 1, 0],
        vec![-1, 1, 0, 3, 2],
    ];
    assert_eq!(exact_rank(&rows), 4);
    assert_eq!(numerical_rank(&to_dense(&rows), RankTolerance::default()).unwrap(), 4);
    assert_eq!(null_space(&to_dense(&rows), RankTolerance::default()).unwrap().dim(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn numerical_rank_matches_exact(rows in small_integer_matrix()) {
        let m = to_dense(&rows);
        prop_assert_eq!(numerical_rank(&m, RankTolerance::default()).unwrap(), exact_rank(&rows));
        prop_assert_eq!(numerical_rank(&m, RankTolerance::MachinePrecision).unwrap(), exact_rank(&rows));
    }

    #[test]
    fn dependent_rows_are_detected(rows in dependent_matrix()) {
        let m = to_dense(&rows);
        prop_assert_eq!(numerical_rank(&m, RankTolerance::default()).unwrap(), exact_rank(&rows));
    }

    #[test]
    fn rank_plus_nullity(rows in small_integer_matrix()) {
        let m = to_dense(&rows);
        let tol = RankTolerance::default();
        let rank = numerical_rank(&m, tol).unwrap();
        let null = null_space(&m, tol).unwrap();
        prop_assert_eq!(rank + null.dim(), m.cols());
        prop_assert!((m.as_matrix() * null.basis()).amax() <= 1e-9);
        prop_assert!(null.orthonormality_defect() <= 1e-10);
    }
}
