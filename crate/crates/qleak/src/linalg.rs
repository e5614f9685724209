//! Dense Gauss-Jordan elimination over exact rationals.

use crate::rational::Prob;
use num::{One, Zero};

/// Solves `a * X = B` where `B` has one column per entry of `rhs`.
/// Returns `None` when `a` is singular.
pub fn solve_multi(mut a: Vec<Vec<Prob>>, rhs: Vec<Vec<Prob>>) -> Option<Vec<Vec<Prob>>> {
    let n = a.len();
    let k = rhs.len();
    // augment: row i gets the i-th entry of every right-hand side
    for (i, row) in a.iter_mut().enumerate() {
        debug_assert_eq!(row.len(), n);
        for col in &rhs {
            row.push(col[i].clone());
        }
    }
    for c in 0..n {
        let pivot = (c..n).find(|&r| !a[r][c].is_zero())?;
        a.swap(c, pivot);
        let inv = Prob::one() / &a[c][c];
        for j in c..n + k {
            if !a[c][j].is_zero() {
                a[c][j] = &a[c][j] * &inv;
            }
        }
        let pivot_row = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r == c || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for j in c..n + k {
                if !pivot_row[j].is_zero() {
                    row[j] = &row[j] - &f * &pivot_row[j];
                }
            }
        }
    }
    Some((0..k).map(|j| (0..n).map(|i| a[i][n + j].clone()).collect()).collect())
}

pub fn solve(a: Vec<Vec<Prob>>, b: Vec<Prob>) -> Option<Vec<Prob>> {
    solve_multi(a, vec![b]).map(|mut v| v.pop().unwrap_or_default())
}

/// Inverse of a square matrix, or `None` when singular.
pub fn invert(a: Vec<Vec<Prob>>) -> Option<Vec<Vec<Prob>>> {
    let n = a.len();
    let ident: Vec<Vec<Prob>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { Prob::one() } else { Prob::zero() }).collect())
        .collect();
    // columns of the inverse come back as separate vectors
    let cols = solve_multi(a, ident)?;
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}
