//! Pentadiagonal LU solver.
//!
//! Each implicit step solves `(I - dt/2 A) u = rhs` where `A` is the
//! pentadiagonal operator, so a general sparse or dense solver would be
//! wasted here. This is the standard band factorization with partial
//! pivoting (see e.g. Press et al., *Numerical Recipes*, `bandec`/`banbks`):
//! rows are stored compactly, rows `0..2` are pre-shifted so that during
//! elimination column `k` always sits in slot 0 of every active row, and
//! pivoting widens the upper band from two superdiagonals to four.
//!
//! Cost is O(n) per factorization with a tiny constant; the solver never
//! allocates proportionally to more than the five stored diagonals.

use crate::discretization::OperatorMatrix;
use crate::error::{Error, Result};

const M1: usize = 2; // subdiagonals
const MM: usize = 5; // stored row width of U after fill

/// Pivots smaller than this abort the factorization as singular.
const PIVOT_FLOOR: f64 = 1e-300;

/// LU factorization of a pentadiagonal matrix with partial pivoting.
pub struct BandedLu {
    n: usize,
    /// Row `i` holds `U(i, i..i+5)` in slots `0..5`.
    upper: Vec<[f64; MM]>,
    /// Elimination multipliers for the (at most two) rows below each pivot.
    mult: Vec<[f64; M1]>,
    /// Row swapped into position `k` at elimination step `k`.
    pivot: Vec<usize>,
}

impl BandedLu {
    /// Factor `m`. Errors with [`Error::SingularMatrix`] when an elimination
    /// step finds no pivot above `1e-300` in magnitude.
    pub fn factor(m: &OperatorMatrix) -> Result<Self> {
        let n = m.n;
        assert!(n >= 1, "cannot factor an empty matrix");
        let mut a: Vec<[f64; MM]> = (0..n)
            .map(|i| [m.sub2[i], m.sub1[i], m.diag[i], m.sup1[i], m.sup2[i]])
            .collect();

        // Left-shift the first M1 rows so slot 0 holds column 0 resp. 1.
        let mut l = M1;
        for i in 0..M1.min(n) {
            for j in (M1 - i)..MM {
                a[i][j - l] = a[i][j];
            }
            l -= 1;
            for j in (MM - l - 1)..MM {
                a[i][j] = 0.0;
            }
        }

        let mut mult = vec![[0.0; M1]; n];
        let mut pivot = vec![0usize; n];
        let mut l = M1.min(n);
        for k in 0..n {
            if l < n {
                l += 1;
            }
            let mut p = k;
            for j in (k + 1)..l {
                if a[j][0].abs() > a[p][0].abs() {
                    p = j;
                }
            }
            pivot[k] = p;
            if a[p][0].abs() < PIVOT_FLOOR {
                return Err(Error::SingularMatrix { column: k });
            }
            if p != k {
                a.swap(k, p);
            }
            for i in (k + 1)..l {
                let f = a[i][0] / a[k][0];
                mult[k][i - k - 1] = f;
                for j in 1..MM {
                    a[i][j - 1] = a[i][j] - f * a[k][j];
                }
                a[i][MM - 1] = 0.0;
            }
        }
        Ok(BandedLu {
            n,
            upper: a,
            mult,
            pivot,
        })
    }

    /// Solve for one right-hand side.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n, "rhs length {} vs matrix size {}", rhs.len(), self.n);
        let n = self.n;
        let mut b = rhs.to_vec();

        let mut l = M1.min(n);
        for k in 0..n {
            let p = self.pivot[k];
            if p != k {
                b.swap(k, p);
            }
            if l < n {
                l += 1;
            }
            for i in (k + 1)..l {
                b[i] -= self.mult[k][i - k - 1] * b[k];
            }
        }

        let mut l = 1;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in 1..l {
                s -= self.upper[i][k] * b[i + k];
            }
            b[i] = s / self.upper[i][0];
            if l < MM {
                l += 1;
            }
        }
        b
    }
}

/// Factor-and-solve convenience for a single right-hand side.
pub fn banded_solve(m: &OperatorMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    Ok(BandedLu::factor(m)?.solve(rhs))
}
