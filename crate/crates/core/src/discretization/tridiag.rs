//! Backward-Euler line solves for the 3-point Neumann operator.
//!
//! On a line of `n` cells with `r = dt·D/h²` the matrix is
//!
//! ```text
//! | 1+r  -r                 |
//! | -r  1+2r  -r            |
//! |      ...  ...  ...      |
//! |            -r  1+2r  -r |
//! |                 -r  1+r |
//! ```
//!
//! a symmetric M-matrix. The Thomas sweep below only ever adds nonnegative
//! quantities when the right-hand side is nonnegative, so nonnegativity is
//! preserved in floating point, not just in exact arithmetic.

use alloc::vec;
use alloc::vec::Vec;

/// Factored form of `I − dt·D·L` on one line; reusable for every line with
/// the same length and coefficient.
#[derive(Debug, Clone)]
pub(crate) struct NeumannLineSolver {
    r: f64,
    /// Modified super-diagonal `c'_i` (stored negated, so all entries ≥ 0).
    upper: Vec<f64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
}

impl NeumannLineSolver {
    pub(crate) fn new(n: usize, r: f64) -> Option<Self> {
        debug_assert!(n >= 2);
        let mut upper = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let diag = if i == 0 || i == n - 1 {
                1.0 + r
            } else {
                1.0 + 2.0 * r
            };
            let pivot = diag - r * prev;
            if !(pivot > 0.0) || !pivot.is_finite() {
                return None;
            }
            inv_pivot[i] = 1.0 / pivot;
            let c = if i + 1 < n { r } else { 0.0 };
            prev = c * inv_pivot[i];
            upper[i] = prev;
        }
        Some(Self {
            r,
            upper,
            inv_pivot,
        })
    }

    /// Overwrites `rhs` with the solution.
    ///
    /// Every column of the matrix sums to one, so the exact solution has the
    /// same sum as `rhs`. Elimination loses that at a relative level of about
    /// `ε·r`; a final positive rescale restores it.
    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        debug_assert_eq!(n, self.upper.len());
        let target: f64 = rhs.iter().sum();
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] + self.r * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] += self.upper[i] * rhs[i + 1];
        }
        let sum: f64 = rhs.iter().sum();
        if sum > 0.0 && target > 0.0 {
            let scale = target / sum;
            rhs.iter_mut().for_each(|v| *v *= scale);
        }
    }
}
