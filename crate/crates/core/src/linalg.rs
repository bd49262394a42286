//! Small dense linear algebra used by the aggregation procedures.
//!
//! Rank decisions use an incremental pivoted elimination with an absolute
//! pivot threshold. Solves go through an LU factorisation and report the
//! 2-norm condition number of the system matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default absolute pivot threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Condition numbers above this are flagged as ill-conditioned.
pub const CONDITION_WARNING: f64 = 1e8;

/// Row-echelon basis built one candidate row at a time.
///
/// Each stored row is normalised so that its pivot entry is 1 and it is zero
/// at the pivots of all rows stored before it.
#[derive(Debug, Clone)]
pub struct EchelonBasis {
    width: usize,
    tol: f64,
    rows: Vec<(usize, Vec<f64>)>,
}

impl EchelonBasis {
    pub fn new(width: usize, tol: f64) -> Self {
        Self {
            width,
            tol,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `row` against the basis and keeps it if the residual has a
    /// pivot above the threshold. Returns whether the rank increased.
    pub fn insert(&mut self, row: &[f64]) -> bool {
        debug_assert_eq!(row.len(), self.width);
        let mut v = row.to_vec();
        for (pivot, basis_row) in &self.rows {
            let factor = v[*pivot];
            if factor != 0.0 {
                for (x, b) in v.iter_mut().zip(basis_row) {
                    *x -= factor * b;
                }
            }
        }
        let (pivot, magnitude) = v
            .iter()
            .enumerate()
            .map(|(j, x)| (j, x.abs()))
            .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if magnitude <= self.tol {
            return false;
        }
        let scale = v[pivot];
        for x in &mut v {
            *x /= scale;
        }
        self.rows.push((pivot, v));
        true
    }
}

/// Rank of the row set of `m` under the given pivot threshold.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let mut basis = EchelonBasis::new(m.ncols(), tol);
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().copied().collect();
        basis.insert(&row);
        if basis.rank() == m.ncols() {
            break;
        }
    }
    basis.rank()
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: DMatrix<f64>,
    pub condition_number: f64,
}

/// Solves `a * x = b` for square `a`.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Solution> {
    if !a.is_square() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: format!("square system with {} rows", b.nrows()),
            found: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("report matrix is not invertible".into()))?;
    Ok(Solution {
        x,
        condition_number: condition_number(a),
    })
}
