//! Small dense helpers shared by the exact solvers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::SingularSystem)
    }
}

/// Solves `a x = b` for a single right-hand side.
pub fn solve_vec(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let rhs = DMatrix::from_column_slice(b.len(), 1, b);
    Ok(solve(a, rhs)?.column(0).iter().copied().collect())
}

/// Induced ℓ∞ operator norm (maximum absolute row sum).
pub fn mat_inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Sup norm of a vector.
pub fn vec_inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Sup norm of `a - b`.
pub fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
