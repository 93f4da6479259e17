//! Seeded test-problem generators.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{CompositeProblem, L1Norm, LeastSquares, MaxAffine, ZeroTerm};
use crate::{Error, Matrix, Result, Vector};

const POWER_ITERATION_RTOL: f64 = 1e-10;
const POWER_ITERATION_MAX: usize = 200_000;

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, stopped when the Rayleigh quotient changes by less than `1e-10`
/// relative.
pub fn power_iteration_lmax(gram: &Matrix) -> f64 {
    let n = gram.nrows();
    assert_eq!(n, gram.ncols(), "power iteration needs a square matrix");
    if n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let mut v = Vector::from_fn(n, |_, _| 1.0 + rng.random::<f64>());
    v /= v.norm();
    let mut estimate = (gram * &v).dot(&v);
    for _ in 0..POWER_ITERATION_MAX {
        let w = gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let next = (gram * &v).dot(&v);
        let converged = (next - estimate).abs() <= POWER_ITERATION_RTOL * next.abs();
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}

/// Raw data of a LASSO instance `½‖Ax − b‖² + reg‖x‖₁`.
#[derive(Clone, Debug)]
pub struct LassoInstance {
    pub a: Matrix,
    pub b: Vector,
    pub reg: f64,
    /// Sparse vector used to synthesize `b = A·planted + noise`.
    pub planted: Vector,
}

impl LassoInstance {
    /// `A` has i.i.d. `N(0, 1/rows)` entries, `planted` has roughly 10% nonzero
    /// `N(0,1)` entries, and `b = A·planted + 0.05·N(0,1)` noise.
    pub fn generate(seed: u64, rows: usize, cols: usize, reg: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("lasso needs rows, cols >= 1"));
        }
        if !(reg >= 0.0) {
            return Err(Error::invalid("lasso regularization must be >= 0"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (rows as f64).sqrt();
        let a = Matrix::from_fn(rows, cols, |_, _| {
            scale * rng.sample::<f64, _>(StandardNormal)
        });
        let nnz = (cols / 10).max(1);
        let mut planted = Vector::zeros(cols);
        for _ in 0..nnz {
            let idx = rng.random_range(0..cols);
            planted[idx] = rng.sample::<f64, _>(StandardNormal);
        }
        let noise = Vector::from_fn(rows, |_, _| 0.05 * rng.sample::<f64, _>(StandardNormal));
        let b = &a * &planted + noise;
        Ok(Self { a, b, reg, planted })
    }

    pub fn problem(&self) -> CompositeProblem {
        lasso_from_data(self.a.clone(), self.b.clone(), self.reg)
    }
}

pub fn lasso_from_data(a: Matrix, b: Vector, reg: f64) -> CompositeProblem {
    let n = a.ncols();
    CompositeProblem::smooth(
        Arc::new(LeastSquares::new(a, b)),
        Arc::new(L1Norm::new(reg)),
        n,
    )
}

pub fn make_lasso(seed: u64, rows: usize, cols: usize, reg: f64) -> Result<CompositeProblem> {
    Ok(LassoInstance::generate(seed, rows, cols, reg)?.problem())
}

/// Raw data of `max_i { ⟨g_i, x⟩ + c_i }`.
#[derive(Clone, Debug)]
pub struct MaxAffineInstance {
    pub slopes: Matrix,
    pub offsets: Vector,
}

impl MaxAffineInstance {
    /// Slopes are `N(0, 1/cols)` rows recentred to sum to zero (for more than
    /// one piece), so `0` lies in their convex hull and `f` is bounded below.
    /// Offsets are `N(0, 1)`.
    pub fn generate(seed: u64, pieces: usize, cols: usize) -> Result<Self> {
        if pieces == 0 || cols == 0 {
            return Err(Error::invalid("max-affine needs pieces, cols >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (cols as f64).sqrt();
        let mut slopes = Matrix::from_fn(pieces, cols, |_, _| {
            scale * rng.sample::<f64, _>(StandardNormal)
        });
        if pieces > 1 {
            let mean = slopes.row_mean();
            for mut row in slopes.row_iter_mut() {
                row -= &mean;
            }
        }
        let offsets = Vector::from_fn(pieces, |_, _| rng.sample::<f64, _>(StandardNormal));
        Ok(Self { slopes, offsets })
    }

    pub fn problem(&self) -> CompositeProblem {
        maxaffine_from_data(self.slopes.clone(), self.offsets.clone())
    }
}

/// Max-affine problem with `h ≡ 0`.
pub fn maxaffine_from_data(slopes: Matrix, offsets: Vector) -> CompositeProblem {
    let n = slopes.ncols();
    CompositeProblem::nonsmooth(Arc::new(MaxAffine::new(slopes, offsets)), Arc::new(ZeroTerm), n)
}

pub fn make_maxaffine(seed: u64, pieces: usize, cols: usize) -> Result<CompositeProblem> {
    Ok(MaxAffineInstance::generate(seed, pieces, cols)?.problem())
}
