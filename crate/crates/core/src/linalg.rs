//! Small dense linear algebra: LU solves with one step of iterative
//! refinement, additive eigenpairs of Markov chains, and spectral radii of
//! nonnegative matrices by normalized repeated squaring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::ValueVector;

/// Solution of the additive eigenproblem eta + v = M v + r, normalized so
/// that the bias vanishes at the renewal state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenPair {
    pub eta: f64,
    pub bias: ValueVector,
    pub renewal_state: usize,
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Max absolute row sum.
pub fn inf_norm_mat(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|x| x.abs()).sum())
        .fold(0.0f64, f64::max)
}

/// Dense LU factorization with partial pivoting, stored in place.
struct Lu {
    n: usize,
    data: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factors `a` (row-major n*n); fails when a pivot falls below `pivot_floor`.
    fn factor(mut data: Vec<f64>, n: usize, pivot_floor: f64) -> Result<Lu> {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut best = k;
            let mut best_abs = data[k * n + k].abs();
            for r in k + 1..n {
                let v = data[r * n + k].abs();
                if v > best_abs {
                    best = r;
                    best_abs = v;
                }
            }
            if best_abs <= pivot_floor {
                return Err(Error::SingularSystem {
                    pivot: data[best * n + k],
                    row: k,
                });
            }
            if best != k {
                for c in 0..n {
                    data.swap(k * n + c, best * n + c);
                }
                perm.swap(k, best);
            }
            let pivot = data[k * n + k];
            for r in k + 1..n {
                let factor = data[r * n + k] / pivot;
                data[r * n + k] = factor;
                for c in k + 1..n {
                    data[r * n + c] -= factor * data[k * n + c];
                }
            }
        }
        Ok(Lu { n, data, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 1..n {
            for c in 0..r {
                x[r] -= self.data[r * n + c] * x[c];
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                x[r] -= self.data[r * n + c] * x[c];
            }
            x[r] /= self.data[r * n + r];
        }
        x
    }
}

/// Solves A x = b by LU with partial pivoting plus one refinement step.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64], pivot_floor: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let mut flat = Vec::with_capacity(n * n);
    for row in a {
        flat.extend_from_slice(row);
    }
    let lu = Lu::factor(flat, n, pivot_floor)?;
    let mut x = lu.solve(b);
    // one step of iterative refinement
    let mut resid = b.to_vec();
    for (r, row) in a.iter().enumerate() {
        for (c, &w) in row.iter().enumerate() {
            resid[r] -= w * x[c];
        }
    }
    let dx = lu.solve(&resid);
    for (xi, di) in x.iter_mut().zip(dx) {
        *xi += di;
    }
    Ok(x)
}

/// Unique fixed point v = M v + r of an affine contraction, i.e. the solution
/// of (I - M) v = r. Requires rho(M) < 1; a tiny pivot signals the contrary.
pub fn affine_fixed_point(m: &[Vec<f64>], r: &[f64]) -> Result<ValueVector> {
    let n = r.len();
    let pivot_floor = 1e-12 * inf_norm_mat(m);
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    id - m[i][j]
                })
                .collect()
        })
        .collect();
    solve_dense(&a, r, pivot_floor)
}

/// Additive eigenpair of a unichain Markov matrix: solves the augmented
/// (n+1)x(n+1) linear system [(I - M) v + eta 1 = r ; v_c = 0].
///
/// A singular system means the chain has two or more final classes, or `c`
/// lies outside the final class.
pub fn additive_eigenpair(m: &[Vec<f64>], r: &[f64], c: usize) -> Result<EigenPair> {
    let n = r.len();
    assert!(c < n, "normalization state out of range");
    let dim = n + 1;
    let mut a = vec![vec![0.0f64; dim]; dim];
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            a[i][j] = id - m[i][j];
        }
        a[i][n] = 1.0;
    }
    a[n][c] = 1.0;
    let mut rhs = r.to_vec();
    rhs.push(0.0);
    let z = solve_dense(&a, &rhs, 1e-12).map_err(|e| match e {
        Error::SingularSystem { .. } => Error::MultichainDetected,
        other => other,
    })?;
    let eta = z[n];
    let shift = z[c];
    let bias: Vec<f64> = z[..n].iter().map(|&v| v - shift).collect();
    Ok(EigenPair {
        eta,
        bias,
        renewal_state: c,
    })
}

/// Spectral radius of a nonnegative matrix by normalized repeated squaring.
///
/// Tracks log ||M^{2^j}||_inf; the estimates exp(log||M^{2^j}||/2^j) form a
/// nonincreasing sequence converging to rho(M) (Gelfand), robust for
/// periodic and reducible matrices where vector power iteration stalls.
/// Stops at the first j >= 3 where successive estimates agree to 1e-9
/// relative, capped at j = 40.
pub fn spectral_radius(m: &[Vec<f64>]) -> Result<f64> {
    let n = m.len();
    for (i, row) in m.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if w < 0.0 {
                return Err(Error::NonNegativeViolation {
                    row: i,
                    col: j,
                    value: w,
                });
            }
        }
    }
    let norm0 = inf_norm_mat(m);
    if norm0 == 0.0 {
        return Ok(0.0);
    }
    // current = M^{2^j} / exp(log_scale); by construction ||current||_inf = 1
    // after the first normalization, so log||M^{2^j}|| = log_scale.
    let mut current: Vec<f64> = m.iter().flat_map(|row| row.iter().copied()).collect();
    for x in &mut current {
        *x /= norm0;
    }
    let mut log_scale = norm0.ln();
    let mut prev_est = norm0;
    let mut square = vec![0.0f64; n * n];
    for j in 1..=40u32 {
        square.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            for k in 0..n {
                let aik = current[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                for c in 0..n {
                    square[i * n + c] += aik * current[k * n + c];
                }
            }
        }
        let norm: f64 = (0..n)
            .map(|i| square[i * n..(i + 1) * n].iter().sum::<f64>())
            .fold(0.0f64, f64::max);
        if norm == 0.0 {
            return Ok(0.0); // nilpotent
        }
        for x in &mut square {
            *x /= norm;
        }
        std::mem::swap(&mut current, &mut square);
        log_scale = 2.0 * log_scale + norm.ln();
        let est = (log_scale / 2f64.powi(j as i32)).exp();
        if j >= 3 && (est - prev_est).abs() < 1e-9 * est.abs().max(1.0) {
            return Ok(est);
        }
        prev_est = est;
    }
    Ok(prev_est)
}
