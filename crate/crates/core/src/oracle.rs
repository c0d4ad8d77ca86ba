//! Independent brute-force and iterative baselines for validating solver
//! output at desk scale. The oracles share the linear algebra layer but
//! deliberately not the improvement logic: a baseline that reuses the code
//! under test certifies nothing.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{enumerate_min_policies, GameInstance, MinPolicy, ValueVector};
use crate::linalg::{self, EigenPair};
use crate::shapley::eval_operator;

fn selection_count(inst: &GameInstance) -> u128 {
    (0..inst.n).fold(1u128, |acc, i| acc.saturating_mul(inst.b_count(i) as u128))
}

fn selection_at(inst: &GameInstance, idx: u128) -> Vec<usize> {
    let mut rem = idx;
    let mut out = vec![0usize; inst.n];
    for i in (0..inst.n).rev() {
        let radix = inst.b_count(i) as u128;
        out[i] = (rem % radix) as usize;
        rem /= radix;
    }
    out
}

/// Coordinatewise max over maximizer row selections of the fixed point of
/// the pair dynamics, for one fixed minimizer policy.
fn best_response_value(inst: &GameInstance, sigma: &MinPolicy) -> Result<ValueVector> {
    let count = selection_count(inst);
    let mut best = vec![f64::NEG_INFINITY; inst.n];
    for idx in 0..count {
        let tau = selection_at(inst, idx);
        let (m, r) = inst.selection_system(sigma, &tau);
        let v = linalg::affine_fixed_point(&m, &r)?;
        for (b, x) in best.iter_mut().zip(v) {
            *b = b.max(x);
        }
    }
    Ok(best)
}

/// min over minimizer policies of max over maximizer selections of the exact
/// affine fixed point, coordinatewise over full enumeration (sequential).
pub fn brute_force_discounted_seq(inst: &GameInstance, cap: u128) -> Result<ValueVector> {
    check_pair_budget(inst, cap)?;
    let mut value = vec![f64::INFINITY; inst.n];
    for sigma in enumerate_min_policies(inst, cap)? {
        let w = best_response_value(inst, &sigma)?;
        for (v, x) in value.iter_mut().zip(w) {
            *v = v.min(x);
        }
    }
    Ok(value)
}

/// Parallel variant over minimizer policies; min/max reductions compare
/// exact solved values, so the result is schedule-independent.
#[cfg(feature = "parallel")]
pub fn brute_force_discounted_par(inst: &GameInstance, cap: u128) -> Result<ValueVector> {
    check_pair_budget(inst, cap)?;
    let count = crate::game::min_policy_count(inst);
    (0..count as u64)
        .into_par_iter()
        .map(|idx| best_response_value(inst, &crate::game::min_policy_at(inst, idx as u128)))
        .try_reduce(
            || vec![f64::INFINITY; inst.n],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect()),
        )
}

fn check_pair_budget(inst: &GameInstance, cap: u128) -> Result<()> {
    let pairs = crate::game::min_policy_count(inst).saturating_mul(selection_count(inst));
    if pairs > cap {
        return Err(Error::CombinatorialOverflow { count: pairs, cap });
    }
    Ok(())
}

/// Brute-force game value for discounted instances.
pub fn brute_force_discounted(inst: &GameInstance, cap: u128) -> Result<ValueVector> {
    #[cfg(feature = "parallel")]
    {
        brute_force_discounted_par(inst, cap)
    }
    #[cfg(not(feature = "parallel"))]
    {
        brute_force_discounted_seq(inst, cap)
    }
}

/// Brute-force mean payoff: min over sigma of max over row selections of the
/// additive eigenvalue; the bias is recomputed at the optimizing pair
/// (smallest enumeration indices on exact ties).
pub fn brute_force_mean(inst: &GameInstance, c: usize, cap: u128) -> Result<EigenPair> {
    check_pair_budget(inst, cap)?;
    let sel_count = selection_count(inst);
    let mut best: Option<(f64, MinPolicy, Vec<usize>)> = None;
    for sigma in enumerate_min_policies(inst, cap)? {
        let mut inner: Option<(f64, Vec<usize>)> = None;
        for idx in 0..sel_count {
            let tau = selection_at(inst, idx);
            let (m, r) = inst.selection_system(&sigma, &tau);
            let pair = linalg::additive_eigenpair(&m, &r, c)?;
            let better = match &inner {
                None => true,
                Some((eta, _)) => pair.eta > *eta,
            };
            if better {
                inner = Some((pair.eta, tau));
            }
        }
        let (eta, tau) = inner.expect("at least one selection");
        let better = match &best {
            None => true,
            Some((best_eta, _, _)) => eta < *best_eta,
        };
        if better {
            best = Some((eta, sigma, tau));
        }
    }
    let (_, sigma, tau) = best.expect("at least one policy");
    let (m, r) = inst.selection_system(&sigma, &tau);
    linalg::additive_eigenpair(&m, &r, c)
}

/// T-fold application of the dynamic programming operator.
pub fn value_iteration(inst: &GameInstance, v0: &[f64], steps: usize) -> ValueVector {
    let mut v = v0.to_vec();
    for _ in 0..steps {
        v = eval_operator(inst, &v);
    }
    v
}

/// First passage/return times of a single Markov matrix: the direct linear
/// solve of (I - M_stopped) phi = 1.
pub fn brute_force_return_time(m: &[Vec<f64>], c: usize) -> Result<ValueVector> {
    let n = m.len();
    let stopped: Vec<Vec<f64>> = m
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r[c] = 0.0;
            r
        })
        .collect();
    linalg::affine_fixed_point(&stopped, &vec![1.0; n])
}

// ---------------------------------------------------------------------------
// Exact spectral radius reference: characteristic polynomial + root finding.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
struct Complex {
    re: f64,
    im: f64,
}

impl Complex {
    fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }

    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }

    fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }

    fn div(self, o: Complex) -> Complex {
        let d = o.re * o.re + o.im * o.im;
        Complex::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }
}

/// Monic characteristic polynomial coefficients by the Faddeev-LeVerrier
/// recurrence: p(x) = x^n + c[0] x^{n-1} + ... + c[n-1].
fn char_poly(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut coeffs = Vec::with_capacity(n);
    let mut aux = vec![vec![0.0f64; n]; n]; // M_k
    let mut coef = 1.0f64;
    for k in 1..=n {
        // aux <- M (aux + coef_prev I), starting from aux = 0, coef = 1
        let mut next = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    let al = aux[l][j] + if l == j { coef } else { 0.0 };
                    acc += m[i][l] * al;
                }
                next[i][j] = acc;
            }
        }
        let trace: f64 = (0..n).map(|i| next[i][i]).sum();
        coef = -trace / k as f64;
        coeffs.push(coef);
        aux = next;
    }
    coeffs
}

/// All complex roots of a monic polynomial by Durand-Kerner iteration.
fn poly_roots(coeffs: &[f64]) -> Vec<Complex> {
    let n = coeffs.len();
    if n == 0 {
        return Vec::new();
    }
    let eval = |z: Complex| {
        let mut acc = Complex::new(1.0, 0.0);
        for &c in coeffs {
            acc = acc.mul(z).add(Complex::new(c, 0.0));
        }
        acc
    };
    let radius = 1.0 + coeffs.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex> = Vec::with_capacity(n);
    let mut z = Complex::new(1.0, 0.0);
    for _ in 0..n {
        z = z.mul(seed);
        roots.push(Complex::new(z.re * radius, z.im * radius));
    }
    for _ in 0..500 {
        let mut shift = 0.0f64;
        for i in 0..n {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom = denom.mul(roots[i].sub(roots[j]));
                }
            }
            let delta = eval(roots[i]).div(denom);
            roots[i] = roots[i].sub(delta);
            shift = shift.max(delta.abs());
        }
        if shift < 1e-13 * radius.max(1.0) {
            break;
        }
    }
    roots
}

/// Exact spectral radius reference for small nonnegative matrices (n <= 8):
/// closed form through n = 2, characteristic-polynomial roots beyond.
pub fn spectral_radius_oracle(m: &[Vec<f64>]) -> Result<f64> {
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
    match n {
        0 => Ok(0.0),
        1 => Ok(m[0][0]),
        2 => {
            let tr = m[0][0] + m[1][1];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let disc = tr * tr - 4.0 * det;
            if disc >= 0.0 {
                let s = disc.sqrt();
                Ok(((tr + s) / 2.0).abs().max(((tr - s) / 2.0).abs()))
            } else {
                // complex pair of modulus sqrt(det)
                Ok(det.abs().sqrt())
            }
        }
        _ if n <= 8 => {
            if linalg::inf_norm_mat(m) == 0.0 {
                return Ok(0.0);
            }
            let roots = poly_roots(&char_poly(m));
            Ok(roots.iter().fold(0.0f64, |a, z| a.max(z.abs())))
        }
        _ => Err(Error::DomainError(format!(
            "spectral radius oracle supports n <= 8, got {n}"
        ))),
    }
}
