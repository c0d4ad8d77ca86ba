//! Nonlinear Perron-Frobenius machinery over rectangular matrix families:
//! the hull spectral radius, Collatz-Wielandt scaling vectors, and
//! worst-case mean return times to a renewal state.
//!
//! A family stores a finite set of candidate rows per state; a member matrix
//! picks one row per state independently (the family is its own rectangular
//! hull). The associated order-preserving map is f̄(v)_i = max over the
//! candidate rows of row · v.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{GameInstance, MinPolicy, ValueVector};
use crate::linalg;

/// Finite set of nonnegative candidate rows per state.
#[derive(Clone, Debug)]
pub struct MatrixFamily {
    pub rows: Vec<Vec<Vec<f64>>>,
}

/// Worst-case expected first passage/return times to the renewal state,
/// their bound K, and the induced contraction factor (K-1)/K.
#[derive(Clone, Debug)]
pub struct ReturnTimeResult {
    pub phi: ValueVector,
    pub k_max: f64,
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HullMode {
    Enumerate,
    BinarySearch,
}

#[derive(Clone, Copy, Debug)]
pub struct PerronConfig {
    /// Member cap for Enumerate mode.
    pub member_cap: u128,
    /// Step cap for one monotone-iteration test.
    pub iteration_cap: usize,
    /// ||u|| beyond this is treated as divergence (radius >= lambda).
    pub divergence_threshold: f64,
    /// Bracket width at which the bisection stops.
    pub bisection_width: f64,
}

impl Default for PerronConfig {
    fn default() -> Self {
        PerronConfig {
            member_cap: 1_000_000,
            iteration_cap: 1_000_000,
            divergence_threshold: 1e12,
            bisection_width: 1e-8,
        }
    }
}

impl MatrixFamily {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn member_count(&self) -> u128 {
        self.rows
            .iter()
            .fold(1u128, |acc, r| acc.saturating_mul(r.len() as u128))
    }

    /// Decodes the idx-th member matrix (state-major mixed radix).
    pub fn member(&self, idx: u128) -> Vec<Vec<f64>> {
        let mut rem = idx;
        let mut out = vec![Vec::new(); self.n()];
        for i in (0..self.n()).rev() {
            let radix = self.rows[i].len() as u128;
            out[i] = self.rows[i][(rem % radix) as usize].clone();
            rem /= radix;
        }
        out
    }

    /// f̄(v)_i = max over candidate rows at state i of row · v.
    pub fn apply_max(&self, v: &[f64]) -> ValueVector {
        self.rows
            .iter()
            .map(|cands| {
                cands
                    .iter()
                    .map(|row| row.iter().zip(v).map(|(w, x)| w * x).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    /// Family with the c-th column of every row put to zero.
    pub fn stopped(&self, c: usize) -> MatrixFamily {
        let rows = self
            .rows
            .iter()
            .map(|cands| {
                cands
                    .iter()
                    .map(|row| {
                        let mut r = row.clone();
                        r[c] = 0.0;
                        r
                    })
                    .collect()
            })
            .collect();
        MatrixFamily { rows }
    }

    pub fn max_row_sum(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|cands| cands.iter())
            .map(|row| row.iter().sum::<f64>())
            .fold(0.0f64, f64::max)
    }

    fn push_dedup(bucket: &mut Vec<Vec<f64>>, row: &[f64]) {
        let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
        if !bucket.iter().any(|r| same(r, row)) {
            bucket.push(row.to_vec());
        }
    }
}

/// Candidate rows at state i over all action pairs (a, b), deduplicated.
pub fn family_from_instance(inst: &GameInstance) -> MatrixFamily {
    let mut rows = vec![Vec::new(); inst.n];
    for (i, bucket) in rows.iter_mut().enumerate() {
        for a in 0..inst.a_count(i) {
            for b in 0..inst.b_count(i) {
                MatrixFamily::push_dedup(bucket, inst.row(i, a, b));
            }
        }
    }
    MatrixFamily { rows }
}

/// Candidate rows with the minimizer pinned to `sigma`.
pub fn family_from_fixed_min(inst: &GameInstance, sigma: &MinPolicy) -> MatrixFamily {
    let mut rows = vec![Vec::new(); inst.n];
    for (i, bucket) in rows.iter_mut().enumerate() {
        let a = sigma.0[i];
        for b in 0..inst.b_count(i) {
            MatrixFamily::push_dedup(bucket, inst.row(i, a, b));
        }
    }
    MatrixFamily { rows }
}

/// Max of the member spectral radii, by full enumeration (sequential).
pub fn enumerate_radius_seq(family: &MatrixFamily, count: u128) -> Result<f64> {
    let mut best = 0.0f64;
    for idx in 0..count {
        best = best.max(linalg::spectral_radius(&family.member(idx))?);
    }
    Ok(best)
}

/// Parallel variant of `enumerate_radius_seq`; the max reduction is exact,
/// so the result does not depend on the schedule.
#[cfg(feature = "parallel")]
pub fn enumerate_radius_par(family: &MatrixFamily, count: u128) -> Result<f64> {
    (0..count as u64)
        .into_par_iter()
        .map(|idx| linalg::spectral_radius(&family.member(idx as u128)))
        .try_reduce(|| 0.0f64, |a, b| Ok(a.max(b)))
}

/// Spectral radius of the rectangular hull: the max of rho(M) over member
/// matrices, which equals the radius of the max-map f̄.
///
/// Enumerate mode visits every member. BinarySearch brackets the radius with
/// the monotone test u <- f̄(u)/lambda + 1: convergence certifies radius <
/// lambda, escape past the divergence threshold certifies radius >= lambda.
/// Every iterate additionally yields the two-sided Collatz-Wielandt bounds
/// min_i f̄(u)_i/u_i <= radius <= max_i f̄(u)_i/u_i, which tighten the
/// bracket; if a test hits the iteration cap anyway, the fixed point of the
/// test map is computed exactly by policy iteration over row selections.
pub fn hull_spectral_radius(
    family: &MatrixFamily,
    mode: HullMode,
    cfg: &PerronConfig,
) -> Result<f64> {
    match mode {
        HullMode::Enumerate => {
            let count = family.member_count();
            if count > cfg.member_cap {
                return Err(Error::CombinatorialOverflow {
                    count,
                    cap: cfg.member_cap,
                });
            }
            #[cfg(feature = "parallel")]
            {
                enumerate_radius_par(family, count)
            }
            #[cfg(not(feature = "parallel"))]
            {
                enumerate_radius_seq(family, count)
            }
        }
        HullMode::BinarySearch => bisect_radius(family, cfg),
    }
}

enum TestVerdict {
    Below,        // radius < lambda
    AtOrAbove,    // radius >= lambda
    CapExhausted, // no verdict within the iteration cap
}

fn bisect_radius(family: &MatrixFamily, cfg: &PerronConfig) -> Result<f64> {
    let upper = family.max_row_sum();
    if upper == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0f64;
    let mut hi = upper;
    let mut rounds = 0;
    while hi - lo > cfg.bisection_width {
        rounds += 1;
        if rounds > 200 {
            return Err(Error::Inconclusive {
                lambda: (lo + hi) / 2.0,
            });
        }
        let lambda = 0.5 * (lo + hi);
        let verdict = monotone_test(family, lambda, cfg, &mut lo, &mut hi);
        if hi - lo <= cfg.bisection_width {
            break;
        }
        match verdict {
            TestVerdict::Below => hi = hi.min(lambda),
            TestVerdict::AtOrAbove => lo = lo.max(lambda),
            TestVerdict::CapExhausted => match exact_cw_solve(family, lambda) {
                Some(u) => {
                    // u = f̄(u)/lambda + 1 exactly: harvest both CW bounds.
                    let (blo, bhi) = cw_bounds(family, &u);
                    lo = lo.max(blo);
                    hi = hi.min(bhi).min(lambda);
                }
                None => lo = lo.max(lambda),
            },
        }
        if lo > hi {
            // bounds from different certificates can cross by rounding noise
            let mid = 0.5 * (lo + hi);
            lo = mid;
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Monotone iteration u <- f̄(u)/lambda + 1 from u = 1, harvesting
/// Collatz-Wielandt bounds into the bracket as a side effect.
fn monotone_test(
    family: &MatrixFamily,
    lambda: f64,
    cfg: &PerronConfig,
    lo: &mut f64,
    hi: &mut f64,
) -> TestVerdict {
    let n = family.n();
    let mut u = vec![1.0f64; n];
    // Near-critical tests would burn the whole cap without a verdict; hand
    // them to the exact solver early instead.
    let budget = cfg.iteration_cap.min(10_000);
    for _ in 0..budget {
        let fu = family.apply_max(&u);
        let (blo, bhi) = ratio_bounds(&fu, &u);
        *lo = lo.max(blo);
        *hi = hi.min(bhi);
        if bhi < lambda {
            return TestVerdict::Below;
        }
        if blo >= lambda {
            return TestVerdict::AtOrAbove;
        }
        let next: Vec<f64> = fu.iter().zip(&u).map(|(f, _)| f / lambda + 1.0).collect();
        if linalg::inf_norm(&next) > cfg.divergence_threshold {
            return TestVerdict::AtOrAbove;
        }
        let step = next
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if step < 1e-10 * linalg::inf_norm(&u) {
            return TestVerdict::Below;
        }
        u = next;
    }
    TestVerdict::CapExhausted
}

fn ratio_bounds(fu: &[f64], u: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (f, x) in fu.iter().zip(u) {
        let r = f / x;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

fn cw_bounds(family: &MatrixFamily, u: &[f64]) -> (f64, f64) {
    let fu = family.apply_max(u);
    ratio_bounds(&fu, u)
}

/// Exact fixed point of u = f̄(u)/lambda + 1 by policy iteration over row
/// selections; `None` means some selection has spectral radius >= lambda,
/// i.e. the family radius is at or above lambda.
fn exact_cw_solve(family: &MatrixFamily, lambda: f64) -> Option<Vec<f64>> {
    let n = family.n();
    let mut selection: Vec<usize> = vec![0; n];
    let mut previous_value = f64::NEG_INFINITY;
    for _ in 0..100_000 {
        let m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                family.rows[i][selection[i]]
                    .iter()
                    .map(|w| w / lambda)
                    .collect()
            })
            .collect();
        let u = match linalg::affine_fixed_point(&m, &vec![1.0; n]) {
            Ok(u) => u,
            Err(_) => return None,
        };
        if u.iter().any(|&x| x < 1.0 - 1e-9 || !x.is_finite()) {
            return None; // selection radius above lambda
        }
        let total: f64 = u.iter().sum();
        if total < previous_value - 1e-6 * previous_value.abs().max(1.0) {
            return None; // improvement lost monotonicity: numerically critical
        }
        previous_value = previous_value.max(total);
        let mut changed = false;
        for (sel, cands) in selection.iter_mut().zip(&family.rows) {
            let scores: Vec<f64> = cands
                .iter()
                .map(|row| row.iter().zip(&u).map(|(w, x)| w * x).sum::<f64>())
                .collect();
            let mut best = 0;
            for (j, &s) in scores.iter().enumerate().skip(1) {
                if s > scores[best] {
                    best = j;
                }
            }
            if scores[*sel] < scores[best] - 1e-12 * scores[best].abs().max(1.0) {
                *sel = best;
                changed = true;
            }
        }
        if !changed {
            return Some(u);
        }
    }
    None
}

/// Scaling vector certifying that lambda dominates the family radius:
/// the fixed point of phi = f̄(phi)/lambda + 1, computed by monotone value
/// iteration from phi = 1. The result satisfies f̄(phi) = lambda (phi - 1),
/// hence f̄(phi) <= lambda phi strictly, and phi >= 1.
pub fn collatz_wielandt_vector(
    family: &MatrixFamily,
    lambda: f64,
    cfg: &PerronConfig,
) -> Result<ValueVector> {
    let n = family.n();
    let mut phi = vec![1.0f64; n];
    for _ in 0..cfg.iteration_cap {
        let next: Vec<f64> = family
            .apply_max(&phi)
            .iter()
            .map(|f| f / lambda + 1.0)
            .collect();
        if linalg::inf_norm(&next) > cfg.divergence_threshold {
            return Err(Error::RadiusNotDominated { lambda });
        }
        let step = next
            .iter()
            .zip(&phi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        phi = next;
        if step < 1e-12 * linalg::inf_norm(&phi) {
            return Ok(phi);
        }
    }
    Err(Error::Inconclusive { lambda })
}

/// Worst-case expected first passage/return times to `c` over the family:
/// solves phi = 1 + f̄_(c)(phi) on the stopped family by policy iteration
/// over row selections, each step an exact linear solve.
///
/// Any singular or escaping selection means some member matrix has a final
/// class avoiding `c` (no renewal state).
pub fn mean_return_times(family: &MatrixFamily, c: usize) -> Result<ReturnTimeResult> {
    let n = family.n();
    assert!(c < n, "renewal state out of range");
    for cands in &family.rows {
        for row in cands {
            let sum: f64 = row.iter().sum();
            assert!(
                (sum - 1.0).abs() <= 1e-7,
                "mean_return_times requires Markov rows (sum = {sum})"
            );
        }
    }
    let stopped = family.stopped(c);
    let ones = vec![1.0f64; n];
    let mut selection: Vec<usize> = vec![0; n];
    let fail = || Error::NoRenewalState { state: c };
    for _ in 0..1_000_000 {
        let m: Vec<Vec<f64>> = (0..n)
            .map(|i| stopped.rows[i][selection[i]].clone())
            .collect();
        let phi = linalg::affine_fixed_point(&m, &ones).map_err(|_| fail())?;
        if phi.iter().any(|&x| x < 1.0 - 1e-9 || !x.is_finite()) {
            return Err(fail());
        }
        let mut changed = false;
        for (sel, cands) in selection.iter_mut().zip(&stopped.rows) {
            let scores: Vec<f64> = cands
                .iter()
                .map(|row| row.iter().zip(&phi).map(|(w, x)| w * x).sum::<f64>())
                .collect();
            let mut best = 0;
            for (j, &s) in scores.iter().enumerate().skip(1) {
                if s > scores[best] {
                    best = j;
                }
            }
            if scores[*sel] < scores[best] - 1e-12 * scores[best].abs().max(1.0) {
                *sel = best;
                changed = true;
            }
        }
        if !changed {
            let k_max = linalg::inf_norm(&phi);
            let lambda = (k_max - 1.0) / k_max;
            return Ok(ReturnTimeResult { phi, k_max, lambda });
        }
    }
    Err(Error::BoundExceeded(
        "return-time policy iteration did not stabilize".into(),
    ))
}
