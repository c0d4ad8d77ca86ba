//! The dynamic programming (Shapley) operator, its policy restrictions, and
//! conservative policy improvement.
//!
//! Coordinate i of the operator is min over min-actions of max over
//! max-actions of `kernel row · v + reward`. Evaluation order is fixed (max
//! inner, min outer, left-to-right dot products) so repeated runs are
//! bit-reproducible.

use crate::game::{GameInstance, MaxPolicy, MinPolicy, ValueVector};

/// Tie handling for policy improvement.
///
/// The current action is kept whenever its value is within the slack of the
/// coordinate optimum; otherwise the smallest-index optimizing action wins.
/// Relative mode widens the slack to `tie_tolerance * max(1, |best|)`, which
/// keeps improvement decisions stable under positive coordinate rescalings.
#[derive(Clone, Copy, Debug)]
pub struct ImprovementConfig {
    pub tie_tolerance: f64,
    pub conservative: bool,
    pub relative: bool,
}

impl Default for ImprovementConfig {
    fn default() -> Self {
        ImprovementConfig {
            tie_tolerance: 1e-9,
            conservative: true,
            relative: false,
        }
    }
}

impl ImprovementConfig {
    pub fn relative() -> Self {
        ImprovementConfig {
            relative: true,
            ..Self::default()
        }
    }

    fn slack(&self, best: f64) -> f64 {
        if self.relative {
            self.tie_tolerance * best.abs().max(1.0)
        } else {
            self.tie_tolerance
        }
    }
}

/// kernel row (i,a,b) · v + reward(i,a,b).
pub fn eval_triple(inst: &GameInstance, v: &[f64], i: usize, a: usize, b: usize) -> f64 {
    let row = inst.row(i, a, b);
    let mut acc = 0.0;
    for (w, vy) in row.iter().zip(v) {
        acc += w * vy;
    }
    acc + inst.reward(i, a, b)
}

/// Max over max-actions at (i,a); ties go to the smallest index.
pub fn eval_max(inst: &GameInstance, v: &[f64], i: usize, a: usize) -> (f64, usize) {
    let mut best = eval_triple(inst, v, i, a, 0);
    let mut best_b = 0;
    for b in 1..inst.b_count(i) {
        let val = eval_triple(inst, v, i, a, b);
        if val > best {
            best = val;
            best_b = b;
        }
    }
    (best, best_b)
}

/// One application of the min-max operator.
pub fn eval_operator(inst: &GameInstance, v: &[f64]) -> ValueVector {
    (0..inst.n)
        .map(|i| {
            let mut best = eval_max(inst, v, i, 0).0;
            for a in 1..inst.a_count(i) {
                let val = eval_max(inst, v, i, a).0;
                if val < best {
                    best = val;
                }
            }
            best
        })
        .collect()
}

/// Operator with the minimizer pinned to `sigma` (max over b remains).
pub fn eval_policy_min(inst: &GameInstance, sigma: &MinPolicy, v: &[f64]) -> ValueVector {
    (0..inst.n)
        .map(|i| eval_max(inst, v, i, sigma.0[i]).0)
        .collect()
}

/// Affine map of a fixed policy pair: M^{(sigma,delta)} v + r^{(sigma,delta)}.
pub fn eval_policy_pair(
    inst: &GameInstance,
    sigma: &MinPolicy,
    delta: &MaxPolicy,
    v: &[f64],
) -> ValueVector {
    (0..inst.n)
        .map(|i| {
            let a = sigma.0[i];
            eval_triple(inst, v, i, a, delta.0[i][a])
        })
        .collect()
}

/// Conservative minimizer improvement at `v`.
pub fn improve_min(
    inst: &GameInstance,
    v: &[f64],
    current: &MinPolicy,
    cfg: &ImprovementConfig,
) -> MinPolicy {
    let mut out = Vec::with_capacity(inst.n);
    for (i, &cur) in current.0.iter().enumerate() {
        let vals: Vec<f64> = (0..inst.a_count(i))
            .map(|a| eval_max(inst, v, i, a).0)
            .collect();
        let mut best_a = 0;
        for (a, &val) in vals.iter().enumerate().skip(1) {
            if val < vals[best_a] {
                best_a = a;
            }
        }
        let keep = cfg.conservative && vals[cur] <= vals[best_a] + cfg.slack(vals[best_a]);
        out.push(if keep { cur } else { best_a });
    }
    MinPolicy(out)
}

/// Conservative maximizer improvement at `v`, restricted to the pairs
/// (i, sigma_i) that the inner iteration actually plays; all other entries
/// are carried over unchanged.
pub fn improve_max(
    inst: &GameInstance,
    sigma: &MinPolicy,
    v: &[f64],
    current: &MaxPolicy,
    cfg: &ImprovementConfig,
) -> MaxPolicy {
    let mut out = current.0.clone();
    for (i, (row, &a)) in out.iter_mut().zip(&sigma.0).enumerate() {
        row[a] = improved_b(inst, v, i, a, row[a], cfg);
    }
    MaxPolicy(out)
}

/// Maximizer improvement over every (state, min-action) pair; used to report
/// the final optimal policy, which must attain the max at all pairs.
pub fn improve_max_all(
    inst: &GameInstance,
    v: &[f64],
    current: &MaxPolicy,
    cfg: &ImprovementConfig,
) -> MaxPolicy {
    let mut out = current.0.clone();
    for (i, row) in out.iter_mut().enumerate() {
        for (a, slot) in row.iter_mut().enumerate() {
            *slot = improved_b(inst, v, i, a, *slot, cfg);
        }
    }
    MaxPolicy(out)
}

fn improved_b(
    inst: &GameInstance,
    v: &[f64],
    i: usize,
    a: usize,
    cur: usize,
    cfg: &ImprovementConfig,
) -> usize {
    let vals: Vec<f64> = (0..inst.b_count(i))
        .map(|b| eval_triple(inst, v, i, a, b))
        .collect();
    let mut best_b = 0;
    for (b, &val) in vals.iter().enumerate().skip(1) {
        if val > vals[best_b] {
            best_b = b;
        }
    }
    if cfg.conservative && vals[cur] >= vals[best_b] - cfg.slack(vals[best_b]) {
        cur
    } else {
        best_b
    }
}
