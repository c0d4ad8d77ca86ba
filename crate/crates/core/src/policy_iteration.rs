//! Nested policy iteration for discounted and mean-payoff games, the
//! strongly-polynomial iteration bounds, and runtime certificates checking a
//! completed run against the theory that guarantees those bounds.
//!
//! The outer loop walks minimizer policies; each outer step solves the
//! maximizer's response exactly by an inner policy iteration whose steps are
//! direct linear solves. Inner solves are exact (policy repetition, not a
//! residual threshold): approximate inner solutions would void the
//! no-revisit argument that terminates the outer loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{min_policy_count, GameInstance, MaxPolicy, MinPolicy, PayoffMode, ValueVector};
use crate::linalg::{self, EigenPair};
use crate::perron::{family_from_instance, mean_return_times, ReturnTimeResult};
use crate::shapley::{
    eval_max, eval_operator, eval_policy_min, improve_max, improve_max_all, improve_min,
    ImprovementConfig,
};
use crate::transforms::mean_to_discounted;

#[derive(Clone, Debug, Default)]
pub struct SolveConfig {
    pub improvement: ImprovementConfig,
    /// Initial minimizer policy; lexicographically-first when absent.
    pub start_min: Option<MinPolicy>,
    /// Initial maximizer policy for every inner run; lexicographically-first when absent.
    pub start_max: Option<MaxPolicy>,
    /// Skip the row-sum contraction check (caller holds a certificate, e.g.
    /// a spectral-radius bound or a scaling transform).
    pub force: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    PolicyRepeatedStop,
    BoundExceeded,
    Error,
}

/// Value attached to one iteration step: a fixed point for discounted runs,
/// an additive eigenpair for mean-payoff runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceValue {
    Eigen { eta: f64, bias: ValueVector },
    Fixed(ValueVector),
}

impl TraceValue {
    pub fn fixed(&self) -> Option<&ValueVector> {
        match self {
            TraceValue::Fixed(v) => Some(v),
            TraceValue::Eigen { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InnerStep {
    pub max_policy: MaxPolicy,
    pub value: TraceValue,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OuterStep {
    pub min_policy: MinPolicy,
    pub value: TraceValue,
    pub residual_norm: f64,
    pub inner: Vec<InnerStep>,
}

/// Ordered record of a complete run; consecutive outer policies differ (the
/// stopping repetition is not recorded as a separate step).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationTrace {
    pub outer: Vec<OuterStep>,
    pub stopped_reason: StopReason,
}

impl IterationTrace {
    /// Number of outer value solves.
    pub fn outer_iterations(&self) -> usize {
        self.outer.len()
    }

    /// Final iteration index (solves minus one): the quantity the
    /// theoretical bounds cap.
    pub fn final_iteration_index(&self) -> usize {
        self.outer.len().saturating_sub(1)
    }

    pub fn to_json_string(&self) -> String {
        crate::game::to_json_17(self)
    }

    pub fn from_json_str(s: &str) -> Result<IterationTrace> {
        serde_json::from_str(s).map_err(|e| Error::DomainError(format!("trace parse error: {e}")))
    }
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max)
}

/// Exact maximizer response to a fixed minimizer policy (discounted case):
/// inner policy iteration, values nondecreasing, each step one linear solve.
fn solve_fixed_min_discounted(
    inst: &GameInstance,
    sigma: &MinPolicy,
    cfg: &SolveConfig,
) -> Result<(ValueVector, Vec<InnerStep>, MaxPolicy)> {
    let mut delta = cfg
        .start_max
        .clone()
        .unwrap_or_else(|| MaxPolicy::first(inst));
    let mut steps = Vec::new();
    let inner_cap: u128 =
        (0..inst.n).fold(1u128, |acc, i| acc.saturating_mul(inst.b_count(i) as u128));
    loop {
        let (m, r) = inst.pair_system(sigma, &delta);
        let v = linalg::affine_fixed_point(&m, &r)?;
        steps.push(InnerStep {
            max_policy: delta.clone(),
            value: TraceValue::Fixed(v.clone()),
        });
        let improved = improve_max(inst, sigma, &v, &delta, &cfg.improvement);
        if improved == delta {
            return Ok((v, steps, delta));
        }
        delta = improved;
        if steps.len() as u128 > inner_cap {
            return Err(Error::BoundExceeded(
                "inner policy iteration exceeded the policy count".into(),
            ));
        }
    }
}

fn solve_fixed_min_mean(
    inst: &GameInstance,
    sigma: &MinPolicy,
    c: usize,
    cfg: &SolveConfig,
) -> Result<(EigenPair, Vec<InnerStep>, MaxPolicy)> {
    let mut delta = cfg
        .start_max
        .clone()
        .unwrap_or_else(|| MaxPolicy::first(inst));
    let mut steps = Vec::new();
    let inner_cap: u128 =
        (0..inst.n).fold(1u128, |acc, i| acc.saturating_mul(inst.b_count(i) as u128));
    loop {
        let (m, r) = inst.pair_system(sigma, &delta);
        let pair = linalg::additive_eigenpair(&m, &r, c)?;
        steps.push(InnerStep {
            max_policy: delta.clone(),
            value: TraceValue::Eigen {
                eta: pair.eta,
                bias: pair.bias.clone(),
            },
        });
        let improved = improve_max(inst, sigma, &pair.bias, &delta, &cfg.improvement);
        if improved == delta {
            return Ok((pair, steps, delta));
        }
        delta = improved;
        if steps.len() as u128 > inner_cap {
            return Err(Error::BoundExceeded(
                "inner policy iteration exceeded the policy count".into(),
            ));
        }
    }
}

/// Policy iteration for discounted games.
///
/// Requires every kernel row sum below one (sup-norm contraction) unless
/// `cfg.force` asserts an external certificate. Returns the fixed point, the
/// optimal policy pair, and the full trace.
pub fn solve_discounted(
    inst: &GameInstance,
    cfg: &SolveConfig,
) -> Result<(ValueVector, MinPolicy, MaxPolicy, IterationTrace)> {
    let max_row_sum = inst.max_row_sum();
    if max_row_sum >= 1.0 && !cfg.force {
        return Err(Error::NotContracting { max_row_sum });
    }
    let policy_cap = min_policy_count(inst);
    let mut sigma = cfg
        .start_min
        .clone()
        .unwrap_or_else(|| MinPolicy::first(inst));
    let mut outer: Vec<OuterStep> = Vec::new();
    loop {
        let (v, inner, delta) = solve_fixed_min_discounted(inst, &sigma, cfg)?;
        let fv = eval_operator(inst, &v);
        let residual_norm = diff_norm(&fv, &v);
        outer.push(OuterStep {
            min_policy: sigma.clone(),
            value: TraceValue::Fixed(v.clone()),
            residual_norm,
            inner,
        });
        let improved = improve_min(inst, &v, &sigma, &cfg.improvement);
        if improved == sigma {
            let delta_full = improve_max_all(inst, &v, &delta, &cfg.improvement);
            let trace = IterationTrace {
                outer,
                stopped_reason: StopReason::PolicyRepeatedStop,
            };
            return Ok((v, sigma, delta_full, trace));
        }
        sigma = improved;
        if outer.len() as u128 > policy_cap {
            // impossible while the no-revisit property holds
            return Err(Error::BoundExceeded(
                "outer policy iteration exceeded the policy count".into(),
            ));
        }
    }
}

/// Hoffman-Karp policy iteration for mean-payoff games with renewal state `c`.
///
/// The renewal hypothesis (worst-case return times to `c` finite over all
/// action choices) is pre-checked via `mean_return_times`; its errors
/// propagate. Outer eigenvalues are nonincreasing, inner nondecreasing.
pub fn solve_mean(
    inst: &GameInstance,
    c: usize,
    cfg: &SolveConfig,
) -> Result<(EigenPair, MinPolicy, MaxPolicy, IterationTrace)> {
    assert_eq!(
        inst.payoff,
        PayoffMode::MeanPayoff,
        "solve_mean requires a mean-payoff instance"
    );
    let family = family_from_instance(inst);
    mean_return_times(&family, c)?;
    let policy_cap = min_policy_count(inst);
    let mut sigma = cfg
        .start_min
        .clone()
        .unwrap_or_else(|| MinPolicy::first(inst));
    let mut outer: Vec<OuterStep> = Vec::new();
    loop {
        let (pair, inner, delta) = solve_fixed_min_mean(inst, &sigma, c, cfg)?;
        let fv = eval_operator(inst, &pair.bias);
        let residual_norm = (0..inst.n)
            .map(|i| (fv[i] - pair.bias[i] - pair.eta).abs())
            .fold(0.0f64, f64::max);
        outer.push(OuterStep {
            min_policy: sigma.clone(),
            value: TraceValue::Eigen {
                eta: pair.eta,
                bias: pair.bias.clone(),
            },
            residual_norm,
            inner,
        });
        let improved = improve_min(inst, &pair.bias, &sigma, &cfg.improvement);
        if improved == sigma {
            let delta_full = improve_max_all(inst, &pair.bias, &delta, &cfg.improvement);
            let trace = IterationTrace {
                outer,
                stopped_reason: StopReason::PolicyRepeatedStop,
            };
            return Ok((pair, sigma, delta_full, trace));
        }
        sigma = improved;
        if outer.len() as u128 > policy_cap {
            return Err(Error::BoundExceeded(
                "outer policy iteration exceeded the policy count".into(),
            ));
        }
    }
}

/// p = 1 + floor(log(1-lambda) / log(lambda)): after p further iterations the
/// worst residual pair of the current policy is dead.
pub fn elimination_period(lambda: f64) -> Result<u64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::DomainError(format!(
            "lambda = {lambda} outside (0,1)"
        )));
    }
    let ratio = (1.0 - lambda).ln() / lambda.ln();
    if !ratio.is_finite() {
        return Err(Error::DomainError(format!(
            "lambda = {lambda} too close to 1"
        )));
    }
    Ok(1 + ratio.floor() as u64)
}

/// Iteration bound (m1 - n) * p for contracting runs.
pub fn bound_thm3(m1: usize, n: usize, lambda: f64) -> Result<u64> {
    if m1 < n {
        return Err(Error::DomainError(format!("m1 = {m1} below n = {n}")));
    }
    Ok((m1 - n) as u64 * elimination_period(lambda)?)
}

/// The earlier (m + 1)(1 + log(n^2/(1-lambda)) / (-log lambda)) bound, kept
/// for comparison; the ratio of logs is base-independent.
pub fn bound_hmz(m: usize, n: usize, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::DomainError(format!(
            "lambda = {lambda} outside (0,1)"
        )));
    }
    let inner = ((n * n) as f64 / (1.0 - lambda)).ln() / -lambda.ln();
    Ok((m + 1) as f64 * (1.0 + inner))
}

/// Iteration bound (m1 - n)(1 + floor(log K / log(K/(K-1)))) for mean-payoff
/// runs with worst-case return times at most K. K = 1 degenerates to
/// (m1 - n) (the contraction factor is 0, so the period is 1).
pub fn bound_mean(m1: usize, n: usize, k: f64) -> Result<u64> {
    if m1 < n {
        return Err(Error::DomainError(format!("m1 = {m1} below n = {n}")));
    }
    if k < 1.0 {
        return Err(Error::DomainError(format!(
            "return-time bound K = {k} below 1"
        )));
    }
    if k == 1.0 {
        return Ok((m1 - n) as u64);
    }
    let ratio = k.ln() / (k / (k - 1.0)).ln();
    if !ratio.is_finite() {
        return Err(Error::DomainError(format!(
            "K = {k} too large for the bound"
        )));
    }
    Ok((m1 - n) as u64 * (1 + ratio.floor() as u64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    GivenLambda,
    SpectralOmega,
    ReturnTimeK,
}

/// The bound bundle the CLI prints: both bound formulas, the contraction
/// factor used, where it came from, and the proof constants p and mu.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub m1: usize,
    pub m: usize,
    pub lambda: f64,
    pub provenance: Provenance,
    pub elimination_period: u64,
    pub mu: f64,
    pub k_max: u64,
    pub k_max_comparison: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub return_time_k: Option<f64>,
}

pub fn bound_report(
    inst: &GameInstance,
    lambda: f64,
    provenance: Provenance,
    return_time_k: Option<f64>,
) -> Result<BoundReport> {
    let (n, m1, m) = (inst.n, inst.count_m1(), inst.count_m());
    let k_max = match (provenance, return_time_k) {
        (Provenance::ReturnTimeK, Some(k)) => bound_mean(m1, n, k)?,
        _ => bound_thm3(m1, n, lambda)?,
    };
    let p = elimination_period(lambda.max(f64::MIN_POSITIVE))?;
    Ok(BoundReport {
        n,
        m1,
        m,
        lambda,
        provenance,
        elimination_period: p,
        mu: lambda.powi(p as i32) / (1.0 - lambda),
        k_max,
        k_max_comparison: bound_hmz(m, n, lambda)?,
        return_time_k,
    })
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub violations: Vec<String>,
}

/// Result of the six-part runtime certificate.
#[derive(Clone, Debug)]
pub struct CertReport {
    pub checks: Vec<CheckResult>,
}

impl CertReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for CertReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(f, "{}: {}", c.name, if c.passed { "pass" } else { "FAIL" })?;
            for v in &c.violations {
                writeln!(f, "  {v}")?;
            }
        }
        Ok(())
    }
}

/// Checks a completed discounted trace against the convergence theory:
///
/// 1. outer values nonincreasing coordinatewise;
/// 2. v* <= v^{k+1} <= f(v^k) <= v^k;
/// 3. ||v^{k+1} - v*|| <= lambda ||v^k - v*||;
/// 4. no minimizer policy repeats;
/// 5. ||R^(sigma_k)|| <= ||v^k - v*|| <= ||R^(sigma_k)|| / (1 - lambda),
///    where R^(sigma) = f^(sigma)(v*) - v* >= 0;
/// 6. the worst-residual pair of sigma^k never reappears from iteration
///    k + p on, with p the elimination period of lambda.
///
/// All comparisons use the tolerance 1e-8 * (1 + ||v*||).
#[allow(clippy::needless_range_loop)] // checks cross-reference steps k, k+1, t
pub fn certify_trace(
    inst: &GameInstance,
    trace: &IterationTrace,
    lambda: f64,
    v_star: &[f64],
) -> CertReport {
    let tol = 1e-8 * (1.0 + linalg::inf_norm(v_star));
    let mut checks = Vec::new();

    let values: Option<Vec<&ValueVector>> = trace.outer.iter().map(|s| s.value.fixed()).collect();
    let values = match values {
        Some(v) => v,
        None => {
            return CertReport {
                checks: vec![CheckResult {
                    name: "trace_shape",
                    passed: false,
                    violations: vec![
                        "trace carries eigenpairs; certify the reduced run instead".into()
                    ],
                }],
            }
        }
    };
    let steps = values.len();

    // (1) monotone outer values
    let mut violations = Vec::new();
    for k in 0..steps.saturating_sub(1) {
        for i in 0..inst.n {
            if values[k + 1][i] > values[k][i] + tol {
                violations.push(format!(
                    "step {k}: coordinate {i} increased by {}",
                    values[k + 1][i] - values[k][i]
                ));
            }
        }
    }
    checks.push(CheckResult {
        name: "monotone",
        passed: violations.is_empty(),
        violations,
    });

    // (2) sandwich v* <= v^{k+1} <= f(v^k) <= v^k
    let mut violations = Vec::new();
    for k in 0..steps {
        let fv = eval_operator(inst, values[k]);
        for i in 0..inst.n {
            if fv[i] > values[k][i] + tol {
                violations.push(format!("step {k}: f(v)[{i}] above v[{i}]"));
            }
            if v_star[i] > values[k][i] + tol {
                violations.push(format!("step {k}: v*[{i}] above v[{i}]"));
            }
            if k + 1 < steps && values[k + 1][i] > fv[i] + tol {
                violations.push(format!("step {k}: v_next[{i}] above f(v)[{i}]"));
            }
        }
    }
    checks.push(CheckResult {
        name: "sandwich",
        passed: violations.is_empty(),
        violations,
    });

    // (3) geometric contraction toward v*
    let mut violations = Vec::new();
    for k in 0..steps.saturating_sub(1) {
        let d0 = diff_norm(values[k], v_star);
        let d1 = diff_norm(values[k + 1], v_star);
        if d1 > lambda * d0 + tol {
            violations.push(format!("step {k}: distance {d1} above lambda * {d0}"));
        }
    }
    checks.push(CheckResult {
        name: "contraction",
        passed: violations.is_empty(),
        violations,
    });

    // (4) no minimizer policy revisited
    let mut violations = Vec::new();
    for k in 0..steps {
        for t in k + 1..steps {
            if trace.outer[k].min_policy == trace.outer[t].min_policy {
                violations.push(format!("policy at step {k} repeats at step {t}"));
            }
        }
    }
    checks.push(CheckResult {
        name: "no_revisit",
        passed: violations.is_empty(),
        violations,
    });

    // residuals R_i^a = F[v*](i,a) - v*_i over the pairs each policy plays
    let residual_at = |i: usize, a: usize| eval_max(inst, v_star, i, a).0 - v_star[i];

    // (5) residual sandwich
    let mut violations = Vec::new();
    for k in 0..steps {
        let sigma = &trace.outer[k].min_policy;
        let r = eval_policy_min(inst, sigma, v_star);
        let mut r_norm = 0.0f64;
        for i in 0..inst.n {
            let ri = r[i] - v_star[i];
            if ri < -tol {
                violations.push(format!("step {k}: residual[{i}] negative: {ri}"));
            }
            r_norm = r_norm.max(ri.abs());
        }
        let dist = diff_norm(values[k], v_star);
        if r_norm > dist + tol {
            violations.push(format!(
                "step {k}: ||R|| = {r_norm} above ||v - v*|| = {dist}"
            ));
        }
        if dist > r_norm / (1.0 - lambda) + tol {
            violations.push(format!(
                "step {k}: ||v - v*|| = {dist} above ||R||/(1-lambda)"
            ));
        }
    }
    checks.push(CheckResult {
        name: "residual_sandwich",
        passed: violations.is_empty(),
        violations,
    });

    // (6) action elimination after each period of p iterations
    let mut violations = Vec::new();
    if let Ok(p) = elimination_period(lambda) {
        let p = usize::try_from(p).unwrap_or(usize::MAX);
        for k in 0..steps {
            let sigma = &trace.outer[k].min_policy;
            let resid: Vec<f64> = (0..inst.n).map(|i| residual_at(i, sigma.0[i])).collect();
            let worst = resid.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            if worst <= tol {
                continue; // policy already optimal to tolerance
            }
            let Some(start) = k.checked_add(p) else {
                continue;
            };
            for (i, &ri) in resid.iter().enumerate() {
                if ri < worst {
                    continue;
                }
                for t in start..steps {
                    if trace.outer[t].min_policy.0[i] == sigma.0[i] {
                        violations.push(format!(
                            "pair (state {i}, action {}) from step {k} survives at step {t}",
                            sigma.0[i]
                        ));
                    }
                }
            }
        }
    }
    checks.push(CheckResult {
        name: "action_elimination",
        passed: violations.is_empty(),
        violations,
    });

    CertReport { checks }
}

/// Certificate for a mean-payoff run: maps each (eta^k, v^k) through
/// w^k = eta^k + phi^{-1} v^k (phi from the worst-case return times) and
/// certifies the w-sequence against the reduced discounted instance at the
/// certified contraction factor (K-1)/K.
pub fn certify_mean_trace(
    inst: &GameInstance,
    trace: &IterationTrace,
    c: usize,
) -> Result<(CertReport, ReturnTimeResult)> {
    let family = family_from_instance(inst);
    let rt = mean_return_times(&family, c)?;
    let transformed = mean_to_discounted(inst, c, &rt.phi)?;
    let mut outer = Vec::with_capacity(trace.outer.len());
    for step in &trace.outer {
        let (eta, bias) = match &step.value {
            TraceValue::Eigen { eta, bias } => (*eta, bias),
            TraceValue::Fixed(_) => {
                return Err(Error::DomainError(
                    "mean certification requires an eigenpair trace".into(),
                ))
            }
        };
        let w: Vec<f64> = rt.phi.iter().zip(bias).map(|(p, v)| eta + v / p).collect();
        outer.push(OuterStep {
            min_policy: step.min_policy.clone(),
            value: TraceValue::Fixed(w),
            residual_norm: step.residual_norm,
            inner: Vec::new(),
        });
    }
    let w_star = match &outer
        .last()
        .ok_or_else(|| Error::DomainError("empty trace".into()))?
        .value
    {
        TraceValue::Fixed(w) => w.clone(),
        TraceValue::Eigen { .. } => unreachable!(),
    };
    let w_trace = IterationTrace {
        outer,
        stopped_reason: trace.stopped_reason,
    };
    Ok((
        certify_trace(&transformed, &w_trace, rt.lambda, &w_star),
        rt,
    ))
}
