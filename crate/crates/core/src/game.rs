//! Game data model: states, nested action sets, rewards, unnormalized
//! transition kernels, plus validation and policy-space combinatorics.
//!
//! A `GameInstance` is the turn-based zero-sum game in matrix form: at state
//! `i` the minimizer picks `a`, the maximizer answers with `b`, the minimizer
//! pays `reward(i,a,b)` and the game moves according to the kernel row
//! `row(i,a,b)`, whose entries are discount-times-probability weights (they
//! need not sum to one in discounted mode).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on policy enumerations (`CombinatorialOverflow` beyond it).
pub const DEFAULT_ENUM_CAP: u128 = 10_000_000;

/// Row-sum tolerance for Markov validation of mean-payoff instances.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// A value function, bias, scaling vector or residual: one real per state.
pub type ValueVector = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PayoffMode {
    #[serde(rename = "discounted")]
    Discounted,
    #[serde(rename = "mean")]
    MeanPayoff,
}

/// One maximizer action at a fixed (state, min-action): payment and kernel row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaxAction {
    pub name: String,
    pub reward: f64,
    pub row: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinAction {
    pub name: String,
    pub max_actions: Vec<MaxAction>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateActions {
    pub min_actions: Vec<MinAction>,
}

/// Full description of a finite zero-sum stochastic game.
///
/// Serializes to the on-disk JSON format directly; states appear in index
/// order and `row[y]` is the kernel weight from the state to state `y`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameInstance {
    pub n: usize,
    pub payoff: PayoffMode,
    pub states: Vec<StateActions>,
}

/// Minimizer policy: one action index per state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MinPolicy(pub Vec<usize>);

/// Maximizer policy: one action index per (state, min-action) pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaxPolicy(pub Vec<Vec<usize>>);

impl MinPolicy {
    /// Lexicographically-first policy (index 0 everywhere).
    pub fn first(inst: &GameInstance) -> Self {
        MinPolicy(vec![0; inst.n])
    }
}

impl MaxPolicy {
    pub fn first(inst: &GameInstance) -> Self {
        MaxPolicy((0..inst.n).map(|i| vec![0; inst.a_count(i)]).collect())
    }
}

impl GameInstance {
    pub fn a_count(&self, i: usize) -> usize {
        self.states[i].min_actions.len()
    }

    /// Number of maximizer actions at state `i` (uniform across min-actions).
    pub fn b_count(&self, i: usize) -> usize {
        self.states[i].min_actions[0].max_actions.len()
    }

    pub fn reward(&self, i: usize, a: usize, b: usize) -> f64 {
        self.states[i].min_actions[a].max_actions[b].reward
    }

    pub fn row(&self, i: usize, a: usize, b: usize) -> &[f64] {
        &self.states[i].min_actions[a].max_actions[b].row
    }

    /// Total number of (state, min-action) pairs.
    pub fn count_m1(&self) -> usize {
        (0..self.n).map(|i| self.a_count(i)).sum()
    }

    /// Total number of (state, min-action, max-action) triples.
    pub fn count_m(&self) -> usize {
        (0..self.n).map(|i| self.a_count(i) * self.b_count(i)).sum()
    }

    /// Largest kernel row sum over all triples.
    pub fn max_row_sum(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for a in 0..self.a_count(i) {
                for b in 0..self.b_count(i) {
                    worst = worst.max(self.row(i, a, b).iter().sum());
                }
            }
        }
        worst
    }

    /// Transition matrix and payment vector for a fixed policy pair.
    pub fn pair_system(&self, sigma: &MinPolicy, delta: &MaxPolicy) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut m = Vec::with_capacity(self.n);
        let mut r = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let a = sigma.0[i];
            let b = delta.0[i][a];
            m.push(self.row(i, a, b).to_vec());
            r.push(self.reward(i, a, b));
        }
        (m, r)
    }

    /// Like `pair_system` with the maximizer's choice given per state only.
    pub fn selection_system(
        &self,
        sigma: &MinPolicy,
        b_per_state: &[usize],
    ) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut m = Vec::with_capacity(self.n);
        let mut r = Vec::with_capacity(self.n);
        for (i, (&a, &b)) in sigma.0.iter().zip(b_per_state).enumerate() {
            m.push(self.row(i, a, b).to_vec());
            r.push(self.reward(i, a, b));
        }
        (m, r)
    }

    /// Checks every structural and numeric invariant; an empty report means valid.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.n == 0 {
            violations.push(Violation::EmptyStateSpace);
        }
        if self.states.len() != self.n {
            violations.push(Violation::StateCountMismatch {
                declared: self.n,
                actual: self.states.len(),
            });
            return ValidationReport { violations };
        }
        for (i, st) in self.states.iter().enumerate() {
            if st.min_actions.is_empty() {
                violations.push(Violation::EmptyMinActions { state: i });
                continue;
            }
            let b_names: Vec<&str> = st.min_actions[0]
                .max_actions
                .iter()
                .map(|ma| ma.name.as_str())
                .collect();
            for (a, act) in st.min_actions.iter().enumerate() {
                if act.max_actions.is_empty() {
                    violations.push(Violation::EmptyMaxActions {
                        state: i,
                        min_action: a,
                    });
                    continue;
                }
                let names: Vec<&str> = act.max_actions.iter().map(|ma| ma.name.as_str()).collect();
                if names != b_names {
                    violations.push(Violation::RaggedMaxActions {
                        state: i,
                        min_action: a,
                    });
                }
                for (b, ma) in act.max_actions.iter().enumerate() {
                    if !ma.reward.is_finite() {
                        violations.push(Violation::NonFiniteReward {
                            state: i,
                            min_action: a,
                            max_action: b,
                        });
                    }
                    if ma.row.len() != self.n {
                        violations.push(Violation::WrongRowLength {
                            state: i,
                            min_action: a,
                            max_action: b,
                            len: ma.row.len(),
                        });
                        continue;
                    }
                    for (y, &w) in ma.row.iter().enumerate() {
                        if !w.is_finite() {
                            violations.push(Violation::NonFiniteKernelEntry {
                                state: i,
                                min_action: a,
                                max_action: b,
                                col: y,
                            });
                        } else if w < 0.0 {
                            violations.push(Violation::NegativeKernelEntry {
                                state: i,
                                min_action: a,
                                max_action: b,
                                col: y,
                                value: w,
                            });
                        }
                    }
                    if self.payoff == PayoffMode::MeanPayoff {
                        let sum: f64 = ma.row.iter().sum();
                        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                            violations.push(Violation::RowSumNotOne {
                                state: i,
                                min_action: a,
                                max_action: b,
                                sum,
                            });
                        }
                    }
                }
            }
        }
        ValidationReport { violations }
    }

    /// Parses an instance from JSON and renormalizes mean-payoff rows.
    ///
    /// Rows whose sum is within `ROW_SUM_TOLERANCE` of one are divided by the
    /// actual sum, so downstream math sees exact stochasticity up to floating
    /// error. Rows already within ~8nε of one are left untouched, which makes
    /// the renormalization idempotent: load(save(x)) reproduces x bit for bit.
    pub fn from_json_str(s: &str) -> Result<GameInstance> {
        let mut inst: GameInstance = serde_json::from_str(s)
            .map_err(|e| Error::DomainError(format!("JSON parse error: {e}")))?;
        inst.renormalize_mean_rows();
        Ok(inst)
    }

    fn renormalize_mean_rows(&mut self) {
        if self.payoff != PayoffMode::MeanPayoff {
            return;
        }
        let skip_band = 8.0 * self.n as f64 * f64::EPSILON;
        for st in &mut self.states {
            for act in &mut st.min_actions {
                for ma in &mut act.max_actions {
                    let sum: f64 = ma.row.iter().sum();
                    if !sum.is_finite() || sum <= 0.0 {
                        continue;
                    }
                    let err = (sum - 1.0).abs();
                    if err > skip_band && err <= ROW_SUM_TOLERANCE {
                        for w in &mut ma.row {
                            *w /= sum;
                        }
                    }
                }
            }
        }
    }

    /// Serializes with every float printed to 17 significant digits, the
    /// shortest form guaranteed to round-trip a double exactly.
    pub fn to_json_string(&self) -> String {
        to_json_17(self)
    }
}

/// Serialize any value as JSON with floats at 17 significant digits.
pub fn to_json_17<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter);
    value
        .serialize(&mut ser)
        .expect("JSON serialization cannot fail");
    String::from_utf8(out).expect("serializer emits UTF-8")
}

/// Compact JSON formatter that writes f64 values as `{:.16e}`.
struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    EmptyStateSpace,
    StateCountMismatch {
        declared: usize,
        actual: usize,
    },
    EmptyMinActions {
        state: usize,
    },
    EmptyMaxActions {
        state: usize,
        min_action: usize,
    },
    RaggedMaxActions {
        state: usize,
        min_action: usize,
    },
    NegativeKernelEntry {
        state: usize,
        min_action: usize,
        max_action: usize,
        col: usize,
        value: f64,
    },
    NonFiniteKernelEntry {
        state: usize,
        min_action: usize,
        max_action: usize,
        col: usize,
    },
    NonFiniteReward {
        state: usize,
        min_action: usize,
        max_action: usize,
    },
    WrongRowLength {
        state: usize,
        min_action: usize,
        max_action: usize,
        len: usize,
    },
    RowSumNotOne {
        state: usize,
        min_action: usize,
        max_action: usize,
        sum: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Coordinates are reported 1-based to match the state numbering 1..n.
        match self {
            Violation::EmptyStateSpace => write!(f, "instance has no states"),
            Violation::StateCountMismatch { declared, actual } => {
                write!(f, "declared n = {declared} but {actual} states present")
            }
            Violation::EmptyMinActions { state } => {
                write!(f, "state {} has no min-actions", state + 1)
            }
            Violation::EmptyMaxActions { state, min_action } => {
                write!(
                    f,
                    "state {}, min-action {} has no max-actions",
                    state + 1,
                    min_action + 1
                )
            }
            Violation::RaggedMaxActions { state, min_action } => write!(
                f,
                "state {}: max-action list of min-action {} differs from the state's first list",
                state + 1,
                min_action + 1
            ),
            Violation::NegativeKernelEntry {
                state,
                min_action,
                max_action,
                col,
                value,
            } => write!(
                f,
                "negative kernel entry at ({},{},{}) column {}: {value}",
                state + 1,
                min_action + 1,
                max_action + 1,
                col + 1
            ),
            Violation::NonFiniteKernelEntry {
                state,
                min_action,
                max_action,
                col,
            } => write!(
                f,
                "non-finite kernel entry at ({},{},{}) column {}",
                state + 1,
                min_action + 1,
                max_action + 1,
                col + 1
            ),
            Violation::NonFiniteReward {
                state,
                min_action,
                max_action,
            } => write!(
                f,
                "non-finite reward at ({},{},{})",
                state + 1,
                min_action + 1,
                max_action + 1
            ),
            Violation::WrongRowLength {
                state,
                min_action,
                max_action,
                len,
            } => write!(
                f,
                "kernel row at ({},{},{}) has length {len}, expected n",
                state + 1,
                min_action + 1,
                max_action + 1
            ),
            Violation::RowSumNotOne {
                state,
                min_action,
                max_action,
                sum,
            } => write!(
                f,
                "row sum != 1 at ({},{},{}): {sum}",
                state + 1,
                min_action + 1,
                max_action + 1
            ),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            write!(f, "OK")
        } else {
            for v in &self.violations {
                writeln!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

fn checked_product(counts: impl Iterator<Item = u128>) -> u128 {
    let mut total: u128 = 1;
    for c in counts {
        total = total.saturating_mul(c);
    }
    total
}

/// Number of minimizer policies, saturating at `u128::MAX`.
pub fn min_policy_count(inst: &GameInstance) -> u128 {
    checked_product((0..inst.n).map(|i| inst.a_count(i) as u128))
}

/// Number of maximizer policies Π_i |B_i|^{|A_i|}, saturating.
pub fn max_policy_count(inst: &GameInstance) -> u128 {
    checked_product(
        (0..inst.n).flat_map(|i| std::iter::repeat_n(inst.b_count(i) as u128, inst.a_count(i))),
    )
}

/// Decodes the `idx`-th minimizer policy in lexicographic order
/// (state-major: state 1 is the most significant digit).
pub fn min_policy_at(inst: &GameInstance, idx: u128) -> MinPolicy {
    let mut digits = vec![0usize; inst.n];
    let mut rem = idx;
    for i in (0..inst.n).rev() {
        let radix = inst.a_count(i) as u128;
        digits[i] = (rem % radix) as usize;
        rem /= radix;
    }
    MinPolicy(digits)
}

/// Odometer over mixed-radix digit vectors, most significant digit first.
struct Odometer {
    radices: Vec<usize>,
    digits: Vec<usize>,
    done: bool,
}

impl Odometer {
    fn new(radices: Vec<usize>) -> Self {
        let digits = vec![0; radices.len()];
        let done = radices.contains(&0);
        Odometer {
            radices,
            digits,
            done,
        }
    }

    fn advance(&mut self) {
        for pos in (0..self.radices.len()).rev() {
            self.digits[pos] += 1;
            if self.digits[pos] < self.radices[pos] {
                return;
            }
            self.digits[pos] = 0;
        }
        self.done = true;
    }
}

pub struct MinPolicyIter(Odometer);

impl Iterator for MinPolicyIter {
    type Item = MinPolicy;

    fn next(&mut self) -> Option<MinPolicy> {
        if self.0.done {
            return None;
        }
        let out = MinPolicy(self.0.digits.clone());
        self.0.advance();
        Some(out)
    }
}

pub struct MaxPolicyIter {
    od: Odometer,
    a_counts: Vec<usize>,
}

impl Iterator for MaxPolicyIter {
    type Item = MaxPolicy;

    fn next(&mut self) -> Option<MaxPolicy> {
        if self.od.done {
            return None;
        }
        let mut nested = Vec::with_capacity(self.a_counts.len());
        let mut pos = 0;
        for &ac in &self.a_counts {
            nested.push(self.od.digits[pos..pos + ac].to_vec());
            pos += ac;
        }
        self.od.advance();
        Some(MaxPolicy(nested))
    }
}

/// Lexicographic enumeration of all minimizer policies.
pub fn enumerate_min_policies(inst: &GameInstance, cap: u128) -> Result<MinPolicyIter> {
    let count = min_policy_count(inst);
    if count > cap {
        return Err(Error::CombinatorialOverflow { count, cap });
    }
    Ok(MinPolicyIter(Odometer::new(
        (0..inst.n).map(|i| inst.a_count(i)).collect(),
    )))
}

/// Lexicographic enumeration of all maximizer policies
/// (state-major, min-action-index minor digit order).
pub fn enumerate_max_policies(inst: &GameInstance, cap: u128) -> Result<MaxPolicyIter> {
    let count = max_policy_count(inst);
    if count > cap {
        return Err(Error::CombinatorialOverflow { count, cap });
    }
    let a_counts: Vec<usize> = (0..inst.n).map(|i| inst.a_count(i)).collect();
    let radices: Vec<usize> = (0..inst.n)
        .flat_map(|i| std::iter::repeat_n(inst.b_count(i), inst.a_count(i)))
        .collect();
    Ok(MaxPolicyIter {
        od: Odometer::new(radices),
        a_counts,
    })
}
