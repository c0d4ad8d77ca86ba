//! Instance-level changes of variables: diagonal scaling by a positive
//! vector, and the renewal-state reduction that turns a mean-payoff game into
//! a contracting discounted one. Both materialize a fresh `GameInstance`, so
//! transformed games are serializable and solvable by the unmodified engine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameInstance, PayoffMode, ValueVector};
use crate::linalg::EigenPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformKind {
    Scaling,
    MeanReduction,
}

/// What was applied and with which certificate; enough to lift solutions of
/// the transformed instance back to the original coordinates.
#[derive(Clone, Debug)]
pub struct TransformRecord {
    pub kind: TransformKind,
    pub phi: ValueVector,
    /// Renewal state (mean reduction only).
    pub c: Option<usize>,
    pub lambda_certified: f64,
}

/// On-disk sidecar; the renewal state is stored 1-based.
#[derive(Serialize, Deserialize)]
struct SidecarDto {
    transform: String,
    phi: Vec<f64>,
    c: Option<usize>,
    lambda: f64,
}

impl TransformRecord {
    pub fn to_sidecar_string(&self) -> String {
        let dto = SidecarDto {
            transform: match self.kind {
                TransformKind::Scaling => "scaling".into(),
                TransformKind::MeanReduction => "mean".into(),
            },
            phi: self.phi.clone(),
            c: self.c.map(|c| c + 1),
            lambda: self.lambda_certified,
        };
        crate::game::to_json_17(&dto)
    }

    pub fn from_sidecar_str(s: &str) -> Result<TransformRecord> {
        let dto: SidecarDto = serde_json::from_str(s)
            .map_err(|e| Error::DomainError(format!("sidecar parse error: {e}")))?;
        let kind = match dto.transform.as_str() {
            "scaling" => TransformKind::Scaling,
            "mean" => TransformKind::MeanReduction,
            other => {
                return Err(Error::DomainError(format!(
                    "unknown transform kind {other:?}"
                )))
            }
        };
        let c = match dto.c {
            Some(0) => return Err(Error::DomainError("sidecar c is 1-based".into())),
            Some(c) => Some(c - 1),
            None => None,
        };
        Ok(TransformRecord {
            kind,
            phi: dto.phi,
            c,
            lambda_certified: dto.lambda,
        })
    }
}

fn check_phi(phi: &[f64]) -> Result<()> {
    for (index, &value) in phi.iter().enumerate() {
        if value <= 0.0 || !value.is_finite() {
            return Err(Error::NonPositivePhi { index, value });
        }
    }
    Ok(())
}

/// Diagonal scaling: kernel entry (i,y) becomes entry * phi_y / phi_i and the
/// reward at state i becomes reward / phi_i. The scaled instance's operator
/// is v -> phi^{-1} f(phi v).
pub fn scale_instance(inst: &GameInstance, phi: &[f64]) -> Result<GameInstance> {
    check_phi(phi)?;
    assert_eq!(phi.len(), inst.n, "phi length must match the state count");
    let mut out = inst.clone();
    for (i, st) in out.states.iter_mut().enumerate() {
        for act in &mut st.min_actions {
            for ma in &mut act.max_actions {
                for (y, w) in ma.row.iter_mut().enumerate() {
                    *w *= phi[y] / phi[i];
                }
                ma.reward /= phi[i];
            }
        }
    }
    Ok(out)
}

/// Renewal-state reduction of a mean-payoff instance to a discounted one.
///
/// For every kernel row M: zero the c-th column, re-insert the column
/// (1/phi_c)(phi - 1 - M_stop phi), then apply the phi scaling. When phi
/// bounds the worst-case return times (phi >= 1 + M_stop phi for every row),
/// the output rows are nonnegative with sums at most (K-1)/K.
pub fn mean_to_discounted(inst: &GameInstance, c: usize, phi: &[f64]) -> Result<GameInstance> {
    assert_eq!(
        inst.payoff,
        PayoffMode::MeanPayoff,
        "reduction applies to mean-payoff instances"
    );
    assert!(c < inst.n, "renewal state out of range");
    check_phi(phi)?;
    let mut out = inst.clone();
    out.payoff = PayoffMode::Discounted;
    for (i, st) in out.states.iter_mut().enumerate() {
        for act in &mut st.min_actions {
            for ma in &mut act.max_actions {
                let stopped_phi: f64 = ma
                    .row
                    .iter()
                    .enumerate()
                    .filter(|&(y, _)| y != c)
                    .map(|(y, &w)| w * phi[y])
                    .sum();
                let required = 1.0 + stopped_phi;
                let mut replaced = (phi[i] - required) / phi[c];
                if replaced < 0.0 {
                    if phi[i] < required - 1e-9 {
                        return Err(Error::PhiCertificateViolated {
                            state: i,
                            phi: phi[i],
                            required,
                        });
                    }
                    replaced = 0.0; // clamp floating noise at the boundary
                }
                ma.row[c] = replaced;
                for (y, w) in ma.row.iter_mut().enumerate() {
                    *w *= phi[y] / phi[i];
                }
                ma.reward /= phi[i];
            }
        }
    }
    Ok(out)
}

/// Outcome of a row-sum contraction check.
#[derive(Clone, Debug)]
pub struct ContractionCheck {
    pub pass: bool,
    pub lambda: f64,
    pub worst_state: usize,
    pub worst_min_action: usize,
    pub worst_max_action: usize,
    pub worst_sum: f64,
}

/// Checks every kernel row sum against lambda (tolerance 1e-9).
pub fn verify_contraction(inst: &GameInstance, lambda: f64) -> ContractionCheck {
    let mut worst = (0usize, 0usize, 0usize, f64::NEG_INFINITY);
    for i in 0..inst.n {
        for a in 0..inst.a_count(i) {
            for b in 0..inst.b_count(i) {
                let sum: f64 = inst.row(i, a, b).iter().sum();
                if sum > worst.3 {
                    worst = (i, a, b, sum);
                }
            }
        }
    }
    ContractionCheck {
        pass: worst.3 <= lambda + 1e-9,
        lambda,
        worst_state: worst.0,
        worst_min_action: worst.1,
        worst_max_action: worst.2,
        worst_sum: worst.3,
    }
}

#[derive(Clone, Debug)]
pub enum LiftedSolution {
    Value(ValueVector),
    Eigen(EigenPair),
}

/// Maps a solution of the transformed instance back to original coordinates:
/// scaling inverts to v = phi w; the mean reduction inverts to eta = w_c,
/// v = phi (w - w_c), with the bias exactly zero at the renewal state.
pub fn lift_solution(record: &TransformRecord, w: &[f64]) -> LiftedSolution {
    assert_eq!(
        record.phi.len(),
        w.len(),
        "record and solution dimensions differ"
    );
    match record.kind {
        TransformKind::Scaling => {
            LiftedSolution::Value(record.phi.iter().zip(w).map(|(p, x)| p * x).collect())
        }
        TransformKind::MeanReduction => {
            let c = record
                .c
                .expect("mean reduction records carry the renewal state");
            let eta = w[c];
            let bias = record
                .phi
                .iter()
                .zip(w)
                .map(|(p, x)| p * (x - eta))
                .collect();
            LiftedSolution::Eigen(EigenPair {
                eta,
                bias,
                renewal_state: c,
            })
        }
    }
}
