//! Machine-checked evidence for cascade stability hypotheses.
//!
//! The pipeline certifies, at stated numerical parameters: that the inner
//! loop has a hyperbolic, almost-globally-attracting equilibrium; that the
//! unforced outer loop is gradient-like with hyperbolic equilibria and a
//! single attractor; that the interconnection term obeys a growth-rate
//! certificate wherever the outer energy is large; that sampled inner
//! trajectories admit exponential decay envelopes under which the outer
//! energy obeys a comparison bound; and that sampled initial conditions of
//! the full cascade converge. Verdicts are graded evidence, never proofs.

mod basin;
mod conditions;
mod envelope;
mod growth;

pub use basin::{monte_carlo_basin, wilson_lower_95, BasinEstimate, BasinParams, BasinWitness};
pub use conditions::{
    certify_cascade, certify_inner_loop, certify_unforced_outer, default_hop_time, CertifyParams,
    InnerLoopOutcome, InnerLoopParams, OuterLoopOutcome, OuterLoopParams,
};
pub use envelope::{
    comparison_bound_check, estimate_decay_envelope, ComparisonResult, DecayEnvelope, EnvelopeFit,
};
pub use growth::{
    verify_growth_certificate, GrowthCheckParams, GrowthCheckResult, GrowthWitness,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::ScalarField;
use crate::error::{CoreError, Result};
use crate::geometry::PointCoords;

/// Outcome of one certification condition or of a whole report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Conjunction: any FAIL dominates, else any INCONCLUSIVE, else PASS.
    pub fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Pass;
        for v in verdicts {
            match v {
                Verdict::Fail => return Verdict::Fail,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                Verdict::Pass => {}
            }
        }
        out
    }
}

/// How a condition's evidence was gathered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvidenceGrade {
    #[serde(rename = "sampled")]
    Sampled,
    #[serde(rename = "exhaustive-at-resolution")]
    ExhaustiveAtResolution,
}

/// One certified hypothesis with its verdict and evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub id: String,
    pub verdict: Verdict,
    pub evidence_grade: EvidenceGrade,
    pub summary: String,
    pub parameters: BTreeMap<String, Value>,
    /// State-space witnesses of failures (at most 100 retained).
    pub witnesses: Vec<Vec<f64>>,
}

/// Structured verdicts and evidence for every certified hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub schema_version: u32,
    pub system: String,
    pub overall: Verdict,
    pub notes: Vec<String>,
    pub parameters: BTreeMap<String, Value>,
    pub conditions: Vec<ConditionEntry>,
}

impl CertificationReport {
    /// Stable-key, deterministic JSON rendering.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Growth-rate certificate for the interconnection term: a proper candidate
/// function on the outer space, gain and bias functions on the inner space
/// vanishing at the inner rest point, and the energy level above which the
/// growth inequality must hold.
#[derive(Debug, Clone)]
pub struct GrowthCertificate {
    pub lyapunov: ScalarField,
    pub gain: ScalarField,
    pub bias: ScalarField,
    pub level: f64,
}

impl GrowthCertificate {
    /// Validates that gain and bias vanish at the inner rest point
    /// (tolerance 1e-10).
    pub fn new(
        lyapunov: ScalarField,
        gain: ScalarField,
        bias: ScalarField,
        level: f64,
        inner_equilibrium: &PointCoords,
    ) -> Result<Self> {
        let g0 = gain.value(inner_equilibrium)?;
        let b0 = bias.value(inner_equilibrium)?;
        if g0.abs() > 1e-10 || b0.abs() > 1e-10 {
            return Err(CoreError::InvalidInput(format!(
                "gain/bias must vanish at the inner rest point (gain = {g0:.3e}, bias = {b0:.3e})"
            )));
        }
        if !level.is_finite() {
            return Err(CoreError::InvalidInput("level must be finite".into()));
        }
        Ok(Self {
            lyapunov,
            gain,
            bias,
            level,
        })
    }
}

pub(crate) fn round_trip_f64(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

#[cfg(test)]
mod tests;
