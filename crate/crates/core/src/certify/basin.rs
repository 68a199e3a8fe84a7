//! Monte Carlo estimation of a basin of attraction.

use serde::{Deserialize, Serialize};

use crate::dynamics::{flow_endpoint, SystemDef};
use crate::equilibria::RegionSpec;
use crate::error::{CoreError, Result};
use crate::geometry::{dist, PointCoords};
use crate::rng::{stream, Stream};

const MAX_WITNESSES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinParams {
    pub n: usize,
    pub horizon: f64,
    pub conv_tol: f64,
    /// Integration tolerance.
    pub tol: f64,
    pub seed: u64,
}

impl Default for BasinParams {
    fn default() -> Self {
        Self {
            n: 10_000,
            horizon: 100.0,
            conv_tol: 1e-3,
            tol: 1e-6,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessOutcome {
    Diverged,
    Horizon,
}

/// A sample that did not converge: its initial condition and, when the
/// integration survived to the horizon, its final point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinWitness {
    pub initial: Vec<f64>,
    pub outcome: WitnessOutcome,
    pub final_point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinEstimate {
    pub n_samples: usize,
    pub n_converged: usize,
    pub n_diverged: usize,
    /// Reached the horizon without converging or diverging.
    pub n_other: usize,
    pub fraction: f64,
    pub wilson_lower_95: f64,
    pub failure_witnesses: Vec<BasinWitness>,
    /// Initial conditions of converged samples (the empirical basin).
    #[serde(skip_serializing, default)]
    pub converged_initials: Vec<Vec<f64>>,
}

/// Wilson 95% lower confidence bound for a binomial proportion.
pub fn wilson_lower_95(successes: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let z = 1.959963984540054_f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = p + z2 / (2.0 * nf);
    let spread = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - spread) / denom).max(0.0)
}

/// Flows `n` uniform samples of the region to the horizon and counts those
/// ending within `conv_tol` of the target. `extra_initials` are evaluated
/// before the fresh samples, so retained witnesses from an earlier run are
/// always re-checked.
pub fn monte_carlo_basin(
    sys: &SystemDef,
    target: &PointCoords,
    region: &RegionSpec,
    params: &BasinParams,
    extra_initials: &[PointCoords],
) -> Result<BasinEstimate> {
    if params.n < 1 {
        return Err(CoreError::InvalidInput("n must be at least 1".into()));
    }
    region.validate(sys.space())?;
    let space = sys.space();
    let mut rng = stream(params.seed, Stream::BasinSampling);

    let mut estimate = BasinEstimate {
        n_samples: 0,
        n_converged: 0,
        n_diverged: 0,
        n_other: 0,
        fraction: 0.0,
        wilson_lower_95: 0.0,
        failure_witnesses: Vec::new(),
        converged_initials: Vec::new(),
    };

    let run_one = |p0: PointCoords, estimate: &mut BasinEstimate| -> Result<()> {
        estimate.n_samples += 1;
        match flow_endpoint(sys, &p0, params.horizon, params.tol) {
            Ok(end) => {
                if dist(space, &end, target)? < params.conv_tol {
                    estimate.n_converged += 1;
                    estimate.converged_initials.push(p0.0);
                } else {
                    estimate.n_other += 1;
                    if estimate.failure_witnesses.len() < MAX_WITNESSES {
                        estimate.failure_witnesses.push(BasinWitness {
                            initial: p0.0,
                            outcome: WitnessOutcome::Horizon,
                            final_point: Some(end.0),
                        });
                    }
                }
            }
            Err(e) if e.is_divergence() => {
                estimate.n_diverged += 1;
                if estimate.failure_witnesses.len() < MAX_WITNESSES {
                    estimate.failure_witnesses.push(BasinWitness {
                        initial: p0.0,
                        outcome: WitnessOutcome::Diverged,
                        final_point: None,
                    });
                }
            }
            Err(e) => return Err(e),
        }
        Ok(())
    };

    for extra in extra_initials {
        run_one(extra.clone(), &mut estimate)?;
    }
    for _ in 0..params.n {
        let p0 = region.sample(&mut rng);
        run_one(p0, &mut estimate)?;
    }

    estimate.fraction = estimate.n_converged as f64 / estimate.n_samples as f64;
    estimate.wilson_lower_95 = wilson_lower_95(estimate.n_converged, estimate.n_samples);
    Ok(estimate)
}
