//! Sampled verification of the interconnection growth inequality.
//!
//! At every sampled pair of an outer state with energy above the certificate
//! level and an inner state from the empirical basin, the directional
//! derivative of the energy along the interconnection must stay below
//! `gain(y) * W(x) + bias(y)`. Differentiability of the gain and bias at the
//! inner rest point is evidenced by bounded difference quotients over
//! shrinking radii.

use serde::Serialize;

use crate::dynamics::{lie_derivative, CascadeDef};
use crate::equilibria::RegionSpec;
use crate::error::Result;
use crate::geometry::{canonicalize, metric_norm, PointCoords};
use crate::rng::{stream, Stream};

use super::{GrowthCertificate, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCheckParams {
    /// Outer samples with energy at or above the level.
    pub n_x: usize,
    /// Inner samples drawn from the empirical basin pool.
    pub n_y: usize,
    pub seed: u64,
    /// Slack added to the right-hand side of the inequality.
    pub violation_tol: f64,
    /// Rejection-sampling proposals per escalation round.
    pub max_proposals_per_round: usize,
    /// Times the line bounds may be doubled when acceptance starves.
    pub escalation_rounds: usize,
}

impl Default for GrowthCheckParams {
    fn default() -> Self {
        Self {
            n_x: 1000,
            n_y: 100,
            seed: 42,
            violation_tol: 1e-9,
            max_proposals_per_round: 1_000_000,
            escalation_rounds: 3,
        }
    }
}

/// The pair maximizing `L_h W - (gain W + bias)`, kept for re-evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lie_derivative: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCheckResult {
    pub verdict: Verdict,
    pub n_pairs: usize,
    /// Max of `L_h W - (gain W + bias)` over all sampled pairs.
    pub max_excess: f64,
    pub witness: Option<GrowthWitness>,
    /// `(radius, max gain / distance)` over shrinking radii.
    pub gain_quotients: Vec<(f64, f64)>,
    pub bias_quotients: Vec<(f64, f64)>,
    pub quotients_bounded: bool,
    pub region_escalations: usize,
    pub n_x_accepted: usize,
    pub starved: bool,
    pub min_sampled_energy: f64,
}

const QUOTIENT_RADII: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];
const QUOTIENT_DIRECTIONS: usize = 32;

fn difference_quotients(
    field: &crate::dynamics::ScalarField,
    zero_y: &PointCoords,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<(f64, f64)>> {
    let space = field.space();
    let n = space.dim();
    let mut out = Vec::new();
    for &radius in &QUOTIENT_RADII {
        let mut worst: f64 = 0.0;
        for _ in 0..QUOTIENT_DIRECTIONS {
            let dir: Vec<f64> = (0..n)
                .map(|_| rand::Rng::random_range(rng, -1.0..1.0))
                .collect();
            let norm = metric_norm(space, &dir);
            if norm < 1e-9 {
                continue;
            }
            let probe = PointCoords(
                zero_y
                    .0
                    .iter()
                    .zip(&dir)
                    .map(|(z, d)| z + radius * d / norm)
                    .collect(),
            );
            let probe = canonicalize(space, &probe)?;
            let value = field.value(&probe)?;
            worst = worst.max(value.abs() / radius);
        }
        out.push((radius, worst));
    }
    Ok(out)
}

fn quotients_bounded(quotients: &[(f64, f64)]) -> bool {
    // Evidence of differentiability at the rest point: the quotient at the
    // smallest radius must not blow up relative to the largest radius.
    let largest = quotients.first().map(|q| q.1).unwrap_or(0.0);
    let smallest = quotients.last().map(|q| q.1).unwrap_or(0.0);
    smallest <= 10.0 * (largest + 1e-9)
}

/// Checks the growth inequality on `n_x * n_y` sampled pairs.
///
/// Outer samples are drawn by rejection from `region_x` conditioned on
/// `W(x) >= level`; when a round of proposals starves, the line bounds are
/// doubled (properness pushes the high-energy set outward), and starvation
/// after the allowed escalations yields an INCONCLUSIVE verdict. Inner
/// samples are drawn from `y_pool`, the empirically converged basin points.
pub fn verify_growth_certificate(
    cas: &CascadeDef,
    cert: &GrowthCertificate,
    region_x: &RegionSpec,
    y_pool: &[PointCoords],
    params: &GrowthCheckParams,
) -> Result<GrowthCheckResult> {
    region_x.validate(cas.outer_space())?;
    let mut rng = stream(params.seed, Stream::CertificateSampling);

    let mut result = GrowthCheckResult {
        verdict: Verdict::Pass,
        n_pairs: 0,
        max_excess: f64::NEG_INFINITY,
        witness: None,
        gain_quotients: difference_quotients(&cert.gain, cas.inner_equilibrium(), &mut rng)?,
        bias_quotients: difference_quotients(&cert.bias, cas.inner_equilibrium(), &mut rng)?,
        quotients_bounded: false,
        region_escalations: 0,
        n_x_accepted: 0,
        starved: false,
        min_sampled_energy: f64::INFINITY,
    };
    result.quotients_bounded =
        quotients_bounded(&result.gain_quotients) && quotients_bounded(&result.bias_quotients);

    // Rejection sampling of the high-energy outer set.
    let mut xs: Vec<(PointCoords, f64)> = Vec::with_capacity(params.n_x);
    let mut region = region_x.clone();
    loop {
        let mut proposals = 0;
        while xs.len() < params.n_x && proposals < params.max_proposals_per_round {
            proposals += 1;
            let candidate = region.sample(&mut rng);
            let w = cert.lyapunov.value(&candidate)?;
            if w >= cert.level {
                result.min_sampled_energy = result.min_sampled_energy.min(w);
                xs.push((candidate, w));
            }
        }
        if xs.len() >= params.n_x {
            break;
        }
        if result.region_escalations >= params.escalation_rounds {
            result.starved = true;
            result.verdict = Verdict::Inconclusive;
            return Ok(result);
        }
        region = region.widen_lines(2.0);
        result.region_escalations += 1;
    }

    if y_pool.is_empty() {
        result.verdict = Verdict::Inconclusive;
        return Ok(result);
    }
    let ys: Vec<&PointCoords> = if y_pool.len() <= params.n_y {
        y_pool.iter().collect()
    } else {
        (0..params.n_y)
            .map(|i| &y_pool[i * y_pool.len() / params.n_y])
            .collect()
    };

    let mut negative_energy = false;
    for (x, w) in &xs {
        if *w < 0.0 {
            negative_energy = true;
        }
        for y in &ys {
            let h = cas.interconnection(x, y)?;
            let lie = lie_derivative(&cert.lyapunov, &h, x)?;
            let bound = cert.gain.value(y)? * w + cert.bias.value(y)?;
            let excess = lie - bound;
            result.n_pairs += 1;
            if excess > result.max_excess {
                result.max_excess = excess;
                result.witness = Some(GrowthWitness {
                    x: x.0.clone(),
                    y: y.0.clone(),
                    lie_derivative: lie,
                    bound,
                });
            }
        }
    }
    result.n_x_accepted = xs.len();

    if result.max_excess > params.violation_tol || !result.quotients_bounded || negative_energy {
        result.verdict = Verdict::Fail;
    }
    Ok(result)
}
