//! Certification of the individual cascade hypotheses and their assembly
//! into a report.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::chainrec::{
    build_cover, build_transition_graph, chain_recurrent_approx,
    check_recurrence_equals_equilibria, refine, verify_gradient_like, BoxCover,
    ChainRecurrentApprox, GradientLikeParams, RecurrenceVerdict,
};
use crate::dynamics::{eval_field, flow_sampled, CascadeDef, ScalarField, SystemDef, Trajectory};
use crate::equilibria::{
    cascade_block_structure, classify, find_equilibria, linearize, sorted_eigenvalues,
    Classification, EquilibriumRecord, RegionSpec,
};
use crate::error::{CoreError, Result};
use crate::geometry::{dist, PointCoords};
use crate::rng::{stream, Stream};

use super::basin::{monte_carlo_basin, BasinEstimate, BasinParams};
use super::envelope::{comparison_bound_check, estimate_decay_envelope};
use super::growth::{verify_growth_certificate, GrowthCheckParams, GrowthCheckResult};
use super::{round_trip_f64, CertificationReport, ConditionEntry, EvidenceGrade, GrowthCertificate, Verdict};

#[derive(Debug, Clone)]
pub struct InnerLoopParams {
    pub basin: BasinParams,
    pub basin_threshold: f64,
    pub grid_per_dim: usize,
    pub newton_tol: f64,
    pub hyp_tol: f64,
}

impl Default for InnerLoopParams {
    fn default() -> Self {
        Self {
            basin: BasinParams::default(),
            basin_threshold: 0.999,
            grid_per_dim: 12,
            newton_tol: 1e-10,
            hyp_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InnerLoopOutcome {
    pub entry: ConditionEntry,
    pub basin: Option<BasinEstimate>,
    pub equilibria: Vec<EquilibriumRecord>,
}

fn params_map(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

/// Certifies the inner loop: the rest point must be a hyperbolic attractor
/// (all eigenvalues strictly in the left half plane) and the sampled basin
/// fraction must reach the threshold, with every non-converged sample
/// ending near an unstable equilibrium (a stand-in for its stable set).
pub fn certify_inner_loop(
    sys: &SystemDef,
    rest_point: &PointCoords,
    region: &RegionSpec,
    params: &InnerLoopParams,
) -> Result<InnerLoopOutcome> {
    let residual = eval_field(sys, rest_point)?.norm();
    if residual >= 1e-8 {
        return Err(CoreError::Precondition(format!(
            "inner rest point residual {residual:.3e} too large"
        )));
    }

    let mut parameters = params_map(&[
        ("n_samples", json!(params.basin.n)),
        ("horizon", round_trip_f64(params.basin.horizon)),
        ("conv_tol", round_trip_f64(params.basin.conv_tol)),
        ("integration_tol", round_trip_f64(params.basin.tol)),
        ("seed", json!(params.basin.seed)),
        ("basin_threshold", round_trip_f64(params.basin_threshold)),
        ("hyperbolicity_tol", round_trip_f64(params.hyp_tol)),
    ]);

    let jac = linearize(sys, rest_point)?;
    let eigs = sorted_eigenvalues(&jac);
    parameters.insert(
        "eigenvalues".into(),
        json!(eigs.iter().map(|l| vec![l.re, l.im]).collect::<Vec<_>>()),
    );
    let classification = classify(&eigs, params.hyp_tol);
    if classification != Classification::Stable {
        return Ok(InnerLoopOutcome {
            entry: ConditionEntry {
                id: "inner-loop".into(),
                verdict: Verdict::Fail,
                evidence_grade: EvidenceGrade::Sampled,
                summary: format!(
                    "rest point is not a hyperbolic attractor: classified {classification:?}"
                ),
                parameters,
                witnesses: vec![rest_point.0.clone()],
            },
            basin: None,
            equilibria: Vec::new(),
        });
    }

    let equilibria = find_equilibria(sys, region, params.grid_per_dim, params.newton_tol)?;
    let unstable: Vec<&EquilibriumRecord> = equilibria
        .iter()
        .filter(|e| e.classification != Classification::Stable)
        .collect();

    let basin = monte_carlo_basin(sys, rest_point, region, &params.basin, &[])?;
    parameters.insert("basin_fraction".into(), round_trip_f64(basin.fraction));
    parameters.insert(
        "wilson_lower_95".into(),
        round_trip_f64(basin.wilson_lower_95),
    );

    let mut witnesses = Vec::new();
    let mut failures = Vec::new();
    if basin.n_diverged > 0 {
        failures.push(format!("{} samples diverged", basin.n_diverged));
    }
    if basin.fraction < params.basin_threshold {
        failures.push(format!(
            "basin fraction {:.6} below threshold {}",
            basin.fraction, params.basin_threshold
        ));
    }
    let mut unexplained = 0usize;
    for w in &basin.failure_witnesses {
        let explained = match &w.final_point {
            Some(end) => {
                let end = PointCoords(end.clone());
                unstable
                    .iter()
                    .map(|e| dist(sys.space(), &end, &e.point))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .any(|d| d < 1e-2)
            }
            None => false,
        };
        if !explained {
            unexplained += 1;
        }
        witnesses.push(w.initial.clone());
    }
    if unexplained > 0 {
        failures.push(format!(
            "{unexplained} non-converged samples not near any unstable equilibrium"
        ));
    }

    let verdict = if failures.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let summary = if failures.is_empty() {
        format!(
            "hyperbolic attractor; {}/{} samples converged (Wilson 95% lower bound {:.6})",
            basin.n_converged, basin.n_samples, basin.wilson_lower_95
        )
    } else {
        failures.join("; ")
    };

    Ok(InnerLoopOutcome {
        entry: ConditionEntry {
            id: "inner-loop".into(),
            verdict,
            evidence_grade: EvidenceGrade::Sampled,
            summary,
            parameters,
            witnesses,
        },
        basin: Some(basin),
        equilibria,
    })
}

#[derive(Debug, Clone)]
pub struct OuterLoopParams {
    pub grid_per_dim: usize,
    pub newton_tol: f64,
    pub hyp_tol: f64,
    pub depth: u32,
    /// Hop time; default is five times the slowest time constant of the
    /// stable equilibrium, or 1 when unavailable.
    pub t_flow: Option<f64>,
    /// Hop slack; default is the box diameter at the current depth.
    pub eps: Option<f64>,
    pub lattice_points: usize,
    pub refine_rounds: usize,
    pub chain_tol: f64,
    pub margin: Option<f64>,
    pub gradient_like: GradientLikeParams,
    pub basin: BasinParams,
    pub basin_threshold: f64,
}

impl Default for OuterLoopParams {
    fn default() -> Self {
        Self {
            grid_per_dim: 16,
            newton_tol: 1e-10,
            hyp_tol: 1e-6,
            depth: 6,
            t_flow: None,
            eps: None,
            lattice_points: 16,
            refine_rounds: 3,
            chain_tol: 1e-6,
            margin: None,
            gradient_like: GradientLikeParams::default(),
            basin: BasinParams::default(),
            basin_threshold: 0.999,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OuterLoopOutcome {
    pub entry: ConditionEntry,
    pub equilibria: Vec<EquilibriumRecord>,
    pub cover: Option<BoxCover>,
    pub recurrence: Option<ChainRecurrentApprox>,
    pub recurrence_verdict: Option<RecurrenceVerdict>,
}

pub fn default_hop_time(eqs: &[EquilibriumRecord]) -> f64 {
    eqs.iter()
        .find(|e| e.classification == Classification::Stable)
        .map(|e| {
            let slowest = e
                .eigenvalues
                .iter()
                .map(|l| l.re.abs())
                .fold(f64::INFINITY, f64::min);
            if slowest.is_finite() && slowest > 0.0 {
                5.0 / slowest
            } else {
                1.0
            }
        })
        .unwrap_or(1.0)
}

/// Certifies the unforced outer loop: every equilibrium in the region must
/// be hyperbolic with exactly one attractor, the candidate function must
/// decrease along sampled trajectories, the box-cover recurrence
/// approximation must confine cycles to the equilibria, the block-triangular
/// spectrum split must hold at every slice equilibrium, and the sampled
/// basin of the attractor must reach the threshold.
pub fn certify_unforced_outer(
    cas: &CascadeDef,
    v_outer: &ScalarField,
    region: &RegionSpec,
    params: &OuterLoopParams,
) -> Result<OuterLoopOutcome> {
    let theta = cas.unforced_outer();
    let equilibria = find_equilibria(&theta, region, params.grid_per_dim, params.newton_tol)?;

    let mut failures: Vec<String> = Vec::new();
    let mut witnesses: Vec<Vec<f64>> = Vec::new();

    if equilibria.is_empty() {
        failures.push("no equilibria found in the region".into());
    }
    for eq in &equilibria {
        if classify(&eq.eigenvalues, params.hyp_tol) == Classification::NonHyperbolic {
            failures.push(format!("non-hyperbolic equilibrium at {:?}", eq.point.0));
            witnesses.push(eq.point.0.clone());
        }
    }
    let stable: Vec<&EquilibriumRecord> = equilibria
        .iter()
        .filter(|e| e.classification == Classification::Stable)
        .collect();
    if stable.len() != 1 && !equilibria.is_empty() {
        failures.push(format!(
            "expected exactly one stable equilibrium, found {}",
            stable.len()
        ));
    }

    // Block-triangular spectrum split at every slice equilibrium.
    let mut max_pairing_error = 0.0f64;
    for eq in &equilibria {
        let lifted = cas.lift_outer_point(&eq.point);
        let report = cascade_block_structure(cas, &lifted)?;
        max_pairing_error = max_pairing_error.max(report.max_pairing_error);
        if !report.ok() {
            failures.push(format!(
                "block spectrum split failed at {:?} (lower-left norm {:.3e}, pairing error {:.3e})",
                eq.point.0, report.lower_left_norm, report.max_pairing_error
            ));
            witnesses.push(eq.point.0.clone());
        }
    }

    let gradient = verify_gradient_like(&theta, v_outer, &equilibria, region, &params.gradient_like)?;
    if !gradient.pass {
        failures.push(format!(
            "candidate function not decreasing along {} of {} sampled trajectories",
            gradient.increase_witnesses.len() + gradient.stagnant_witnesses.len()
                + gradient.diverged_witnesses.len(),
            gradient.n_trajectories
        ));
        witnesses.extend(gradient.increase_witnesses.iter().map(|w| w.0.clone()));
        witnesses.extend(gradient.stagnant_witnesses.iter().cloned());
        witnesses.extend(gradient.diverged_witnesses.iter().cloned());
    }

    // Box-cover recurrence approximation with refinement rounds.
    let t_flow = params.t_flow.unwrap_or_else(|| default_hop_time(&equilibria));
    let mut cover = build_cover(theta.space(), region, params.depth)?;
    let mut approx = None;
    for round in 0..=params.refine_rounds {
        let eps = params.eps.unwrap_or_else(|| cover.diameter());
        let graph = build_transition_graph(
            &cover,
            &theta,
            t_flow,
            eps,
            params.lattice_points,
            params.chain_tol,
            params.basin.seed,
        )?;
        let current = chain_recurrent_approx(&graph);
        if round < params.refine_rounds && !current.recurrent_boxes.is_empty() {
            let keep = current.recurrent_boxes.iter().copied().collect();
            let refined = refine(&cover, &keep)?;
            approx = Some(current);
            cover = refined;
        } else {
            approx = Some(current);
            break;
        }
    }
    // The loop always exits with the approximation built on the final cover:
    // either the terminal round hit the else branch, or recurrence vanished.
    let approx = approx.expect("at least one round runs");

    let recurrence_verdict =
        check_recurrence_equals_equilibria(&approx, &cover, &equilibria, params.margin)?;
    if !recurrence_verdict.pass {
        failures.push(format!(
            "recurrence not confined to equilibria: {} stray boxes, {} uncovered equilibria (margin {:.4})",
            recurrence_verdict.stray_boxes.len(),
            recurrence_verdict.uncovered_equilibria.len(),
            recurrence_verdict.margin
        ));
        witnesses.extend(
            recurrence_verdict
                .stray_boxes
                .iter()
                .take(20)
                .map(|&id| cover.center(id).0),
        );
    }

    // Sampled basin of the attractor.
    let mut basin_summary = String::from("basin skipped (no unique attractor)");
    if let [stable_eq] = stable.as_slice() {
        let basin = monte_carlo_basin(&theta, &stable_eq.point, region, &params.basin, &[])?;
        basin_summary = format!(
            "basin fraction {:.6} (Wilson 95% lower bound {:.6})",
            basin.fraction, basin.wilson_lower_95
        );
        if basin.n_diverged > 0 {
            failures.push(format!("{} outer samples diverged", basin.n_diverged));
        }
        if basin.fraction < params.basin_threshold {
            failures.push(format!(
                "outer basin fraction {:.6} below threshold {}",
                basin.fraction, params.basin_threshold
            ));
            witnesses.extend(basin.failure_witnesses.iter().map(|w| w.initial.clone()));
        }
    }

    let parameters = params_map(&[
        ("grid_per_dim", json!(params.grid_per_dim)),
        ("newton_tol", round_trip_f64(params.newton_tol)),
        ("hyperbolicity_tol", round_trip_f64(params.hyp_tol)),
        ("depth", json!(cover.depth())),
        ("eps", round_trip_f64(params.eps.unwrap_or_else(|| cover.diameter()))),
        ("t_flow", round_trip_f64(t_flow)),
        ("refine_rounds", json!(params.refine_rounds)),
        ("n_equilibria", json!(equilibria.len())),
        ("n_recurrent_boxes", json!(approx.recurrent_boxes.len())),
        ("max_block_pairing_error", round_trip_f64(max_pairing_error)),
        ("basin_threshold", round_trip_f64(params.basin_threshold)),
        ("seed", json!(params.basin.seed)),
    ]);

    let verdict = if failures.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let summary = if failures.is_empty() {
        format!(
            "{} hyperbolic equilibria, one attractor; recurrence confined to equilibria at depth {}; {}",
            equilibria.len(),
            cover.depth(),
            basin_summary
        )
    } else {
        failures.join("; ")
    };

    witnesses.truncate(100);
    Ok(OuterLoopOutcome {
        entry: ConditionEntry {
            id: "unforced-outer".into(),
            verdict,
            evidence_grade: EvidenceGrade::Sampled,
            summary,
            parameters,
            witnesses,
        },
        equilibria,
        cover: Some(cover),
        recurrence: Some(approx),
        recurrence_verdict: Some(recurrence_verdict),
    })
}

#[derive(Debug, Clone)]
pub struct CertifyParams {
    pub seed: u64,
    pub region_x: RegionSpec,
    pub region_y: RegionSpec,
    /// Target equilibrium of the full cascade.
    pub target: PointCoords,
    pub inner: InnerLoopParams,
    pub outer: OuterLoopParams,
    pub growth: GrowthCheckParams,
    pub n_envelope_trajectories: usize,
    pub envelope_horizon: f64,
    pub envelope_samples: usize,
    pub trajectory_tol: f64,
    pub cascade_basin: BasinParams,
    pub cascade_basin_threshold: f64,
    /// Skip the remaining (expensive) conditions once one has failed.
    pub fail_fast: bool,
}

impl CertifyParams {
    pub fn new(region_x: RegionSpec, region_y: RegionSpec, target: PointCoords) -> Self {
        Self {
            seed: 42,
            region_x,
            region_y,
            target,
            inner: InnerLoopParams::default(),
            outer: OuterLoopParams::default(),
            growth: GrowthCheckParams::default(),
            n_envelope_trajectories: 20,
            envelope_horizon: 80.0,
            envelope_samples: 400,
            trajectory_tol: 1e-6,
            cascade_basin: BasinParams {
                horizon: 200.0,
                ..BasinParams::default()
            },
            cascade_basin_threshold: 0.99,
            fail_fast: true,
        }
    }

    /// Propagates the master seed into every component's stream.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.inner.basin.seed = seed;
        self.outer.basin.seed = seed;
        self.outer.gradient_like.seed = seed;
        self.growth.seed = seed;
        self.cascade_basin.seed = seed;
        self
    }
}

fn skipped_entry(id: &str, reason: &str) -> ConditionEntry {
    ConditionEntry {
        id: id.into(),
        verdict: Verdict::Inconclusive,
        evidence_grade: EvidenceGrade::Sampled,
        summary: format!("skipped: {reason}"),
        parameters: BTreeMap::new(),
        witnesses: Vec::new(),
    }
}

/// Runs every cascade hypothesis check and assembles the report.
pub fn certify_cascade(
    cas: &CascadeDef,
    v_outer: &ScalarField,
    cert: &GrowthCertificate,
    params: &CertifyParams,
    system_name: &str,
) -> Result<CertificationReport> {
    let mut conditions: Vec<ConditionEntry> = Vec::new();
    let mut failed = false;

    // Condition 1: inner loop.
    let inner = certify_inner_loop(
        cas.inner(),
        cas.inner_equilibrium(),
        &params.region_y,
        &params.inner,
    )?;
    failed |= inner.entry.verdict == Verdict::Fail;
    let inner_basin = inner.basin;
    conditions.push(inner.entry);

    // Condition 2: unforced outer loop.
    if params.fail_fast && failed {
        conditions.push(skipped_entry("unforced-outer", "inner loop failed"));
    } else {
        let outer = certify_unforced_outer(cas, v_outer, &params.region_x, &params.outer)?;
        failed |= outer.entry.verdict == Verdict::Fail;
        conditions.push(outer.entry);
    }

    // Condition 3: growth certificate for the interconnection.
    if params.fail_fast && failed {
        conditions.push(skipped_entry("growth-certificate", "earlier condition failed"));
    } else {
        let y_pool: Vec<PointCoords> = inner_basin
            .as_ref()
            .map(|b| {
                b.converged_initials
                    .iter()
                    .map(|c| PointCoords(c.clone()))
                    .collect()
            })
            .unwrap_or_default();
        let growth = verify_growth_certificate(cas, cert, &params.region_x, &y_pool, &params.growth)?;
        failed |= growth.verdict == Verdict::Fail;
        conditions.push(growth_entry(&growth, cert));
    }

    // Condition 4: decay envelopes and comparison bounds along trajectories.
    if params.fail_fast && failed {
        conditions.push(skipped_entry("decay-comparison", "earlier condition failed"));
    } else {
        let entry = decay_comparison_entry(cas, cert, params)?;
        failed |= entry.verdict == Verdict::Fail;
        conditions.push(entry);
    }

    // Condition 5: sampled basin of the full cascade.
    if params.fail_fast && failed {
        conditions.push(skipped_entry("cascade-basin", "earlier condition failed"));
    } else {
        let full = cas.full_system();
        let region = product_region(&params.region_x, &params.region_y);
        let basin = monte_carlo_basin(
            &full,
            &params.target,
            &region,
            &params.cascade_basin,
            &[],
        )?;
        let verdict = if basin.n_diverged == 0 && basin.fraction >= params.cascade_basin_threshold
        {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        conditions.push(ConditionEntry {
            id: "cascade-basin".into(),
            verdict,
            evidence_grade: EvidenceGrade::Sampled,
            summary: format!(
                "{}/{} full-cascade samples converged (fraction {:.6}, Wilson 95% lower bound {:.6}, {} diverged)",
                basin.n_converged, basin.n_samples, basin.fraction, basin.wilson_lower_95,
                basin.n_diverged
            ),
            parameters: params_map(&[
                ("n_samples", json!(basin.n_samples)),
                ("horizon", round_trip_f64(params.cascade_basin.horizon)),
                ("conv_tol", round_trip_f64(params.cascade_basin.conv_tol)),
                ("threshold", round_trip_f64(params.cascade_basin_threshold)),
                ("fraction", round_trip_f64(basin.fraction)),
                ("seed", json!(params.cascade_basin.seed)),
            ]),
            witnesses: basin
                .failure_witnesses
                .iter()
                .map(|w| w.initial.clone())
                .collect(),
        });
    }

    let overall = Verdict::combine(conditions.iter().map(|c| c.verdict));
    Ok(CertificationReport {
        schema_version: 1,
        system: system_name.into(),
        overall,
        notes: vec![
            "Verdicts are sampled evidence at the recorded parameters, not proofs; \
             behavior is certified up to the recorded horizons only."
                .into(),
            "Inner states for the growth inequality are drawn from empirically converged \
             initial conditions, standing in for the (uncomputable) basin of attraction."
                .into(),
        ],
        parameters: params_map(&[
            ("seed", json!(params.seed)),
            ("inner_horizon", round_trip_f64(params.inner.basin.horizon)),
            ("cascade_horizon", round_trip_f64(params.cascade_basin.horizon)),
            ("envelope_horizon", round_trip_f64(params.envelope_horizon)),
            ("trajectory_tol", round_trip_f64(params.trajectory_tol)),
            ("growth_level", round_trip_f64(cert.level)),
        ]),
        conditions,
    })
}

fn growth_entry(result: &GrowthCheckResult, cert: &GrowthCertificate) -> ConditionEntry {
    let mut parameters = params_map(&[
        ("n_pairs", json!(result.n_pairs)),
        ("max_excess", round_trip_f64(result.max_excess)),
        ("level", round_trip_f64(cert.level)),
        ("n_x_accepted", json!(result.n_x_accepted)),
        ("region_escalations", json!(result.region_escalations)),
        ("quotients_bounded", json!(result.quotients_bounded)),
        ("min_sampled_energy", round_trip_f64(result.min_sampled_energy)),
    ]);
    if let Some(w) = &result.witness {
        parameters.insert(
            "witness".into(),
            json!({
                "x": w.x,
                "y": w.y,
                "lie_derivative": w.lie_derivative,
                "bound": w.bound,
            }),
        );
    }
    let summary = match result.verdict {
        Verdict::Pass => format!(
            "growth inequality holds at {} pairs (max excess {:.3e})",
            result.n_pairs, result.max_excess
        ),
        Verdict::Fail if result.max_excess > 0.0 => format!(
            "growth inequality violated (max excess {:.3e})",
            result.max_excess
        ),
        Verdict::Fail => "gain/bias difference quotients unbounded toward the rest point".into(),
        Verdict::Inconclusive if result.starved => {
            "sampler starved: no states with energy above the level".into()
        }
        Verdict::Inconclusive => "no empirical basin points available for inner sampling".into(),
    };
    let witnesses = result
        .witness
        .iter()
        .filter(|_| result.verdict == Verdict::Fail)
        .map(|w| {
            let mut xy = w.x.clone();
            xy.extend_from_slice(&w.y);
            xy
        })
        .collect();
    ConditionEntry {
        id: "growth-certificate".into(),
        verdict: result.verdict,
        evidence_grade: EvidenceGrade::Sampled,
        summary,
        parameters,
        witnesses,
    }
}

fn split_trajectory(traj: &Trajectory, nx: usize) -> (Trajectory, Trajectory) {
    let xs = Trajectory {
        times: traj.times.clone(),
        points: traj
            .points
            .iter()
            .map(|p| PointCoords(p.0[..nx].to_vec()))
            .collect(),
        stats: traj.stats,
    };
    let ys = Trajectory {
        times: traj.times.clone(),
        points: traj
            .points
            .iter()
            .map(|p| PointCoords(p.0[nx..].to_vec()))
            .collect(),
        stats: traj.stats,
    };
    (xs, ys)
}

fn decay_comparison_entry(
    cas: &CascadeDef,
    cert: &GrowthCertificate,
    params: &CertifyParams,
) -> Result<ConditionEntry> {
    let full = cas.full_system();
    let nx = cas.outer_space().dim();
    let region = product_region(&params.region_x, &params.region_y);
    let mut rng = stream(params.seed, Stream::EnvelopeTrajectories);
    let ts: Vec<f64> = (0..=params.envelope_samples)
        .map(|i| params.envelope_horizon * i as f64 / params.envelope_samples as f64)
        .collect();

    let mut verdicts = Vec::new();
    let mut witnesses = Vec::new();
    let mut worst_margin = f64::INFINITY;
    let mut fitted_rates = Vec::new();
    let mut n_unconverged = 0usize;
    for _ in 0..params.n_envelope_trajectories {
        let p0 = region.sample(&mut rng);
        let traj = match flow_sampled(&full, &p0, &ts, params.trajectory_tol) {
            Ok(t) => t,
            Err(e) if e.is_divergence() => {
                verdicts.push(Verdict::Fail);
                witnesses.push(p0.0.clone());
                continue;
            }
            Err(e) => return Err(e),
        };
        let (traj_x, traj_y) = split_trajectory(&traj, nx);
        let fit = match estimate_decay_envelope(&traj_y, cert, cas.inner_equilibrium()) {
            Ok(f) => f,
            Err(CoreError::Precondition(_)) => {
                // Inner loop not converged by the horizon: no envelope.
                n_unconverged += 1;
                verdicts.push(Verdict::Inconclusive);
                continue;
            }
            Err(e) => return Err(e),
        };
        fitted_rates.push(fit.envelope.rate);
        let comparison = comparison_bound_check(&traj_x, cert, &fit)?;
        if let Some(m) = comparison.worst_margin {
            worst_margin = worst_margin.min(m);
        }
        if comparison.verdict == Verdict::Fail {
            witnesses.push(p0.0.clone());
        }
        verdicts.push(Verdict::combine([fit.verdict, comparison.verdict]));
    }

    let verdict = Verdict::combine(verdicts.iter().copied());
    let parameters = params_map(&[
        ("n_trajectories", json!(params.n_envelope_trajectories)),
        ("horizon", round_trip_f64(params.envelope_horizon)),
        ("tol", round_trip_f64(params.trajectory_tol)),
        (
            "worst_margin",
            if worst_margin.is_finite() {
                round_trip_f64(worst_margin)
            } else {
                Value::Null
            },
        ),
        (
            "fitted_rates",
            json!(fitted_rates
                .iter()
                .map(|r| round_trip_f64(*r))
                .collect::<Vec<_>>()),
        ),
        ("n_unconverged", json!(n_unconverged)),
        ("seed", json!(params.seed)),
    ]);
    let summary = match verdict {
        Verdict::Pass => format!(
            "comparison bound held along {} sampled trajectories (worst margin {:.4})",
            params.n_envelope_trajectories, worst_margin
        ),
        Verdict::Fail => format!(
            "comparison bound or envelope failed on {} trajectories",
            witnesses.len()
        ),
        Verdict::Inconclusive => format!(
            "{n_unconverged} inner trajectories had not converged by the horizon"
        ),
    };
    Ok(ConditionEntry {
        id: "decay-comparison".into(),
        verdict,
        evidence_grade: EvidenceGrade::Sampled,
        summary,
        parameters,
        witnesses,
    })
}

pub(crate) fn product_region(a: &RegionSpec, b: &RegionSpec) -> RegionSpec {
    let mut bounds = a.bounds.clone();
    bounds.extend(b.bounds.iter().copied());
    RegionSpec { bounds }
}
