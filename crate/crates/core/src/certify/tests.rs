use std::sync::Arc;


use super::*;
use crate::builtins::{self, Builtin};
use crate::chainrec::GradientLikeParams;
use crate::dynamics::{
    flow_sampled, lie_derivative, CascadeDef, ScalarField, SystemDef, SystemKind,
};
use crate::equilibria::{FactorBounds, RegionSpec};
use crate::geometry::{dist, Factor, PointCoords, SpaceSpec};

fn paper_bundle() -> builtins::CascadeBundle {
    match builtins::builtin("paper-example").unwrap() {
        Builtin::Cascade(b) => b,
        _ => unreachable!(),
    }
}

fn cylinder_region(v: f64) -> RegionSpec {
    RegionSpec::new(vec![
        FactorBounds::FullCircle,
        FactorBounds::Interval { lo: -v, hi: v },
    ])
    .unwrap()
}

fn small_basin(n: usize, horizon: f64) -> BasinParams {
    BasinParams {
        n,
        horizon,
        conv_tol: 1e-3,
        tol: 1e-6,
        seed: 42,
    }
}

/// Reduced-scale certification parameters for unit tests; the acceptance
/// suite runs the full-scale ones.
fn small_certify_params(b: &builtins::CascadeBundle) -> CertifyParams {
    let mut p = CertifyParams::new(b.region_x.clone(), b.region_y.clone(), b.target.clone());
    p.inner.basin = small_basin(600, 80.0);
    p.outer.basin = small_basin(600, 80.0);
    p.outer.depth = 4;
    p.outer.refine_rounds = 1;
    p.outer.gradient_like = GradientLikeParams {
        n_trajectories: 20,
        horizon: 50.0,
        tol: 1e-9,
        seed: 42,
        samples: 400,
    };
    p.growth = GrowthCheckParams {
        n_x: 200,
        n_y: 30,
        ..GrowthCheckParams::default()
    };
    p.n_envelope_trajectories = 4;
    p.envelope_horizon = 80.0;
    p.cascade_basin = BasinParams {
        n: 200,
        horizon: 150.0,
        ..small_basin(200, 150.0)
    };
    p
}

#[test]
fn wilson_bound_behaves() {
    let full = wilson_lower_95(10_000, 10_000);
    assert!(full > 0.999 && full < 1.0, "{full}");
    assert_eq!(wilson_lower_95(0, 0), 0.0);
    assert!(wilson_lower_95(0, 10) < 0.05);
    let half = wilson_lower_95(5, 10);
    assert!(half > 0.2 && half < 0.5, "{half}");
}

#[test]
fn verdict_algebra() {
    use Verdict::*;
    assert_eq!(Verdict::combine([Pass, Pass]), Pass);
    assert_eq!(Verdict::combine([Pass, Inconclusive]), Inconclusive);
    assert_eq!(Verdict::combine([Inconclusive, Fail, Pass]), Fail);
    assert_eq!(Verdict::combine([]), Pass);
}

fn linear_contraction_1d() -> SystemDef {
    SystemDef::new(
        SpaceSpec::euclidean(vec![Factor::Line]),
        SystemKind::Generic,
        Arc::new(|s: &[f64], out: &mut [f64]| out[0] = -s[0]),
    )
}

#[test]
fn basin_of_a_global_contraction_is_everything() {
    let sys = linear_contraction_1d();
    let region = RegionSpec::new(vec![FactorBounds::Interval { lo: -10.0, hi: 10.0 }]).unwrap();
    let est = monte_carlo_basin(
        &sys,
        &PointCoords(vec![0.0]),
        &region,
        &small_basin(400, 15.0),
        &[],
    )
    .unwrap();
    assert_eq!(est.fraction, 1.0);
    assert_eq!(est.n_diverged, 0);
    assert_eq!(est.n_samples, 400);
    assert!(est.wilson_lower_95 < 1.0);
    assert_eq!(est.converged_initials.len(), 400);
}

#[test]
fn pendulum_basin_fraction_reaches_the_threshold() {
    let sys = builtins::pendulum();
    let est = monte_carlo_basin(
        &sys,
        &PointCoords(vec![0.0, 0.0]),
        &cylinder_region(4.0),
        &small_basin(1500, 100.0),
        &[],
    )
    .unwrap();
    assert!(est.fraction >= 0.999, "fraction {}", est.fraction);
}

#[test]
fn retained_witnesses_keep_failures_failing() {
    let b = match builtins::builtin("pendulum-undamped").unwrap() {
        Builtin::System(b) => b,
        _ => unreachable!(),
    };
    let target = b.target.unwrap();
    let first = monte_carlo_basin(&b.system, &target, &b.region, &small_basin(15, 20.0), &[])
        .unwrap();
    assert!(first.n_other > 0, "undamped samples should not converge");
    let witnesses: Vec<PointCoords> = first
        .failure_witnesses
        .iter()
        .map(|w| PointCoords(w.initial.clone()))
        .collect();
    let second = monte_carlo_basin(
        &b.system,
        &target,
        &b.region,
        &small_basin(40, 20.0),
        &witnesses,
    )
    .unwrap();
    assert_eq!(second.n_samples, 40 + witnesses.len());
    assert!(second.n_other >= witnesses.len());
    assert!(second.fraction < 1.0);
}

#[test]
fn inner_loop_pendulum_passes() {
    let params = InnerLoopParams {
        basin: small_basin(800, 100.0),
        ..InnerLoopParams::default()
    };
    let outcome = certify_inner_loop(
        &builtins::pendulum(),
        &PointCoords(vec![0.0, 0.0]),
        &cylinder_region(4.0),
        &params,
    )
    .unwrap();
    assert_eq!(outcome.entry.verdict, Verdict::Pass, "{}", outcome.entry.summary);
    assert!(outcome.basin.is_some());
    assert_eq!(outcome.equilibria.len(), 2);
}

#[test]
fn inner_loop_undamped_fails_on_hyperbolicity() {
    let params = InnerLoopParams {
        basin: small_basin(10, 5.0),
        ..InnerLoopParams::default()
    };
    let b = match builtins::builtin("pendulum-undamped").unwrap() {
        Builtin::System(b) => b,
        _ => unreachable!(),
    };
    let outcome = certify_inner_loop(
        &b.system,
        &PointCoords(vec![0.0, 0.0]),
        &b.region,
        &params,
    )
    .unwrap();
    assert_eq!(outcome.entry.verdict, Verdict::Fail);
    assert!(
        outcome.entry.summary.contains("NonHyperbolic"),
        "{}",
        outcome.entry.summary
    );
    // Failed before any sampling.
    assert!(outcome.basin.is_none());
}

#[test]
fn inner_loop_linear_contraction_has_full_fraction() {
    let params = InnerLoopParams {
        basin: small_basin(300, 15.0),
        ..InnerLoopParams::default()
    };
    let region = RegionSpec::new(vec![FactorBounds::Interval { lo: -10.0, hi: 10.0 }]).unwrap();
    let outcome = certify_inner_loop(
        &linear_contraction_1d(),
        &PointCoords(vec![0.0]),
        &region,
        &params,
    )
    .unwrap();
    assert_eq!(outcome.entry.verdict, Verdict::Pass);
    let basin = outcome.basin.unwrap();
    assert_eq!(basin.fraction, 1.0);
}

fn small_outer_params() -> OuterLoopParams {
    OuterLoopParams {
        depth: 4,
        refine_rounds: 1,
        basin: small_basin(600, 80.0),
        gradient_like: GradientLikeParams {
            n_trajectories: 20,
            horizon: 50.0,
            tol: 1e-9,
            seed: 42,
            samples: 400,
        },
        ..OuterLoopParams::default()
    }
}

#[test]
fn unforced_outer_of_the_torus_cascade_passes() {
    let b = paper_bundle();
    let outcome =
        certify_unforced_outer(&b.cascade, &b.v_outer, &b.region_x, &small_outer_params())
            .unwrap();
    assert_eq!(outcome.entry.verdict, Verdict::Pass, "{}", outcome.entry.summary);
    assert_eq!(outcome.equilibria.len(), 2);
    assert!(outcome.recurrence_verdict.unwrap().pass);
}

#[test]
fn unforced_outer_with_a_limit_cycle_fails() {
    let b = match builtins::builtin("cascade-limit-cycle").unwrap() {
        Builtin::Cascade(b) => b,
        _ => unreachable!(),
    };
    let outcome =
        certify_unforced_outer(&b.cascade, &b.v_outer, &b.region_x, &small_outer_params())
            .unwrap();
    assert_eq!(outcome.entry.verdict, Verdict::Fail);
    assert!(!outcome.recurrence_verdict.unwrap().pass);
}

#[test]
fn unforced_outer_of_a_gradient_flow_passes() {
    // Cascade whose unforced outer loop is steepest descent on the circle.
    let cascade = CascadeDef::new(
        SpaceSpec::euclidean(vec![Factor::Circle]),
        Arc::new(|x: &[f64], y: &[f64], out: &mut [f64]| {
            out[0] = -x[0].sin() * y[0].cos();
        }),
        builtins::pendulum(),
        PointCoords(vec![0.0, 0.0]),
    )
    .unwrap();
    let v = ScalarField::new(
        SpaceSpec::euclidean(vec![Factor::Circle]),
        Arc::new(|q: &[f64]| 1.0 - q[0].cos()),
    )
    .with_gradient(Arc::new(|q: &[f64], out: &mut [f64]| out[0] = q[0].sin()));
    let region = RegionSpec::new(vec![FactorBounds::FullCircle]).unwrap();
    let mut params = small_outer_params();
    params.depth = 6;
    let outcome = certify_unforced_outer(&cascade, &v, &region, &params).unwrap();
    assert_eq!(outcome.entry.verdict, Verdict::Pass, "{}", outcome.entry.summary);
}

fn empirical_inner_pool(n: usize) -> Vec<PointCoords> {
    let est = monte_carlo_basin(
        &builtins::pendulum(),
        &PointCoords(vec![0.0, 0.0]),
        &cylinder_region(4.0),
        &small_basin(n, 100.0),
        &[],
    )
    .unwrap();
    est.converged_initials
        .into_iter()
        .map(PointCoords)
        .collect()
}

#[test]
fn growth_certificate_of_the_torus_cascade_holds() {
    let b = paper_bundle();
    let pool = empirical_inner_pool(300);
    let params = GrowthCheckParams {
        n_x: 300,
        n_y: 40,
        ..GrowthCheckParams::default()
    };
    let result =
        verify_growth_certificate(&b.cascade, &b.certificate, &b.region_x, &pool, &params)
            .unwrap();
    assert_eq!(result.verdict, Verdict::Pass, "{result:?}");
    assert!(result.max_excess <= 1e-9, "max excess {}", result.max_excess);
    assert!(result.quotients_bounded);
    assert_eq!(result.n_pairs, 300 * 40);

    // Soundness: re-evaluating the stored witness reproduces stored values.
    let w = result.witness.unwrap();
    let x = PointCoords(w.x.clone());
    let y = PointCoords(w.y.clone());
    let h = b.cascade.interconnection(&x, &y).unwrap();
    let lie = lie_derivative(&b.certificate.lyapunov, &h, &x).unwrap();
    let bound = b.certificate.gain.value(&y).unwrap()
        * b.certificate.lyapunov.value(&x).unwrap()
        + b.certificate.bias.value(&y).unwrap();
    assert!((lie - w.lie_derivative).abs() <= 1e-12);
    assert!((bound - w.bound).abs() <= 1e-12);
}

#[test]
fn weakened_certificate_is_rejected_with_a_witness() {
    let b = paper_bundle();
    let circle_line = SpaceSpec::euclidean(vec![Factor::Circle, Factor::Line]);
    let halved_gain = ScalarField::new(
        circle_line.clone(),
        Arc::new(|y: &[f64]| 2.0 * (1.0 - (2.0 * y[0]).cos())),
    );
    let zero_bias = ScalarField::new(circle_line, Arc::new(|_: &[f64]| 0.0));
    let weak = GrowthCertificate::new(
        builtins::pendulum_energy(),
        halved_gain,
        zero_bias,
        0.0,
        b.cascade.inner_equilibrium(),
    )
    .unwrap();
    let pool = empirical_inner_pool(300);
    let params = GrowthCheckParams {
        n_x: 400,
        n_y: 50,
        ..GrowthCheckParams::default()
    };
    let result =
        verify_growth_certificate(&b.cascade, &weak, &b.region_x, &pool, &params).unwrap();
    assert_eq!(result.verdict, Verdict::Fail);
    assert!(result.max_excess > 1e-9);
    let w = result.witness.unwrap();
    assert!(w.lie_derivative > w.bound);
}

#[test]
fn decoupled_cascade_passes_with_the_zero_certificate() {
    let circle_line = SpaceSpec::euclidean(vec![Factor::Circle, Factor::Line]);
    let cascade = CascadeDef::new(
        circle_line.clone(),
        Arc::new(|x: &[f64], _y: &[f64], out: &mut [f64]| {
            out[0] = x[1];
            out[1] = -(x[0].sin() + x[1]);
        }),
        builtins::pendulum(),
        PointCoords(vec![0.0, 0.0]),
    )
    .unwrap();
    let zero = ScalarField::new(circle_line, Arc::new(|_: &[f64]| 0.0));
    let cert = GrowthCertificate::new(
        builtins::pendulum_energy(),
        zero.clone(),
        zero,
        0.0,
        cascade.inner_equilibrium(),
    )
    .unwrap();
    let pool = empirical_inner_pool(100);
    let params = GrowthCheckParams {
        n_x: 100,
        n_y: 20,
        ..GrowthCheckParams::default()
    };
    let result =
        verify_growth_certificate(&cascade, &cert, &cylinder_region(4.0), &pool, &params)
            .unwrap();
    assert_eq!(result.verdict, Verdict::Pass);
    assert!(result.max_excess <= 0.0 + 1e-15);
}

#[test]
fn unbounded_gain_quotients_are_rejected() {
    let b = paper_bundle();
    let circle_line = SpaceSpec::euclidean(vec![Factor::Circle, Factor::Line]);
    let sqrt_gain = ScalarField::new(
        circle_line.clone(),
        Arc::new(|y: &[f64]| y[0].abs().sqrt()),
    );
    let zero_bias = ScalarField::new(circle_line, Arc::new(|_: &[f64]| 0.0));
    let cert = GrowthCertificate::new(
        builtins::pendulum_energy(),
        sqrt_gain,
        zero_bias,
        1e9,
        b.cascade.inner_equilibrium(),
    );
    // Vanishes at the rest point, so construction succeeds.
    let cert = cert.unwrap();
    let pool = empirical_inner_pool(50);
    let params = GrowthCheckParams {
        n_x: 10,
        n_y: 5,
        max_proposals_per_round: 10_000,
        ..GrowthCheckParams::default()
    };
    // Level 1e9 also starves the sampler; quotient evidence is computed
    // regardless and must flag the square root.
    let result =
        verify_growth_certificate(&b.cascade, &cert, &b.region_x, &pool, &params).unwrap();
    assert!(!result.quotients_bounded);
    assert_ne!(result.verdict, Verdict::Pass);
}

#[test]
fn sampler_starvation_is_inconclusive() {
    let b = paper_bundle();
    let mut cert = b.certificate.clone();
    cert.level = 1e6;
    let pool = empirical_inner_pool(50);
    let params = GrowthCheckParams {
        n_x: 10,
        n_y: 5,
        max_proposals_per_round: 10_000,
        ..GrowthCheckParams::default()
    };
    let result =
        verify_growth_certificate(&b.cascade, &cert, &b.region_x, &pool, &params).unwrap();
    assert_eq!(result.verdict, Verdict::Inconclusive);
    assert!(result.starved);
    assert_eq!(result.region_escalations, 3);
}

#[test]
fn envelope_fit_on_the_pendulum() {
    let b = paper_bundle();
    let sys = builtins::pendulum();
    let ts: Vec<f64> = (0..=600).map(|i| i as f64 * 0.1).collect();
    let traj = flow_sampled(&sys, &PointCoords(vec![3.0, 0.0]), &ts, 1e-9).unwrap();
    let fit =
        estimate_decay_envelope(&traj, &b.certificate, b.cascade.inner_equilibrium()).unwrap();
    assert!(fit.dominated, "{fit:?}");
    assert_eq!(fit.verdict, Verdict::Pass);
    // The gain is quadratic in the distance, so its decay rate doubles the
    // linearized distance rate of 1/2.
    assert!(
        (0.7..=1.3).contains(&fit.envelope.rate),
        "fitted rate {}",
        fit.envelope.rate
    );
    assert!(fit.envelope.gain_amp > 0.0);
    assert_eq!(fit.envelope.bias_amp, 0.0);
}

#[test]
fn envelope_from_the_rest_point_is_trivial() {
    let b = paper_bundle();
    let sys = builtins::pendulum();
    let ts: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
    let traj = flow_sampled(&sys, &PointCoords(vec![0.0, 0.0]), &ts, 1e-9).unwrap();
    let fit =
        estimate_decay_envelope(&traj, &b.certificate, b.cascade.inner_equilibrium()).unwrap();
    assert!(fit.dominated);
    assert_eq!(fit.envelope.gain_amp, 0.0);
    assert_eq!(fit.envelope.bias_amp, 0.0);
}

#[test]
fn envelope_amplitude_dominates_a_squared_distance_gain() {
    let circle_line = SpaceSpec::euclidean(vec![Factor::Circle, Factor::Line]);
    let zero_y = PointCoords(vec![0.0, 0.0]);
    let space = circle_line.clone();
    let squared_distance = ScalarField::new(
        circle_line.clone(),
        Arc::new(move |y: &[f64]| {
            let d = dist(
                &space,
                &PointCoords(y.to_vec()),
                &PointCoords(vec![0.0, 0.0]),
            )
            .unwrap();
            d * d
        }),
    );
    let zero = ScalarField::new(circle_line, Arc::new(|_: &[f64]| 0.0));
    let cert = GrowthCertificate::new(
        builtins::pendulum_energy(),
        squared_distance,
        zero,
        4.0,
        &zero_y,
    )
    .unwrap();
    let sys = builtins::pendulum();
    let ts: Vec<f64> = (0..=600).map(|i| i as f64 * 0.1).collect();
    let traj = flow_sampled(&sys, &PointCoords(vec![2.0, 1.0]), &ts, 1e-9).unwrap();
    let fit = estimate_decay_envelope(&traj, &cert, &zero_y).unwrap();
    // Amplitude construction makes the half-rate envelope dominate every
    // sampled gain value.
    assert!(fit.dominated);
    let half = 0.5 * fit.envelope.rate;
    for (t, p) in traj.times.iter().zip(&traj.points) {
        let g = cert.gain.value(p).unwrap();
        assert!(g <= fit.envelope.gain_amp * (-half * t).exp() * (1.0 + 1e-9) + 1e-12);
    }
}

#[test]
fn envelope_requires_convergence() {
    let b = paper_bundle();
    let sys = builtins::pendulum();
    let ts: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
    let traj = flow_sampled(&sys, &PointCoords(vec![3.0, 0.0]), &ts, 1e-9).unwrap();
    let err = estimate_decay_envelope(&traj, &b.certificate, b.cascade.inner_equilibrium())
        .unwrap_err();
    assert!(matches!(err, crate::CoreError::Precondition(_)));
}

fn split_xy(traj: &crate::dynamics::Trajectory) -> (crate::dynamics::Trajectory, crate::dynamics::Trajectory) {
    let xs = crate::dynamics::Trajectory {
        times: traj.times.clone(),
        points: traj.points.iter().map(|p| PointCoords(p.0[..2].to_vec())).collect(),
        stats: traj.stats,
    };
    let ys = crate::dynamics::Trajectory {
        times: traj.times.clone(),
        points: traj.points.iter().map(|p| PointCoords(p.0[2..].to_vec())).collect(),
        stats: traj.stats,
    };
    (xs, ys)
}

#[test]
fn comparison_bound_holds_on_an_energetic_trajectory() {
    let b = paper_bundle();
    let full = b.cascade.full_system();
    let ts: Vec<f64> = (0..=800).map(|i| i as f64 * 0.1).collect();
    let traj = flow_sampled(&full, &PointCoords(vec![1.6, 3.4, 1.6, 3.1]), &ts, 1e-9).unwrap();
    let (traj_x, traj_y) = split_xy(&traj);
    let fit =
        estimate_decay_envelope(&traj_y, &b.certificate, b.cascade.inner_equilibrium()).unwrap();
    assert!(fit.dominated);
    let result = comparison_bound_check(&traj_x, &b.certificate, &fit).unwrap();
    assert_eq!(result.verdict, Verdict::Pass, "{result:?}");
    // The initial outer energy already exceeds the level.
    assert_eq!(result.entry_time, Some(0.0));
    assert!(result.bound.unwrap() > b.certificate.level);
    assert!(result.worst_margin.unwrap() >= 0.0);
}

#[test]
fn comparison_bound_is_vacuous_below_the_level() {
    let b = paper_bundle();
    let full = b.cascade.full_system();
    let ts: Vec<f64> = (0..=400).map(|i| i as f64 * 0.1).collect();
    let traj = flow_sampled(&full, &PointCoords(vec![0.1, 0.0, 0.1, 0.0]), &ts, 1e-9).unwrap();
    let (traj_x, traj_y) = split_xy(&traj);
    let fit =
        estimate_decay_envelope(&traj_y, &b.certificate, b.cascade.inner_equilibrium()).unwrap();
    let result = comparison_bound_check(&traj_x, &b.certificate, &fit).unwrap();
    assert_eq!(result.verdict, Verdict::Pass);
    assert_eq!(result.bound, None);
    assert_eq!(result.entry_time, None);
}

#[test]
fn invalid_envelope_is_flagged_not_the_trajectory() {
    let b = paper_bundle();
    let full = b.cascade.full_system();
    let ts: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
    let traj = flow_sampled(&full, &PointCoords(vec![1.6, 3.4, 1.6, 3.1]), &ts, 1e-9).unwrap();
    let (traj_x, _) = split_xy(&traj);
    let fit = EnvelopeFit {
        envelope: DecayEnvelope {
            gain_amp: 1e-3,
            bias_amp: 0.0,
            rate: 1.0,
        },
        dominated: false,
        n_fit_points: 0,
        verdict: Verdict::Fail,
    };
    let result = comparison_bound_check(&traj_x, &b.certificate, &fit).unwrap();
    assert_eq!(result.verdict, Verdict::Fail);
    assert!(!result.envelope_valid);
}

#[test]
fn torus_cascade_certifies_end_to_end_and_deterministically() {
    let b = paper_bundle();
    let params = small_certify_params(&b);
    let report = certify_cascade(
        &b.cascade,
        &b.v_outer,
        &b.certificate,
        &params,
        "paper-example",
    )
    .unwrap();
    assert_eq!(report.overall, Verdict::Pass, "{}", report.to_json_string());
    assert_eq!(report.conditions.len(), 5);
    let ids: Vec<&str> = report.conditions.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(
        ids,
        [
            "inner-loop",
            "unforced-outer",
            "growth-certificate",
            "decay-comparison",
            "cascade-basin"
        ]
    );
    for c in &report.conditions {
        assert_eq!(c.verdict, Verdict::Pass, "{}: {}", c.id, c.summary);
    }

    // Byte-identical rerun under the same seed.
    let again = certify_cascade(
        &b.cascade,
        &b.v_outer,
        &b.certificate,
        &params,
        "paper-example",
    )
    .unwrap();
    assert_eq!(report.to_json_string(), again.to_json_string());
}

#[test]
fn undamped_inner_cascade_fails_the_first_condition() {
    let b = match builtins::builtin("cascade-undamped-inner").unwrap() {
        Builtin::Cascade(b) => b,
        _ => unreachable!(),
    };
    let mut params = small_certify_params(&b);
    params.inner.basin.n = 10;
    let report =
        certify_cascade(&b.cascade, &b.v_outer, &b.certificate, &params, "undamped").unwrap();
    assert_eq!(report.overall, Verdict::Fail);
    assert_eq!(report.conditions[0].verdict, Verdict::Fail);
    // Later conditions were skipped, not silently passed.
    assert!(report.conditions[1..]
        .iter()
        .all(|c| c.verdict == Verdict::Inconclusive));
}

#[test]
fn limit_cycle_outer_cascade_fails_the_second_condition() {
    let b = match builtins::builtin("cascade-limit-cycle").unwrap() {
        Builtin::Cascade(b) => b,
        _ => unreachable!(),
    };
    let params = small_certify_params(&b);
    let report =
        certify_cascade(&b.cascade, &b.v_outer, &b.certificate, &params, "limit-cycle").unwrap();
    assert_eq!(report.overall, Verdict::Fail);
    assert_eq!(report.conditions[0].verdict, Verdict::Pass);
    assert_eq!(report.conditions[1].verdict, Verdict::Fail);
}

#[test]
fn unbounded_interconnection_fails_the_growth_certificate() {
    let b = builtins::cascade_unbounded().unwrap();
    let params = small_certify_params(&b);
    let report =
        certify_cascade(&b.cascade, &b.v_outer, &b.certificate, &params, "unbounded").unwrap();
    assert_ne!(report.overall, Verdict::Pass);
    assert_eq!(report.conditions[0].verdict, Verdict::Pass);
    assert_eq!(report.conditions[1].verdict, Verdict::Pass);
    assert_ne!(report.conditions[2].verdict, Verdict::Pass);
}

#[test]
fn small_perturbations_decay_at_the_linearized_rate() {
    let b = paper_bundle();
    let full = b.cascade.full_system();
    let p0 = PointCoords(vec![6e-4, 4e-4, 5e-4, 3e-4]);
    let ts: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1).collect();
    let traj = flow_sampled(&full, &p0, &ts, 1e-12).unwrap();
    let mut num = 0.0;
    let mut den = 0.0;
    let pairs: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.points)
        .filter_map(|(t, p)| {
            let d = dist(full.space(), p, &b.target).unwrap();
            (d > 1e-12).then(|| (*t, d.ln()))
        })
        .collect();
    let mean_t = pairs.iter().map(|(t, _)| t).sum::<f64>() / pairs.len() as f64;
    let mean_l = pairs.iter().map(|(_, l)| l).sum::<f64>() / pairs.len() as f64;
    for (t, l) in &pairs {
        num += (t - mean_t) * (l - mean_l);
        den += (t - mean_t) * (t - mean_t);
    }
    let rate = -(num / den);
    // Slowest block eigenvalue has real part -1/2; allow 20% slack.
    assert!(rate >= 0.4, "fitted decay rate {rate}");
}

#[test]
fn certificate_requires_vanishing_gain_and_bias() {
    let circle_line = SpaceSpec::euclidean(vec![Factor::Circle, Factor::Line]);
    let nonvanishing = ScalarField::new(circle_line.clone(), Arc::new(|_: &[f64]| 0.5));
    let zero = ScalarField::new(circle_line, Arc::new(|_: &[f64]| 0.0));
    let err = GrowthCertificate::new(
        builtins::pendulum_energy(),
        nonvanishing,
        zero,
        4.0,
        &PointCoords(vec![0.0, 0.0]),
    );
    assert!(err.is_err());
}

#[test]
fn report_serialization_is_stable() {
    let entry = ConditionEntry {
        id: "demo".into(),
        verdict: Verdict::Pass,
        evidence_grade: EvidenceGrade::ExhaustiveAtResolution,
        summary: "s".into(),
        parameters: [("a".to_string(), serde_json::json!(1))].into_iter().collect(),
        witnesses: vec![],
    };
    let report = CertificationReport {
        schema_version: 1,
        system: "demo".into(),
        overall: Verdict::Inconclusive,
        notes: vec![],
        parameters: Default::default(),
        conditions: vec![entry],
    };
    let s = report.to_json_string();
    assert!(s.contains("\"overall\": \"INCONCLUSIVE\""));
    assert!(s.contains("\"verdict\": \"PASS\""));
    assert!(s.contains("exhaustive-at-resolution"));
    let back: CertificationReport = serde_json::from_str(&s).unwrap();
    assert_eq!(back, report);
}

