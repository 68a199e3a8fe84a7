//! Command implementations: parameter merging, execution, artifact emission.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use serde_json::{json, Value};

use cascade_core::certify::{
    certify_cascade, monte_carlo_basin, BasinParams, CertifyParams, Verdict,
};
use cascade_core::chainrec::{
    build_cover, build_transition_graph, chain_recurrent_approx,
    check_recurrence_equals_equilibria, refine, verify_gradient_like, GradientLikeParams,
};
use cascade_core::dynamics::{flow_sampled, Trajectory};
use cascade_core::equilibria::{find_equilibria, EquilibriumRecord};
use cascade_core::error::CoreError;
use cascade_core::geometry::{canonicalize, dist, PointCoords};

use crate::config::RunConfig;
use crate::output::{points_csv, trajectory_csv, write_atomic};
use crate::plot::{boxes_svg, trajectory_svg};
use crate::systems::{build_region, Resolved};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

pub fn exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn verdict_str(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn equilibrium_json(eq: &EquilibriumRecord) -> Value {
    json!({
        "point": eq.point.0,
        "eigenvalues": eq
            .eigenvalues
            .iter()
            .map(|l| json!({"re": l.re, "im": l.im}))
            .collect::<Vec<_>>(),
        "classification": eq.classification,
        "residual": eq.residual,
    })
}

fn coord_tag(coords: &[f64]) -> String {
    coords
        .iter()
        .map(|c| format!("{c}"))
        .collect::<Vec<_>>()
        .join("_")
}

pub fn simulate(cfg: &RunConfig, resolved: &Resolved, out: &Path) -> Result<i32> {
    let sc = cfg.simulate.clone().unwrap_or_default();
    let sys = resolved.flow_system();
    let from = sc
        .from
        .ok_or_else(|| anyhow!("simulate requires an initial condition (--from or simulate.from)"))?;
    if from.len() != sys.space().dim() {
        bail!(
            "initial condition has {} coordinates, the system needs {}",
            from.len(),
            sys.space().dim()
        );
    }
    let t_end = sc.t_end.unwrap_or(60.0);
    let tol = sc.tol.unwrap_or(1e-9);
    let samples = sc.samples.unwrap_or(600).max(1);
    let axes = match sc.axes {
        Some([a, b]) => (a, b),
        None => (0, 1.min(sys.space().dim() - 1)),
    };

    let p0 = canonicalize(sys.space(), &PointCoords(from.clone()))?;
    let times: Vec<f64> = (0..=samples)
        .map(|i| t_end * i as f64 / samples as f64)
        .collect();
    let traj: Trajectory = match flow_sampled(&sys, &p0, &times, tol) {
        Ok(t) => t,
        Err(e @ CoreError::Divergence { .. }) => {
            eprintln!("simulate: {e}");
            return Ok(EXIT_FAIL);
        }
        Err(e) => return Err(e.into()),
    };

    let tag = coord_tag(&from);
    write_atomic(&out.join(format!("trajectory_{tag}.csv")), &trajectory_csv(&traj))?;
    if sys.space().dim() >= 2 {
        let svg = trajectory_svg(&traj, sys.space(), axes)?;
        write_atomic(&out.join(format!("trajectory_{tag}.svg")), &svg)?;
    }

    let end = traj.final_point().expect("nonempty trajectory");
    println!(
        "simulated to t = {t_end} in {} steps ({} rejected), final point {:?}",
        traj.stats.steps, traj.stats.rejected, end.0
    );
    if let Some(target) = resolved.flow_target() {
        let d = dist(sys.space(), end, &target)?;
        println!("distance to target: {d:.6e}");
    }
    Ok(EXIT_PASS)
}

pub fn equilibria(cfg: &RunConfig, resolved: &Resolved, out: &Path) -> Result<i32> {
    let ec = cfg.equilibria.clone().unwrap_or_default();
    let sys = resolved.flow_system();
    let region = match &ec.region {
        Some(b) => build_region(b, sys.space())?,
        None => resolved.flow_region(),
    };
    let grid = ec.grid_per_dim.unwrap_or(16);
    let newton_tol = ec.newton_tol.unwrap_or(1e-10);

    let eqs = find_equilibria(&sys, &region, grid, newton_tol)?;
    let doc: Vec<Value> = eqs.iter().map(equilibrium_json).collect();
    write_atomic(
        &out.join("equilibria.json"),
        &format!("{}\n", serde_json::to_string_pretty(&doc)?),
    )?;
    println!("found {} equilibria (grid {grid}, newton tol {newton_tol:.1e})", eqs.len());
    for eq in &eqs {
        println!("  {:?}  {:?}  residual {:.2e}", eq.point.0, eq.classification, eq.residual);
    }
    Ok(EXIT_PASS)
}

pub fn chainrec(cfg: &RunConfig, resolved: &Resolved, out: &Path) -> Result<i32> {
    let cc = cfg.chainrec.clone().unwrap_or_default();
    let (sys, default_region, lyapunov) = resolved.analysis_system();
    let region = match &cc.region {
        Some(b) => build_region(b, sys.space())?,
        None => default_region,
    };
    let depth = cc.depth.unwrap_or(6);
    let lattice = cc.lattice_points.unwrap_or(16);
    let tol = cc.tol.unwrap_or(1e-6);
    let refine_rounds = cc.refine_rounds.unwrap_or(3);
    let grid = cfg
        .equilibria
        .as_ref()
        .and_then(|e| e.grid_per_dim)
        .unwrap_or(16);
    let newton_tol = cfg
        .equilibria
        .as_ref()
        .and_then(|e| e.newton_tol)
        .unwrap_or(1e-10);

    let eqs = find_equilibria(&sys, &region, grid, newton_tol)?;
    let t_flow = cc
        .t_flow
        .unwrap_or_else(|| cascade_core::certify::default_hop_time(&eqs));

    let mut cover = build_cover(sys.space(), &region, depth)?;
    let mut approx = None;
    for round in 0..=refine_rounds {
        let eps = cc.eps.unwrap_or_else(|| cover.diameter());
        let graph =
            build_transition_graph(&cover, &sys, t_flow, eps, lattice, tol, cfg.seed)?;
        let current = chain_recurrent_approx(&graph);
        if round < refine_rounds && !current.recurrent_boxes.is_empty() {
            let keep = current.recurrent_boxes.iter().copied().collect();
            let refined = refine(&cover, &keep)?;
            approx = Some(current);
            cover = refined;
        } else {
            approx = Some(current);
            break;
        }
    }
    let approx = approx.expect("at least one round runs");
    let verdict = check_recurrence_equals_equilibria(&approx, &cover, &eqs, cc.margin)?;

    let gradient_like = match &lyapunov {
        Some(v) => {
            let params = GradientLikeParams {
                seed: cfg.seed,
                ..GradientLikeParams::default()
            };
            Some(verify_gradient_like(&sys, v, &eqs, &region, &params)?)
        }
        None => None,
    };

    let centers: Vec<Vec<f64>> = approx
        .recurrent_boxes
        .iter()
        .map(|&id| cover.center(id).0)
        .collect();
    write_atomic(&out.join("recurrent_boxes.csv"), &points_csv(&centers))?;
    if sys.space().dim() == 2 {
        let svg = boxes_svg(&cover, &approx.recurrent_boxes, (0, 1))?;
        write_atomic(&out.join("recurrent_boxes.svg"), &svg)?;
    }

    let mut verdicts = BTreeMap::new();
    verdicts.insert(
        "recurrence_equals_equilibria".to_string(),
        json!(verdict_str(verdict.pass)),
    );
    if let Some(g) = &gradient_like {
        verdicts.insert("gradient_like".to_string(), json!(verdict_str(g.pass)));
    }
    let doc = json!({
        "system": resolved.name(cfg),
        "evidence_grade": "exhaustive-at-resolution",
        "parameters": {
            "depth": cover.depth(),
            "eps": number(cc.eps.unwrap_or_else(|| cover.diameter())),
            "t_flow": number(t_flow),
            "lattice_points": lattice,
            "tol": number(tol),
            "refine_rounds": refine_rounds,
            "margin": number(verdict.margin),
            "seed": cfg.seed,
        },
        "n_boxes": cover.len(),
        "n_recurrent": approx.recurrent_boxes.len(),
        "n_equilibria": eqs.len(),
        "stray_boxes": verdict.stray_boxes.len(),
        "uncovered_equilibria": verdict.uncovered_equilibria.len(),
        "verdicts": verdicts,
    });
    write_atomic(
        &out.join("chainrec.json"),
        &format!("{}\n", serde_json::to_string_pretty(&doc)?),
    )?;

    let pass = verdict.pass && gradient_like.as_ref().map(|g| g.pass).unwrap_or(true);
    println!(
        "chain recurrence at depth {}: {} recurrent boxes of {}; recurrence == equilibria: {}",
        cover.depth(),
        approx.recurrent_boxes.len(),
        cover.len(),
        verdict_str(verdict.pass)
    );
    if let Some(g) = &gradient_like {
        println!("gradient-like check: {}", verdict_str(g.pass));
    }
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

pub fn basin(cfg: &RunConfig, resolved: &Resolved, out: &Path) -> Result<i32> {
    let bc = cfg.basin.clone().unwrap_or_default();
    let sys = resolved.flow_system();
    let region = match &bc.region {
        Some(b) => build_region(b, sys.space())?,
        None => resolved.flow_region(),
    };
    let target = match &bc.target {
        Some(t) => canonicalize(sys.space(), &PointCoords(t.clone()))?,
        None => resolved
            .flow_target()
            .ok_or_else(|| anyhow!("basin requires a target (--target or basin.target)"))?,
    };
    let params = BasinParams {
        n: bc.n.unwrap_or(10_000),
        horizon: bc.horizon.unwrap_or(100.0),
        conv_tol: bc.conv_tol.unwrap_or(1e-3),
        tol: bc.tol.unwrap_or(1e-6),
        seed: cfg.seed,
    };
    let threshold = bc.threshold.unwrap_or(0.999);

    let estimate = monte_carlo_basin(&sys, &target, &region, &params, &[])?;
    let pass = estimate.fraction >= threshold && estimate.n_diverged == 0;
    let doc = json!({
        "system": resolved.name(cfg),
        "target": target.0,
        "parameters": {
            "n": params.n,
            "horizon": number(params.horizon),
            "conv_tol": number(params.conv_tol),
            "tol": number(params.tol),
            "seed": params.seed,
            "threshold": number(threshold),
        },
        "estimate": estimate,
        "verdict": verdict_str(pass),
    });
    write_atomic(
        &out.join("basin.json"),
        &format!("{}\n", serde_json::to_string_pretty(&doc)?),
    )?;
    println!(
        "basin fraction {:.6} ({} of {} converged, Wilson 95% lower bound {:.6}): {}",
        estimate.fraction,
        estimate.n_converged,
        estimate.n_samples,
        estimate.wilson_lower_95,
        verdict_str(pass)
    );
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

fn certify_params(cfg: &RunConfig, rc: &crate::systems::ResolvedCascade) -> CertifyParams {
    let c = cfg.certify.clone().unwrap_or_default();
    let mut p = CertifyParams::new(rc.region_x.clone(), rc.region_y.clone(), rc.target.clone());
    if let Some(v) = c.basin_threshold {
        p.inner.basin_threshold = v;
        p.outer.basin_threshold = v;
    }
    if let Some(v) = c.cascade_basin_threshold {
        p.cascade_basin_threshold = v;
    }
    if let Some(v) = c.inner_horizon {
        p.inner.basin.horizon = v;
        p.outer.basin.horizon = v;
    }
    if let Some(v) = c.cascade_horizon {
        p.cascade_basin.horizon = v;
    }
    if let Some(v) = c.envelope_horizon {
        p.envelope_horizon = v;
    }
    if let Some(v) = c.n_basin {
        p.inner.basin.n = v;
        p.outer.basin.n = v;
    }
    if let Some(v) = c.n_cascade_basin {
        p.cascade_basin.n = v;
    }
    if let Some(v) = c.n_x {
        p.growth.n_x = v;
    }
    if let Some(v) = c.n_y {
        p.growth.n_y = v;
    }
    if let Some(v) = c.n_envelope_trajectories {
        p.n_envelope_trajectories = v;
    }
    if let Some(v) = c.n_gradlike_trajectories {
        p.outer.gradient_like.n_trajectories = v;
    }
    if let Some(v) = c.gradlike_horizon {
        p.outer.gradient_like.horizon = v;
    }
    if let Some(v) = c.depth {
        p.outer.depth = v;
    }
    if let Some(v) = c.t_flow {
        p.outer.t_flow = Some(v);
    }
    if let Some(v) = c.eps {
        p.outer.eps = Some(v);
    }
    if let Some(v) = c.refine_rounds {
        p.outer.refine_rounds = v;
    }
    if let Some(v) = c.tol {
        p.inner.basin.tol = v;
        p.outer.basin.tol = v;
        p.outer.chain_tol = v;
        p.outer.gradient_like.tol = v;
        p.trajectory_tol = v;
        p.cascade_basin.tol = v;
    }
    if let Some(v) = c.grid_per_dim {
        p.inner.grid_per_dim = v;
        p.outer.grid_per_dim = v;
    }
    if let Some(v) = c.newton_tol {
        p.inner.newton_tol = v;
        p.outer.newton_tol = v;
    }
    if let Some(v) = c.hyp_tol {
        p.inner.hyp_tol = v;
        p.outer.hyp_tol = v;
    }
    if let Some(v) = c.fail_fast {
        p.fail_fast = v;
    }
    p.with_seed(cfg.seed)
}

pub fn certify(cfg: &RunConfig, resolved: &Resolved, out: &Path) -> Result<i32> {
    let rc = match resolved {
        Resolved::Cascade(rc) => rc,
        Resolved::System(_) => {
            bail!("certify requires a cascade system (built-in cascade or inline_cascade)")
        }
    };
    let v_outer = rc
        .v_outer
        .as_ref()
        .ok_or_else(|| anyhow!("certify requires an outer candidate function (v_outer)"))?;
    let certificate = rc.certificate.as_ref().ok_or_else(|| {
        anyhow!("certify requires a growth certificate (certify.certificate for inline cascades)")
    })?;
    let params = certify_params(cfg, rc);
    let report = certify_cascade(
        &rc.cascade,
        v_outer,
        certificate,
        &params,
        &resolved.name(cfg),
    )?;

    write_atomic(
        &out.join("report.json"),
        &format!("{}\n", report.to_json_string()),
    )?;
    let witnesses: Vec<Vec<f64>> = report
        .conditions
        .iter()
        .flat_map(|c| c.witnesses.iter().cloned())
        .collect();
    if !witnesses.is_empty() {
        write_atomic(&out.join("witnesses.csv"), &points_csv(&witnesses))?;
    }

    println!("certification of {}: {:?}", report.system, report.overall);
    for c in &report.conditions {
        println!("  [{:?}] {}: {}", c.verdict, c.id, c.summary);
    }
    Ok(exit_code(report.overall))
}

pub fn list_examples() -> i32 {
    println!("built-in systems:");
    for (name, description) in cascade_core::builtins::BUILTIN_NAMES {
        println!("  {name:24} {description}");
    }
    EXIT_PASS
}
