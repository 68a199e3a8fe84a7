//! Resolution of a config's system selector into core objects.

use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DMatrix;

use cascade_core::builtins::{self, Builtin};
use cascade_core::certify::GrowthCertificate;
use cascade_core::dynamics::{CascadeDef, ScalarField, SystemDef, SystemKind};
use cascade_core::equilibria::{FactorBounds, RegionSpec};
use cascade_core::geometry::{canonicalize, PointCoords, SpaceSpec};

use crate::config::{
    BoundCfg, CertificateCfg, InlineCascade, InlineSystem, RunConfig, SpaceCfg, SystemSelector,
};
use crate::expr::{eval_expression, parse_expression, Expr};

#[derive(Debug, Clone)]
pub struct ResolvedSystem {
    pub system: SystemDef,
    pub region: RegionSpec,
    pub target: Option<PointCoords>,
    pub lyapunov: Option<ScalarField>,
}

#[derive(Debug, Clone)]
pub struct ResolvedCascade {
    pub cascade: CascadeDef,
    pub region_x: RegionSpec,
    pub region_y: RegionSpec,
    pub v_outer: Option<ScalarField>,
    pub certificate: Option<GrowthCertificate>,
    pub target: PointCoords,
}

#[derive(Debug, Clone)]
pub enum Resolved {
    System(ResolvedSystem),
    Cascade(ResolvedCascade),
}

impl Resolved {
    pub fn name(&self, cfg: &RunConfig) -> String {
        match &cfg.system {
            SystemSelector::Builtin(n) => n.clone(),
            SystemSelector::Inline(_) => "inline".to_string(),
            SystemSelector::InlineCascade(_) => "inline-cascade".to_string(),
        }
    }

    /// The system a trajectory-level command operates on: the system itself,
    /// or the full cascade on the product space.
    pub fn flow_system(&self) -> SystemDef {
        match self {
            Resolved::System(s) => s.system.clone(),
            Resolved::Cascade(c) => c.cascade.full_system(),
        }
    }

    pub fn flow_region(&self) -> RegionSpec {
        match self {
            Resolved::System(s) => s.region.clone(),
            Resolved::Cascade(c) => {
                let mut bounds = c.region_x.bounds.clone();
                bounds.extend(c.region_y.bounds.iter().copied());
                RegionSpec { bounds }
            }
        }
    }

    pub fn flow_target(&self) -> Option<PointCoords> {
        match self {
            Resolved::System(s) => s.target.clone(),
            Resolved::Cascade(c) => Some(c.target.clone()),
        }
    }

    /// The system the recurrence analysis applies to: the system itself, or
    /// the unforced outer loop of a cascade.
    pub fn analysis_system(&self) -> (SystemDef, RegionSpec, Option<ScalarField>) {
        match self {
            Resolved::System(s) => (s.system.clone(), s.region.clone(), s.lyapunov.clone()),
            Resolved::Cascade(c) => (
                c.cascade.unforced_outer(),
                c.region_x.clone(),
                c.v_outer.clone(),
            ),
        }
    }
}

fn build_space(cfg: &SpaceCfg) -> Result<SpaceSpec> {
    let n = cfg.factors.len();
    if n == 0 {
        bail!("space must have at least one factor");
    }
    let metric = match &cfg.metric {
        None => DMatrix::identity(n, n),
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                bail!("metric must be a {n}x{n} row-major matrix");
            }
            DMatrix::from_fn(n, n, |i, j| rows[i][j])
        }
    };
    Ok(SpaceSpec::new(cfg.factors.clone(), metric)?)
}

pub fn build_region(bounds: &[BoundCfg], space: &SpaceSpec) -> Result<RegionSpec> {
    let parsed = bounds
        .iter()
        .map(|b| match b {
            BoundCfg::Interval([lo, hi]) => Ok(FactorBounds::Interval { lo: *lo, hi: *hi }),
            BoundCfg::Full(tag) if tag == "full" => Ok(FactorBounds::FullCircle),
            BoundCfg::Full(tag) => Err(anyhow!("unknown bound tag `{tag}` (expected \"full\")")),
        })
        .collect::<Result<Vec<_>>>()?;
    let region = RegionSpec::new(parsed)?;
    region.validate(space)?;
    Ok(region)
}

pub fn region_to_cfg(region: &RegionSpec) -> Vec<BoundCfg> {
    region
        .bounds
        .iter()
        .map(|b| match b {
            FactorBounds::FullCircle => BoundCfg::Full("full".into()),
            FactorBounds::Interval { lo, hi } => BoundCfg::Interval([*lo, *hi]),
        })
        .collect()
}

fn default_region(space: &SpaceSpec) -> RegionSpec {
    RegionSpec::symmetric(space, 4.0).expect("symmetric region is valid")
}

fn parse_components(exprs: &[String], vars: &[String], what: &str) -> Result<Vec<Expr>> {
    exprs
        .iter()
        .enumerate()
        .map(|(i, src)| {
            parse_expression(src, vars).map_err(|e| anyhow!("{what}[{i}] `{src}`: {e}"))
        })
        .collect()
}

/// Compiles field component expressions into a field closure. Evaluation
/// errors surface as NaN, which the integrator rejects as non-finite.
fn field_from_exprs(components: Vec<Expr>) -> cascade_core::dynamics::FieldFn {
    Arc::new(move |state: &[f64], out: &mut [f64]| {
        for (o, e) in out.iter_mut().zip(&components) {
            *o = eval_expression(e, state).unwrap_or(f64::NAN);
        }
    })
}

fn scalar_from_expr(src: &str, vars: &[String], space: SpaceSpec) -> Result<ScalarField> {
    let expr = parse_expression(src, vars).map_err(|e| anyhow!("`{src}`: {e}"))?;
    Ok(ScalarField::new(
        space,
        Arc::new(move |state: &[f64]| eval_expression(&expr, state).unwrap_or(f64::NAN)),
    ))
}

fn check_state_names(names: &[String], dim: usize, what: &str) -> Result<()> {
    if names.len() != dim {
        bail!("{what}: expected {dim} state names, got {}", names.len());
    }
    for (i, a) in names.iter().enumerate() {
        if names[i + 1..].contains(a) {
            bail!("{what}: duplicate state name `{a}`");
        }
    }
    Ok(())
}

fn resolve_inline(inline: &InlineSystem) -> Result<ResolvedSystem> {
    let space = build_space(&inline.space)?;
    let n = space.dim();
    check_state_names(&inline.state, n, "inline system")?;
    if inline.field.len() != n {
        bail!(
            "inline system: expected {n} field components, got {}",
            inline.field.len()
        );
    }
    let components = parse_components(&inline.field, &inline.state, "field")?;
    let system = SystemDef::new(space.clone(), SystemKind::Generic, field_from_exprs(components));

    let region = match &inline.region {
        Some(b) => build_region(b, &space)?,
        None => default_region(&space),
    };
    let target = inline
        .target
        .as_ref()
        .map(|t| canonicalize(&space, &PointCoords(t.clone())))
        .transpose()?;
    let lyapunov = inline
        .lyapunov
        .as_ref()
        .map(|src| scalar_from_expr(src, &inline.state, space.clone()))
        .transpose()?;

    // The field must evaluate finitely somewhere sensible.
    let probe = target
        .clone()
        .unwrap_or_else(|| PointCoords(vec![0.0; n]));
    cascade_core::dynamics::eval_field(&system, &probe)
        .context("inline field does not evaluate finitely at the probe point")?;

    Ok(ResolvedSystem {
        system,
        region,
        target,
        lyapunov,
    })
}

fn resolve_inline_cascade(
    inline: &InlineCascade,
    certificate: Option<&CertificateCfg>,
) -> Result<ResolvedCascade> {
    let outer_space = build_space(&inline.outer_space)?;
    let inner_space = build_space(&inline.inner_space)?;
    let nx = outer_space.dim();
    let ny = inner_space.dim();
    check_state_names(&inline.outer_state, nx, "inline cascade outer")?;
    check_state_names(&inline.inner_state, ny, "inline cascade inner")?;
    if inline.f.len() != nx {
        bail!("inline cascade: expected {nx} outer field components");
    }
    if inline.g.len() != ny {
        bail!("inline cascade: expected {ny} inner field components");
    }

    let mut joint = inline.outer_state.clone();
    joint.extend(inline.inner_state.iter().cloned());
    for name in &inline.outer_state {
        if inline.inner_state.contains(name) {
            bail!("inline cascade: state name `{name}` used in both loops");
        }
    }
    let f_components = parse_components(&inline.f, &joint, "f")?;
    let g_components = parse_components(&inline.g, &inline.inner_state, "g")?;

    let f: cascade_core::dynamics::CoupledFieldFn = {
        Arc::new(move |x: &[f64], y: &[f64], out: &mut [f64]| {
            let mut joint = Vec::with_capacity(x.len() + y.len());
            joint.extend_from_slice(x);
            joint.extend_from_slice(y);
            for (o, e) in out.iter_mut().zip(&f_components) {
                *o = eval_expression(e, &joint).unwrap_or(f64::NAN);
            }
        })
    };
    let g = SystemDef::new(
        inner_space.clone(),
        SystemKind::Generic,
        field_from_exprs(g_components),
    );

    if inline.inner_equilibrium.len() != ny {
        bail!("inline cascade: inner_equilibrium must have {ny} coordinates");
    }
    let cascade = CascadeDef::new(
        outer_space.clone(),
        f,
        g,
        PointCoords(inline.inner_equilibrium.clone()),
    )?;

    let region_x = match &inline.region_x {
        Some(b) => build_region(b, &outer_space)?,
        None => default_region(&outer_space),
    };
    let region_y = match &inline.region_y {
        Some(b) => build_region(b, &inner_space)?,
        None => default_region(&inner_space),
    };
    let v_outer = inline
        .v_outer
        .as_ref()
        .map(|src| scalar_from_expr(src, &inline.outer_state, outer_space.clone()))
        .transpose()?;
    let certificate = certificate
        .map(|c| -> Result<GrowthCertificate> {
            let w = scalar_from_expr(&c.w, &inline.outer_state, outer_space.clone())?;
            let alpha = scalar_from_expr(&c.alpha, &inline.inner_state, inner_space.clone())?;
            let beta = scalar_from_expr(&c.beta, &inline.inner_state, inner_space.clone())?;
            Ok(GrowthCertificate::new(
                w,
                alpha,
                beta,
                c.c,
                cascade.inner_equilibrium(),
            )?)
        })
        .transpose()?;

    let target = match &inline.target {
        Some(t) => {
            if t.len() != nx + ny {
                bail!("inline cascade: target must have {} coordinates", nx + ny);
            }
            canonicalize(&outer_space.product(&inner_space), &PointCoords(t.clone()))?
        }
        None => {
            let mut coords = vec![0.0; nx];
            coords.extend_from_slice(&cascade.inner_equilibrium().0);
            PointCoords(coords)
        }
    };

    Ok(ResolvedCascade {
        cascade,
        region_x,
        region_y,
        v_outer,
        certificate,
        target,
    })
}

fn from_builtin(b: Builtin) -> Resolved {
    match b {
        Builtin::System(s) => Resolved::System(ResolvedSystem {
            system: s.system,
            region: s.region,
            target: s.target,
            lyapunov: s.lyapunov,
        }),
        Builtin::Cascade(c) => Resolved::Cascade(ResolvedCascade {
            cascade: c.cascade,
            region_x: c.region_x,
            region_y: c.region_y,
            v_outer: Some(c.v_outer),
            certificate: Some(c.certificate),
            target: c.target,
        }),
    }
}

pub fn resolve_system(cfg: &RunConfig) -> Result<Resolved> {
    match &cfg.system {
        SystemSelector::Builtin(name) => {
            let b = builtins::builtin(name).ok_or_else(|| {
                let names: Vec<&str> = builtins::BUILTIN_NAMES.iter().map(|(n, _)| *n).collect();
                anyhow!(
                    "unknown built-in system `{name}` (available: {})",
                    names.join(", ")
                )
            })?;
            Ok(from_builtin(b))
        }
        SystemSelector::Inline(inline) => Ok(Resolved::System(resolve_inline(inline)?)),
        SystemSelector::InlineCascade(inline) => {
            let cert_cfg = cfg.certify.as_ref().and_then(|c| c.certificate.as_ref());
            Ok(Resolved::Cascade(resolve_inline_cascade(inline, cert_cfg)?))
        }
    }
}
