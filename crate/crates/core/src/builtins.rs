//! Named example systems addressable from the command line and test suites.
//!
//! Each entry bundles a system (or cascade) with the default search region,
//! the target equilibrium, and, where available, an energy-style function
//! that decreases along trajectories. Cascade entries also carry a growth
//! certificate for the interconnection term.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::certify::GrowthCertificate;
use crate::dynamics::{
    make_mechanical_system, total_energy, CascadeDef, ScalarField, SystemDef, SystemKind,
};
use crate::equilibria::RegionSpec;
use crate::error::Result;
use crate::geometry::{Factor, PointCoords, SpaceSpec};

/// A standalone system with its default analysis data.
#[derive(Debug, Clone)]
pub struct SystemBundle {
    pub system: SystemDef,
    pub region: RegionSpec,
    /// The intended attractor, when the system has one.
    pub target: Option<PointCoords>,
    /// Energy-style candidate function for gradient-like verification.
    pub lyapunov: Option<ScalarField>,
}

/// A cascade with its default analysis data and growth certificate.
#[derive(Debug, Clone)]
pub struct CascadeBundle {
    pub cascade: CascadeDef,
    pub region_x: RegionSpec,
    pub region_y: RegionSpec,
    /// Proper function decreasing along unforced outer-loop trajectories.
    pub v_outer: ScalarField,
    pub certificate: GrowthCertificate,
    /// Target equilibrium of the full cascade.
    pub target: PointCoords,
}

#[derive(Debug, Clone)]
pub enum Builtin {
    System(SystemBundle),
    Cascade(CascadeBundle),
}

pub const BUILTIN_NAMES: [(&str, &str); 8] = [
    (
        "paper-example",
        "torus cascade: damped pendulum driving a pendulum whose damping is modulated by cos(2 phi)",
    ),
    ("pendulum", "damped pendulum on the tangent bundle of the circle"),
    ("pendulum-undamped", "undamped pendulum (energy-conserving negative control)"),
    ("gradient-circle", "steepest descent of 1 - cos(theta) on the circle"),
    ("limit-cycle", "planar system with an attracting unit-circle limit cycle"),
    (
        "cascade-undamped-inner",
        "torus cascade with an undamped inner loop (fails inner-loop certification)",
    ),
    (
        "cascade-limit-cycle",
        "cascade whose unforced outer loop is the limit-cycle system (fails recurrence certification)",
    ),
    (
        "cascade-unbounded",
        "torus cascade with a cubic-in-velocity coupling that no linear-in-energy gain dominates",
    ),
];

fn circle() -> SpaceSpec {
    SpaceSpec::euclidean(vec![Factor::Circle])
}

fn circle_line() -> SpaceSpec {
    SpaceSpec::euclidean(vec![Factor::Circle, Factor::Line])
}

fn plane() -> SpaceSpec {
    SpaceSpec::euclidean(vec![Factor::Line, Factor::Line])
}

fn cosine_well_potential() -> ScalarField {
    ScalarField::new(circle(), Arc::new(|q: &[f64]| 1.0 - q[0].cos()))
        .with_gradient(Arc::new(|q: &[f64], out: &mut [f64]| out[0] = q[0].sin()))
}

/// Damped pendulum as a dissipative mechanical system, with its analytic
/// Jacobian attached for sharp eigenvalue computations.
pub fn pendulum() -> SystemDef {
    make_mechanical_system(
        &circle(),
        &DMatrix::identity(1, 1),
        &DMatrix::identity(1, 1),
        cosine_well_potential(),
    )
    .expect("unit-coefficient mechanical system is valid")
    .with_jacobian(Arc::new(|s: &[f64]| {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -s[0].cos(), -1.0])
    }))
}

/// Total energy of the pendulum: `1 - cos(phi) + phidot^2 / 2`.
pub fn pendulum_energy() -> ScalarField {
    total_energy(&DMatrix::identity(1, 1), &cosine_well_potential())
        .expect("unit kinetic metric is valid")
}

fn pendulum_undamped() -> SystemDef {
    SystemDef::new(
        circle_line(),
        SystemKind::Generic,
        Arc::new(|s: &[f64], out: &mut [f64]| {
            out[0] = s[1];
            out[1] = -s[0].sin();
        }),
    )
    .with_jacobian(Arc::new(|s: &[f64]| {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -s[0].cos(), 0.0])
    }))
}

fn gradient_circle() -> SystemDef {
    crate::dynamics::make_gradient_system(circle(), cosine_well_potential())
        .expect("identity metric is valid")
        .with_jacobian(Arc::new(|s: &[f64]| {
            DMatrix::from_row_slice(1, 1, &[-s[0].cos()])
        }))
}

/// Planar field with an unstable focus at the origin and an attracting unit
/// circle: `xdot = -y + x (1 - x^2 - y^2)`, `ydot = x + y (1 - x^2 - y^2)`.
pub fn limit_cycle() -> SystemDef {
    SystemDef::new(
        plane(),
        SystemKind::Generic,
        Arc::new(|s: &[f64], out: &mut [f64]| {
            let r2 = s[0] * s[0] + s[1] * s[1];
            out[0] = -s[1] + s[0] * (1.0 - r2);
            out[1] = s[0] + s[1] * (1.0 - r2);
        }),
    )
}

fn velocity_region(space: &SpaceSpec, v: f64) -> RegionSpec {
    RegionSpec::symmetric(space, v).expect("symmetric region is valid")
}

/// Outer loop of the torus cascade: the pendulum's restoring-plus-damping
/// term gated by `cos(2 phi)` of the inner pendulum angle.
fn torus_outer_field() -> crate::dynamics::CoupledFieldFn {
    Arc::new(|x: &[f64], y: &[f64], out: &mut [f64]| {
        out[0] = x[1];
        out[1] = -(x[0].sin() + x[1]) * (2.0 * y[0]).cos();
    })
}

fn torus_cascade(inner: SystemDef) -> Result<CascadeDef> {
    CascadeDef::new(
        circle_line(),
        torus_outer_field(),
        inner,
        PointCoords(vec![0.0, 0.0]),
    )
}

/// Growth certificate used for the torus cascade: total outer energy,
/// gain `4 (1 - cos 2 phi)`, zero bias, level 4.
pub fn torus_certificate(cascade: &CascadeDef) -> Result<GrowthCertificate> {
    let gain = ScalarField::new(
        circle_line(),
        Arc::new(|y: &[f64]| 4.0 * (1.0 - (2.0 * y[0]).cos())),
    )
    .with_gradient(Arc::new(|y: &[f64], out: &mut [f64]| {
        out[0] = 8.0 * (2.0 * y[0]).sin();
        out[1] = 0.0;
    }));
    let bias = ScalarField::new(circle_line(), Arc::new(|_: &[f64]| 0.0))
        .with_gradient(Arc::new(|_: &[f64], out: &mut [f64]| out.fill(0.0)));
    GrowthCertificate::new(
        pendulum_energy(),
        gain,
        bias,
        4.0,
        cascade.inner_equilibrium(),
    )
}

fn paper_example() -> Result<CascadeBundle> {
    let cascade = torus_cascade(pendulum())?;
    let certificate = torus_certificate(&cascade)?;
    Ok(CascadeBundle {
        region_x: velocity_region(&circle_line(), 4.0),
        region_y: velocity_region(&circle_line(), 4.0),
        v_outer: pendulum_energy(),
        certificate,
        target: PointCoords(vec![0.0, 0.0, 0.0, 0.0]),
        cascade,
    })
}

fn cascade_undamped_inner() -> Result<CascadeBundle> {
    let cascade = torus_cascade(pendulum_undamped())?;
    let certificate = torus_certificate(&cascade)?;
    Ok(CascadeBundle {
        region_x: velocity_region(&circle_line(), 4.0),
        region_y: velocity_region(&circle_line(), 4.0),
        v_outer: pendulum_energy(),
        certificate,
        target: PointCoords(vec![0.0, 0.0, 0.0, 0.0]),
        cascade,
    })
}

fn cascade_limit_cycle() -> Result<CascadeBundle> {
    // Outer loop: limit-cycle dynamics nudged by sin(phi); the coupling
    // vanishes at the inner rest point.
    let cascade = CascadeDef::new(
        plane(),
        Arc::new(|x: &[f64], y: &[f64], out: &mut [f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            out[0] = -x[1] + x[0] * (1.0 - r2) + y[0].sin();
            out[1] = x[0] + x[1] * (1.0 - r2);
        }),
        pendulum(),
        PointCoords(vec![0.0, 0.0]),
    )?;
    let half_quadratic = ScalarField::new(
        plane(),
        Arc::new(|x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1])),
    )
    .with_gradient(Arc::new(|x: &[f64], out: &mut [f64]| {
        out[0] = x[0];
        out[1] = x[1];
    }));
    // |x1 sin phi| <= sqrt(2 W) |sin phi| <= (3/2) |sin phi| W for W >= 1.
    let gain = ScalarField::new(
        circle_line(),
        Arc::new(|y: &[f64]| 1.5 * y[0].sin().abs()),
    );
    let bias = ScalarField::new(circle_line(), Arc::new(|_: &[f64]| 0.0));
    let certificate = GrowthCertificate::new(
        half_quadratic.clone(),
        gain,
        bias,
        1.0,
        cascade.inner_equilibrium(),
    )?;
    Ok(CascadeBundle {
        region_x: RegionSpec::symmetric(&plane(), 2.0)?,
        region_y: velocity_region(&circle_line(), 4.0),
        v_outer: half_quadratic,
        certificate,
        target: PointCoords(vec![0.0, 0.0, 0.0, 0.0]),
        cascade,
    })
}

/// Torus cascade with an extra `phi^2 thetadot^3` coupling; no gain linear
/// in the outer energy can dominate it, so the standard certificate must be
/// rejected by verification.
pub fn cascade_unbounded() -> Result<CascadeBundle> {
    let cascade = CascadeDef::new(
        circle_line(),
        Arc::new(|x: &[f64], y: &[f64], out: &mut [f64]| {
            out[0] = x[1];
            out[1] = -(x[0].sin() + x[1]) + y[0] * y[0] * x[1] * x[1] * x[1];
        }),
        pendulum(),
        PointCoords(vec![0.0, 0.0]),
    )?;
    let certificate = torus_certificate(&cascade)?;
    Ok(CascadeBundle {
        region_x: velocity_region(&circle_line(), 4.0),
        region_y: velocity_region(&circle_line(), 4.0),
        v_outer: pendulum_energy(),
        certificate,
        target: PointCoords(vec![0.0, 0.0, 0.0, 0.0]),
        cascade,
    })
}

/// Looks up a named example.
pub fn builtin(name: &str) -> Option<Builtin> {
    let entry = match name {
        "paper-example" => Builtin::Cascade(paper_example().ok()?),
        "pendulum" => Builtin::System(SystemBundle {
            system: pendulum(),
            region: velocity_region(&circle_line(), 4.0),
            target: Some(PointCoords(vec![0.0, 0.0])),
            lyapunov: Some(pendulum_energy()),
        }),
        "pendulum-undamped" => Builtin::System(SystemBundle {
            system: pendulum_undamped(),
            region: velocity_region(&circle_line(), 4.0),
            target: Some(PointCoords(vec![0.0, 0.0])),
            lyapunov: Some(pendulum_energy()),
        }),
        "gradient-circle" => Builtin::System(SystemBundle {
            system: gradient_circle(),
            region: RegionSpec::symmetric(&circle(), 1.0).ok()?,
            target: Some(PointCoords(vec![0.0])),
            lyapunov: Some(cosine_well_potential()),
        }),
        "limit-cycle" => Builtin::System(SystemBundle {
            system: limit_cycle(),
            region: RegionSpec::symmetric(&plane(), 2.0).ok()?,
            target: None,
            lyapunov: Some(
                ScalarField::new(
                    plane(),
                    Arc::new(|x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1])),
                )
                .with_gradient(Arc::new(|x: &[f64], out: &mut [f64]| {
                    out[0] = x[0];
                    out[1] = x[1];
                })),
            ),
        }),
        "cascade-undamped-inner" => Builtin::Cascade(cascade_undamped_inner().ok()?),
        "cascade-limit-cycle" => Builtin::Cascade(cascade_limit_cycle().ok()?),
        "cascade-unbounded" => Builtin::Cascade(cascade_unbounded().ok()?),
        _ => return None,
    };
    Some(entry)
}
