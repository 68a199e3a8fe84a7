//! Vector fields, cascade composition, and the two canonical gradient-like
//! system classes (gradient descent and dissipative mechanical systems).
//!
//! A [`SystemDef`] pairs a space with an autonomous vector field given in
//! chart coordinates. A [`CascadeDef`] couples an outer field `f(x, y)` on
//! `X` to an inner system `g` on `Y` with a distinguished inner equilibrium;
//! the coupling that vanishes when the inner loop is at rest is the
//! interconnection term `h(x, y) = f(x, y) - f(x, 0_Y)`.

mod flow;

pub use flow::{flow, flow_endpoint, flow_sampled, IntegratorStats, Trajectory};

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{canonicalize, Factor, PointCoords, SpaceSpec, TangentCoords};

/// Field evaluation rule: writes the chart-coordinate velocity into `out`.
pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Analytic Jacobian rule for a field.
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
/// Scalar value rule.
pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Analytic gradient rule: writes the chart gradient into `out`.
pub type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Outer-loop field of a cascade: `(x, y) -> velocity on X`.
pub type CoupledFieldFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Generic,
    Gradient,
    Mechanical,
    Cascade,
}

/// An autonomous vector field on a product space.
#[derive(Clone)]
pub struct SystemDef {
    space: SpaceSpec,
    kind: SystemKind,
    field: FieldFn,
    jacobian: Option<JacobianFn>,
}

impl SystemDef {
    pub fn new(space: SpaceSpec, kind: SystemKind, field: FieldFn) -> Self {
        Self {
            space,
            kind,
            field,
            jacobian: None,
        }
    }

    pub fn with_jacobian(mut self, jacobian: JacobianFn) -> Self {
        self.jacobian = Some(jacobian);
        self
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn analytic_jacobian(&self) -> Option<&JacobianFn> {
        self.jacobian.as_ref()
    }

    /// Raw field evaluation without finiteness checks; integrator hot path.
    pub(crate) fn eval_raw(&self, x: &[f64], out: &mut [f64]) {
        (self.field)(x, out);
    }
}

impl std::fmt::Debug for SystemDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemDef")
            .field("dim", &self.space.dim())
            .field("kind", &self.kind)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

/// Evaluates the field at a canonical point, checking dimensions and
/// finiteness of the result.
pub fn eval_field(sys: &SystemDef, p: &PointCoords) -> Result<TangentCoords> {
    let n = sys.space.dim();
    if p.len() != n {
        return Err(CoreError::DimensionMismatch {
            expected: n,
            got: p.len(),
        });
    }
    let mut out = vec![0.0; n];
    sys.eval_raw(p.as_slice(), &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite {
            context: "field evaluation".into(),
            coords: p.0.clone(),
        });
    }
    Ok(TangentCoords(out))
}

/// A cascade: inner system `g` on `Y` driving an outer field `f(x, y)` on `X`,
/// with no feedback from `x` to `y`.
#[derive(Clone)]
pub struct CascadeDef {
    outer_space: SpaceSpec,
    f: CoupledFieldFn,
    g: SystemDef,
    inner_equilibrium: PointCoords,
}

impl CascadeDef {
    /// Builds a cascade, validating that the inner field vanishes at the
    /// declared inner equilibrium (tolerance 1e-10).
    pub fn new(
        outer_space: SpaceSpec,
        f: CoupledFieldFn,
        g: SystemDef,
        inner_equilibrium: PointCoords,
    ) -> Result<Self> {
        let zero_y = canonicalize(g.space(), &inner_equilibrium)?;
        let residual = eval_field(&g, &zero_y)?.norm();
        if residual > 1e-10 {
            return Err(CoreError::InvalidInput(format!(
                "inner field does not vanish at the declared equilibrium (|g| = {residual:.3e})"
            )));
        }
        Ok(Self {
            outer_space,
            f,
            g,
            inner_equilibrium: zero_y,
        })
    }

    pub fn outer_space(&self) -> &SpaceSpec {
        &self.outer_space
    }

    pub fn inner_space(&self) -> &SpaceSpec {
        self.g.space()
    }

    pub fn inner(&self) -> &SystemDef {
        &self.g
    }

    pub fn inner_equilibrium(&self) -> &PointCoords {
        &self.inner_equilibrium
    }

    /// Evaluates the outer field `f(x, y)`.
    pub fn eval_outer(&self, x: &PointCoords, y: &PointCoords) -> Result<TangentCoords> {
        self.check_dims(x, y)?;
        let mut out = vec![0.0; self.outer_space.dim()];
        (self.f)(x.as_slice(), y.as_slice(), &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite {
                context: "outer field evaluation".into(),
                coords: x.0.iter().chain(y.0.iter()).copied().collect(),
            });
        }
        Ok(TangentCoords(out))
    }

    /// The standalone outer loop with the inner state frozen at its
    /// equilibrium: `x -> f(x, 0_Y)`.
    pub fn unforced_outer(&self) -> SystemDef {
        let f = Arc::clone(&self.f);
        let zero_y = self.inner_equilibrium.0.clone();
        SystemDef::new(
            self.outer_space.clone(),
            SystemKind::Generic,
            Arc::new(move |x, out| f(x, &zero_y, out)),
        )
    }

    /// The interconnection term `h(x, y) = f(x, y) - f(x, 0_Y)`.
    pub fn interconnection(&self, x: &PointCoords, y: &PointCoords) -> Result<TangentCoords> {
        let full = self.eval_outer(x, y)?;
        let unforced = self.eval_outer(x, &self.inner_equilibrium)?;
        Ok(TangentCoords(
            full.0
                .iter()
                .zip(unforced.0.iter())
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    /// The full cascade as a single system on the product space `X x Y`.
    pub fn full_system(&self) -> SystemDef {
        let space = self.outer_space.product(self.g.space());
        let f = Arc::clone(&self.f);
        let g = self.g.clone();
        let nx = self.outer_space.dim();
        SystemDef::new(
            space,
            SystemKind::Cascade,
            Arc::new(move |xy, out| {
                let (x, y) = xy.split_at(nx);
                let (out_x, out_y) = out.split_at_mut(nx);
                f(x, y, out_x);
                g.eval_raw(y, out_y);
            }),
        )
    }

    /// The equilibrium of the full cascade lying over an outer equilibrium.
    pub fn lift_outer_point(&self, x: &PointCoords) -> PointCoords {
        let mut coords = x.0.clone();
        coords.extend_from_slice(&self.inner_equilibrium.0);
        PointCoords(coords)
    }

    fn check_dims(&self, x: &PointCoords, y: &PointCoords) -> Result<()> {
        if x.len() != self.outer_space.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.outer_space.dim(),
                got: x.len(),
            });
        }
        if y.len() != self.g.space().dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.g.space().dim(),
                got: y.len(),
            });
        }
        Ok(())
    }
}

impl std::fmt::Debug for CascadeDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CascadeDef")
            .field("outer_dim", &self.outer_space.dim())
            .field("inner_dim", &self.g.space().dim())
            .finish()
    }
}

/// A scalar function on a space, with an optional analytic gradient rule.
#[derive(Clone)]
pub struct ScalarField {
    space: SpaceSpec,
    value: ValueFn,
    gradient: Option<GradientFn>,
}

impl ScalarField {
    pub fn new(space: SpaceSpec, value: ValueFn) -> Self {
        Self {
            space,
            value,
            gradient: None,
        }
    }

    pub fn with_gradient(mut self, gradient: GradientFn) -> Self {
        self.gradient = Some(gradient);
        self
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub(crate) fn value_raw(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn value(&self, p: &PointCoords) -> Result<f64> {
        if p.len() != self.space.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.space.dim(),
                got: p.len(),
            });
        }
        let v = (self.value)(p.as_slice());
        if !v.is_finite() {
            return Err(CoreError::NonFinite {
                context: "scalar field value".into(),
                coords: p.0.clone(),
            });
        }
        Ok(v)
    }

    pub(crate) fn gradient_raw(&self, x: &[f64], out: &mut [f64]) {
        match &self.gradient {
            Some(g) => g(x, out),
            None => central_difference_gradient(&self.value, x, out),
        }
    }

    /// Chart gradient: analytic rule if present, else central differences
    /// with per-coordinate step `max(1e-6, 1e-8 * |coord|)`.
    pub fn gradient(&self, p: &PointCoords) -> Result<TangentCoords> {
        if p.len() != self.space.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.space.dim(),
                got: p.len(),
            });
        }
        let mut out = vec![0.0; p.len()];
        self.gradient_raw(p.as_slice(), &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite {
                context: "scalar field gradient".into(),
                coords: p.0.clone(),
            });
        }
        Ok(TangentCoords(out))
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.space.dim())
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

pub(crate) fn fd_step(coord: f64) -> f64 {
    (1e-8 * coord.abs()).max(1e-6)
}

fn central_difference_gradient(value: &ValueFn, x: &[f64], out: &mut [f64]) {
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = fd_step(x[i]);
        probe[i] = x[i] + h;
        let hi = value(&probe);
        probe[i] = x[i] - h;
        let lo = value(&probe);
        probe[i] = x[i];
        out[i] = (hi - lo) / (2.0 * h);
    }
}

/// Directional derivative of a scalar field along a tangent vector.
pub fn lie_derivative(w: &ScalarField, v: &TangentCoords, p: &PointCoords) -> Result<f64> {
    if v.len() != w.space().dim() {
        return Err(CoreError::DimensionMismatch {
            expected: w.space().dim(),
            got: v.len(),
        });
    }
    let grad = w.gradient(p)?;
    Ok(grad.0.iter().zip(v.0.iter()).map(|(a, b)| a * b).sum())
}

fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(CoreError::InvalidMetric(format!("{what} not square")));
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                return Err(CoreError::InvalidMetric(format!("{what} not symmetric")));
            }
        }
    }
    let eigs = m.clone().symmetric_eigen().eigenvalues;
    if eigs.iter().any(|&l| l <= 0.0) {
        return Err(CoreError::InvalidMetric(format!(
            "{what} not positive definite"
        )));
    }
    Ok(())
}

/// Steepest-descent dynamics of a potential: `field = -(metric^-1) grad V`
/// in chart coordinates.
pub fn make_gradient_system(space: SpaceSpec, potential: ScalarField) -> Result<SystemDef> {
    let n = space.dim();
    if potential.space().dim() != n {
        return Err(CoreError::DimensionMismatch {
            expected: n,
            got: potential.space().dim(),
        });
    }
    check_spd(space.metric(), "metric")?;
    let inv = space
        .metric()
        .clone()
        .try_inverse()
        .ok_or_else(|| CoreError::InvalidMetric("metric singular".into()))?;
    let field: FieldFn = Arc::new(move |q, out| {
        let mut grad = vec![0.0; q.len()];
        potential.gradient_raw(q, &mut grad);
        for i in 0..q.len() {
            out[i] = -(0..q.len()).map(|j| inv[(i, j)] * grad[j]).sum::<f64>();
        }
    });
    Ok(SystemDef::new(space, SystemKind::Gradient, field))
}

/// Dissipative mechanical dynamics on the tangent bundle of the base space:
/// state `(q, qdot)` with `qddot = -kinetic^-1 (grad V(q) + damping * qdot)`.
///
/// The base metric is flat, so no velocity-quadratic terms appear. The
/// returned system lives on the base factors extended by line fibers, with
/// the kinetic metric on both blocks.
pub fn make_mechanical_system(
    base: &SpaceSpec,
    kinetic: &DMatrix<f64>,
    damping: &DMatrix<f64>,
    potential: ScalarField,
) -> Result<SystemDef> {
    let n = base.dim();
    if potential.space().dim() != n {
        return Err(CoreError::DimensionMismatch {
            expected: n,
            got: potential.space().dim(),
        });
    }
    if kinetic.nrows() != n || damping.nrows() != n {
        return Err(CoreError::DimensionMismatch {
            expected: n,
            got: kinetic.nrows().max(damping.nrows()),
        });
    }
    check_spd(kinetic, "kinetic metric")?;
    check_spd(damping, "damping form")?;
    let space = tangent_bundle_space(base, kinetic)?;
    let kin_inv = kinetic
        .clone()
        .try_inverse()
        .ok_or_else(|| CoreError::InvalidMetric("kinetic metric singular".into()))?;
    let damping = damping.clone();
    let field: FieldFn = Arc::new(move |state, out| {
        let n = state.len() / 2;
        let (q, qdot) = state.split_at(n);
        // Generalized force: grad V(q) + damping * qdot.
        let mut force = vec![0.0; n];
        potential.gradient_raw(q, &mut force);
        for i in 0..n {
            for j in 0..n {
                force[i] += damping[(i, j)] * qdot[j];
            }
        }
        for i in 0..n {
            out[i] = qdot[i];
            out[n + i] = -(0..n).map(|j| kin_inv[(i, j)] * force[j]).sum::<f64>();
        }
    });
    Ok(SystemDef::new(space, SystemKind::Mechanical, field))
}

fn tangent_bundle_space(base: &SpaceSpec, kinetic: &DMatrix<f64>) -> Result<SpaceSpec> {
    let n = base.dim();
    let mut factors = base.factors().to_vec();
    factors.extend(std::iter::repeat(Factor::Line).take(n));
    let mut metric = DMatrix::zeros(2 * n, 2 * n);
    metric.view_mut((0, 0), (n, n)).copy_from(kinetic);
    metric.view_mut((n, n), (n, n)).copy_from(kinetic);
    SpaceSpec::new(factors, metric)
}

/// Total energy on the tangent bundle: `W(q, qdot) = V(q) + 1/2 qdot' K qdot`.
pub fn total_energy(kinetic: &DMatrix<f64>, potential: &ScalarField) -> Result<ScalarField> {
    check_spd(kinetic, "kinetic metric")?;
    let n = potential.space().dim();
    if kinetic.nrows() != n {
        return Err(CoreError::DimensionMismatch {
            expected: n,
            got: kinetic.nrows(),
        });
    }
    let space = tangent_bundle_space(potential.space(), kinetic)?;
    let kin = kinetic.clone();
    let pot = potential.clone();
    let value: ValueFn = Arc::new(move |state| {
        let (q, qdot) = state.split_at(state.len() / 2);
        let mut kinetic_energy = 0.0;
        for i in 0..q.len() {
            for j in 0..q.len() {
                kinetic_energy += 0.5 * qdot[i] * kin[(i, j)] * qdot[j];
            }
        }
        pot.value_raw(q) + kinetic_energy
    });
    let mut energy = ScalarField::new(space, value);
    if potential.has_analytic_gradient() {
        let kin = kinetic.clone();
        let pot = potential.clone();
        energy = energy.with_gradient(Arc::new(move |state, out| {
            let (q, qdot) = state.split_at(state.len() / 2);
            pot.gradient_raw(q, &mut out[..q.len()]);
            for i in 0..q.len() {
                out[q.len() + i] = (0..q.len()).map(|j| kin[(i, j)] * qdot[j]).sum();
            }
        }));
    }
    Ok(energy)
}
