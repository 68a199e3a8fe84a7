//! Equilibrium location, linearization, and hyperbolicity classification.
//!
//! Equilibria are found by damped Newton iteration seeded on a uniform grid
//! over a compact search region, deduplicated by chart distance, and
//! classified by the eigenvalues of the field Jacobian. For cascades, the
//! spectrum of the full Jacobian at an equilibrium over the inner rest point
//! must split into the spectra of the outer and inner diagonal blocks; the
//! lower-left block is structurally zero because the inner loop does not
//! depend on the outer state.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{eval_field, fd_step, CascadeDef, SystemDef};
use crate::error::{CoreError, Result};
use crate::geometry::{canonicalize, dist, Factor, PointCoords, SpaceSpec};

/// Default band around the imaginary axis inside which an eigenvalue is
/// treated as non-hyperbolic.
pub const DEFAULT_HYPERBOLICITY_TOL: f64 = 1e-6;
/// Chart distance below which two Newton roots are considered the same.
pub const DEDUP_RADIUS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Stable,
    Unstable(usize),
    NonHyperbolic,
}

#[derive(Debug, Clone)]
pub struct EquilibriumRecord {
    pub point: PointCoords,
    pub eigenvalues: Vec<Complex<f64>>,
    pub classification: Classification,
    /// Field norm at the located point.
    pub residual: f64,
}

/// Per-factor bounds of a compact search window: the full circle on circle
/// factors, an interval on line factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorBounds {
    FullCircle,
    Interval { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub bounds: Vec<FactorBounds>,
}

impl RegionSpec {
    pub fn new(bounds: Vec<FactorBounds>) -> Result<Self> {
        for b in &bounds {
            if let FactorBounds::Interval { lo, hi } = b {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(CoreError::InvalidInput(format!(
                        "interval bounds must satisfy lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(Self { bounds })
    }

    /// Region covering the full circle on circle factors and `[-r, r]` on
    /// line factors.
    pub fn symmetric(space: &SpaceSpec, r: f64) -> Result<Self> {
        Self::new(
            space
                .factors()
                .iter()
                .map(|f| match f {
                    Factor::Circle => FactorBounds::FullCircle,
                    Factor::Line => FactorBounds::Interval { lo: -r, hi: r },
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Checks factor kinds: circle factors must carry full-circle bounds,
    /// line factors an interval.
    pub fn validate(&self, space: &SpaceSpec) -> Result<()> {
        if self.dim() != space.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: space.dim(),
                got: self.dim(),
            });
        }
        for (b, f) in self.bounds.iter().zip(space.factors()) {
            match (b, f) {
                (FactorBounds::FullCircle, Factor::Circle) => {}
                (FactorBounds::Interval { .. }, Factor::Line) => {}
                _ => {
                    return Err(CoreError::InvalidInput(
                        "region bounds do not match factor kinds".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Per-axis lower edge and width of the covered chart box.
    pub fn axis_extent(&self, axis: usize) -> (f64, f64) {
        match self.bounds[axis] {
            FactorBounds::FullCircle => (-std::f64::consts::PI, std::f64::consts::TAU),
            FactorBounds::Interval { lo, hi } => (lo, hi - lo),
        }
    }

    pub fn contains(&self, p: &PointCoords) -> bool {
        p.0.iter().zip(&self.bounds).all(|(c, b)| match b {
            FactorBounds::FullCircle => true,
            FactorBounds::Interval { lo, hi } => *c >= *lo && *c <= *hi,
        })
    }

    /// Uniform sample in the region.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> PointCoords {
        PointCoords(
            (0..self.dim())
                .map(|i| {
                    let (lo, width) = self.axis_extent(i);
                    lo + width * rng.random::<f64>()
                })
                .collect(),
        )
    }

    /// Region with every line interval stretched by `factor` about its
    /// midpoint (sampler escalation for proper functions).
    pub fn widen_lines(&self, factor: f64) -> RegionSpec {
        RegionSpec {
            bounds: self
                .bounds
                .iter()
                .map(|b| match b {
                    FactorBounds::FullCircle => FactorBounds::FullCircle,
                    FactorBounds::Interval { lo, hi } => {
                        let mid = 0.5 * (lo + hi);
                        let half = 0.5 * (hi - lo) * factor;
                        FactorBounds::Interval {
                            lo: mid - half,
                            hi: mid + half,
                        }
                    }
                })
                .collect(),
        }
    }
}

/// Jacobian of the field at a point: analytic rule if the system has one,
/// else central finite differences.
pub fn field_jacobian(sys: &SystemDef, p: &PointCoords) -> Result<DMatrix<f64>> {
    let n = sys.space().dim();
    if p.len() != n {
        return Err(CoreError::DimensionMismatch {
            expected: n,
            got: p.len(),
        });
    }
    let jac = match sys.analytic_jacobian() {
        Some(rule) => rule(p.as_slice()),
        None => {
            let mut jac = DMatrix::zeros(n, n);
            let mut probe = p.0.clone();
            let mut hi = vec![0.0; n];
            let mut lo = vec![0.0; n];
            for j in 0..n {
                let h = fd_step(p.0[j]);
                probe[j] = p.0[j] + h;
                sys.eval_raw(&probe, &mut hi);
                probe[j] = p.0[j] - h;
                sys.eval_raw(&probe, &mut lo);
                probe[j] = p.0[j];
                for i in 0..n {
                    jac[(i, j)] = (hi[i] - lo[i]) / (2.0 * h);
                }
            }
            jac
        }
    };
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite {
            context: "jacobian".into(),
            coords: p.0.clone(),
        });
    }
    Ok(jac)
}

/// Jacobian at a located equilibrium (residual below 1e-8 required).
pub fn linearize(sys: &SystemDef, p: &PointCoords) -> Result<DMatrix<f64>> {
    let residual = eval_field(sys, p)?.norm();
    if residual >= 1e-8 {
        return Err(CoreError::Precondition(format!(
            "linearize expects an equilibrium, residual = {residual:.3e}"
        )));
    }
    field_jacobian(sys, p)
}

/// Eigenvalues sorted by real part, then imaginary part.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut eigs: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });
    eigs
}

/// Classifies a spectrum: non-hyperbolic if any real part lies within
/// `hyp_tol` of zero, stable if all real parts are below `-hyp_tol`, else
/// unstable with the count of strictly positive real parts.
pub fn classify(eigs: &[Complex<f64>], hyp_tol: f64) -> Classification {
    if eigs.iter().any(|l| l.re.abs() < hyp_tol) {
        return Classification::NonHyperbolic;
    }
    let unstable = eigs.iter().filter(|l| l.re > hyp_tol).count();
    if unstable == 0 {
        Classification::Stable
    } else {
        Classification::Unstable(unstable)
    }
}

fn field_norm(sys: &SystemDef, x: &[f64]) -> f64 {
    let mut out = vec![0.0; x.len()];
    sys.eval_raw(x, &mut out);
    out.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Damped Newton iteration from one seed. Returns the converged canonical
/// point, or `None` when the Jacobian goes singular or progress stalls.
fn newton_from_seed(
    sys: &SystemDef,
    seed: &PointCoords,
    newton_tol: f64,
    max_iter: usize,
) -> Option<PointCoords> {
    let space = sys.space();
    let n = space.dim();
    let mut x = canonicalize(space, seed).ok()?.0;
    let mut fx = vec![0.0; n];
    for _ in 0..max_iter {
        sys.eval_raw(&x, &mut fx);
        if fx.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let res = fx.iter().map(|v| v * v).sum::<f64>().sqrt();
        if res < newton_tol {
            return Some(PointCoords(x));
        }
        let jac = field_jacobian(sys, &PointCoords(x.clone())).ok()?;
        let rhs = DVector::from_column_slice(&fx);
        let delta = match jac.lu().solve(&rhs) {
            Some(d) => d,
            None => {
                log::debug!("newton seed discarded: singular jacobian at {x:?}");
                return None;
            }
        };
        // Backtracking damping: halve the step while the residual grows.
        let mut lambda = 1.0;
        let mut advanced = false;
        while lambda > 1e-6 {
            let candidate: Vec<f64> = x
                .iter()
                .zip(delta.iter())
                .map(|(xi, di)| xi - lambda * di)
                .collect();
            let res_candidate = field_norm(sys, &candidate);
            if res_candidate.is_finite() && res_candidate < res {
                x = candidate;
                crate::geometry::wrap_in_place(space, &mut x);
                advanced = true;
                break;
            }
            lambda *= 0.5;
        }
        if !advanced {
            return None;
        }
    }
    None
}

/// Newton search seeded on a uniform grid over the region. Converged roots
/// are kept when they fall inside the region, deduplicated by chart distance,
/// and returned sorted lexicographically by coordinates.
pub fn find_equilibria(
    sys: &SystemDef,
    region: &RegionSpec,
    grid_per_dim: usize,
    newton_tol: f64,
) -> Result<Vec<EquilibriumRecord>> {
    if grid_per_dim < 2 {
        return Err(CoreError::InvalidInput(
            "grid_per_dim must be at least 2".into(),
        ));
    }
    let space = sys.space();
    region.validate(space)?;
    let n = space.dim();
    let total = (grid_per_dim as u64).checked_pow(n as u32);
    match total {
        Some(t) if t <= 1_000_000 => {}
        _ => {
            return Err(CoreError::ResourceLimit(format!(
                "{grid_per_dim}^{n} Newton seeds"
            )))
        }
    }

    let mut roots: Vec<PointCoords> = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let seed = PointCoords(
            (0..n)
                .map(|d| {
                    let (lo, width) = region.axis_extent(d);
                    match region.bounds[d] {
                        // The circle endpoint duplicates the start; stop short.
                        FactorBounds::FullCircle => {
                            lo + width * idx[d] as f64 / grid_per_dim as f64
                        }
                        FactorBounds::Interval { .. } => {
                            lo + width * idx[d] as f64 / (grid_per_dim - 1) as f64
                        }
                    }
                })
                .collect(),
        );
        if let Some(root) = newton_from_seed(sys, &seed, newton_tol, 50) {
            if region.contains(&root) {
                roots.push(root);
            }
        }

        let mut carry = 0;
        while carry < n {
            idx[carry] += 1;
            if idx[carry] < grid_per_dim {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
        if carry == n {
            break;
        }
    }

    roots.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite root coordinates")
    });
    let mut unique: Vec<PointCoords> = Vec::new();
    for r in roots {
        if unique
            .iter()
            .all(|u| dist(space, u, &r).map(|d| d >= DEDUP_RADIUS).unwrap_or(true))
        {
            unique.push(r);
        }
    }

    let mut records = Vec::new();
    for point in unique {
        let residual = eval_field(sys, &point)?.norm();
        let jac = field_jacobian(sys, &point)?;
        let eigenvalues = sorted_eigenvalues(&jac);
        let classification = classify(&eigenvalues, DEFAULT_HYPERBOLICITY_TOL);
        records.push(EquilibriumRecord {
            point,
            eigenvalues,
            classification,
            residual,
        });
    }
    records.sort_by(|a, b| {
        a.point
            .0
            .partial_cmp(&b.point.0)
            .expect("finite coordinates")
    });
    Ok(records)
}

/// Greedy nearest pairing between two spectra; returns the largest pairing
/// distance (infinity on cardinality mismatch).
pub fn pair_spectra(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, la) in a.iter().enumerate() {
        for (j, lb) in b.iter().enumerate() {
            pairs.push((i, j, (la - lb).norm()));
        }
    }
    pairs.sort_by(|x, y| x.2.partial_cmp(&y.2).expect("finite distances"));
    let mut taken_a = vec![false; a.len()];
    let mut worst = 0.0f64;
    let mut matched = 0;
    for (i, j, d) in pairs {
        if taken_a[i] || used[j] {
            continue;
        }
        taken_a[i] = true;
        used[j] = true;
        worst = worst.max(d);
        matched += 1;
        if matched == a.len() {
            break;
        }
    }
    worst
}

/// Structure report for the cascade Jacobian at an equilibrium over the
/// inner rest point.
#[derive(Debug, Clone)]
pub struct BlockStructureReport {
    /// Frobenius norm of the lower-left block (outer-state derivative of the
    /// inner field); structurally zero.
    pub lower_left_norm: f64,
    pub full_spectrum: Vec<Complex<f64>>,
    /// Union of the outer-block and inner-block spectra.
    pub block_spectrum: Vec<Complex<f64>>,
    pub max_pairing_error: f64,
    pub lower_left_ok: bool,
    pub pairing_ok: bool,
}

impl BlockStructureReport {
    pub fn ok(&self) -> bool {
        self.lower_left_ok && self.pairing_ok
    }
}

/// Verifies the block-triangular structure of the cascade Jacobian at an
/// equilibrium on the slice over the inner rest point: the lower-left block
/// vanishes and the full spectrum is the union of the diagonal block spectra.
pub fn cascade_block_structure(
    cas: &CascadeDef,
    eq_point: &PointCoords,
) -> Result<BlockStructureReport> {
    let nx = cas.outer_space().dim();
    let ny = cas.inner_space().dim();
    if eq_point.len() != nx + ny {
        return Err(CoreError::DimensionMismatch {
            expected: nx + ny,
            got: eq_point.len(),
        });
    }
    let y_part = PointCoords(eq_point.0[nx..].to_vec());
    let slice_gap = dist(cas.inner_space(), &y_part, cas.inner_equilibrium())?;
    if slice_gap > 1e-8 {
        return Err(CoreError::Precondition(format!(
            "equilibrium must lie over the inner rest point (offset {slice_gap:.3e})"
        )));
    }

    let full = cas.full_system();
    let full_jac = field_jacobian(&full, eq_point)?;
    let lower_left = full_jac.view((nx, 0), (ny, nx));
    let lower_left_norm = lower_left.iter().map(|v| v * v).sum::<f64>().sqrt();

    let x_part = PointCoords(eq_point.0[..nx].to_vec());
    let outer_jac = field_jacobian(&cas.unforced_outer(), &x_part)?;
    let inner_jac = field_jacobian(cas.inner(), cas.inner_equilibrium())?;

    let full_spectrum = sorted_eigenvalues(&full_jac);
    let mut block_spectrum = sorted_eigenvalues(&outer_jac);
    block_spectrum.extend(sorted_eigenvalues(&inner_jac));
    block_spectrum.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });

    let max_pairing_error = pair_spectra(&full_spectrum, &block_spectrum);
    Ok(BlockStructureReport {
        lower_left_norm,
        lower_left_ok: lower_left_norm < 1e-8,
        pairing_ok: max_pairing_error <= 1e-6,
        full_spectrum,
        block_spectrum,
        max_pairing_error,
    })
}

#[cfg(test)]
mod tests;
