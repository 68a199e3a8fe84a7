//! Chart-based geometry for products of circle and line factors.
//!
//! A space is an ordered list of factors, each either a circle (angular
//! chart coordinate, canonical interval `[-pi, pi)`) or a line (unbounded
//! coordinate), together with a constant symmetric positive-definite
//! metric matrix over the chart coordinates. All metrics are flat, so the
//! induced distance is the metric-weighted Euclidean length of per-factor
//! differences, with circle differences taken along the shorter arc.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One factor of a product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Circle,
    Line,
}

/// A product of circle and line factors with a constant flat metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSpec {
    factors: Vec<Factor>,
    metric: DMatrix<f64>,
    // Square roots of the diagonal of the inverse metric; per-axis bound on
    // the chart displacement reachable within a given metric distance.
    inv_diag_sqrt: Vec<f64>,
}

impl SpaceSpec {
    /// Builds a space, validating that the metric is symmetric positive
    /// definite and matches the number of factors.
    pub fn new(factors: Vec<Factor>, metric: DMatrix<f64>) -> Result<Self> {
        let n = factors.len();
        if metric.nrows() != n || metric.ncols() != n {
            return Err(CoreError::DimensionMismatch {
                expected: n,
                got: metric.nrows().max(metric.ncols()),
            });
        }
        for i in 0..n {
            for j in 0..n {
                if !metric[(i, j)].is_finite() {
                    return Err(CoreError::InvalidMetric("non-finite entry".into()));
                }
                if (metric[(i, j)] - metric[(j, i)]).abs() > 1e-12 {
                    return Err(CoreError::InvalidMetric(format!(
                        "not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let eigs = metric.clone().symmetric_eigen().eigenvalues;
        if eigs.iter().any(|&l| l <= 0.0) {
            return Err(CoreError::InvalidMetric(format!(
                "not positive definite (eigenvalues {:?})",
                eigs.as_slice()
            )));
        }
        let inv = metric
            .clone()
            .try_inverse()
            .ok_or_else(|| CoreError::InvalidMetric("singular".into()))?;
        let inv_diag_sqrt = (0..n).map(|i| inv[(i, i)].sqrt()).collect();
        Ok(Self {
            factors,
            metric,
            inv_diag_sqrt,
        })
    }

    /// A space with the identity metric.
    pub fn euclidean(factors: Vec<Factor>) -> Self {
        let n = factors.len();
        Self::new(factors, DMatrix::identity(n, n)).expect("identity metric is valid")
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    /// Per-axis chart radius reachable within metric distance `eps`.
    pub(crate) fn axis_radius(&self, axis: usize, eps: f64) -> f64 {
        eps * self.inv_diag_sqrt[axis]
    }

    /// Product of two spaces: concatenated factors, block-diagonal metric.
    pub fn product(&self, other: &SpaceSpec) -> SpaceSpec {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        let n = self.dim();
        let m = other.dim();
        let mut metric = DMatrix::zeros(n + m, n + m);
        metric.view_mut((0, 0), (n, n)).copy_from(&self.metric);
        metric.view_mut((n, n), (m, m)).copy_from(&other.metric);
        SpaceSpec::new(factors, metric).expect("block-diagonal of SPD blocks is SPD")
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }
}

/// A point in chart coordinates (radians on circle factors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCoords(pub Vec<f64>);

/// A tangent vector in chart coordinates (chart units per time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentCoords(pub Vec<f64>);

impl PointCoords {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TangentCoords {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for PointCoords {
    fn from(v: Vec<f64>) -> Self {
        PointCoords(v)
    }
}

impl From<Vec<f64>> for TangentCoords {
    fn from(v: Vec<f64>) -> Self {
        TangentCoords(v)
    }
}

/// Wraps an angle into the canonical interval `[-pi, pi)`.
///
/// Values already in the interval pass through bit-exactly, so wrapping is
/// idempotent. Ties at exactly `pi` map to `-pi` so the interval stays
/// half-open.
pub fn wrap_angle(x: f64) -> f64 {
    if (-PI..PI).contains(&x) {
        return x;
    }
    let w = (x + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Signed difference `a - b` along the shorter arc, in `[-pi, pi)`.
pub fn circle_difference(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

pub(crate) fn wrap_in_place(space: &SpaceSpec, coords: &mut [f64]) {
    for (c, f) in coords.iter_mut().zip(space.factors()) {
        if *f == Factor::Circle {
            *c = wrap_angle(*c);
        }
    }
}

/// Canonicalizes a point: circle coordinates wrapped into `[-pi, pi)`,
/// line coordinates unchanged.
pub fn canonicalize(space: &SpaceSpec, p: &PointCoords) -> Result<PointCoords> {
    space.check_dim(p.len())?;
    let mut coords = p.0.clone();
    wrap_in_place(space, &mut coords);
    Ok(PointCoords(coords))
}

/// Per-factor chart difference `p - q`, circle factors along the shorter arc.
pub fn chart_difference(space: &SpaceSpec, p: &PointCoords, q: &PointCoords) -> Result<Vec<f64>> {
    space.check_dim(p.len())?;
    space.check_dim(q.len())?;
    Ok(space
        .factors()
        .iter()
        .zip(p.0.iter().zip(q.0.iter()))
        .map(|(f, (a, b))| match f {
            Factor::Circle => circle_difference(*a, *b),
            Factor::Line => a - b,
        })
        .collect())
}

pub(crate) fn metric_norm(space: &SpaceSpec, diff: &[f64]) -> f64 {
    let m = space.metric();
    let mut acc = 0.0;
    for i in 0..diff.len() {
        for j in 0..diff.len() {
            acc += diff[i] * m[(i, j)] * diff[j];
        }
    }
    // Symmetric PD metric; tiny negative accumulations are roundoff.
    acc.max(0.0).sqrt()
}

/// Geodesic distance of the flat product metric.
pub fn dist(space: &SpaceSpec, p: &PointCoords, q: &PointCoords) -> Result<f64> {
    let diff = chart_difference(space, p, q)?;
    Ok(metric_norm(space, &diff))
}

/// Euler displacement `p + dt * v`, canonicalized.
pub fn step_point(
    space: &SpaceSpec,
    p: &PointCoords,
    v: &TangentCoords,
    dt: f64,
) -> Result<PointCoords> {
    space.check_dim(p.len())?;
    space.check_dim(v.len())?;
    if !dt.is_finite() {
        return Err(CoreError::NonFinite {
            context: "step_point dt".into(),
            coords: vec![dt],
        });
    }
    let coords: Vec<f64> = p.0.iter().zip(v.0.iter()).map(|(a, b)| a + dt * b).collect();
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(CoreError::NonFinite {
            context: "step_point result".into(),
            coords,
        });
    }
    canonicalize(space, &PointCoords(coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn circle() -> SpaceSpec {
        SpaceSpec::euclidean(vec![Factor::Circle])
    }

    fn cylinder() -> SpaceSpec {
        SpaceSpec::euclidean(vec![Factor::Circle, Factor::Line])
    }

    #[test]
    fn canonicalize_wraps_circle_coordinates() {
        let s = circle();
        let p = canonicalize(&s, &PointCoords(vec![1.5 * PI])).unwrap();
        assert_relative_eq!(p.0[0], -PI / 2.0, max_relative = 1e-15);

        let p = canonicalize(&s, &PointCoords(vec![0.0])).unwrap();
        assert_eq!(p.0[0], 0.0);

        let s2 = cylinder();
        let p = canonicalize(&s2, &PointCoords(vec![TAU + 0.1, 5.0])).unwrap();
        assert_relative_eq!(p.0[0], 0.1, epsilon = 1e-12);
        assert_eq!(p.0[1], 5.0);
    }

    #[test]
    fn canonicalize_maps_pi_tie_to_negative_pi() {
        let s = circle();
        let p = canonicalize(&s, &PointCoords(vec![PI])).unwrap();
        assert_eq!(p.0[0], -PI);
    }

    #[test]
    fn canonicalize_dimension_mismatch_is_an_error() {
        let s = circle();
        assert!(canonicalize(&s, &PointCoords(vec![0.0, 1.0])).is_err());
    }

    #[test]
    fn dist_antipodal_on_circle() {
        let s = circle();
        let d = dist(&s, &PointCoords(vec![0.0]), &PointCoords(vec![PI])).unwrap();
        assert_relative_eq!(d, PI, epsilon = 1e-15);
    }

    #[test]
    fn dist_is_zero_at_identical_points() {
        let s = cylinder();
        let p = PointCoords(vec![1.2, -3.4]);
        assert_eq!(dist(&s, &p, &p).unwrap(), 0.0);
    }

    #[test]
    fn dist_on_cylinder_matches_flat_product_formula() {
        let s = cylinder();
        let d = dist(
            &s,
            &PointCoords(vec![0.0, 0.0]),
            &PointCoords(vec![PI / 2.0, 1.0]),
        )
        .unwrap();
        let expected = (PI * PI / 4.0 + 1.0).sqrt();
        assert_relative_eq!(d, expected, epsilon = 1e-14);
    }

    #[test]
    fn step_point_wraps_across_boundary() {
        let s = circle();
        let p = step_point(
            &s,
            &PointCoords(vec![0.0]),
            &TangentCoords(vec![PI]),
            1.0,
        )
        .unwrap();
        assert_eq!(p.0[0], -PI);

        let p0 = PointCoords(vec![PI - 0.1]);
        let p = step_point(&s, &p0, &TangentCoords(vec![1.0]), 0.2).unwrap();
        assert_relative_eq!(p.0[0], -PI + 0.1, epsilon = 1e-12);
    }

    #[test]
    fn step_point_with_zero_dt_is_identity() {
        let s = cylinder();
        let p0 = PointCoords(vec![0.3, -2.0]);
        let p = step_point(&s, &p0, &TangentCoords(vec![5.0, 5.0]), 0.0).unwrap();
        assert_eq!(p, p0);
    }

    #[test]
    fn step_point_rejects_non_finite() {
        let s = circle();
        let p0 = PointCoords(vec![0.0]);
        assert!(step_point(&s, &p0, &TangentCoords(vec![f64::NAN]), 1.0).is_err());
        assert!(step_point(&s, &p0, &TangentCoords(vec![1.0]), f64::INFINITY).is_err());
    }

    #[test]
    fn metric_must_be_symmetric_positive_definite() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(SpaceSpec::new(vec![Factor::Circle, Factor::Line], asym).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(SpaceSpec::new(vec![Factor::Circle, Factor::Line], indef).is_err());
        let wrong_dim = DMatrix::identity(3, 3);
        assert!(SpaceSpec::new(vec![Factor::Circle, Factor::Line], wrong_dim).is_err());
    }

    /// Random spaces used for the bulk metric properties: mixed factors with
    /// random diagonal metrics, and all-line spaces with random SPD metrics.
    fn random_space(rng: &mut ChaCha8Rng) -> SpaceSpec {
        let n = rng.random_range(1..=4usize);
        if rng.random_range(0..3) < 2 {
            let factors: Vec<Factor> = (0..n)
                .map(|_| {
                    if rng.random_range(0..2) == 0 {
                        Factor::Circle
                    } else {
                        Factor::Line
                    }
                })
                .collect();
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = rng.random_range(0.2..4.0);
            }
            SpaceSpec::new(factors, m).unwrap()
        } else {
            // Random SPD metric via A^T A + I on an all-line space.
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let m = a.transpose() * a + DMatrix::identity(n, n) * 0.1;
            SpaceSpec::new(vec![Factor::Line; n], m).unwrap()
        }
    }

    fn random_point(rng: &mut ChaCha8Rng, s: &SpaceSpec) -> PointCoords {
        let coords = s
            .factors()
            .iter()
            .map(|f| match f {
                Factor::Circle => rng.random_range(-PI..PI),
                Factor::Line => rng.random_range(-10.0..10.0),
            })
            .collect();
        PointCoords(coords)
    }

    #[test]
    fn dist_symmetry_and_triangle_inequality_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let s = random_space(&mut rng);
            let p = random_point(&mut rng, &s);
            let q = random_point(&mut rng, &s);
            let r = random_point(&mut rng, &s);
            let dpq = dist(&s, &p, &q).unwrap();
            let dqp = dist(&s, &q, &p).unwrap();
            assert!((dpq - dqp).abs() <= 1e-12, "symmetry violated: {dpq} vs {dqp}");
            let dpr = dist(&s, &p, &r).unwrap();
            let drq = dist(&s, &r, &q).unwrap();
            assert!(
                dpq <= dpr + drq + 1e-12,
                "triangle inequality violated: {dpq} > {dpr} + {drq}"
            );
        }
    }

    #[test]
    fn dist_invariant_under_full_turns() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let s = random_space(&mut rng);
            let p = random_point(&mut rng, &s);
            let q = random_point(&mut rng, &s);
            let d0 = dist(&s, &p, &q).unwrap();
            let mut shifted = p.clone();
            for (i, f) in s.factors().iter().enumerate() {
                if *f == Factor::Circle && rng.random_range(0..2) == 0 {
                    let turns = rng.random_range(-3i32..=3) as f64;
                    shifted.0[i] += TAU * turns;
                }
            }
            let d1 = dist(&s, &shifted, &q).unwrap();
            assert!((d0 - d1).abs() <= 1e-9, "wrap invariance violated: {d0} vs {d1}");
        }
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(x in -100.0f64..100.0, y in -100.0f64..100.0) {
            let s = cylinder();
            let once = canonicalize(&s, &PointCoords(vec![x, y])).unwrap();
            let twice = canonicalize(&s, &once).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn wrap_angle_lands_in_canonical_interval(x in -1000.0f64..1000.0) {
            let w = wrap_angle(x);
            prop_assert!((-PI..PI).contains(&w));
        }
    }
}
