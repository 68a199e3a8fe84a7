use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_relative_eq;
use nalgebra::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::builtins;
use crate::dynamics::{flow_endpoint, SystemDef, SystemKind};
use crate::geometry::{Factor, SpaceSpec, TangentCoords};

fn pendulum() -> SystemDef {
    builtins::pendulum()
}

fn pendulum_region() -> RegionSpec {
    RegionSpec::new(vec![
        FactorBounds::FullCircle,
        FactorBounds::Interval { lo: -5.0, hi: 5.0 },
    ])
    .unwrap()
}

/// Roots of a real quadratic, as the independent eigenvalue oracle.
fn quadratic_roots(b: f64, c: f64) -> Vec<Complex<f64>> {
    let disc = b * b - 4.0 * c;
    let mut roots = if disc >= 0.0 {
        vec![
            Complex::new((-b - disc.sqrt()) / 2.0, 0.0),
            Complex::new((-b + disc.sqrt()) / 2.0, 0.0),
        ]
    } else {
        vec![
            Complex::new(-b / 2.0, -(-disc).sqrt() / 2.0),
            Complex::new(-b / 2.0, (-disc).sqrt() / 2.0),
        ]
    };
    roots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    roots
}

#[test]
fn pendulum_equilibria_are_the_two_rest_points() {
    let eqs = find_equilibria(&pendulum(), &pendulum_region(), 12, 1e-10).unwrap();
    assert_eq!(eqs.len(), 2, "{eqs:?}");
    // Lexicographic order puts the inverted rest point first.
    assert_relative_eq!(eqs[0].point.0[0], -PI, epsilon = 1e-9);
    assert!(eqs[0].point.0[1].abs() < 1e-9);
    assert!(eqs[1].point.0[0].abs() < 1e-9);
    assert!(eqs[1].point.0[1].abs() < 1e-9);
    assert_eq!(eqs[0].classification, Classification::Unstable(1));
    assert_eq!(eqs[1].classification, Classification::Stable);
    for eq in &eqs {
        assert!(eq.residual < 1e-10);
    }
}

#[test]
fn gradient_circle_equilibria_are_the_critical_points() {
    let b = match builtins::builtin("gradient-circle").unwrap() {
        builtins::Builtin::System(b) => b,
        _ => unreachable!(),
    };
    let eqs = find_equilibria(&b.system, &b.region, 8, 1e-10).unwrap();
    assert_eq!(eqs.len(), 2);
    assert_relative_eq!(eqs[0].point.0[0], -PI, epsilon = 1e-9);
    assert!(eqs[1].point.0[0].abs() < 1e-9);
    assert_eq!(eqs[0].classification, Classification::Unstable(1));
    assert_eq!(eqs[1].classification, Classification::Stable);
}

#[test]
fn linear_contraction_has_a_unique_root() {
    let sys = SystemDef::new(
        SpaceSpec::euclidean(vec![Factor::Line]),
        SystemKind::Generic,
        Arc::new(|s: &[f64], out: &mut [f64]| out[0] = -s[0]),
    );
    let region = RegionSpec::new(vec![FactorBounds::Interval { lo: -3.0, hi: 3.0 }]).unwrap();
    let eqs = find_equilibria(&sys, &region, 5, 1e-12).unwrap();
    assert_eq!(eqs.len(), 1);
    assert!(eqs[0].point.0[0].abs() < 1e-12);
    assert_eq!(eqs[0].classification, Classification::Stable);
    let jac = linearize(&sys, &eqs[0].point).unwrap();
    assert_relative_eq!(jac[(0, 0)], -1.0, epsilon = 1e-7);
}

#[test]
fn pendulum_linearizations() {
    let sys = pendulum();
    let jac = linearize(&sys, &PointCoords(vec![0.0, 0.0])).unwrap();
    let expected = [[0.0, 1.0], [-1.0, -1.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert_relative_eq!(jac[(i, j)], expected[i][j], epsilon = 1e-9);
        }
    }
    let jac = linearize(&sys, &PointCoords(vec![-PI, 0.0])).unwrap();
    let expected = [[0.0, 1.0], [1.0, -1.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert_relative_eq!(jac[(i, j)], expected[i][j], epsilon = 1e-9);
        }
    }
}

#[test]
fn linearize_requires_an_equilibrium() {
    let sys = pendulum();
    let err = linearize(&sys, &PointCoords(vec![1.0, 1.0])).unwrap_err();
    assert!(matches!(err, crate::CoreError::Precondition(_)));
}

#[test]
fn eigenvalues_match_the_polynomial_root_oracle() {
    let sys = pendulum();
    // Characteristic polynomial at the hanging rest point: l^2 + l + 1.
    let eigs = sorted_eigenvalues(&linearize(&sys, &PointCoords(vec![0.0, 0.0])).unwrap());
    let oracle = quadratic_roots(1.0, 1.0);
    for (e, o) in eigs.iter().zip(&oracle) {
        assert!((e - o).norm() < 1e-8, "{e} vs {o}");
    }
    assert_eq!(classify(&eigs, 1e-6), Classification::Stable);

    // At the inverted rest point: l^2 + l - 1.
    let eigs = sorted_eigenvalues(&linearize(&sys, &PointCoords(vec![-PI, 0.0])).unwrap());
    let oracle = quadratic_roots(1.0, -1.0);
    for (e, o) in eigs.iter().zip(&oracle) {
        assert!((e - o).norm() < 1e-8, "{e} vs {o}");
    }
    assert_eq!(classify(&eigs, 1e-6), Classification::Unstable(1));
    assert!((eigs[1].re - 0.6180339887498949).abs() < 1e-8);
}

#[test]
fn zero_real_part_is_non_hyperbolic() {
    let eigs = vec![Complex::new(0.0, 0.0)];
    assert_eq!(classify(&eigs, 1e-6), Classification::NonHyperbolic);
    let eigs = vec![Complex::new(0.0, 1.0), Complex::new(0.0, -1.0)];
    assert_eq!(classify(&eigs, 1e-6), Classification::NonHyperbolic);
}

#[test]
fn stable_equilibria_recapture_small_perturbations() {
    let sys = pendulum();
    let eqs = find_equilibria(&sys, &pendulum_region(), 12, 1e-10).unwrap();
    for eq in eqs
        .iter()
        .filter(|e| e.classification == Classification::Stable)
    {
        let perturbed = PointCoords(vec![eq.point.0[0] + 1e-3, eq.point.0[1]]);
        let end = flow_endpoint(&sys, &perturbed, 50.0, 1e-9).unwrap();
        let d = dist(sys.space(), &end, &eq.point).unwrap();
        assert!(d < 1e-4, "perturbation not recaptured: {d}");
    }
}

#[test]
fn root_set_is_stable_once_the_grid_resolves() {
    for name in ["pendulum", "gradient-circle"] {
        let b = match builtins::builtin(name).unwrap() {
            builtins::Builtin::System(b) => b,
            _ => unreachable!(),
        };
        let coarse = find_equilibria(&b.system, &b.region, 8, 1e-10).unwrap();
        let fine = find_equilibria(&b.system, &b.region, 16, 1e-10).unwrap();
        assert_eq!(coarse.len(), fine.len(), "{name}");
        for (c, f) in coarse.iter().zip(&fine) {
            assert!(dist(b.system.space(), &c.point, &f.point).unwrap() < 1e-8);
        }
    }
}

#[test]
fn every_record_reverifies_its_residual() {
    let sys = pendulum();
    let newton_tol = 1e-10;
    let eqs = find_equilibria(&sys, &pendulum_region(), 12, newton_tol).unwrap();
    for eq in &eqs {
        let v = crate::dynamics::eval_field(&sys, &eq.point).unwrap();
        assert!(v.norm() < newton_tol);
    }
}

#[test]
fn block_structure_at_both_slice_equilibria() {
    let b = match builtins::builtin("paper-example").unwrap() {
        builtins::Builtin::Cascade(b) => b,
        _ => unreachable!(),
    };
    // Hanging-hanging equilibrium: both diagonal blocks carry l^2 + l + 1.
    let report =
        cascade_block_structure(&b.cascade, &PointCoords(vec![0.0, 0.0, 0.0, 0.0])).unwrap();
    assert!(report.ok(), "{report:?}");
    assert!(report.lower_left_norm < 1e-8);
    assert!(report.max_pairing_error <= 1e-6);
    let oracle = quadratic_roots(1.0, 1.0);
    for e in &report.full_spectrum {
        assert!(
            oracle.iter().any(|o| (e - o).norm() < 1e-6),
            "unexpected eigenvalue {e}"
        );
    }

    // Inverted-hanging equilibrium: outer block carries l^2 + l - 1.
    let report =
        cascade_block_structure(&b.cascade, &PointCoords(vec![-PI, 0.0, 0.0, 0.0])).unwrap();
    assert!(report.ok(), "{report:?}");
    let mut oracle = quadratic_roots(1.0, -1.0);
    oracle.extend(quadratic_roots(1.0, 1.0));
    assert_eq!(report.full_spectrum.len(), 4);
    for e in &report.full_spectrum {
        assert!(
            oracle.iter().any(|o| (e - o).norm() < 1e-6),
            "unexpected eigenvalue {e}"
        );
    }
    let unstable = report.full_spectrum.iter().filter(|l| l.re > 1e-6).count();
    assert_eq!(unstable, 1);
}

#[test]
fn decoupled_cascade_has_exact_block_spectrum() {
    let cas = crate::dynamics::CascadeDef::new(
        SpaceSpec::euclidean(vec![Factor::Circle, Factor::Line]),
        Arc::new(|x: &[f64], _y: &[f64], out: &mut [f64]| {
            out[0] = x[1];
            out[1] = -(x[0].sin() + x[1]);
        }),
        pendulum(),
        PointCoords(vec![0.0, 0.0]),
    )
    .unwrap();
    let report = cascade_block_structure(&cas, &PointCoords(vec![0.0, 0.0, 0.0, 0.0])).unwrap();
    assert!(report.ok());
    assert!(report.max_pairing_error < 1e-9, "{report:?}");
}

#[test]
fn block_structure_requires_the_slice() {
    let b = match builtins::builtin("paper-example").unwrap() {
        builtins::Builtin::Cascade(b) => b,
        _ => unreachable!(),
    };
    let err =
        cascade_block_structure(&b.cascade, &PointCoords(vec![0.0, 0.0, 1.0, 0.0])).unwrap_err();
    assert!(matches!(err, crate::CoreError::Precondition(_)));
}

#[test]
fn region_validation() {
    assert!(RegionSpec::new(vec![FactorBounds::Interval { lo: 2.0, hi: 1.0 }]).is_err());
    let region = pendulum_region();
    assert!(region.validate(pendulum().space()).is_ok());
    let flipped = RegionSpec::new(vec![
        FactorBounds::Interval { lo: -1.0, hi: 1.0 },
        FactorBounds::FullCircle,
    ])
    .unwrap();
    assert!(flipped.validate(pendulum().space()).is_err());
}

#[test]
fn spectra_pairing_detects_mismatch() {
    let a = vec![Complex::new(1.0, 0.0), Complex::new(2.0, 0.0)];
    let b = vec![Complex::new(1.0, 0.0), Complex::new(2.5, 0.0)];
    let worst = pair_spectra(&a, &b);
    assert_relative_eq!(worst, 0.5);
    assert_eq!(pair_spectra(&a, &a[..1]), f64::INFINITY);
}

proptest! {
    /// Classification only looks at real parts, so any reordering of a
    /// conjugation-symmetric spectrum classifies identically.
    #[test]
    fn classify_is_permutation_invariant(
        res in proptest::collection::vec(-2.0f64..2.0, 1..5),
        ims in proptest::collection::vec(0.0f64..2.0, 1..5),
        seed in 0u64..1000,
    ) {
        let mut eigs: Vec<Complex<f64>> = Vec::new();
        for (r, i) in res.iter().zip(&ims) {
            if *i == 0.0 {
                eigs.push(Complex::new(*r, 0.0));
            } else {
                eigs.push(Complex::new(*r, *i));
                eigs.push(Complex::new(*r, -*i));
            }
        }
        let base = classify(&eigs, 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::seq::SliceRandom;
        let mut shuffled = eigs.clone();
        shuffled.shuffle(&mut rng);
        prop_assert_eq!(classify(&shuffled, 1e-6), base);
    }
}

#[test]
fn tangent_norm_helper() {
    assert_relative_eq!(TangentCoords(vec![3.0, 4.0]).norm(), 5.0);
}
