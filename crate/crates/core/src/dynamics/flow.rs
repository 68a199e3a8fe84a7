//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 4(5) pair).
//!
//! Step size is governed by a PI controller on the embedded error estimate
//! with absolute and relative tolerance both set to the single `tol`
//! parameter. Circle coordinates are wrapped only after accepted steps,
//! never between stages. Dense output uses the standard fourth-order
//! interpolant of the pair.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::geometry::{wrap_in_place, Factor, PointCoords};

use super::SystemDef;

// Dormand-Prince 5(4) tableau. The last stage row doubles as the
// fifth-order solution weights (first-same-as-last pair).
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// Difference between the fifth-order and embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output coefficients of the fourth-order interpolant.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const MIN_STEP: f64 = 1e-12;
const MAX_LINE_COORD: f64 = 1e6;

/// Counters reported alongside a trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    /// Largest accepted local error estimate on the tolerance scale.
    pub max_error_estimate: f64,
}

/// Time-stamped chart points from one integration run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<PointCoords>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_point(&self) -> Option<&PointCoords> {
        self.points.last()
    }
}

enum Emit<'a> {
    AcceptedSteps,
    Samples(&'a [f64]),
    EndpointOnly,
}

struct Stepper<'a> {
    sys: &'a SystemDef,
    tol: f64,
    n: usize,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(sys: &'a SystemDef, tol: f64) -> Self {
        let n = sys.space().dim();
        Self {
            sys,
            tol,
            n,
            k: std::array::from_fn(|_| vec![0.0; n]),
            y_stage: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }

    /// One trial step from `y` with size `h`. `k[0]` must hold the field at
    /// `y` on entry. Fills `y_new` and `k[6]` (the field at `y_new`) and
    /// returns the scaled error norm.
    fn trial_step(&mut self, y: &[f64], h: f64) -> f64 {
        let rows: [&[f64]; 6] = [&A2, &A3, &A4, &A5, &A6, &A7];
        for (s, row) in rows.iter().enumerate() {
            for i in 0..self.n {
                let mut acc = 0.0;
                for (j, a) in row.iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.y_stage[i] = y[i] + h * acc;
            }
            self.sys.eval_raw(&self.y_stage, &mut self.k[s + 1]);
        }
        // The final stage input is the fifth-order solution, and the final
        // stage value is the field there (reused as k[0] on acceptance).
        self.y_new.copy_from_slice(&self.y_stage);

        let mut err_acc = 0.0;
        for i in 0..self.n {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * self.k[j][i];
            }
            e *= h;
            let scale = self.tol + self.tol * y[i].abs().max(self.y_new[i].abs());
            err_acc += (e / scale) * (e / scale);
        }
        (err_acc / self.n as f64).sqrt()
    }

    /// Dense-output evaluation at fraction `theta` of the last accepted step.
    fn dense_eval(&self, y: &[f64], h: f64, theta: f64, out: &mut [f64]) {
        for i in 0..self.n {
            let ydiff = self.y_new[i] - y[i];
            let bspl = h * self.k[0][i] - ydiff;
            let r4 = ydiff - h * self.k[6][i] - bspl;
            let mut r5 = 0.0;
            for j in 0..7 {
                r5 += D[j] * self.k[j][i];
            }
            r5 *= h;
            out[i] =
                y[i] + theta * (ydiff + (1.0 - theta) * (bspl + theta * (r4 + (1.0 - theta) * r5)));
        }
    }
}

fn check_divergence(sys: &SystemDef, y: &[f64], t: f64) -> Result<()> {
    for (c, f) in y.iter().zip(sys.space().factors()) {
        if *f == Factor::Line && c.abs() > MAX_LINE_COORD {
            return Err(CoreError::Divergence {
                t,
                reason: format!("line coordinate reached {c:.3e}"),
            });
        }
    }
    Ok(())
}

fn integrate(
    sys: &SystemDef,
    p0: &PointCoords,
    t_end: f64,
    tol: f64,
    emit: Emit<'_>,
) -> Result<Trajectory> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(CoreError::InvalidInput(format!(
            "t_end must be positive and finite, got {t_end}"
        )));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(CoreError::InvalidInput(format!(
            "tol must be positive and finite, got {tol}"
        )));
    }
    if let Emit::Samples(ts) = &emit {
        if ts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::InvalidInput(
                "sample times must be strictly increasing".into(),
            ));
        }
        if ts.iter().any(|&t| t < 0.0 || t > t_end) {
            return Err(CoreError::InvalidInput(
                "sample times must lie in [0, t_end]".into(),
            ));
        }
    }
    let n = sys.space().dim();
    if p0.len() != n {
        return Err(CoreError::DimensionMismatch {
            expected: n,
            got: p0.len(),
        });
    }

    let mut y = p0.0.clone();
    wrap_in_place(sys.space(), &mut y);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite {
            context: "initial state".into(),
            coords: y,
        });
    }

    let mut stepper = Stepper::new(sys, tol);
    sys.eval_raw(&y, &mut stepper.k[0]);
    if stepper.k[0].iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite {
            context: "field at initial state".into(),
            coords: y,
        });
    }

    let mut times = Vec::new();
    let mut points = Vec::new();
    let mut sample_cursor = 0usize;
    match &emit {
        Emit::AcceptedSteps => {
            times.push(0.0);
            points.push(PointCoords(y.clone()));
        }
        Emit::Samples(ts) => {
            if sample_cursor < ts.len() && ts[sample_cursor] == 0.0 {
                times.push(0.0);
                points.push(PointCoords(y.clone()));
                sample_cursor += 1;
            }
        }
        Emit::EndpointOnly => {}
    }

    let mut t = 0.0;
    let mut h = (0.01 * t_end).min(0.1).max(MIN_STEP * 10.0);
    let mut err_old: f64 = 1e-4;
    let mut stats = IntegratorStats::default();

    let mut nonfinite_rejects = false;
    while t < t_end {
        check_divergence(sys, &y, t)?;
        if h < MIN_STEP {
            // Distinguish a field that stopped evaluating from a blowup.
            if nonfinite_rejects {
                return Err(CoreError::NonFinite {
                    context: "field during integration".into(),
                    coords: y,
                });
            }
            return Err(CoreError::Divergence {
                t,
                reason: format!("step size underflow (h = {h:.3e})"),
            });
        }
        let reaches_end = h >= t_end - t;
        let step = if reaches_end { t_end - t } else { h };
        let err = stepper.trial_step(&y, step);

        if err <= 1.0 {
            stats.steps += 1;
            stats.max_error_estimate = stats.max_error_estimate.max(err * tol);
            let t_next = if reaches_end { t_end } else { t + step };

            if let Emit::Samples(ts) = &emit {
                let mut sample = vec![0.0; n];
                while sample_cursor < ts.len() && ts[sample_cursor] <= t_next {
                    let theta = ((ts[sample_cursor] - t) / step).clamp(0.0, 1.0);
                    stepper.dense_eval(&y, step, theta, &mut sample);
                    let mut coords = sample.clone();
                    wrap_in_place(sys.space(), &mut coords);
                    times.push(ts[sample_cursor]);
                    points.push(PointCoords(coords));
                    sample_cursor += 1;
                }
            }

            let before_wrap = stepper.y_new.clone();
            y.copy_from_slice(&stepper.y_new);
            wrap_in_place(sys.space(), &mut y);
            if y != before_wrap {
                // Wrapping moved the chart point; refresh the FSAL stage.
                sys.eval_raw(&y, &mut stepper.k[0]);
            } else {
                stepper.k.swap(0, 6);
            }
            t = t_next;

            if let Emit::AcceptedSteps = &emit {
                times.push(t);
                points.push(PointCoords(y.clone()));
            }

            let err_bounded = err.max(1e-10);
            let fac = err_bounded.powf(EXPO) / err_old.powf(BETA);
            let fac = (fac / SAFETY).clamp(0.1, 5.0);
            h = step / fac;
            err_old = err_bounded;
        } else {
            stats.rejected += 1;
            if err.is_finite() {
                nonfinite_rejects = false;
                h = step / (err.powf(EXPO) / SAFETY).min(5.0);
            } else {
                nonfinite_rejects = true;
                h = step * 0.1;
            }
        }
    }

    if let Emit::EndpointOnly = &emit {
        times.push(t_end);
        points.push(PointCoords(y.clone()));
    }

    Ok(Trajectory {
        times,
        points,
        stats,
    })
}

/// Integrates the system from `p0` to `t_end`, recording every accepted step.
pub fn flow(sys: &SystemDef, p0: &PointCoords, t_end: f64, tol: f64) -> Result<Trajectory> {
    integrate(sys, p0, t_end, tol, Emit::AcceptedSteps)
}

/// Integrates the system, producing dense output at the requested times
/// (strictly increasing, within `[0, t_end]`).
pub fn flow_sampled(
    sys: &SystemDef,
    p0: &PointCoords,
    sample_times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    let t_end = sample_times
        .last()
        .copied()
        .ok_or_else(|| CoreError::InvalidInput("no sample times given".into()))?;
    integrate(sys, p0, t_end, tol, Emit::Samples(sample_times))
}

/// Integrates the system and returns only the final point.
pub fn flow_endpoint(
    sys: &SystemDef,
    p0: &PointCoords,
    t_end: f64,
    tol: f64,
) -> Result<PointCoords> {
    let traj = integrate(sys, p0, t_end, tol, Emit::EndpointOnly)?;
    Ok(traj
        .points
        .into_iter()
        .next_back()
        .expect("endpoint emitted"))
}
