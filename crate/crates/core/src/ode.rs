//! Adaptive Dormand–Prince 5(4) integrator.
//!
//! The solver works on flat `f64` state slices. Systems can optionally project
//! the state back onto an invariant manifold after every accepted step (used to
//! keep Bloch vectors and state vectors normalized) and can react to accepted
//! steps, which is how piecewise re-optimized protocols are driven.
//!
//! Output is either every accepted step or a caller-supplied list of times that
//! the stepper lands on exactly. A scalar event function can stop the run at the
//! first upward zero crossing; the crossing is located by re-stepping from the
//! start of the bracketing step, so it carries full fifth-order accuracy.

use std::fmt;

pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Pull `y` back onto the invariant manifold. Returns the magnitude of the
    /// correction that was applied (zero if nothing was done).
    fn project(&self, _y: &mut [f64]) -> f64 {
        0.0
    }

    /// Called after every accepted step. Returning `true` signals that the
    /// right-hand side changed and the cached derivative must be recomputed.
    fn on_accept(&mut self, _t: f64, _y: &[f64]) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sampling {
    EveryStep,
    /// Sorted output times inside `[t0, t_end]`.
    At(Vec<f64>),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest normalized local error estimate among accepted steps (<= 1).
    pub max_error: f64,
    /// Largest correction applied by `OdeSystem::project`.
    pub max_projection: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventHit {
    pub t: f64,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: StepStats,
    pub event: Option<EventHit>,
}

impl Solution {
    pub fn last(&self) -> Option<(f64, &[f64])> {
        self.times
            .last()
            .zip(self.states.last())
            .map(|(&t, y)| (t, y.as_slice()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FailureReason {
    StepSizeUnderflow { h: f64 },
    MaxSteps(usize),
    NonFinite,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::StepSizeUnderflow { h } => write!(f, "step size underflow (h = {h:e})"),
            FailureReason::MaxSteps(n) => write!(f, "exceeded {n} steps"),
            FailureReason::NonFinite => write!(f, "non-finite state"),
        }
    }
}

/// A failed run, carrying everything recorded before the failure.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeFailure {
    pub t: f64,
    pub reason: FailureReason,
    pub partial: Solution,
}

impl From<OdeFailure> for crate::Error {
    fn from(f: OdeFailure) -> Self {
        crate::Error::Integration {
            t: f.t,
            reason: f.reason.to_string(),
            partial: Box::new(f),
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            err: vec![0.0; n],
        }
    }
}

/// One Dormand–Prince step from `(t, y)` with derivative `f`. Leaves the
/// fifth-order solution in `ws.y_new`, the derivative there in `ws.k[6]` and
/// the embedded error vector in `ws.err`.
fn dp_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    f: &[f64],
    h: f64,
    ws: &mut Workspace,
) {
    let n = y.len();
    ws.k[0].copy_from_slice(f);
    macro_rules! stage {
        ($idx:expr, $c:expr, $( ($j:expr, $a:expr) ),+ ) => {{
            for i in 0..n {
                let mut acc = 0.0;
                $( acc += $a * ws.k[$j][i]; )+
                ws.tmp[i] = y[i] + h * acc;
            }
            let (head, tail) = ws.k.split_at_mut($idx);
            let _ = head;
            sys.rhs(t + $c * h, &ws.tmp, &mut tail[0]);
        }};
    }
    stage!(1, C2, (0, A21));
    stage!(2, C3, (0, A31), (1, A32));
    stage!(3, C4, (0, A41), (1, A42), (2, A43));
    stage!(4, C5, (0, A51), (1, A52), (2, A53), (3, A54));
    stage!(5, 1.0, (0, A61), (1, A62), (2, A63), (3, A64), (4, A65));
    for i in 0..n {
        ws.y_new[i] = y[i]
            + h * (A71 * ws.k[0][i]
                + A73 * ws.k[2][i]
                + A74 * ws.k[3][i]
                + A75 * ws.k[4][i]
                + A76 * ws.k[5][i]);
    }
    sys.rhs(t + h, &ws.y_new, &mut ws.k[6]);
    for i in 0..n {
        ws.err[i] = h
            * (E1 * ws.k[0][i]
                + E3 * ws.k[2][i]
                + E4 * ws.k[3][i]
                + E5 * ws.k[4][i]
                + E6 * ws.k[5][i]
                + E7 * ws.k[6][i]);
    }
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], opts: &OdeOptions) -> f64 {
    let n = y.len().max(1) as f64;
    let sum: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    f: &[f64],
    opts: &OdeOptions,
) -> f64 {
    let scale = |v: &[f64]| -> f64 {
        let n = v.len().max(1) as f64;
        (v.iter()
            .zip(y)
            .map(|(a, b)| (a / (opts.atol + opts.rtol * b.abs())).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let d0 = scale(y);
    let d1 = scale(f);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y.iter().zip(f).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    sys.rhs(t + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f).map(|(a, b)| a - b).collect();
    let d2 = scale(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(opts.h_max)
}

/// Integrate `sys` from `t0` to `t_end`.
///
/// `event`, when given, stops the run at the first step where it changes from
/// negative to non-negative; the located state is appended to the output and
/// stored in `Solution::event`.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &mut S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    sampling: &Sampling,
    event: Option<&dyn Fn(f64, &[f64]) -> f64>,
) -> Result<Solution, OdeFailure> {
    let n = sys.dim();
    assert_eq!(n, y0.len(), "state length does not match system dimension");
    assert!(t_end >= t0, "backward integration is not supported");

    let mut sol = Solution::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut f = vec![0.0; n];
    sys.rhs(t, &y, &mut f);
    sol.stats.rhs_evals += 1;

    let out_times: &[f64] = match sampling {
        Sampling::EveryStep => &[],
        Sampling::At(ts) => ts.as_slice(),
    };
    let mut next_out = 0usize;
    let record_every = matches!(sampling, Sampling::EveryStep);
    let time_eps = |t: f64| 4.0 * f64::EPSILON * t.abs().max(1.0);

    if record_every {
        sol.times.push(t);
        sol.states.push(y.clone());
    }
    while next_out < out_times.len() && out_times[next_out] <= t + time_eps(t) {
        sol.times.push(out_times[next_out]);
        sol.states.push(y.clone());
        next_out += 1;
    }

    let mut g_prev = event.map(|e| e(t, &y));
    if t_end - t <= time_eps(t) {
        return Ok(sol);
    }

    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(sys, t, &y, &f, opts));
    sol.stats.rhs_evals += 1;
    let mut ws = Workspace::new(n);
    let mut steps = 0usize;

    loop {
        if t_end - t <= time_eps(t) {
            break;
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(OdeFailure {
                t,
                reason: FailureReason::MaxSteps(opts.max_steps),
                partial: sol,
            });
        }

        // Pick the step, landing exactly on the next output time or t_end.
        let mut target = t_end;
        if next_out < out_times.len() && out_times[next_out] < target {
            target = out_times[next_out];
        }
        let mut h_try = h.min(opts.h_max);
        let mut lands = false;
        if t + h_try >= target - time_eps(target) {
            h_try = target - t;
            lands = true;
        } else if t + 1.5 * h_try > target {
            // avoid leaving a sliver before the target
            h_try = 0.5 * (target - t);
        }

        dp_step(sys, t, &y, &f, h_try, &mut ws);
        sol.stats.rhs_evals += 6;
        let err = error_norm(&y, &ws.y_new, &ws.err, opts);

        if !err.is_finite() || ws.y_new.iter().any(|v| !v.is_finite()) {
            if h_try <= opts.h_min {
                return Err(OdeFailure {
                    t,
                    reason: FailureReason::NonFinite,
                    partial: sol,
                });
            }
            h = 0.1 * h_try;
            sol.stats.rejected += 1;
            continue;
        }

        if err <= 1.0 {
            let t_new = if lands { target } else { t + h_try };
            let mut y_new = ws.y_new.clone();
            let mut f_new = ws.k[6].clone();
            let corr = sys.project(&mut y_new);
            if corr > 0.0 {
                sol.stats.max_projection = sol.stats.max_projection.max(corr);
                sys.rhs(t_new, &y_new, &mut f_new);
                sol.stats.rhs_evals += 1;
            }

            if let (Some(ev), Some(g0)) = (event, g_prev) {
                let g1 = ev(t_new, &y_new);
                if g0 < 0.0 && g1 >= 0.0 {
                    let hit = locate_event(sys, ev, t, &y, &f, h_try, g0, g1, &mut ws);
                    sol.stats.accepted += 1;
                    sol.stats.max_error = sol.stats.max_error.max(err);
                    sol.times.push(hit.t);
                    sol.states.push(hit.y.clone());
                    sol.event = Some(hit);
                    return Ok(sol);
                }
                g_prev = Some(g1);
            }

            t = t_new;
            y = y_new;
            f = f_new;
            sol.stats.accepted += 1;
            sol.stats.max_error = sol.stats.max_error.max(err);
            if sys.on_accept(t, &y) {
                sys.rhs(t, &y, &mut f);
                sol.stats.rhs_evals += 1;
            }

            if record_every {
                sol.times.push(t);
                sol.states.push(y.clone());
            }
            while next_out < out_times.len() && out_times[next_out] <= t + time_eps(t) {
                sol.times.push(out_times[next_out]);
                sol.states.push(y.clone());
                next_out += 1;
            }

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // A landing step may be artificially short; do not let it shrink h.
            h = if lands {
                h.max(h_try * factor)
            } else {
                h_try * factor
            };
        } else {
            sol.stats.rejected += 1;
            h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            if h < opts.h_min * t.abs().max(1.0) {
                return Err(OdeFailure {
                    t,
                    reason: FailureReason::StepSizeUnderflow { h },
                    partial: sol,
                });
            }
        }
    }
    Ok(sol)
}

#[allow(clippy::too_many_arguments)]
fn locate_event<S: OdeSystem + ?Sized>(
    sys: &S,
    ev: &dyn Fn(f64, &[f64]) -> f64,
    t: f64,
    y: &[f64],
    f: &[f64],
    h: f64,
    g0: f64,
    g1: f64,
    ws: &mut Workspace,
) -> EventHit {
    let state_at = |tau: f64, ws: &mut Workspace| -> Vec<f64> {
        if tau == 0.0 {
            return y.to_vec();
        }
        dp_step(sys, t, y, f, tau, ws);
        let mut out = ws.y_new.clone();
        sys.project(&mut out);
        out
    };

    // Illinois false position on tau in [0, h].
    let (mut a, mut b) = (0.0, h);
    let (mut ga, mut gb) = (g0, g1);
    let mut side = 0i8;
    let mut best = (b, state_at(b, ws));
    for _ in 0..100 {
        if (b - a) <= 2.0 * f64::EPSILON * (t.abs() + b.abs()).max(1.0) {
            break;
        }
        let mut c = if gb != ga {
            (a * gb - b * ga) / (gb - ga)
        } else {
            0.5 * (a + b)
        };
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let yc = state_at(c, ws);
        let gc = ev(t + c, &yc);
        if gc >= 0.0 {
            b = c;
            gb = gc;
            best = (c, yc);
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
        if gc == 0.0 {
            break;
        }
    }
    EventHit {
        t: t + best.0,
        y: best.1,
    }
}

/// Classical fixed-step RK4 step, used for finite-difference probes.
pub fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    sys.rhs(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    sys.rhs(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    sys.rhs(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    sys.rhs(t + h, &tmp, &mut k4);
    (0..n)
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}
