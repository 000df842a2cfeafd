//! Optimal qubit discrimination: closed forms for the Gross-Pitaevskii flow,
//! the control law that maintains the optimal orientation, the logarithmic
//! rate, and time-to-overlap by integration for arbitrary kbar.
//!
//! Protocols are integrated in the separation angle `alpha` rather than in
//! the overlap `cos(alpha/2)`, which keeps full relative precision for states
//! that start extremely close together.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;

use crate::blochdyn::{separation_speed, PairOrientation};
use crate::error::{invalid, Error, Result};
use crate::nonlinearity::ReducedNonlinearity;
use crate::ode::{self, OdeOptions, OdeSystem, Sampling, StepStats};
use crate::optimizer::best_qubit_orientation;
use crate::table::Table;

/// Overlap below which a run counts as orthogonal.
pub const ORTHOGONAL_OVERLAP: f64 = 1e-9;

fn check_g(g: f64) -> Result<()> {
    if g > 0.0 && g.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            "g",
            format!("must be positive and finite, got {g}"),
        ))
    }
}

fn check_alpha0(alpha0: f64) -> Result<()> {
    if alpha0 > 0.0 && alpha0 <= PI {
        Ok(())
    } else {
        Err(invalid(
            "alpha0",
            format!("must lie in (0, pi], got {alpha0}"),
        ))
    }
}

/// Initial separation angle for overlap `1 - epsilon`, computed without
/// cancellation for tiny `epsilon`.
pub fn alpha_from_epsilon(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid(
            "epsilon",
            format!("must lie in (0, 1], got {epsilon}"),
        ));
    }
    Ok(2.0 * (epsilon * (2.0 - epsilon)).sqrt().atan2(1.0 - epsilon))
}

/// `cos(alpha/2)` at time `t` for the optimal Gross-Pitaevskii protocol.
///
/// Evaluated as `tanh(atanh(cos(alpha0/2)) - g t / 2)`, which equals the
/// ratio of hyperbolic functions but has no removable pole. The result is
/// signed and continues smoothly through orthogonality.
pub fn gp_overlap_closed_form(g: f64, alpha0: f64, t: f64) -> Result<f64> {
    check_g(g)?;
    check_alpha0(alpha0)?;
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be non-negative, got {t}")));
    }
    Ok((cot_quarter_log(alpha0) - g * t / 2.0).tanh())
}

/// `ln cot(alpha0/4) = atanh(cos(alpha0/2))`.
fn cot_quarter_log(alpha0: f64) -> f64 {
    let q = alpha0 / 4.0;
    (q.cos() / q.sin()).ln()
}

/// Time for the optimal Gross-Pitaevskii protocol to reach orthogonality,
/// `(2/g) ln cot(alpha0/4)`. Coincident states (`alpha0 = 0`) never separate and
/// yield `f64::INFINITY`.
pub fn gp_t_perp(g: f64, alpha0: f64) -> Result<f64> {
    check_g(g)?;
    if alpha0 == 0.0 {
        return Ok(f64::INFINITY);
    }
    check_alpha0(alpha0)?;
    Ok(2.0 / g * cot_quarter_log(alpha0))
}

/// `(2/g) atanh(cos(alpha0/2))`, evaluated as `(1/g) ln((1 + c)/(1 - c))` with
/// `1 - c = 2 sin^2(alpha0/4)`.
pub fn gp_t_perp_atanh(g: f64, alpha0: f64) -> Result<f64> {
    check_g(g)?;
    if alpha0 == 0.0 {
        return Ok(f64::INFINITY);
    }
    check_alpha0(alpha0)?;
    let c = (alpha0 / 2.0).cos();
    let one_minus_c = 2.0 * (alpha0 / 4.0).sin().powi(2);
    Ok(((1.0 + c) / one_minus_c).ln() / g)
}

/// Time for the optimal Gross-Pitaevskii protocol to bring the overlap down
/// to `target` (which may be negative).
pub fn gp_time_to_overlap(g: f64, alpha0: f64, target: f64) -> Result<f64> {
    check_g(g)?;
    check_alpha0(alpha0)?;
    if !(target > -1.0 && target < (alpha0 / 2.0).cos()) {
        return Err(invalid(
            "target_overlap",
            format!("must lie in (-1, cos(alpha0/2)), got {target}"),
        ));
    }
    Ok(2.0 / g * (cot_quarter_log(alpha0) - target.atanh()))
}

/// x-axis drive `(g/2) cos(alpha/2)` that keeps a Gross-Pitaevskii pair in the
/// optimal orientation.
pub fn gp_control_omega(g: f64, alpha: f64) -> f64 {
    gp_control_omega_from_overlap(g, (alpha / 2.0).cos())
}

pub fn gp_control_omega_from_overlap(g: f64, overlap: f64) -> f64 {
    g / 2.0 * overlap
}

/// Control rate for a general kbar at the fixed orientation `phi = pi/2`,
/// `theta = 3pi/4`: `kbar(s/sqrt2) cos(alpha/2) / (sqrt2 s)` with `s = sin(alpha/2)`.
pub fn control_omega(kbar: &ReducedNonlinearity, alpha: f64) -> f64 {
    let (s, c) = (alpha / 2.0).sin_cos();
    if s == 0.0 {
        return f64::NAN;
    }
    kbar.eval(s * FRAC_1_SQRT_2) * c / (SQRT_2 * s)
}

/// `d cos(alpha/2)/dt` for the logarithmic nonlinearity in the optimal orientation.
pub fn log_overlap_rate(g: f64, alpha: f64) -> f64 {
    let s = (alpha / 2.0).sin();
    g * FRAC_1_SQRT_2 * ((SQRT_2 - s) / (SQRT_2 + s)).ln() * s
}

/// `d cos(alpha/2)/dt` for the Gross-Pitaevskii nonlinearity in the optimal orientation.
pub fn gp_overlap_rate(g: f64, alpha: f64) -> f64 {
    let s = (alpha / 2.0).sin();
    -g / 2.0 * s * s
}

/// `d cos(alpha/2)/dt = -(1/sqrt2) kbar(sin(alpha/2)/sqrt2) sin(alpha/2)`.
pub fn general_overlap_rate(kbar: &ReducedNonlinearity, alpha: f64) -> f64 {
    let s = (alpha / 2.0).sin();
    -FRAC_1_SQRT_2 * kbar.eval(s * FRAC_1_SQRT_2) * s
}

/// How the pair orientation is chosen along a protocol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrientationPolicy {
    /// `phi = pi/2`, `theta = 3pi/4` throughout.
    FixedOptimalGp,
    /// Re-optimize `(phi, theta)` on a `grid x grid` lattice plus local descent
    /// after every accepted integrator step.
    Reoptimized { grid: usize },
    /// A fixed, user-chosen orientation.
    Fixed { phi: f64, theta: f64 },
}

impl OrientationPolicy {
    pub const DEFAULT_GRID: usize = 256;

    pub fn reoptimized() -> Self {
        OrientationPolicy::Reoptimized {
            grid: Self::DEFAULT_GRID,
        }
    }
}

impl fmt::Display for OrientationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrientationPolicy::FixedOptimalGp => write!(f, "fixed-optimal"),
            OrientationPolicy::Reoptimized { grid } => write!(f, "reoptimized:{grid}"),
            OrientationPolicy::Fixed { phi, theta } => write!(f, "fixed:{phi}:{theta}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiscriminationOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Give up (with a no-progress result) if the target is not reached by this time.
    pub t_max: f64,
}

impl Default for DiscriminationOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-16,
            t_max: 1e6,
        }
    }
}

/// Separation angle and overlap along a protocol.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OverlapTrace {
    pub times: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Signed `cos(alpha/2)`.
    pub overlap: Vec<f64>,
    /// `(phi, theta)` in force at each recorded time.
    pub orientation: Vec<(f64, f64)>,
    pub step_stats: StepStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminationResult {
    pub alpha0: f64,
    pub target_overlap: f64,
    pub policy: OrientationPolicy,
    /// Time at which the overlap first reaches the target.
    pub t_perp: f64,
    pub trace: OverlapTrace,
    /// Drive rate at each recorded time; only populated for `FixedOptimalGp`.
    pub control: Vec<f64>,
}

struct AlphaFlow<'a> {
    kbar: &'a ReducedNonlinearity,
    policy: OrientationPolicy,
    phi: f64,
    theta: f64,
}

impl<'a> AlphaFlow<'a> {
    fn new(kbar: &'a ReducedNonlinearity, policy: OrientationPolicy, alpha0: f64) -> Result<Self> {
        let (phi, theta) = match policy {
            OrientationPolicy::FixedOptimalGp => {
                let p = PairOrientation::gp_optimal(alpha0);
                (p.phi, p.theta)
            }
            OrientationPolicy::Fixed { phi, theta } => (phi, theta),
            OrientationPolicy::Reoptimized { grid } => {
                if grid < 2 {
                    return Err(invalid("grid", "must be at least 2"));
                }
                let o = best_qubit_orientation(kbar, alpha0, grid);
                (o.phi, o.theta)
            }
        };
        Ok(Self {
            kbar,
            policy,
            phi,
            theta,
        })
    }

    fn speed(&self, alpha: f64) -> f64 {
        match self.policy {
            OrientationPolicy::FixedOptimalGp => {
                SQRT_2 * self.kbar.eval((alpha / 2.0).sin() * FRAC_1_SQRT_2)
            }
            _ => separation_speed(
                self.kbar,
                &PairOrientation::new(alpha, self.phi, self.theta),
            ),
        }
    }
}

impl OdeSystem for AlphaFlow<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = self.speed(y[0]);
    }

    fn on_accept(&mut self, _t: f64, y: &[f64]) -> bool {
        if let OrientationPolicy::Reoptimized { grid } = self.policy {
            let o = best_qubit_orientation(self.kbar, y[0], grid);
            self.phi = o.phi;
            self.theta = o.theta;
            true
        } else {
            false
        }
    }
}

/// Integrate a protocol and record the overlap at the given times. The
/// orientation under `Reoptimized` is refreshed after every internal step.
pub fn overlap_trace(
    kbar: &ReducedNonlinearity,
    alpha0: f64,
    policy: OrientationPolicy,
    times: &[f64],
    opts: &DiscriminationOptions,
) -> Result<OverlapTrace> {
    check_alpha0(alpha0)?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(invalid("times", "must be sorted and non-negative"));
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    let mut sys = AlphaFlow::new(kbar, policy, alpha0)?;
    let ode_opts = OdeOptions::with_tol(opts.rtol, opts.atol);
    let mut trace = OverlapTrace::default();
    let sol = if matches!(policy, OrientationPolicy::Reoptimized { .. }) {
        // Step-by-step so the orientation in force can be recorded.
        run_recording(
            &mut sys,
            alpha0,
            t_end,
            &ode_opts,
            Some(times),
            None,
            &mut trace,
        )?
    } else {
        ode::integrate(
            &mut sys,
            0.0,
            &[alpha0],
            t_end,
            &ode_opts,
            &Sampling::At(times.to_vec()),
            None,
        )?
    };
    if trace.times.is_empty() {
        for (t, y) in sol.times.iter().zip(&sol.states) {
            push_point(&mut trace, *t, y[0], (sys.phi, sys.theta));
        }
    }
    trace.step_stats = sol.stats;
    Ok(trace)
}

fn push_point(trace: &mut OverlapTrace, t: f64, alpha: f64, orientation: (f64, f64)) {
    trace.times.push(t);
    trace.alpha.push(alpha);
    trace.overlap.push((alpha / 2.0).cos());
    trace.orientation.push(orientation);
}

/// Drive the integrator one accepted step at a time so that the orientation
/// chosen for each step is known. Returns the concatenated solution.
fn run_recording(
    sys: &mut AlphaFlow<'_>,
    alpha0: f64,
    t_end: f64,
    opts: &OdeOptions,
    times: Option<&[f64]>,
    alpha_stop: Option<f64>,
    trace: &mut OverlapTrace,
) -> Result<ode::Solution> {
    struct Recorder<'s, 'k> {
        inner: &'s mut AlphaFlow<'k>,
        log: Vec<(f64, f64, (f64, f64))>,
    }
    impl OdeSystem for Recorder<'_, '_> {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
            self.inner.rhs(t, y, dy)
        }
        fn on_accept(&mut self, t: f64, y: &[f64]) -> bool {
            let before = (self.inner.phi, self.inner.theta);
            let changed = self.inner.on_accept(t, y);
            self.log.push((t, y[0], before));
            changed
        }
    }
    let start = (sys.phi, sys.theta);
    let mut rec = Recorder {
        inner: sys,
        log: Vec::new(),
    };
    let sampling = match times {
        Some(ts) => Sampling::At(ts.to_vec()),
        None => Sampling::EveryStep,
    };
    let event = alpha_stop.map(|a| move |_t: f64, y: &[f64]| y[0] - a);
    let event_ref = event.as_ref().map(|e| e as &dyn Fn(f64, &[f64]) -> f64);
    let sol = ode::integrate(&mut rec, 0.0, &[alpha0], t_end, opts, &sampling, event_ref)
        .map_err(Error::from)?;
    // Orientation in force at time t is the one chosen at the last accepted step before t.
    let log = rec.log;
    for (t, y) in sol.times.iter().zip(&sol.states) {
        let idx = log.partition_point(|(tl, _, _)| *tl < *t);
        let o = if idx == 0 {
            start
        } else if idx < log.len() {
            log[idx].2
        } else {
            (rec.inner.phi, rec.inner.theta)
        };
        push_point(trace, *t, y[0], o);
    }
    Ok(sol)
}

/// Integrate a protocol from separation `alpha0` until the overlap drops to
/// `target_overlap`. A target of zero is detected at overlap
/// [`ORTHOGONAL_OVERLAP`].
pub fn time_to_overlap(
    kbar: &ReducedNonlinearity,
    alpha0: f64,
    target_overlap: f64,
    policy: OrientationPolicy,
) -> Result<DiscriminationResult> {
    time_to_overlap_with(
        kbar,
        alpha0,
        target_overlap,
        policy,
        &DiscriminationOptions::default(),
    )
}

pub fn time_to_overlap_with(
    kbar: &ReducedNonlinearity,
    alpha0: f64,
    target_overlap: f64,
    policy: OrientationPolicy,
    opts: &DiscriminationOptions,
) -> Result<DiscriminationResult> {
    check_alpha0(alpha0)?;
    if !(target_overlap >= 0.0 && target_overlap < (alpha0 / 2.0).cos()) {
        return Err(invalid(
            "target_overlap",
            format!("must lie in [0, cos(alpha0/2)), got {target_overlap}"),
        ));
    }
    let alpha_stop = 2.0 * target_overlap.max(ORTHOGONAL_OVERLAP).acos();
    let mut sys = AlphaFlow::new(kbar, policy, alpha0)?;

    let initial_speed = sys.speed(alpha0);
    if initial_speed <= (1e-10 * alpha0).max(1e-14) {
        return Err(Error::NoProgress {
            alpha: alpha0,
            rate: -0.5 * (alpha0 / 2.0).sin() * initial_speed,
        });
    }

    let ode_opts = OdeOptions::with_tol(opts.rtol, opts.atol);
    let mut trace = OverlapTrace::default();
    let sol = if matches!(policy, OrientationPolicy::Reoptimized { .. }) {
        run_recording(
            &mut sys,
            alpha0,
            opts.t_max,
            &ode_opts,
            None,
            Some(alpha_stop),
            &mut trace,
        )?
    } else {
        let ev = |_t: f64, y: &[f64]| y[0] - alpha_stop;
        let sol = ode::integrate(
            &mut sys,
            0.0,
            &[alpha0],
            opts.t_max,
            &ode_opts,
            &Sampling::EveryStep,
            Some(&ev),
        )?;
        for (t, y) in sol.times.iter().zip(&sol.states) {
            push_point(&mut trace, *t, y[0], (sys.phi, sys.theta));
        }
        sol
    };
    trace.step_stats = sol.stats.clone();

    let Some(hit) = sol.event else {
        let alpha = *trace.alpha.last().unwrap_or(&alpha0);
        return Err(Error::NoProgress {
            alpha,
            rate: -0.5 * (alpha / 2.0).sin() * sys.speed(alpha),
        });
    };
    let control = if policy == OrientationPolicy::FixedOptimalGp {
        trace
            .alpha
            .iter()
            .map(|&a| control_omega(kbar, a))
            .collect()
    } else {
        Vec::new()
    };
    Ok(DiscriminationResult {
        alpha0,
        target_overlap,
        policy,
        t_perp: hit.t,
        trace,
        control,
    })
}

/// Overlap against `g t` for `alpha0` (default figure: `alpha0 = 0.1`,
/// `g t` in `[0, 7.5]`). Columns `gt,overlap`.
pub fn fig3a_table(alpha0: f64, gt_max: f64, samples: usize) -> Result<Table> {
    let mut t = Table::new(&["gt", "overlap"]);
    for k in 0..samples {
        let gt = gt_max * k as f64 / (samples - 1).max(1) as f64;
        t.push(vec![
            gt.into(),
            gp_overlap_closed_form(1.0, alpha0, gt)?.into(),
        ]);
    }
    Ok(t)
}

/// `g t_perp` against `alpha0` on `(0, pi]`. Columns `alpha0,gt_perp`.
pub fn fig3b_table(samples: usize) -> Result<Table> {
    let mut t = Table::new(&["alpha0", "gt_perp"]);
    for k in 1..=samples {
        let a = PI * k as f64 / samples as f64;
        t.push(vec![a.into(), gp_t_perp(1.0, a)?.into()]);
    }
    Ok(t)
}

/// Overlap rates of the logarithmic (`g = 1`) and Gross-Pitaevskii (`g = 2`)
/// protocols against the overlap on `(0, 1)`. Columns
/// `overlap,rate_log_g1,rate_gp_g2`.
pub fn fig4_table(samples: usize) -> Table {
    let mut t = Table::new(&["overlap", "rate_log_g1", "rate_gp_g2"]);
    for k in 1..=samples {
        let c = k as f64 / (samples + 1) as f64;
        let alpha = 2.0 * c.acos();
        t.push(vec![
            c.into(),
            log_overlap_rate(1.0, alpha).into(),
            gp_overlap_rate(2.0, alpha).into(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Nonlinearity;

    fn gp(g: f64) -> ReducedNonlinearity {
        Nonlinearity::gross_pitaevskii(g).unwrap().reduce()
    }

    fn ratio_form(g: f64, alpha0: f64, t: f64) -> f64 {
        let c0 = (alpha0 / 2.0).cos();
        let (sh, ch) = ((g * t / 2.0).sinh(), (g * t / 2.0).cosh());
        (c0 * ch - sh) / (ch - c0 * sh)
    }

    #[test]
    fn closed_form_basics() {
        assert!((gp_overlap_closed_form(1.0, 0.7, 0.0).unwrap() - (0.35f64).cos()).abs() < 1e-15);
        let tp = gp_t_perp(1.3, 0.7).unwrap();
        assert!(gp_overlap_closed_form(1.3, 0.7, tp).unwrap().abs() < 1e-15);
        for t in [0.5, 2.0, 4.0, 6.0] {
            let a = gp_overlap_closed_form(1.0, 0.1, t).unwrap();
            assert!((a - ratio_form(1.0, 0.1, t)).abs() < 1e-12);
        }
        // 40-digit evaluation of the hyperbolic ratio
        let v = gp_overlap_closed_form(1.0, 0.1, 4.0).unwrap();
        assert!((v - 0.93397773824776253).abs() < 1e-15);
    }

    #[test]
    fn t_perp_values() {
        assert_eq!(gp_t_perp(1.0, PI).unwrap().abs() < 1e-15, true);
        assert!((gp_t_perp(1.0, 0.1).unwrap() - 7.3773421807866365).abs() < 1e-13);
        assert_eq!(gp_t_perp(1.0, 0.0).unwrap(), f64::INFINITY);
        let a = gp_t_perp(2.0, 0.3).unwrap();
        let b = gp_t_perp(1.0, 0.3).unwrap();
        assert!((a - b / 2.0).abs() < 1e-15);
        for alpha0 in [1e-3, 0.1, 1.0, 2.5, 3.1] {
            let lhs = gp_t_perp(1.0, alpha0).unwrap();
            let rhs = gp_t_perp_atanh(1.0, alpha0).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.max(1.0));
            let naive = 2.0 * (alpha0 / 2.0).cos().atanh();
            assert!((lhs - naive).abs() < 1e-8 * lhs.max(1.0));
        }
        assert!(gp_t_perp(-1.0, 1.0).is_err());
        assert!(gp_t_perp(1.0, 4.0).is_err());
    }

    #[test]
    fn control_law_values() {
        assert_eq!(gp_control_omega(1.4, 0.0), 0.7);
        assert!(gp_control_omega(1.4, PI).abs() < 1e-16);
        for a in [0.1, 1.0, 2.0] {
            assert!((control_omega(&gp(1.4), a) - gp_control_omega(1.4, a)).abs() < 1e-14);
        }
    }

    #[test]
    fn log_rate_two_paths_agree() {
        let k = Nonlinearity::logarithmic(1.0).unwrap().reduce();
        let a = FRAC_PI_2_;
        let direct = log_overlap_rate(1.0, a);
        let general = general_overlap_rate(&k, a);
        assert!((direct - general).abs() < 1e-12);
        // through the Bloch rate formula: d cos(a/2)/dt = d cos a/dt / (4 cos(a/2))
        let ip = crate::blochdyn::ip_rate(&k, &PairOrientation::gp_optimal(a));
        assert!((direct - ip / (4.0 * (a / 2.0).cos())).abs() < 1e-12);
        assert!(log_overlap_rate(1.0, 1e-9).abs() < 1e-17);
    }

    const FRAC_PI_2_: f64 = std::f64::consts::FRAC_PI_2;

    #[test]
    fn log_dominated_by_gp() {
        for k in 1..1000 {
            let a = PI * k as f64 / 1000.0;
            assert!(log_overlap_rate(1.0, a) < gp_overlap_rate(2.0, a));
        }
    }

    #[test]
    fn integrated_gp_matches_t_perp() {
        for (g, a0) in [(1.0, 0.1), (0.5, 1e-4), (3.0, 2.0)] {
            let r = time_to_overlap(&gp(g), a0, 0.0, OrientationPolicy::FixedOptimalGp).unwrap();
            let exact = gp_t_perp(g, a0).unwrap();
            assert!(
                ((r.t_perp - exact) / exact).abs() < 1e-6,
                "{} vs {}",
                r.t_perp,
                exact
            );
            assert!(r.trace.overlap.windows(2).all(|w| w[1] <= w[0]));
            assert!(r.control.iter().all(|w| w.is_finite()));
        }
    }

    #[test]
    fn quartic_makes_no_progress() {
        let k = Nonlinearity::quartic_difference(1.0).unwrap().reduce();
        for policy in [
            OrientationPolicy::FixedOptimalGp,
            OrientationPolicy::Reoptimized { grid: 32 },
        ] {
            match time_to_overlap(&k, 0.5, 0.0, policy) {
                Err(Error::NoProgress { .. }) => {}
                other => panic!("expected no progress, got {other:?}"),
            }
        }
    }

    #[test]
    fn sqrt_separates_in_bounded_time() {
        let k = Nonlinearity::square_root_sign(1.0).unwrap().reduce();
        let times: Vec<f64> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&a| {
                time_to_overlap(&k, a, 0.0, OrientationPolicy::FixedOptimalGp)
                    .unwrap()
                    .t_perp
            })
            .collect();
        for t in &times {
            assert!(*t < 10.0);
        }
    }

    #[test]
    fn reoptimized_matches_fixed_for_gp() {
        let k = gp(1.0);
        let fixed = time_to_overlap(&k, 0.3, 0.0, OrientationPolicy::FixedOptimalGp).unwrap();
        let re =
            time_to_overlap(&k, 0.3, 0.0, OrientationPolicy::Reoptimized { grid: 64 }).unwrap();
        assert!((fixed.t_perp - re.t_perp).abs() < 1e-6 * fixed.t_perp);
    }

    #[test]
    fn rejects_bad_targets() {
        assert!(time_to_overlap(&gp(1.0), 0.5, 0.99, OrientationPolicy::FixedOptimalGp).is_err());
        assert!(time_to_overlap(&gp(1.0), 0.5, -0.1, OrientationPolicy::FixedOptimalGp).is_err());
    }

    #[test]
    fn epsilon_conversion_is_exact() {
        for eps in [1e-2, 1e-8, 1e-14] {
            let a = alpha_from_epsilon(eps).unwrap();
            let back = 2.0 * (a / 4.0).sin().powi(2);
            assert!((back - eps).abs() < 1e-15 * eps.max(1e-300) * 10.0);
        }
    }

    #[test]
    fn figure_tables() {
        let b = fig3b_table(512).unwrap();
        let last = b.column_f64("gt_perp").unwrap();
        assert!(last[511].abs() < 1e-15);
        let a = fig3a_table(0.1, 7.5, 512).unwrap();
        let ov = a.column_f64("overlap").unwrap();
        assert!(ov[0] > 0.99 && *ov.last().unwrap() < 0.0);
        let f = fig4_table(100);
        let solid = f.column_f64("rate_log_g1").unwrap();
        let dashed = f.column_f64("rate_gp_g2").unwrap();
        assert!(solid.iter().zip(&dashed).all(|(s, d)| s <= d));
    }
}
