//! Bloch-sphere picture of one or two co-evolving qubit states under a
//! diagonal nonlinearity plus an optional rotation drive.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::nonlinearity::ReducedNonlinearity;
use crate::ode::{self, OdeOptions, OdeSystem, Sampling, StepStats};
use crate::table::fmt_f64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.x / n, self.y / n, self.z / n)
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn rotate_z(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Two states separated by Bloch angle `alpha`, midpoint at polar angle `phi`
/// in the xz-plane, rotated by `theta` about the midpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairOrientation {
    pub alpha: f64,
    pub phi: f64,
    pub theta: f64,
}

impl PairOrientation {
    pub fn new(alpha: f64, phi: f64, theta: f64) -> Self {
        Self { alpha, phi, theta }
    }

    /// The orientation that maximizes separation under the Gross-Pitaevskii flow.
    pub fn gp_optimal(alpha: f64) -> Self {
        Self::new(
            alpha,
            std::f64::consts::FRAC_PI_2,
            3.0 * std::f64::consts::FRAC_PI_4,
        )
    }

    /// Latitudes `(z_plus, z_minus)` of the two states.
    pub fn latitudes(&self) -> (f64, f64) {
        let (sa, ca) = (self.alpha / 2.0).sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        let ct = self.theta.cos();
        (ca * cp - sa * sp * ct, ca * cp + sa * sp * ct)
    }
}

pub fn pair_to_bloch(p: &PairOrientation) -> (BlochVector, BlochVector) {
    let (sa, ca) = (p.alpha / 2.0).sin_cos();
    let (sp, cp) = p.phi.sin_cos();
    let (st, ct) = p.theta.sin_cos();
    let plus = BlochVector::new(ca * sp + sa * cp * ct, sa * st, ca * cp - sa * sp * ct);
    let minus = BlochVector::new(ca * sp - sa * cp * ct, -sa * st, ca * cp + sa * sp * ct);
    (plus, minus)
}

/// Recover `(alpha, phi, theta)` from two Bloch vectors, fixing the gauge by
/// rotating the midpoint into the xz-plane. Returns `None` for antipodal or
/// coincident-at-the-pole configurations where the midpoint is undefined.
pub fn bloch_to_pair(plus: &BlochVector, minus: &BlochVector) -> Option<PairOrientation> {
    let sum = BlochVector::new(plus.x + minus.x, plus.y + minus.y, plus.z + minus.z);
    let len = sum.norm();
    if len < 1e-12 {
        return None;
    }
    let alpha = 2.0 * (0.5 * diff_norm(plus, minus)).atan2(0.5 * len);
    let m = BlochVector::new(sum.x / len, sum.y / len, sum.z / len);
    let phi = m.z.clamp(-1.0, 1.0).acos();
    let azimuth = if m.x.hypot(m.y) < 1e-15 {
        0.0
    } else {
        m.y.atan2(m.x)
    };
    let p = plus.rotate_z(-azimuth);
    let q = minus.rotate_z(-azimuth);
    let d = BlochVector::new((p.x - q.x) / 2.0, (p.y - q.y) / 2.0, (p.z - q.z) / 2.0);
    let (sp, cp) = phi.sin_cos();
    let sin_t = d.y;
    let cos_t = d.x * cp - d.z * sp;
    let theta = sin_t.atan2(cos_t).rem_euclid(std::f64::consts::TAU);
    Some(PairOrientation::new(alpha, phi, theta))
}

fn diff_norm(a: &BlochVector, b: &BlochVector) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt()
}

/// kbar(z) (-y, x, 0): rotation about the z axis at a latitude-dependent rate.
pub fn nonlinear_flow_rate(kbar: &ReducedNonlinearity, v: &BlochVector) -> BlochVector {
    let k = kbar.eval(v.z);
    BlochVector::new(-k * v.y, k * v.x, 0.0)
}

/// `d(cos alpha)/dt` for a pair in orientation `p` under the free nonlinear flow.
pub fn ip_rate(kbar: &ReducedNonlinearity, p: &PairOrientation) -> f64 {
    -p.alpha.sin() * separation_speed(kbar, p)
}

/// `d(alpha)/dt` for a pair in orientation `p`; positive means separating.
pub fn separation_speed(kbar: &ReducedNonlinearity, p: &PairOrientation) -> f64 {
    let (z_plus, z_minus) = p.latitudes();
    p.phi.sin() * p.theta.sin() * (kbar.eval(z_plus) - kbar.eval(z_minus))
}

type OmegaFn = Arc<dyn Fn(f64, &[BlochVector]) -> f64 + Send + Sync>;

/// Rotation drive `omega(t) * (axis x v)`. The rate may depend on the current
/// states, which covers closed-loop control laws.
#[derive(Clone)]
pub struct DriveSchedule {
    axis: BlochVector,
    omega: Option<OmegaFn>,
}

impl fmt::Debug for DriveSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriveSchedule")
            .field("axis", &self.axis)
            .field("active", &self.omega.is_some())
            .finish()
    }
}

impl DriveSchedule {
    pub fn none() -> Self {
        Self {
            axis: BlochVector::new(1.0, 0.0, 0.0),
            omega: None,
        }
    }

    fn checked_axis(axis: BlochVector) -> Result<BlochVector> {
        if ((axis.norm()) - 1.0).abs() > 1e-12 {
            return Err(invalid(
                "axis",
                format!("must be a unit vector, norm is {}", axis.norm()),
            ));
        }
        Ok(axis)
    }

    pub fn constant(axis: BlochVector, omega: f64) -> Result<Self> {
        Self::time_dependent(axis, move |_| omega)
    }

    pub fn time_dependent(
        axis: BlochVector,
        omega: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Ok(Self {
            axis: Self::checked_axis(axis)?,
            omega: Some(Arc::new(move |t, _| omega(t))),
        })
    }

    pub fn feedback(
        axis: BlochVector,
        omega: impl Fn(f64, &[BlochVector]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Ok(Self {
            axis: Self::checked_axis(axis)?,
            omega: Some(Arc::new(omega)),
        })
    }

    /// Closed-loop x-axis drive `omega = (g/2) cos(alpha/2)` that keeps a
    /// Gross-Pitaevskii pair in its optimal orientation.
    pub fn gp_optimal_control(g: f64) -> Self {
        Self::feedback(BlochVector::new(1.0, 0.0, 0.0), move |_, states| {
            let overlap = match states {
                [a, b] => ((1.0 + a.dot(b)) / 2.0).max(0.0).sqrt(),
                _ => 1.0,
            };
            crate::discrimination::gp_control_omega_from_overlap(g, overlap)
        })
        .expect("x axis is a unit vector")
    }

    pub fn axis(&self) -> BlochVector {
        self.axis
    }

    pub fn omega(&self, t: f64, states: &[BlochVector]) -> f64 {
        self.omega.as_ref().map_or(0.0, |f| f(t, states))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<BlochVector>>,
    pub step_stats: StepStats,
}

impl SimTrace {
    pub fn final_states(&self) -> Option<&[BlochVector]> {
        self.states.last().map(Vec::as_slice)
    }

    /// `cos(alpha)` between the two states at each time (pair traces only).
    pub fn cos_alpha(&self) -> Option<Vec<f64>> {
        self.states
            .iter()
            .map(|s| match s.as_slice() {
                [a, b] => Some(a.dot(b)),
                _ => None,
            })
            .collect()
    }

    /// CSV with header `t,x,y,z` or `t,x,y,z,x2,y2,z2,cos_alpha`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let pair = self.states.first().is_some_and(|s| s.len() == 2);
        if pair {
            writeln!(w, "t,x,y,z,x2,y2,z2,cos_alpha")?;
        } else {
            writeln!(w, "t,x,y,z")?;
        }
        for (t, s) in self.times.iter().zip(&self.states) {
            let a = s[0];
            write!(
                w,
                "{},{},{},{}",
                fmt_f64(*t),
                fmt_f64(a.x),
                fmt_f64(a.y),
                fmt_f64(a.z)
            )?;
            if pair {
                let b = s[1];
                write!(
                    w,
                    ",{},{},{},{}",
                    fmt_f64(b.x),
                    fmt_f64(b.y),
                    fmt_f64(b.z),
                    fmt_f64(a.dot(&b))
                )?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

struct BlochSystem<'a> {
    kbar: &'a ReducedNonlinearity,
    drive: &'a DriveSchedule,
    count: usize,
}

fn unpack(y: &[f64]) -> Vec<BlochVector> {
    y.chunks_exact(3)
        .map(|c| BlochVector::new(c[0], c[1], c[2]))
        .collect()
}

impl OdeSystem for BlochSystem<'_> {
    fn dim(&self) -> usize {
        3 * self.count
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let states = unpack(y);
        let omega = self.drive.omega(t, &states);
        let axis = self.drive.axis();
        for (v, out) in states.iter().zip(dy.chunks_exact_mut(3)) {
            let flow = nonlinear_flow_rate(self.kbar, v);
            let rot = axis.cross(v);
            out[0] = flow.x + omega * rot.x;
            out[1] = flow.y + omega * rot.y;
            out[2] = flow.z + omega * rot.z;
        }
    }

    fn project(&self, y: &mut [f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in y.chunks_exact_mut(3) {
            let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            worst = worst.max((n - 1.0).abs());
            c.iter_mut().for_each(|v| *v /= n);
        }
        worst
    }
}

/// Options for [`integrate_with`]. `tol` is the relative tolerance; the
/// absolute tolerance is `tol / 100`.
#[derive(Clone, Debug)]
pub struct BlochIntegration {
    pub tol: f64,
    pub sampling: Sampling,
    pub h_max: f64,
}

impl Default for BlochIntegration {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            sampling: Sampling::EveryStep,
            h_max: f64::INFINITY,
        }
    }
}

/// Integrate one or two Bloch vectors for `duration`, recording every accepted step.
pub fn integrate(
    kbar: &ReducedNonlinearity,
    drive: &DriveSchedule,
    initial: &[BlochVector],
    duration: f64,
    tol: f64,
) -> Result<SimTrace> {
    integrate_with(
        kbar,
        drive,
        initial,
        duration,
        &BlochIntegration {
            tol,
            ..BlochIntegration::default()
        },
    )
}

pub fn integrate_with(
    kbar: &ReducedNonlinearity,
    drive: &DriveSchedule,
    initial: &[BlochVector],
    duration: f64,
    cfg: &BlochIntegration,
) -> Result<SimTrace> {
    if !(1..=2).contains(&initial.len()) {
        return Err(invalid("initial", "expected one or two Bloch vectors"));
    }
    if !(duration >= 0.0) {
        return Err(invalid(
            "duration",
            format!("must be non-negative, got {duration}"),
        ));
    }
    if !(cfg.tol > 0.0) {
        return Err(invalid("tol", format!("must be positive, got {}", cfg.tol)));
    }
    for v in initial {
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(v.norm()));
        }
    }
    let y0: Vec<f64> = initial.iter().flat_map(|v| v.to_array()).collect();
    let mut sys = BlochSystem {
        kbar,
        drive,
        count: initial.len(),
    };
    let opts = OdeOptions::with_tol(cfg.tol, cfg.tol * 1e-2).h_max(cfg.h_max);
    let sol = ode::integrate(&mut sys, 0.0, &y0, duration, &opts, &cfg.sampling, None)?;
    Ok(SimTrace {
        times: sol.times,
        states: sol.states.iter().map(|y| unpack(y)).collect(),
        step_stats: sol.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Nonlinearity;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn gp(g: f64) -> ReducedNonlinearity {
        Nonlinearity::gross_pitaevskii(g).unwrap().reduce()
    }

    #[test]
    fn zero_separation_gives_identical_vectors() {
        let (a, b) = pair_to_bloch(&PairOrientation::new(0.0, 1.1, 2.3));
        assert_eq!(a, b);
    }

    #[test]
    fn optimal_orientation_vectors() {
        let alpha = 0.7;
        let (a, b) = pair_to_bloch(&PairOrientation::gp_optimal(alpha));
        let (s, c) = (alpha / 2.0).sin_cos();
        for (v, sign) in [(a, 1.0), (b, -1.0)] {
            assert!((v.x - c).abs() < 1e-15);
            assert!((v.y - sign * s * FRAC_1_SQRT_2).abs() < 1e-15);
            assert!((v.z - sign * s * FRAC_1_SQRT_2).abs() < 1e-15);
        }
    }

    #[test]
    fn theta_zero_stays_in_xz_plane() {
        let (a, b) = pair_to_bloch(&PairOrientation::new(FRAC_PI_2, FRAC_PI_4, 0.0));
        assert_eq!(a.y, 0.0);
        assert_eq!(b.y, 0.0);
    }

    #[test]
    fn flow_vanishes_at_equator_and_poles() {
        let k = gp(1.0);
        assert_eq!(
            nonlinear_flow_rate(&k, &BlochVector::new(1.0, 0.0, 0.0)),
            BlochVector::new(0.0, 0.0, 0.0)
        );
        let pole = nonlinear_flow_rate(&k, &BlochVector::new(0.0, 0.0, 1.0));
        assert_eq!(pole.norm(), 0.0);
        let v = nonlinear_flow_rate(
            &gp(2.0),
            &BlochVector::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2),
        );
        assert!((v.x).abs() < 1e-15 && (v.y - 1.0).abs() < 1e-15 && v.z == 0.0);
    }

    #[test]
    fn ip_rate_gp_optimal() {
        let g = 1.3;
        for alpha in [0.1, 0.5, 1.5, 3.0] {
            let r = ip_rate(&gp(g), &PairOrientation::gp_optimal(alpha));
            let expected = -g * alpha.sin() * (alpha / 2.0).sin();
            assert!((r - expected).abs() < 1e-14);
        }
        assert_eq!(ip_rate(&gp(g), &PairOrientation::new(1.0, 1.0, 0.0)), 0.0);
    }

    /// Brute force: differentiate the dot product of the parameterized states
    /// using the flow directly.
    fn brute_ip_rate(kbar: &ReducedNonlinearity, p: &PairOrientation) -> f64 {
        let (a, b) = pair_to_bloch(p);
        let fa = nonlinear_flow_rate(kbar, &a);
        let fb = nonlinear_flow_rate(kbar, &b);
        fa.dot(&b) + a.dot(&fb)
    }

    #[test]
    fn ip_rate_off_optimal_example() {
        // alpha = pi/2, phi = pi/2, theta = pi/4 under GP g = 1: z_plus = -1/2,
        // z_minus = +1/2 and the rate is sin(pi/4) = 1/sqrt 2.
        let p = PairOrientation::new(FRAC_PI_2, FRAC_PI_2, FRAC_PI_4);
        let r = ip_rate(&gp(1.0), &p);
        assert!((r - brute_ip_rate(&gp(1.0), &p)).abs() < 1e-15);
        assert!((r - FRAC_1_SQRT_2).abs() < 1e-15);

        // finite-difference of the integrated pair agrees too
        let (a, b) = pair_to_bloch(&p);
        let dt = 1e-6;
        let tr = integrate(&gp(1.0), &DriveSchedule::none(), &[a, b], dt, 1e-13).unwrap();
        let fd = (tr.cos_alpha().unwrap().last().unwrap() - a.dot(&b)) / dt;
        assert!((fd - FRAC_1_SQRT_2).abs() < 1e-5);
    }

    #[test]
    fn zero_duration_trace() {
        let v = BlochVector::new(0.6, 0.0, 0.8);
        let tr = integrate(&gp(1.0), &DriveSchedule::none(), &[v], 0.0, 1e-10).unwrap();
        assert_eq!(tr.times, vec![0.0]);
        assert_eq!(tr.states, vec![vec![v]]);
    }

    #[test]
    fn equator_is_fixed() {
        let v = BlochVector::new(0.0, 1.0, 0.0);
        let tr = integrate(&gp(1.0), &DriveSchedule::none(), &[v], 20.0, 1e-10).unwrap();
        for s in &tr.states {
            assert!((s[0].x - v.x).abs() < 1e-15 && (s[0].y - v.y).abs() < 1e-15);
        }
    }

    #[test]
    fn latitude_rotation_phase() {
        let v = BlochVector::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2);
        let tr = integrate(&gp(1.0), &DriveSchedule::none(), &[v], 1.0, 1e-12).unwrap();
        let end = tr.final_states().unwrap()[0];
        // rotates at rate kbar(1/sqrt 2) = 1/sqrt 2
        let phase = end.y.atan2(end.x);
        assert!((phase - FRAC_1_SQRT_2).abs() < 1e-8);
        assert!((end.z - FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn csv_export_header_and_rows() {
        let (a, b) = pair_to_bloch(&PairOrientation::gp_optimal(0.5));
        let tr = integrate(
            &gp(1.0),
            &DriveSchedule::gp_optimal_control(1.0),
            &[a, b],
            0.5,
            1e-9,
        )
        .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x,y,z,x2,y2,z2,cos_alpha"));
        assert_eq!(lines.count(), tr.times.len());
    }

    #[test]
    fn bloch_to_pair_inverts_parameterization() {
        let p = PairOrientation::new(0.9, 1.2, 2.0);
        let (a, b) = pair_to_bloch(&p);
        let q = bloch_to_pair(&a.rotate_z(0.7), &b.rotate_z(0.7)).unwrap();
        assert!((q.alpha - p.alpha).abs() < 1e-12);
        assert!((q.phi - p.phi).abs() < 1e-12);
        assert!((q.theta - p.theta).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let v = BlochVector::new(1.0, 0.0, 0.0);
        assert!(integrate(&gp(1.0), &DriveSchedule::none(), &[v], -1.0, 1e-9).is_err());
        assert!(integrate(&gp(1.0), &DriveSchedule::none(), &[v], 1.0, 0.0).is_err());
        assert!(integrate(
            &gp(1.0),
            &DriveSchedule::none(),
            &[BlochVector::new(1.0, 1.0, 0.0)],
            1.0,
            1e-9
        )
        .is_err());
        assert!(DriveSchedule::constant(BlochVector::new(1.0, 1.0, 0.0), 1.0).is_err());
    }

    fn orientation() -> impl Strategy<Value = PairOrientation> {
        (0.0..=PI, 0.0..=PI, 0.0..(2.0 * PI)).prop_map(|(a, p, t)| PairOrientation::new(a, p, t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn orientation_gives_unit_vectors(p in orientation()) {
            let (a, b) = pair_to_bloch(&p);
            prop_assert!((a.norm() - 1.0).abs() < 1e-12);
            prop_assert!((b.norm() - 1.0).abs() < 1e-12);
            prop_assert!((a.dot(&b) - p.alpha.cos()).abs() < 1e-12);
        }

        #[test]
        fn ip_rate_matches_brute_force(p in orientation(), g in 0.1f64..3.0) {
            let k = gp(g);
            prop_assert!((ip_rate(&k, &p) - brute_ip_rate(&k, &p)).abs() < 1e-12);
            let k = Nonlinearity::square_root_sign(g).unwrap().reduce();
            prop_assert!((ip_rate(&k, &p) - brute_ip_rate(&k, &p)).abs() < 1e-12);
        }

        #[test]
        fn ip_rate_invariant_under_z_rotation(p in orientation(), gamma in 0.0..(2.0 * PI)) {
            let k = Nonlinearity::logarithmic(1.0).unwrap().reduce();
            let (a, b) = pair_to_bloch(&p);
            let base = brute_ip_rate(&k, &p);
            let fa = nonlinear_flow_rate(&k, &a.rotate_z(gamma));
            let fb = nonlinear_flow_rate(&k, &b.rotate_z(gamma));
            let rotated = fa.dot(&b.rotate_z(gamma)) + a.rotate_z(gamma).dot(&fb);
            prop_assert!((base - rotated).abs() < 1e-10 * (1.0 + base.abs()));
        }

        #[test]
        fn latitude_conserved_under_free_flow(
            theta in 0.05f64..3.09, az in 0.0..(2.0 * PI), g in 0.5f64..2.0
        ) {
            let v = BlochVector::new(theta.sin() * az.cos(), theta.sin() * az.sin(), theta.cos());
            let tr = integrate(&gp(g), &DriveSchedule::none(), &[v], 10.0 / g, 1e-10).unwrap();
            for s in &tr.states {
                prop_assert!((s[0].z - v.z).abs() <= 1e-8);
            }
            prop_assert!(tr.step_stats.max_projection <= 1e-8);
        }

        #[test]
        fn linear_drive_preserves_overlap(p in orientation(), w in -3.0f64..3.0, ax in 0.0..PI) {
            let (a, b) = pair_to_bloch(&p);
            let axis = BlochVector::new(ax.sin(), 0.0, ax.cos());
            let drive = DriveSchedule::time_dependent(axis, move |t| w * (1.0 + t.sin())).unwrap();
            let tr = integrate(&ReducedNonlinearity::zero(), &drive, &[a, b], 5.0, 1e-10).unwrap();
            for c in tr.cos_alpha().unwrap() {
                prop_assert!((c - p.alpha.cos()).abs() <= 1e-8);
            }
        }
    }
}
