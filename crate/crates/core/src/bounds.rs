//! Sampled checks of how fast a nonlinearity can separate two states: linear
//! growth certificates around a latitude, Lipschitz estimates, and the
//! exponential bounds that follow from each.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::discrimination::{
    overlap_trace, time_to_overlap_with, DiscriminationOptions, OrientationPolicy,
};
use crate::error::{invalid, Error, Result};
use crate::nonlinearity::ReducedNonlinearity;
use crate::table::Table;

pub const DEFAULT_GRID: usize = 10_000;
/// Refinement factor used to detect unbounded difference quotients.
pub const REFINEMENT: usize = 4;
/// Growth of the estimate under refinement beyond which it is rejected.
pub const REFINEMENT_GROWTH_LIMIT: f64 = 1.25;
pub const MIN_GROWTH: f64 = 1e-9;

/// Certified linear growth of kbar around `z0`:
/// `direction * (kbar(z0 + d) - kbar(z0)) >= g_local * |d|` for sampled `|d| <= delta_window`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthCertificate {
    pub z0: f64,
    pub g_local: f64,
    pub delta_window: f64,
    /// `+1` when kbar increases through `z0` (pair at `theta = 3pi/4`),
    /// `-1` when it decreases (`theta = pi/4`).
    pub direction: i8,
    /// Window was shrunk to stay inside `[-1, 1]`.
    pub clipped: bool,
}

impl GrowthCertificate {
    /// Orientation angle `theta` that turns the certified growth into separation.
    pub fn theta(&self) -> f64 {
        if self.direction > 0 {
            3.0 * FRAC_PI_4
        } else {
            FRAC_PI_4
        }
    }

    /// Midpoint polar angle `phi` with `cos(phi) = z0`.
    pub fn phi(&self) -> f64 {
        self.z0.acos()
    }

    /// Largest separation angle for which both states of the pair stay inside
    /// the certified window on opposite sides of `z0`.
    pub fn validity_angle(&self) -> f64 {
        let k = ((1.0 - self.z0 * self.z0) / 2.0).sqrt();
        let window = {
            let r = self.delta_window / (2.0 * k);
            if r >= 1.0 {
                PI
            } else {
                2.0 * r.asin()
            }
        };
        let straddle = if self.z0 == 0.0 {
            PI
        } else {
            4.0 * (k / self.z0).atan()
        };
        window.min(straddle)
    }
}

pub fn certify_growth(
    kbar: &ReducedNonlinearity,
    z0: f64,
    delta: f64,
    grid: usize,
) -> Result<GrowthCertificate> {
    if !(0.0..1.0).contains(&z0) {
        return Err(invalid("z0", format!("must lie in [0, 1), got {z0}")));
    }
    if !(delta > 0.0) {
        return Err(invalid("delta", format!("must be positive, got {delta}")));
    }
    if grid < 1 {
        return Err(invalid("grid", "must be at least 1"));
    }
    let (lo, hi) = kbar.domain();
    let window = delta.min(hi - z0).min(z0 - lo);
    let clipped = window < delta;
    let k0 = kbar.eval(z0);
    let slopes: Vec<f64> = (1..=grid)
        .flat_map(|k| {
            let d = window * k as f64 / grid as f64;
            [d, -d]
        })
        .map(|d| (kbar.eval(z0 + d) - k0) / d)
        .collect();
    let mean: f64 = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let direction: i8 = if mean >= 0.0 { 1 } else { -1 };
    let g_local = slopes
        .iter()
        .map(|s| f64::from(direction) * s)
        .fold(f64::INFINITY, f64::min);
    if !(g_local >= MIN_GROWTH) {
        return Err(Error::NoGrowth { z0, g_local });
    }
    Ok(GrowthCertificate {
        z0,
        g_local,
        delta_window: window,
        direction,
        clipped,
    })
}

/// `c = g_local * sqrt((1 - z0^2)/2)`.
pub fn exp_growth_rate(cert: &GrowthCertificate) -> f64 {
    cert.g_local * ((1.0 - cert.z0 * cert.z0) / 2.0).sqrt()
}

/// A rate that the certificate does imply. From
/// `d cos(alpha)/dt <= -g (1 - z0^2) sin(alpha) sin(alpha/2)` and concavity of
/// `sin` below the validity angle `a_v`: `c = g (1 - z0^2) sin(a_v/2) / a_v`.
pub fn sound_growth_rate(cert: &GrowthCertificate) -> f64 {
    let av = cert.validity_angle();
    cert.g_local * (1.0 - cert.z0 * cert.z0) * (av / 2.0).sin() / av
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthRate {
    /// [`exp_growth_rate`].
    Stated,
    /// [`sound_growth_rate`].
    Sound,
}

impl GrowthRate {
    pub fn of(self, cert: &GrowthCertificate) -> f64 {
        match self {
            GrowthRate::Stated => exp_growth_rate(cert),
            GrowthRate::Sound => sound_growth_rate(cert),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthCheck {
    pub rate: f64,
    pub alpha_limit: f64,
    /// Largest `e^{ct} alpha0 / alpha(t)` along the trace.
    pub max_ratio: f64,
    pub holds: bool,
    pub samples: usize,
}

/// Integrate a pair held at midpoint latitude `z0` with the certificate's
/// orientation and test `alpha(t) >= e^{ct} alpha0 (1 - 1e-6)` until `alpha`
/// reaches `min(alpha_max, validity angle)`.
pub fn check_growth_bound(
    kbar: &ReducedNonlinearity,
    cert: &GrowthCertificate,
    alpha0: f64,
    alpha_max: f64,
    rate: GrowthRate,
) -> Result<GrowthCheck> {
    let alpha_limit = alpha_max.min(cert.validity_angle());
    if !(alpha0 > 0.0 && alpha0 < alpha_limit) {
        return Err(invalid(
            "alpha0",
            format!("must lie in (0, {alpha_limit}) for this certificate, got {alpha0}"),
        ));
    }
    let c = rate.of(cert);
    let policy = OrientationPolicy::Fixed {
        phi: cert.phi(),
        theta: cert.theta(),
    };
    let res = time_to_overlap_with(
        kbar,
        alpha0,
        (alpha_limit / 2.0).cos(),
        policy,
        &DiscriminationOptions::default(),
    )?;
    let mut max_ratio = 0.0f64;
    let mut holds = true;
    for (&t, &a) in res.trace.times.iter().zip(&res.trace.alpha) {
        let bound = (c * t).exp() * alpha0;
        max_ratio = max_ratio.max(bound / a);
        if a < bound * (1.0 - 1e-6) {
            holds = false;
        }
    }
    Ok(GrowthCheck {
        rate: c,
        alpha_limit,
        max_ratio,
        holds,
        samples: res.trace.times.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzEstimate {
    pub g_lip: f64,
    /// Spacing of the coarse grid.
    pub grid_resolution: f64,
    /// Estimate on the refined grid.
    pub refined: f64,
}

fn max_quotient(kbar: &ReducedNonlinearity, grid: usize) -> (f64, f64) {
    let (lo, hi) = kbar.domain();
    let h = (hi - lo) / (grid - 1) as f64;
    let mut prev = kbar.eval(lo);
    let mut best = 0.0f64;
    for k in 1..grid {
        let z = if k == grid - 1 { hi } else { lo + h * k as f64 };
        let v = kbar.eval(z);
        best = best.max((v - prev).abs() / h);
        prev = v;
    }
    (best, h)
}

/// Largest adjacent difference quotient on a uniform grid over the domain of
/// kbar, rejected if one refinement round grows it by more than
/// [`REFINEMENT_GROWTH_LIMIT`].
pub fn estimate_lipschitz(kbar: &ReducedNonlinearity, grid: usize) -> Result<LipschitzEstimate> {
    if grid < 2 {
        return Err(invalid("grid", "must be at least 2"));
    }
    let (coarse, h) = max_quotient(kbar, grid);
    let (refined, _) = max_quotient(kbar, (grid - 1) * REFINEMENT + 1);
    if refined > REFINEMENT_GROWTH_LIMIT * coarse && refined > 1e-12 {
        return Err(Error::NotLipschitz { coarse, refined });
    }
    Ok(LipschitzEstimate {
        g_lip: coarse.max(refined),
        grid_resolution: h,
        refined,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzReport {
    pub g_lip: f64,
    /// Largest `alpha(t) / (e^{2 g_lip t} alpha0)` over samples with `t > 0` and `alpha <= pi`.
    pub max_ratio: f64,
    pub holds: bool,
    /// First sampled time at which the bound failed.
    pub violation_time: Option<f64>,
    pub samples: usize,
}

/// Test `alpha(t) <= e^{2 g_lip t} alpha0 (1 + 1e-6)` along a protocol
/// integrated with `policy`, sampled at `samples` evenly spaced times.
pub fn check_lipschitz_separation_bound(
    kbar: &ReducedNonlinearity,
    alpha0: f64,
    duration: f64,
    g_lip: f64,
    policy: OrientationPolicy,
    samples: usize,
) -> Result<LipschitzReport> {
    if !(g_lip >= 0.0 && g_lip.is_finite()) {
        return Err(invalid(
            "g_lip",
            format!("must be finite and non-negative, got {g_lip}"),
        ));
    }
    if !(duration >= 0.0) {
        return Err(invalid(
            "duration",
            format!("must be non-negative, got {duration}"),
        ));
    }
    let n = samples.max(2);
    let times: Vec<f64> = (0..n)
        .map(|k| duration * k as f64 / (n - 1) as f64)
        .collect();
    let alphas = match overlap_trace(
        kbar,
        alpha0,
        policy,
        &times,
        &DiscriminationOptions::default(),
    ) {
        Ok(tr) => tr.alpha,
        Err(Error::NoProgress { .. }) => vec![alpha0; n],
        Err(e) => return Err(e),
    };
    let mut report = LipschitzReport {
        g_lip,
        max_ratio: 0.0,
        holds: true,
        violation_time: None,
        samples: 0,
    };
    for (&t, &a) in times.iter().zip(&alphas) {
        if a > PI {
            break;
        }
        // at t = 0 the ratio is identically 1
        if t == 0.0 && duration > 0.0 {
            continue;
        }
        report.samples += 1;
        let ratio = a / ((2.0 * g_lip * t).exp() * alpha0);
        report.max_ratio = report.max_ratio.max(ratio);
        if ratio > 1.0 + 1e-6 && report.holds {
            report.holds = false;
            report.violation_time = Some(t);
        }
    }
    Ok(report)
}

/// `r = 1 / (2^{3/4} sqrt(pi))`, the rate in the square-root lower bound.
pub fn sqrt_bound_rate() -> f64 {
    1.0 / (2f64.powf(0.75) * PI.sqrt())
}

/// `(sqrt(alpha0) + r t)^2`, a lower bound on the separation under the
/// square-root nonlinearity with `g = 1` while `alpha <= pi`.
pub fn sqrt_separation_lower_bound(alpha0: f64, t: f64) -> f64 {
    (alpha0.sqrt() + sqrt_bound_rate() * t).powi(2)
}

/// One row of the bounds report.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsRow {
    pub nonlinearity: String,
    pub z0: f64,
    pub g_local: f64,
    pub c: f64,
    pub bound_ok: bool,
    pub max_ratio: f64,
}

/// Certificates and companion growth checks for each `z0`. Latitudes without
/// growth produce a row with `g_local = 0` and `bound_ok = false`.
pub fn bounds_report(
    kbar: &ReducedNonlinearity,
    z0s: &[f64],
    delta: f64,
    grid: usize,
    alpha0: f64,
    alpha_max: f64,
    rate: GrowthRate,
) -> Result<Vec<BoundsRow>> {
    z0s.iter()
        .map(|&z0| {
            let row = match certify_growth(kbar, z0, delta, grid) {
                Ok(cert) => {
                    let chk = check_growth_bound(kbar, &cert, alpha0, alpha_max, rate)?;
                    BoundsRow {
                        nonlinearity: kbar.name(),
                        z0,
                        g_local: cert.g_local,
                        c: chk.rate,
                        bound_ok: chk.holds,
                        max_ratio: chk.max_ratio,
                    }
                }
                Err(Error::NoGrowth { .. }) => BoundsRow {
                    nonlinearity: kbar.name(),
                    z0,
                    g_local: 0.0,
                    c: 0.0,
                    bound_ok: false,
                    max_ratio: f64::NAN,
                },
                Err(e) => return Err(e),
            };
            Ok(row)
        })
        .collect()
}

/// Columns `nonlinearity,z0,g_local,c,bound_ok,max_ratio`.
pub fn bounds_table(rows: &[BoundsRow]) -> Table {
    let mut t = Table::new(&[
        "nonlinearity",
        "z0",
        "g_local",
        "c",
        "bound_ok",
        "max_ratio",
    ]);
    for r in rows {
        t.push(vec![
            r.nonlinearity.clone().into(),
            r.z0.into(),
            r.g_local.into(),
            r.c.into(),
            r.bound_ok.into(),
            r.max_ratio.into(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::MonotoneCubic;
    use crate::nonlinearity::Nonlinearity;

    fn gp(g: f64) -> ReducedNonlinearity {
        Nonlinearity::gross_pitaevskii(g).unwrap().reduce()
    }

    #[test]
    fn gp_certificate_is_exact() {
        let c = certify_growth(&gp(1.0), 0.0, 1.0, 1000).unwrap();
        assert_eq!(c.g_local, 1.0);
        assert_eq!(c.direction, 1);
        assert!((exp_growth_rate(&c) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn quartic_is_refused() {
        let k = Nonlinearity::quartic_difference(1.0).unwrap().reduce();
        for z0 in [0.0, 0.3, 0.9] {
            assert!(matches!(
                certify_growth(&k, z0, 0.1, 100),
                Err(Error::NoGrowth { .. })
            ));
        }
    }

    #[test]
    fn log_certificate_at_origin() {
        let k = Nonlinearity::logarithmic(1.0).unwrap().reduce();
        let c = certify_growth(&k, 0.0, 0.5, DEFAULT_GRID).unwrap();
        assert!(c.g_local >= 2.0);
    }

    #[test]
    fn window_is_clipped() {
        let c = certify_growth(&gp(1.0), 0.8, 0.5, 100).unwrap();
        assert!(c.clipped);
        assert!((c.delta_window - 0.2).abs() < 1e-15);
    }

    #[test]
    fn decreasing_kbar_gets_negative_direction() {
        let k = ReducedNonlinearity::odd_extension("neg", |z| -2.0 * z);
        let c = certify_growth(&k, 0.2, 0.1, 100).unwrap();
        assert_eq!(c.direction, -1);
        assert!((c.g_local - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exp_rate_limits() {
        let mut c = certify_growth(&gp(1.0), 0.0, 1.0, 10).unwrap();
        c.z0 = 1.0 - 1e-14;
        assert!(exp_growth_rate(&c) < 1e-6);
    }

    #[test]
    fn sound_rate_holds_along_trace() {
        let k = gp(1.0);
        let cert = certify_growth(&k, 0.5, 0.3, 1000).unwrap();
        let chk = check_growth_bound(&k, &cert, 1e-3, 0.05, GrowthRate::Sound).unwrap();
        assert!(chk.holds, "max ratio {}", chk.max_ratio);
    }

    #[test]
    fn stated_rate_exceeds_gp_growth() {
        // The pair separates like alpha0 * e^{g (1 - z0^2) t / 2}, slower than
        // e^{c t} with c = g sqrt((1 - z0^2)/2).
        let k = gp(1.0);
        let cert = certify_growth(&k, 0.5, 0.3, 1000).unwrap();
        assert!((exp_growth_rate(&cert) - 0.375f64.sqrt()).abs() < 1e-12);
        let chk = check_growth_bound(&k, &cert, 1e-3, 0.05, GrowthRate::Stated).unwrap();
        assert!(!chk.holds);
    }

    #[test]
    fn lipschitz_estimates() {
        let e = estimate_lipschitz(&gp(1.7), 1000).unwrap();
        assert!((e.g_lip - 1.7).abs() < 1e-12);
        let sqrt = Nonlinearity::square_root_sign(1.0).unwrap().reduce();
        assert!(matches!(
            estimate_lipschitz(&sqrt, DEFAULT_GRID),
            Err(Error::NotLipschitz { .. })
        ));
        let log = Nonlinearity::logarithmic(1.0).unwrap().reduce();
        assert!(matches!(
            estimate_lipschitz(&log, DEFAULT_GRID),
            Err(Error::NotLipschitz { .. })
        ));
    }

    #[test]
    fn piecewise_linear_custom_slope() {
        let pw = ReducedNonlinearity::odd_extension("pw", |z| {
            if z < 0.5 {
                z
            } else {
                0.5 + 3.0 * (z - 0.5)
            }
        });
        let e = estimate_lipschitz(&pw, DEFAULT_GRID).unwrap();
        assert!((e.g_lip - 3.0).abs() < 1e-9);
        let table = MonotoneCubic::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 2.0]).unwrap();
        assert!(table.eval(0.75) > 0.0);
    }

    #[test]
    fn lipschitz_bound_for_gp_and_zero() {
        let r = check_lipschitz_separation_bound(
            &gp(1.0),
            1e-3,
            5.0,
            1.0,
            OrientationPolicy::FixedOptimalGp,
            101,
        )
        .unwrap();
        assert!(r.holds && r.max_ratio < 1.0);
        let z = check_lipschitz_separation_bound(
            &ReducedNonlinearity::zero(),
            1e-3,
            5.0,
            0.0,
            OrientationPolicy::FixedOptimalGp,
            11,
        )
        .unwrap();
        assert!(z.holds);
        assert!((z.max_ratio - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sqrt_violates_lipschitz_proxies() {
        let k = Nonlinearity::square_root_sign(1.0).unwrap().reduce();
        for proxy in [1.0, 2.0, 5.0] {
            let r = check_lipschitz_separation_bound(
                &k,
                1e-6,
                1.0,
                proxy,
                OrientationPolicy::FixedOptimalGp,
                101,
            )
            .unwrap();
            assert!(!r.holds, "proxy {proxy}");
            assert!(r.violation_time.unwrap() <= 1.0);
        }
    }

    #[test]
    fn sqrt_rate_constant() {
        assert!((sqrt_bound_rate() - 0.33546913348270696).abs() < 1e-16);
    }

    #[test]
    fn report_rows() {
        let rows = bounds_report(
            &gp(1.0),
            &[0.0, 0.5],
            0.3,
            200,
            1e-3,
            0.05,
            GrowthRate::Sound,
        )
        .unwrap();
        assert!(rows.iter().all(|r| r.bound_ok));
        let t = bounds_table(&rows);
        assert!(t
            .to_csv()
            .starts_with("nonlinearity,z0,g_local,c,bound_ok,max_ratio\n"));
    }
}
