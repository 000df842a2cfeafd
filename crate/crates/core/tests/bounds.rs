use nlqsim_core::blochdyn::{ip_rate, PairOrientation};
use nlqsim_core::bounds::{
    certify_growth, check_growth_bound, estimate_lipschitz, GrowthRate, DEFAULT_GRID,
};
use nlqsim_core::{Error, Nonlinearity};
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_4, PI};

fn realized_vs_bound(rate: GrowthRate) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for spec in ["gp:1", "gp:2.5", "log:0.5", "sqrt"] {
        let n: Nonlinearity = spec.parse().unwrap();
        let k = n.reduce();
        for z0 in [0.0, 0.3, 0.6, 0.85] {
            let cert = match certify_growth(&k, z0, 0.1, DEFAULT_GRID) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let c = rate.of(&cert);
            let top = cert.validity_angle();
            for i in 1..=200 {
                let alpha = top * i as f64 / 201.0;
                let p = PairOrientation::new(alpha, cert.phi(), cert.theta());
                let realized = ip_rate(&k, &p);
                let bound = -c * alpha * alpha.sin();
                worst = worst.max(realized - bound);
            }
        }
    }
    worst
}

#[test]
fn stated_rate_not_implied_for_gp() {
    let excess = realized_vs_bound(GrowthRate::Stated);
    assert!(
        excess > 1e-3,
        "stated rate unexpectedly holds: excess {excess}"
    );
}

#[test]
fn certified_rate_sound() {
    let excess = realized_vs_bound(GrowthRate::Sound);
    assert!(
        excess <= 1e-8,
        "realized rate exceeds the sound bound by {excess}"
    );
}

#[test]
fn sound_rate_integrated_check() {
    let k = Nonlinearity::gross_pitaevskii(1.0).unwrap().reduce();
    for z0 in [0.0, 0.5] {
        let cert = certify_growth(&k, z0, 0.2, DEFAULT_GRID).unwrap();
        let chk = check_growth_bound(&k, &cert, 1e-3, 0.2, GrowthRate::Sound).unwrap();
        assert!(chk.holds, "z0={z0} ratio={}", chk.max_ratio);
    }
}

proptest! {
    #[test]
    fn latitude_gap_identity(z0 in -0.999f64..0.999, alpha in 0.0f64..PI, q in 0usize..2) {
        let theta = if q == 0 { FRAC_PI_4 } else { 3.0 * FRAC_PI_4 };
        let p = PairOrientation::new(alpha, z0.acos(), theta);
        let (zp, zm) = p.latitudes();
        let want = (2.0 * (1.0 - z0 * z0)).sqrt() * (alpha / 2.0).sin();
        prop_assert!(((zp - zm).abs() - want).abs() <= 1e-12);
    }

    #[test]
    fn latitude_gap_at_most_alpha(alpha in 0.0f64..PI, phi in 0.0f64..PI, theta in 0.0f64..6.3) {
        let (zp, zm) = PairOrientation::new(alpha, phi, theta).latitudes();
        prop_assert!((zp - zm).abs() <= alpha + 1e-12);
    }
}

#[test]
fn lipschitz_estimates() {
    let gp = estimate_lipschitz(
        &Nonlinearity::gross_pitaevskii(1.5).unwrap().reduce(),
        DEFAULT_GRID,
    )
    .unwrap();
    assert!((gp.g_lip - 1.5).abs() < 1e-9);
    let sqrt = estimate_lipschitz(
        &Nonlinearity::square_root_sign(1.0).unwrap().reduce(),
        DEFAULT_GRID,
    );
    assert!(matches!(sqrt, Err(Error::NotLipschitz { .. })));
}
