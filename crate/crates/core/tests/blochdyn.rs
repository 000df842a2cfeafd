use nlqsim_core::blochdyn::{
    bloch_to_pair, integrate, ip_rate, nonlinear_flow_rate, pair_to_bloch, BlochVector,
    DriveSchedule, PairOrientation,
};
use nlqsim_core::{Nonlinearity, ReducedNonlinearity};
use proptest::prelude::*;
use std::f64::consts::PI;

fn unit(theta: f64, phi: f64) -> BlochVector {
    BlochVector::new(
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    )
}

fn kbars() -> Vec<ReducedNonlinearity> {
    vec![
        Nonlinearity::gross_pitaevskii(1.0).unwrap().reduce(),
        Nonlinearity::logarithmic(0.5).unwrap().reduce(),
        Nonlinearity::square_root_sign(1.0).unwrap().reduce(),
        ReducedNonlinearity::odd_extension("cubic", |z| z + z * z * z),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn latitude_conserved(theta in 0.05f64..3.09, phi in 0.0f64..6.28, which in 0usize..4) {
        let k = &kbars()[which];
        let v = unit(theta, phi);
        let tr = integrate(k, &DriveSchedule::none(), &[v], 10.0, 1e-10).unwrap();
        for s in &tr.states {
            prop_assert!((s[0].z - v.z).abs() <= 1e-8);
            prop_assert!((s[0].norm() - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn linear_drive_preserves_dot(
        t1 in 0.0f64..PI, p1 in 0.0f64..6.28, t2 in 0.0f64..PI, p2 in 0.0f64..6.28,
        ax in 0.0f64..PI, ap in 0.0f64..6.28, w in -3.0f64..3.0,
    ) {
        let (a, b) = (unit(t1, p1), unit(t2, p2));
        let drive = DriveSchedule::time_dependent(unit(ax, ap), move |t| w * (1.0 + t.sin())).unwrap();
        let tr = integrate(&ReducedNonlinearity::zero(), &drive, &[a, b], 5.0, 1e-10).unwrap();
        let d0 = a.dot(&b);
        for s in &tr.states {
            prop_assert!((s[0].dot(&s[1]) - d0).abs() <= 1e-8);
            prop_assert!((s[0].norm() - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn z_rotation_leaves_rate_unchanged(
        alpha in 0.01f64..3.1, phi in 0.0f64..PI, theta in 0.0f64..6.28, rot in 0.0f64..6.28, which in 0usize..4,
    ) {
        let k = &kbars()[which];
        let p = PairOrientation::new(alpha, phi, theta);
        let (a, b) = pair_to_bloch(&p);
        let q = bloch_to_pair(&a.rotate_z(rot), &b.rotate_z(rot)).unwrap();
        let (r0, r1) = (ip_rate(k, &p), ip_rate(k, &q));
        prop_assert!((r0 - r1).abs() <= 1e-12 * r0.abs().max(1.0));
    }

    #[test]
    fn rate_matches_flow_field(alpha in 0.01f64..3.1, phi in 0.0f64..PI, theta in 0.0f64..6.28, which in 0usize..4) {
        let k = &kbars()[which];
        let p = PairOrientation::new(alpha, phi, theta);
        let (a, b) = pair_to_bloch(&p);
        let d = nonlinear_flow_rate(k, &a).dot(&b) + a.dot(&nonlinear_flow_rate(k, &b));
        prop_assert!((d - ip_rate(k, &p)).abs() <= 1e-12 * d.abs().max(1.0));
    }
}

#[test]
fn finite_difference_matches_rate() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let ks = kbars();
    let dt = 1e-6;
    for i in 0..100 {
        let k = &ks[i % ks.len()];
        let p = PairOrientation::new(
            rng.gen_range(0.05..3.0),
            rng.gen_range(0.05..3.0),
            rng.gen_range(0.0..6.28),
        );
        let (a, b) = pair_to_bloch(&p);
        let tr = integrate(k, &DriveSchedule::none(), &[a, b], dt, 1e-13).unwrap();
        let f = tr.final_states().unwrap();
        let fd = (f[0].dot(&f[1]) - a.dot(&b)) / dt;
        let r = ip_rate(k, &p);
        assert!(
            (fd - r).abs() <= 1e-4 * r.abs() + 1e-8,
            "{}: fd {fd} rate {r}",
            k.name()
        );
    }
}

#[test]
fn optimal_orientation_rate() {
    let k = Nonlinearity::gross_pitaevskii(1.0).unwrap().reduce();
    let r = ip_rate(&k, &PairOrientation::gp_optimal(PI / 2.0));
    assert!((r + 0.5f64.sqrt()).abs() < 1e-15);
}
